mod common;

use common::{mesh, system, to_nalgebra};
use hcurl_amg::discretize::{
    assemble_curl_curl, assemble_edge_mass, assemble_nodal_mass, assemble_nodal_problem,
    build_discrete_gradient,
};
use hcurl_amg::mesh::{expected_edge_count, ElementKind};
use hcurl_amg::multigrid::null_space_defect;
use hcurl_amg::sparse::spgemm;

const KINDS: [ElementKind; 4] = [ElementKind::Tri, ElementKind::Quad, ElementKind::Tet, ElementKind::Hex];

#[test]
fn curl_of_gradient_vanishes_for_every_element_kind() {
    for kind in KINDS {
        for dirichlet in [false, true] {
            let n = if kind.dim() == 2 { 9 } else { 5 };
            let sys = system(kind, n, 1.0, dirichlet);
            let defect = null_space_defect(&sys.s, &sys.d).unwrap();
            assert!(defect <= 1e-12, "{kind:?} dirichlet={dirichlet}: {defect:e}");
        }
    }
}

#[test]
fn edge_counts_follow_closed_form() {
    for kind in KINDS {
        for n in [2, 3, 6] {
            let m = mesh(kind, n, false);
            assert_eq!(m.n_edges(), expected_edge_count(kind, n), "{kind:?} n={n}");
        }
    }
}

#[test]
fn gradient_rows_have_one_tail_and_one_head() {
    for kind in KINDS {
        let d = build_discrete_gradient(&mesh(kind, 4, false));
        for i in 0..d.nrows() {
            let mut vals = d.row(i).1.to_vec();
            vals.sort_by(f64::total_cmp);
            assert_eq!(vals, vec![-1.0, 1.0]);
        }
    }
}

#[test]
fn curl_curl_is_symmetric_positive_semidefinite() {
    for kind in KINDS {
        let s = assemble_curl_curl(&mesh(kind, 3, false)).unwrap();
        assert!(s.asymmetry() <= 1e-12 * s.max_abs());
        let eig = to_nalgebra(&s).symmetric_eigen();
        let min = eig.eigenvalues.min();
        assert!(min >= -1e-10 * s.max_abs(), "{kind:?}: {min}");
    }
}

#[test]
fn edge_mass_is_positive_definite_and_linear_in_sigma() {
    let m = mesh(ElementKind::Tri, 4, false);
    let m1 = assemble_edge_mass(&m, 1.0).unwrap();
    let eig = to_nalgebra(&m1).symmetric_eigen();
    assert!(eig.eigenvalues.min() > 0.0);
    let m10 = assemble_edge_mass(&m, 10.0).unwrap();
    let diff = to_nalgebra(&m10) - to_nalgebra(&m1) * 10.0;
    assert!(diff.abs().max() <= 1e-14 * to_nalgebra(&m10).abs().max());
    assert!(assemble_edge_mass(&m, 0.0).is_err());
}

#[test]
fn edge_mass_positive_definite_for_all_kinds() {
    for kind in KINDS {
        let mm = assemble_edge_mass(&mesh(kind, 3, false), 1.0).unwrap();
        let min = to_nalgebra(&mm).symmetric_eigen().eigenvalues.min();
        assert!(min > 0.0, "{kind:?}: {min}");
    }
}

#[test]
fn single_hex_mass_has_equal_diagonal() {
    let mm = assemble_edge_mass(&mesh(ElementKind::Hex, 2, false), 1.0).unwrap();
    let d = mm.diagonal();
    assert_eq!(d.len(), 12);
    for v in &d {
        assert!((v - d[0]).abs() <= 1e-15);
    }
    // exact tensor mass: h^3 * (1/3) * (1/3) for each transverse direction, h = 1, times 1 along
    assert!((d[0] - 1.0 / 9.0).abs() < 1e-14);
}

#[test]
fn nodal_problem_decomposes_into_stiffness_and_mass() {
    for kind in KINDS {
        let m = mesh(kind, 4, false);
        let a0 = assemble_nodal_problem(&m, 0.0).unwrap();
        for s in a0.abs_row_sums().iter().zip(a0.mul_vec(&vec![1.0; a0.nrows()])) {
            assert!(s.1.abs() <= 1e-12 * s.0, "{kind:?}");
        }
        let a1 = assemble_nodal_problem(&m, 1.0).unwrap();
        let mass = assemble_nodal_mass(&m).unwrap();
        let diff = to_nalgebra(&a1) - to_nalgebra(&a0) - to_nalgebra(&mass);
        assert!(diff.abs().max() <= 1e-13, "{kind:?}");
    }
}

#[test]
fn nodal_stiffness_equals_gradient_congruence_on_simplices() {
    // P1 stiffness is Dᵀ M_e D with the Whitney mass (σ = 1)
    for kind in [ElementKind::Tri, ElementKind::Tet] {
        let m = mesh(kind, 4, false);
        let d = build_discrete_gradient(&m);
        let me = assemble_edge_mass(&m, 1.0).unwrap();
        let k = me.galerkin(&d).unwrap();
        let a0 = assemble_nodal_problem(&m, 0.0).unwrap();
        let diff = to_nalgebra(&k) - to_nalgebra(&a0);
        assert!(diff.abs().max() <= 1e-12, "{kind:?}");
    }
}

#[test]
fn dirichlet_elimination_drops_boundary_edges() {
    let m = mesh(ElementKind::Quad, 4, true);
    let sys = system(ElementKind::Quad, 4, 1.0, true);
    // 4 interior nodes; edges touching them: 4 between interior nodes + 8 to the boundary
    assert_eq!(sys.n_nodes(), 4);
    assert_eq!(sys.n_edges(), 12);
    assert!(m.has_dirichlet());
    let single = (0..sys.d.nrows()).filter(|&i| sys.d.row_nnz(i) == 1).count();
    assert_eq!(single, 8);
    let sd = spgemm(&sys.s, &sys.d).unwrap();
    assert!(sd.max_abs() <= 1e-12 * sys.s.max_abs());
}
