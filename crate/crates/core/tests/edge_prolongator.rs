mod common;

use common::{constraint_matrix, emin_setup_for, min_norm_oracle, row_rhs, system};
use hcurl_amg::mesh::ElementKind;
use hcurl_amg::prolongator::{
    build_edge_prolongator, commutator_residual, edge_prolongator_from_setup, emin_step,
    initial_feasible_guess, project_correction, EminConfig, EminMode,
};
use hcurl_amg::sparse::spgemm;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn least_norm_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (kind, n, dirichlet) in [
        (ElementKind::Tri, 20, false),
        (ElementKind::Quad, 20, false),
        (ElementKind::Tri, 20, true),
        (ElementKind::Tet, 8, false),
        (ElementKind::Hex, 8, true),
    ] {
        let sys = system(kind, n, 1.0, dirichlet);
        let (setup, _) = emin_setup_for(&sys);
        let nonempty: Vec<usize> = (0..setup.subproblems.len())
            .filter(|&i| !setup.subproblems[i].is_empty())
            .collect();
        for _ in 0..200 {
            let i = nonempty[rng.gen_range(0..nonempty.len())];
            let sub = &setup.subproblems[i];
            let gt = constraint_matrix(sub);
            // the actual row and a random consistent right-hand side
            let z = DVector::from_fn(sub.n_i(), |_, _| rng.gen_range(-1.0..1.0));
            let random = (&gt * z).as_slice().to_vec();
            for rhs in [row_rhs(&setup.rhs, i, &sub.coarse_nodes), random] {
                let x = sub.least_norm(&rhs);
                let oracle = min_norm_oracle(&gt, &rhs);
                for (u, v) in x.iter().zip(oracle.iter()) {
                    assert!((u - v).abs() <= 1e-12, "{kind:?} row {i}: {u} vs {v}");
                }
                assert!(sub.constraint_residual(&x, &rhs) <= 1e-12);
            }
        }
    }
}

#[test]
fn feasible_start_satisfies_the_commutator() {
    for kind in [ElementKind::Quad, ElementKind::Tri] {
        let sys = system(kind, 28, 1.0, false);
        let (setup, _) = emin_setup_for(&sys);
        let p0 = initial_feasible_guess(&setup.subproblems, &setup.rhs, setup.coarse.n_edges()).unwrap();
        let res = commutator_residual(&p0, &setup.coarse.d_h, &setup.rhs).unwrap();
        assert!(res <= 1e-12 * setup.rhs.max_abs().max(1.0), "{kind:?}: {res:e}");
        // the pattern stays inside N
        for i in 0..p0.nrows() {
            for &c in p0.row(i).0 {
                assert!(setup.bundle.n.get(i, c).is_some());
            }
        }
    }
}

#[test]
fn fully_constrained_rows_never_move() {
    let sys = system(ElementKind::Quad, 28, 1.0, false);
    let (setup, _) = emin_setup_for(&sys);
    let n_coarse = setup.coarse.n_edges();
    let p0 = initial_feasible_guess(&setup.subproblems, &setup.rhs, n_coarse).unwrap();
    let (p1, _) = emin_step(&sys.s, &p0, 0.5, &setup.subproblems).unwrap();
    let (p2, _) = emin_step(&sys.s, &p1, 0.5, &setup.subproblems).unwrap();
    let mut singles = 0;
    for (i, sub) in setup.subproblems.iter().enumerate() {
        if sub.n_i() == 1 {
            singles += 1;
            let r = row_rhs(&setup.rhs, i, &sub.coarse_nodes);
            let g = sub.g[sub.n_j() - 1];
            assert!((p0.row(i).1[0] - r[sub.n_j() - 1] / g).abs() <= 1e-15);
            assert_eq!(p0.row(i).1, p1.row(i).1);
            assert_eq!(p1.row(i).1, p2.row(i).1);
        }
    }
    assert!(singles > 0);
}

#[test]
fn energy_decreases_and_feasibility_survives_steps() {
    let sys = system(ElementKind::Quad, 28, 1.0, false);
    let (setup, _) = emin_setup_for(&sys);
    let cfg = EminConfig { iterations: 3, ..Default::default() };
    let out = edge_prolongator_from_setup(&sys.s, &setup, &cfg).unwrap();
    assert_eq!(out.energy_history.len(), 4);
    assert!(out.energy_monotone(), "{:?}", out.energy_history);
    assert!(out.commutator_residual <= 1e-10 * setup.rhs.max_abs().max(1.0));
}

#[test]
fn both_modes_commute_on_every_model_kind() {
    for (kind, n) in [(ElementKind::Tri, 16), (ElementKind::Quad, 16), (ElementKind::Tet, 6), (ElementKind::Hex, 6)] {
        for mode in [EminMode::SpHcurl, EminMode::Rsamg] {
            for dirichlet in [false, true] {
                let sys = system(kind, n, 1.0, dirichlet);
                let cfg = EminConfig { mode, ..Default::default() };
                let out = build_edge_prolongator(&sys.a_n, &sys.s, &sys.d, &cfg, 0.0, 2).unwrap();
                let rhs = spgemm(&sys.d, &out.nodal.p).unwrap();
                let res = commutator_residual(&out.edge.p_e, &out.coarse.d_h, &rhs).unwrap();
                assert!(res <= 1e-10 * rhs.max_abs().max(1.0), "{kind:?} {mode:?} {dirichlet}: {res:e}");
            }
        }
    }
}

#[test]
fn every_constrained_node_touches_a_pattern_edge() {
    let sys = system(ElementKind::Tri, 20, 1.0, true);
    let (setup, _) = emin_setup_for(&sys);
    for sub in setup.subproblems.iter().filter(|s| !s.is_empty()) {
        let (m, n) = (sub.n_i(), sub.n_j());
        for b in 0..n {
            assert!((0..m).any(|a| sub.g[a * n + b] != 0.0), "edge {}", sub.fine_edge);
        }
    }
}

#[test]
fn quad_subproblems_stay_small() {
    let sys = system(ElementKind::Quad, 28, 1.0, false);
    let out = build_edge_prolongator(&sys.a_n, &sys.s, &sys.d, &EminConfig::default(), 0.0, 2).unwrap();
    assert!(out.stats.histogram.keys().all(|&(i, _)| i <= 5), "{:?}", out.stats.histogram);
    assert!(out.stats.histogram.contains_key(&(1, 2)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_is_idempotent_and_constraint_free(seed in 0u64..10_000) {
        let sys = system(ElementKind::Tri, 10, 1.0, seed % 2 == 0);
        let (setup, _) = emin_setup_for(&sys);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p0 = initial_feasible_guess(&setup.subproblems, &setup.rhs, setup.coarse.n_edges()).unwrap();
        let mut dp = p0.clone();
        for v in dp.values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let once = project_correction(&dp, &setup.subproblems);
        let twice = project_correction(&once, &setup.subproblems);
        for (u, v) in once.values().iter().zip(twice.values()) {
            prop_assert!((u - v).abs() <= 1e-13);
        }
        for (i, sub) in setup.subproblems.iter().enumerate() {
            if sub.is_empty() { continue; }
            prop_assert!(sub.constraint_residual(once.row(i).1, &vec![0.0; sub.n_j()]) <= 1e-13);
            // a direction built from the constraint range is removed entirely
            let (m, k) = (sub.n_i(), sub.rank);
            let y: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut v: Vec<f64> = (0..m).map(|a| (0..k).map(|j| sub.q[a * k + j] * y[j]).sum()).collect();
            sub.project(&mut v);
            prop_assert!(v.iter().all(|x| x.abs() <= 1e-13));
        }
    }
}
