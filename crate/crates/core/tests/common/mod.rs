#![allow(dead_code)]

use hcurl_amg::discretize::DiscretizedSystem;
use hcurl_amg::mesh::{build_structured_mesh, ElementKind, Mesh};
use hcurl_amg::SparseMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

pub fn mesh(kind: ElementKind, n: usize, dirichlet: bool) -> Mesh {
    let dim = kind.dim();
    build_structured_mesh(dim, kind, &vec![n; dim], dirichlet).unwrap()
}

pub fn system(kind: ElementKind, n: usize, sigma: f64, dirichlet: bool) -> DiscretizedSystem {
    DiscretizedSystem::assemble(&mesh(kind, n, dirichlet), sigma).unwrap()
}

pub fn to_nalgebra(m: &SparseMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            d[(i, j)] += v;
        }
    }
    d
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

/// Sparse matrix of the given shape with roughly half the entries set.
pub fn sparse_matrix(nrows: usize, ncols: usize) -> impl Strategy<Value = SparseMatrix> {
    prop::collection::vec(prop::option::weighted(0.5, -10.0..10.0f64), nrows * ncols).prop_map(
        move |cells| {
            let t: Vec<(usize, usize, f64)> = cells
                .iter()
                .enumerate()
                .filter_map(|(k, v)| v.map(|v| (k / ncols, k % ncols, v)))
                .collect();
            SparseMatrix::from_triplets(nrows, ncols, &t).unwrap()
        },
    )
}

/// Emin setup of the first coarsening of a model system, plus the nodal prolongator.
pub fn emin_setup_for(
    sys: &DiscretizedSystem,
) -> (hcurl_amg::emin_setup::EminSetup, SparseMatrix) {
    use hcurl_amg::topology::{augment_dirichlet_edges, build_coarse_gradient, gen_piecewise_const};
    let (_, np) = hcurl_amg::nodal::build_nodal_prolongator(&sys.a_n, 0.0).unwrap();
    let pc = gen_piecewise_const(&np.p, 2).unwrap();
    let cg = build_coarse_gradient(&sys.d, &pc).unwrap();
    let cg = augment_dirichlet_edges(&cg, &sys.d, &pc).unwrap();
    let setup = hcurl_amg::emin_setup::setup_emin(&sys.d, &np.p, cg).unwrap();
    (setup, np.p)
}

/// `Gᵀ` of a subproblem as a dense `|J| x |I|` matrix.
pub fn constraint_matrix(sub: &hcurl_amg::emin_setup::ConstraintSubproblem) -> DMatrix<f64> {
    let (m, n) = (sub.n_i(), sub.n_j());
    DMatrix::from_fn(n, m, |b, a| sub.g[a * n + b])
}

/// Right-hand side of row `i` over the subproblem's coarse nodes.
pub fn row_rhs(rhs: &SparseMatrix, i: usize, nodes: &[usize]) -> Vec<f64> {
    nodes.iter().map(|&c| rhs.get(i, c).unwrap_or(0.0)).collect()
}

/// Minimum-norm solution of the consistent system `gt x = rhs` through a
/// symmetric eigendecomposition of `gt gtᵀ`.
pub fn min_norm_oracle(gt: &DMatrix<f64>, rhs: &[f64]) -> Vec<f64> {
    let eig = (gt * gt.transpose()).symmetric_eigen();
    let cut = 1e-10 * eig.eigenvalues.amax();
    let q = &eig.eigenvectors;
    let coeff = q.transpose() * nalgebra::DVector::from_column_slice(rhs);
    let scaled = nalgebra::DVector::from_fn(coeff.len(), |k, _| {
        let l = eig.eigenvalues[k];
        if l > cut { coeff[k] / l } else { 0.0 }
    });
    (gt.transpose() * (q * scaled)).as_slice().to_vec()
}
