//! Smoothed-aggregation setup for the nodal problem.

use crate::error::{Error, Result};
use crate::sparse::{diag_inverse, spgemm, SparseMatrix};

/// Assignment of fine nodes to aggregates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregation {
    pub n_fine: usize,
    pub n_agg: usize,
    pub membership: Vec<usize>,
}

impl Aggregation {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_agg];
        for &a in &self.membership {
            s[a] += 1;
        }
        s
    }
}

/// Smoothed and row-normalized nodal prolongator.
#[derive(Debug, Clone)]
pub struct NodalProlongator {
    pub p: SparseMatrix,
    pub omega_used: f64,
    pub rho_estimate: f64,
}

/// Pattern of strong couplings `|a_ij| > tol·sqrt(a_ii a_jj)` plus the diagonal.
pub fn strength_graph(a: &SparseMatrix, drop_tol: f64) -> Result<SparseMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "strength graph of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let diag = a.diagonal();
    if let Some(row) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::NonPositiveDiagonal { row });
    }
    let mut offsets = vec![0usize; a.nrows() + 1];
    let mut cols = Vec::with_capacity(a.nnz());
    for i in 0..a.nrows() {
        let (ci, vi) = a.row(i);
        let mut has_diag = false;
        for (&j, &v) in ci.iter().zip(vi) {
            if j == i {
                has_diag = true;
                cols.push(j);
            } else if v.abs() > drop_tol * (diag[i] * diag[j]).sqrt() {
                if !has_diag && j > i {
                    has_diag = true;
                    cols.push(i);
                }
                cols.push(j);
            }
        }
        if !has_diag {
            cols.push(i);
        }
        offsets[i + 1] = cols.len();
    }
    let vals = vec![1.0; cols.len()];
    SparseMatrix::new(a.nrows(), a.ncols(), offsets, cols, vals)
}

/// Greedy root-based aggregation in node order.
pub fn aggregate(strength: &SparseMatrix) -> Aggregation {
    const NONE: usize = usize::MAX;
    let n = strength.nrows();
    let mut membership = vec![NONE; n];
    let neighbors = |i: usize| strength.row(i).0.iter().copied().filter(move |&j| j != i);
    let mut n_agg = 0;

    // phase 1: roots whose whole neighborhood is still free
    for i in 0..n {
        if membership[i] != NONE || neighbors(i).any(|j| membership[j] != NONE) {
            continue;
        }
        membership[i] = n_agg;
        for j in neighbors(i) {
            membership[j] = n_agg;
        }
        n_agg += 1;
    }
    let phase1 = membership.clone();

    // phase 2: attach leftovers to the best-connected phase-1 aggregate
    let mut counts: Vec<usize> = vec![0; n_agg];
    for i in 0..n {
        if membership[i] != NONE {
            continue;
        }
        let touched: Vec<usize> = neighbors(i).map(|j| phase1[j]).filter(|&a| a != NONE).collect();
        if touched.is_empty() {
            continue;
        }
        for &a in &touched {
            counts[a] += 1;
        }
        let best = touched
            .iter()
            .copied()
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
            .expect("nonempty");
        for &a in &touched {
            counts[a] = 0;
        }
        membership[i] = best;
    }

    // phase 3: anything still free seeds a new aggregate with its free neighbors
    for i in 0..n {
        if membership[i] != NONE {
            continue;
        }
        membership[i] = n_agg;
        for j in neighbors(i) {
            if membership[j] == NONE {
                membership[j] = n_agg;
            }
        }
        n_agg += 1;
    }

    Aggregation {
        n_fine: n,
        n_agg,
        membership,
    }
}

/// Piecewise-constant prolongator of an aggregation.
pub fn tentative_prolongator(agg: &Aggregation) -> SparseMatrix {
    let offsets = (0..=agg.n_fine).collect();
    let vals = vec![1.0; agg.n_fine];
    SparseMatrix::new(agg.n_fine, agg.n_agg, offsets, agg.membership.clone(), vals)
        .expect("one entry per row")
}

/// Deterministic value in [-1, 1) scrambled from an index (splitmix64), so the
/// start vector carries every frequency.
fn index_noise(i: u64) -> f64 {
    let mut z = i.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

/// Estimate of the spectral radius of `D⁻¹A` from ten power iterations.
pub fn estimate_rho(a: &SparseMatrix) -> Result<f64> {
    let dinv = diag_inverse(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + index_noise(i as u64)).collect();
    let mut rho = 0.0;
    for _ in 0..10 {
        let ax = a.mul_vec(&x);
        // Rayleigh quotient in the D inner product: xᵀAx / xᵀDx
        let num: f64 = x.iter().zip(&ax).map(|(xi, ai)| xi * ai).sum();
        let den: f64 = x.iter().zip(&dinv).map(|(xi, di)| xi * xi / di).sum();
        if den > 0.0 {
            rho = num / den;
        }
        let mut y: Vec<f64> = ax.iter().zip(&dinv).map(|(v, d)| v * d).collect();
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            break;
        }
        y.iter_mut().for_each(|v| *v /= scale);
        x = y;
    }
    Ok(rho)
}

/// `P = (I - ω D⁻¹A) P_tent` with `ω = 4/(3ρ̂)`, then rows scaled to sum one.
pub fn smooth_and_normalize(a: &SparseMatrix, p_tent: &SparseMatrix) -> Result<NodalProlongator> {
    if a.ncols() != p_tent.nrows() || a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, P_tent is {}x{}",
            a.nrows(),
            a.ncols(),
            p_tent.nrows(),
            p_tent.ncols()
        )));
    }
    let rho = estimate_rho(a)?;
    let omega = if rho > 0.0 { 4.0 / (3.0 * rho) } else { 0.0 };
    let dinv = diag_inverse(a)?;
    let jacobi = SparseMatrix::identity(a.nrows()).add_scaled(1.0, &a.scale_rows(&dinv), -omega)?;
    let p = spgemm(&jacobi, p_tent)?.compress(0.0);
    let p = normalize_rows(&p)?;
    Ok(NodalProlongator {
        p,
        omega_used: omega,
        rho_estimate: rho,
    })
}

/// Scales each row to sum exactly one.
pub fn normalize_rows(p: &SparseMatrix) -> Result<SparseMatrix> {
    let mut out = p.clone();
    let offsets = p.row_offsets().to_vec();
    let vals = out.values_mut();
    for row in 0..offsets.len() - 1 {
        let r = &mut vals[offsets[row]..offsets[row + 1]];
        let sum: f64 = r.iter().sum();
        let mag: f64 = r.iter().map(|v| v.abs()).sum();
        if mag == 0.0 || sum.abs() <= 1e-12 * mag {
            return Err(Error::ZeroRowSum { row });
        }
        r.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(out)
}

/// Full nodal setup for one level.
pub fn build_nodal_prolongator(
    a: &SparseMatrix,
    drop_tol: f64,
) -> Result<(Aggregation, NodalProlongator)> {
    let strength = strength_graph(a, drop_tol)?;
    let agg = aggregate(&strength);
    let tent = tentative_prolongator(&agg);
    let np = smooth_and_normalize(a, &tent)?;
    Ok((agg, np))
}
