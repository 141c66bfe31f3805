//! Sparsity pattern of the edge prolongator and the small per-row
//! constraint problems that keep `P_e D_H = D_h P_n` exact.
//!
//! Row `i` of the commutator relation reads `Gᵀ p = r`, where `p` holds the
//! nonzeros of row `i` of `P_e` (coarse edges `I`), `r` holds row `i` of
//! `D_h P_n` (coarse nodes `J`) and `G = D_H[I, J]` is a signed incidence.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::{spgemm, SparseMatrix};
use crate::topology::CoarseGradient;

/// Patterns driving the edge prolongator sparsity.
#[derive(Debug, Clone)]
pub struct PatternBundle {
    /// 0/1 pattern of `|D_h| |P_n|` (fine edge by coarse node).
    pub t: SparseMatrix,
    /// Per coarse edge: 1 for two endpoints, 2 for a single-node edge.
    pub w: Vec<f64>,
    /// `T |D_H|ᵀ W`, integer valued.
    pub b: SparseMatrix,
    /// 0/1 pattern of entries with `B == 2` (fine edge by coarse edge).
    pub n: SparseMatrix,
}

/// Dense constraint problem for one fine edge with thin QR factors.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSubproblem {
    pub fine_edge: usize,
    /// Pattern `I` of the prolongator row.
    pub coarse_edges: Vec<usize>,
    /// Pattern `J` of the right-hand side row.
    pub coarse_nodes: Vec<usize>,
    /// `|I| x |J|`, row-major.
    pub g: Vec<f64>,
    /// Leading `rank` columns of `Q`, `|I| x rank`, row-major.
    pub q: Vec<f64>,
    /// Leading `rank x rank` block of `R`, row-major.
    pub r: Vec<f64>,
    pub rank: usize,
    pub has_dirichlet_edge: bool,
}

impl ConstraintSubproblem {
    pub fn n_i(&self) -> usize {
        self.coarse_edges.len()
    }

    pub fn n_j(&self) -> usize {
        self.coarse_nodes.len()
    }

    /// A fine edge whose endpoints map to a single coarse node and no coarse
    /// edge: the prolongator row stays zero.
    pub fn is_empty(&self) -> bool {
        self.coarse_edges.is_empty()
    }

    /// Least-norm `p` with `Gᵀ p = rhs`, given `rhs` over `J`.
    pub fn least_norm(&self, rhs: &[f64]) -> Vec<f64> {
        let (m, k) = (self.n_i(), self.rank);
        // forward substitution with R̃ᵀ (lower triangular)
        let mut y = vec![0.0; k];
        for i in 0..k {
            let mut s = rhs[i];
            for j in 0..i {
                s -= self.r[j * k + i] * y[j];
            }
            y[i] = s / self.r[i * k + i];
        }
        (0..m)
            .map(|a| (0..k).map(|j| self.q[a * k + j] * y[j]).sum())
            .collect()
    }

    /// Removes the component of `v` in the range of `G`, so `Gᵀ v = 0` afterwards.
    pub fn project(&self, v: &mut [f64]) {
        let (m, k) = (self.n_i(), self.rank);
        for j in 0..k {
            let c: f64 = (0..m).map(|a| self.q[a * k + j] * v[a]).sum();
            for a in 0..m {
                v[a] -= c * self.q[a * k + j];
            }
        }
    }

    /// `max |Gᵀ p - rhs|`.
    pub fn constraint_residual(&self, p: &[f64], rhs: &[f64]) -> f64 {
        let (m, n) = (self.n_i(), self.n_j());
        (0..n)
            .map(|b| {
                let s: f64 = (0..m).map(|a| self.g[a * n + b] * p[a]).sum();
                (s - rhs[b]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Everything the edge prolongator needs after setup.
#[derive(Debug, Clone)]
pub struct EminSetup {
    pub bundle: PatternBundle,
    pub coarse: CoarseGradient,
    pub subproblems: Vec<ConstraintSubproblem>,
    /// `D_h P_n`.
    pub rhs: SparseMatrix,
    /// Number of rows that needed extra coarse edges.
    pub repaired_rows: usize,
}

fn check_gradient(d: &SparseMatrix, which: &'static str) -> Result<Vec<f64>> {
    let sums = d.abs_row_sums();
    for (row, &sum) in sums.iter().enumerate() {
        if sum != 1.0 && sum != 2.0 {
            return Err(Error::MalformedGradient { which, row, sum });
        }
    }
    Ok(sums)
}

/// Builds `T`, `W`, `B` and `N`.
pub fn compute_pattern(
    d_h: &SparseMatrix,
    p_n: &SparseMatrix,
    d_coarse: &SparseMatrix,
) -> Result<PatternBundle> {
    check_gradient(d_h, "fine gradient")?;
    let coarse_sums = check_gradient(d_coarse, "coarse gradient")?;
    if d_h.ncols() != p_n.nrows() || p_n.ncols() != d_coarse.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "D_h {}x{}, P_n {}x{}, D_H {}x{}",
            d_h.nrows(),
            d_h.ncols(),
            p_n.nrows(),
            p_n.ncols(),
            d_coarse.nrows(),
            d_coarse.ncols()
        )));
    }
    let t = spgemm(&d_h.pattern(), &p_n.compress(0.0).pattern())?.pattern();
    let w: Vec<f64> = coarse_sums.iter().map(|s| 3.0 - s).collect();
    let weighted = d_coarse.pattern().scale_rows(&w).transpose();
    // 0/1 inputs and weights 1 or 2 keep every entry an exact small integer
    let b = spgemm(&t, &weighted)?;
    let mut offsets = vec![0usize; b.nrows() + 1];
    let mut cols = Vec::new();
    for i in 0..b.nrows() {
        let (c, v) = b.row(i);
        cols.extend(c.iter().zip(v).filter(|(_, &x)| x == 2.0).map(|(&j, _)| j));
        offsets[i + 1] = cols.len();
    }
    let vals = vec![1.0; cols.len()];
    let n = SparseMatrix::new(b.nrows(), b.ncols(), offsets, cols, vals)?;
    Ok(PatternBundle { t, w, b, n })
}

/// Pulls row `fine_edge` of the constraint system out as a dense problem.
pub fn extract_subproblem(
    bundle: &PatternBundle,
    d_coarse: &SparseMatrix,
    fine_edge: usize,
) -> Result<ConstraintSubproblem> {
    let coarse_edges = bundle.n.row(fine_edge).0.to_vec();
    let coarse_nodes = bundle.t.row(fine_edge).0.to_vec();
    let sub = dense_subproblem(fine_edge, coarse_edges, coarse_nodes, d_coarse, &bundle.w);
    if sub.coarse_nodes.is_empty() {
        return Err(Error::EmptySubproblem {
            edge: fine_edge,
            reason: "no coarse nodes in the right-hand side pattern",
        });
    }
    if sub.coarse_edges.is_empty() && sub.coarse_nodes.len() > 1 {
        return Err(Error::EmptySubproblem {
            edge: fine_edge,
            reason: "several coarse nodes but no coarse edges",
        });
    }
    Ok(sub)
}

fn dense_subproblem(
    fine_edge: usize,
    coarse_edges: Vec<usize>,
    coarse_nodes: Vec<usize>,
    d_coarse: &SparseMatrix,
    w: &[f64],
) -> ConstraintSubproblem {
    let (m, n) = (coarse_edges.len(), coarse_nodes.len());
    let mut g = vec![0.0; m * n];
    for (a, &e) in coarse_edges.iter().enumerate() {
        let (cols, vals) = d_coarse.row(e);
        for (&c, &v) in cols.iter().zip(vals) {
            if let Ok(b) = coarse_nodes.binary_search(&c) {
                g[a * n + b] = v;
            }
        }
    }
    let has_dirichlet_edge = coarse_edges.iter().any(|&e| w.get(e) == Some(&2.0));
    ConstraintSubproblem {
        fine_edge,
        coarse_edges,
        coarse_nodes,
        g,
        has_dirichlet_edge,
        ..Default::default()
    }
}

/// Component label of every column of `g` in the graph whose edges are the rows.
fn components(g: &[f64], m: usize, n: usize) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for a in 0..m {
        let ends: Vec<usize> = (0..n).filter(|&b| g[a * n + b] != 0.0).collect();
        for w in ends.windows(2) {
            let (x, y) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if x != y {
                parent[x.max(y)] = x.min(y);
            }
        }
    }
    (0..n).map(|b| find(&mut parent, b)).collect()
}

/// True when the coarse-edge graph of `g` is connected and touches every column.
pub fn check_irreducible(g: &[f64], m: usize, n: usize) -> bool {
    if n == 0 {
        return false;
    }
    let touched = (0..n).all(|b| (0..m).any(|a| g[a * n + b] != 0.0));
    touched && components(g, m, n).iter().all(|&c| c == 0)
}

/// Connects the components of a reducible subproblem by appending coarse
/// edges to `coarse`. Candidates are scored by `|(Rᵀ R)_ab|` with `R = D_h P_n`
/// given as its transpose `rhs_t`; ties go to the lexicographically smallest pair.
/// Returns the pairs that were added.
pub fn make_irreducible(
    sub: &ConstraintSubproblem,
    coarse: &mut CoarseGradient,
    rhs_t: &SparseMatrix,
) -> Result<Vec<(usize, usize)>> {
    let n = sub.n_j();
    let mut g = sub.g.clone();
    let mut m = sub.n_i();
    let mut added = Vec::new();
    loop {
        let comp = components(&g, m, n);
        if comp.iter().all(|&c| c == comp[0]) {
            break;
        }
        let mut best: Option<((usize, usize), f64)> = None;
        for a in 0..n {
            for b in a + 1..n {
                if comp[a] == comp[b] {
                    continue;
                }
                let pair = (sub.coarse_nodes[a], sub.coarse_nodes[b]);
                let score = sparse_row_dot(rhs_t, pair.0, pair.1).abs();
                // strict comparison keeps the earliest (lexicographic) pair on ties
                if best.map_or(true, |(_, s)| score > s) {
                    best = Some(((a, b), score));
                }
            }
        }
        let ((a, b), _) = best.expect("at least two components");
        coarse.append_pairs(&[(sub.coarse_nodes[a], sub.coarse_nodes[b])])?;
        added.push((sub.coarse_nodes[a], sub.coarse_nodes[b]));
        let mut row = vec![0.0; n];
        row[a] = -1.0;
        row[b] = 1.0;
        g.extend(row);
        m += 1;
    }
    Ok(added)
}

fn sparse_row_dot(m: &SparseMatrix, i: usize, j: usize) -> f64 {
    let (ci, vi) = m.row(i);
    let (cj, vj) = m.row(j);
    let (mut p, mut q, mut s) = (0, 0, 0.0);
    while p < ci.len() && q < cj.len() {
        match ci[p].cmp(&cj[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                s += vi[p] * vj[q];
                p += 1;
                q += 1;
            }
        }
    }
    s
}

/// Householder QR of a row-major `m x n` matrix; returns `Q` (`m x m`) and `R` (`m x n`).
pub fn householder_qr(a: &[f64], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut r = a.to_vec();
    let mut q = vec![0.0; m * m];
    for i in 0..m {
        q[i * m + i] = 1.0;
    }
    for j in 0..n.min(m.saturating_sub(1)) {
        let norm = (j..m).map(|i| r[i * n + j].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[j * n + j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..m).map(|i| r[i * n + j]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // R <- H R
        for c in 0..n {
            let s: f64 = (j..m).map(|i| v[i - j] * r[i * n + c]).sum::<f64>() * 2.0 / vnorm2;
            for i in j..m {
                r[i * n + c] -= s * v[i - j];
            }
        }
        // Q <- Q H
        for row in 0..m {
            let s: f64 = (j..m).map(|i| q[row * m + i] * v[i - j]).sum::<f64>() * 2.0 / vnorm2;
            for i in j..m {
                q[row * m + i] -= s * v[i - j];
            }
        }
    }
    (q, r)
}

/// Computes the thin factors, truncating to rank `|J| - 1` when no coarse
/// edge is single-node (the incidence then annihilates constants).
pub fn factor_subproblem(sub: &mut ConstraintSubproblem) -> Result<()> {
    let (m, n) = (sub.n_i(), sub.n_j());
    if m == 0 {
        sub.rank = 0;
        return Ok(());
    }
    let k = if sub.has_dirichlet_edge { n } else { n - 1 };
    if k > m {
        return Err(Error::RankMismatch {
            edge: sub.fine_edge,
            expected: k,
        });
    }
    let (q, r) = householder_qr(&sub.g, m, n);
    let r00 = r[0].abs();
    for j in 0..k {
        if !(r[j * n + j].abs() >= 1e-10 * r00) || r00 == 0.0 {
            return Err(Error::RankMismatch {
                edge: sub.fine_edge,
                expected: k,
            });
        }
    }
    sub.rank = k;
    sub.q = (0..m)
        .flat_map(|a| (0..k).map(move |j| (a, j)))
        .map(|(a, j)| q[a * m + j])
        .collect();
    sub.r = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| r[i * n + j])
        .collect();
    Ok(())
}

/// Full setup: pattern, irreducibility repair of `D_H`, extraction and factorization.
pub fn setup_emin(
    d_h: &SparseMatrix,
    p_n: &SparseMatrix,
    mut coarse: CoarseGradient,
) -> Result<EminSetup> {
    let rhs = spgemm(d_h, p_n)?;
    let rhs_t = rhs.transpose();
    let mut bundle = compute_pattern(d_h, p_n, &coarse.d_h)?;

    let mut repaired_rows = 0;
    let n_before = coarse.n_edges();
    // pairs appended during this pass, looked up by endpoints
    let mut extra: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..d_h.nrows() {
        let nodes = bundle.t.row(i).0;
        let mut edges = bundle.n.row(i).0.to_vec();
        for &(a, b, e) in &extra {
            if nodes.binary_search(&a).is_ok() && nodes.binary_search(&b).is_ok() {
                edges.push(e);
            }
        }
        let sub = dense_subproblem(i, edges, nodes.to_vec(), &coarse.d_h, &bundle.w);
        if sub.n_j() <= 1 {
            continue;
        }
        if !check_irreducible(&sub.g, sub.n_i(), sub.n_j()) {
            let added = make_irreducible(&sub, &mut coarse, &rhs_t)?;
            let first = coarse.n_edges() - added.len();
            extra.extend(added.iter().enumerate().map(|(k, &(a, b))| (a.min(b), a.max(b), first + k)));
            repaired_rows += 1;
        }
    }
    if coarse.n_edges() != n_before {
        bundle = compute_pattern(d_h, p_n, &coarse.d_h)?;
    }

    let d_coarse = &coarse.d_h;
    let subproblems = (0..d_h.nrows())
        .into_par_iter()
        .map(|i| {
            let mut sub = extract_subproblem(&bundle, d_coarse, i)?;
            factor_subproblem(&mut sub)?;
            Ok(sub)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EminSetup {
        bundle,
        coarse,
        subproblems,
        rhs,
        repaired_rows,
    })
}
