//! Coarse nodes to coarse edges: piecewise-constant projection of a nodal
//! prolongator and the coarse discrete gradient it induces.

use crate::error::{Error, Result};
use crate::sparse::{spgemm, SparseMatrix};

/// A coarse edge joins two coarse nodes or, next to a Dirichlet boundary, hangs off one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoarseEdge {
    Pair(usize, usize),
    Single(usize),
}

#[derive(Debug, Clone)]
pub struct CoarseGradient {
    pub d_h: SparseMatrix,
    pub edges: Vec<CoarseEdge>,
    /// Row indices of edges appended while repairing reducible subproblems.
    pub augmented_edges: Vec<usize>,
}

impl CoarseGradient {
    pub fn from_edges(edges: Vec<CoarseEdge>, n_coarse_nodes: usize) -> Result<Self> {
        let d_h = gradient_from_edges(&edges, n_coarse_nodes)?;
        Ok(Self {
            d_h,
            edges,
            augmented_edges: Vec::new(),
        })
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.d_h.ncols()
    }

    /// Appends two-node edges and records them as augmented.
    pub fn append_pairs(&mut self, pairs: &[(usize, usize)]) -> Result<()> {
        for &(a, b) in pairs {
            let e = CoarseEdge::Pair(a.min(b), a.max(b));
            if a == b || self.edges.contains(&e) {
                return Err(Error::StructureViolation(format!(
                    "cannot add coarse edge ({a}, {b})"
                )));
            }
            self.augmented_edges.push(self.edges.len());
            self.edges.push(e);
        }
        self.d_h = gradient_from_edges(&self.edges, self.n_nodes())?;
        Ok(())
    }
}

/// Gradient rows: `-1` at the lower node and `+1` at the higher one, or a lone `+1`.
pub fn gradient_from_edges(edges: &[CoarseEdge], n_nodes: usize) -> Result<SparseMatrix> {
    let mut offsets = Vec::with_capacity(edges.len() + 1);
    offsets.push(0);
    let mut cols = Vec::with_capacity(2 * edges.len());
    let mut vals = Vec::with_capacity(2 * edges.len());
    for e in edges {
        match *e {
            CoarseEdge::Pair(i, j) => {
                if i >= j {
                    return Err(Error::StructureViolation(format!(
                        "coarse edge ({i}, {j}) is not ordered"
                    )));
                }
                cols.extend([i, j]);
                vals.extend([-1.0, 1.0]);
            }
            CoarseEdge::Single(c) => {
                cols.push(c);
                vals.push(1.0);
            }
        }
        offsets.push(cols.len());
    }
    SparseMatrix::new(edges.len(), n_nodes, offsets, cols, vals)
}

/// Piecewise-constant surrogate of `p` with one unit entry per row.
pub fn gen_piecewise_const(p: &SparseMatrix, n_passes: usize) -> Result<SparseMatrix> {
    if n_passes == 0 {
        return Err(Error::InvalidParameter("n_passes must be positive".into()));
    }
    let (nrows, ncols) = (p.nrows(), p.ncols());
    let pt = p.transpose();
    let total = p.nnz().max(1) as f64;

    // candidate rows per column, largest magnitude first, ties by lower row
    let ranked: Vec<Vec<(usize, f64)>> = (0..ncols)
        .map(|j| {
            let (rows, vals) = pt.row(j);
            let mut r: Vec<(usize, f64)> = rows
                .iter()
                .zip(vals)
                .filter(|(_, v)| **v != 0.0)
                .map(|(&i, &v)| (i, v.abs()))
                .collect();
            r.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            r
        })
        .collect();
    let target: Vec<usize> = (0..ncols)
        .map(|j| ((pt.row_nnz(j) as f64 / total * nrows as f64).round() as usize).max(1))
        .collect();

    let mut owner: Vec<Option<usize>> = vec![None; nrows];
    let mut count = vec![0usize; ncols];
    let mut cursor = vec![0usize; ncols];
    for _ in 0..n_passes {
        for j in 0..ncols {
            let quota = target[j].div_ceil(n_passes);
            let mut claimed = 0;
            while claimed < quota && count[j] < target[j] && cursor[j] < ranked[j].len() {
                let row = ranked[j][cursor[j]].0;
                cursor[j] += 1;
                if owner[row].is_none() {
                    owner[row] = Some(j);
                    count[j] += 1;
                    claimed += 1;
                }
            }
        }
    }

    // every column keeps at least one row
    for j in 0..ncols {
        if count[j] > 0 {
            continue;
        }
        let pick = ranked[j]
            .iter()
            .map(|&(i, _)| i)
            .find(|&i| match owner[i] {
                None => true,
                Some(o) => count[o] >= 2,
            })
            .ok_or(Error::EmptyColumn { col: j })?;
        if let Some(o) = owner[pick] {
            count[o] -= 1;
        }
        owner[pick] = Some(j);
        count[j] += 1;
    }

    // leftovers follow their largest entry
    for i in 0..nrows {
        if owner[i].is_some() {
            continue;
        }
        let (cols, vals) = p.row(i);
        let mut best: Option<(usize, f64)> = None;
        for (&j, &v) in cols.iter().zip(vals) {
            if count[j] == 0 || v == 0.0 {
                continue;
            }
            if best.map_or(true, |(_, bv)| v.abs() > bv) {
                best = Some((j, v.abs()));
            }
        }
        let (j, _) = best.ok_or_else(|| {
            Error::StructureViolation(format!("row {i} of the nodal prolongator is empty"))
        })?;
        owner[i] = Some(j);
        count[j] += 1;
    }

    let membership: Vec<usize> = owner.into_iter().map(|o| o.expect("assigned")).collect();
    SparseMatrix::new(
        nrows,
        ncols,
        (0..=nrows).collect(),
        membership,
        vec![1.0; nrows],
    )
}

/// Coarse edges from the structural couplings of `P_constᵀ |D_h|ᵀ |D_h| P_const`.
pub fn build_coarse_gradient(d_h: &SparseMatrix, p_const: &SparseMatrix) -> Result<CoarseGradient> {
    let b = spgemm(&d_h.abs(), &p_const.abs())?;
    let z = spgemm(&b.transpose(), &b)?.compress(0.0);
    let mut edges = Vec::new();
    for i in 0..z.nrows() {
        for &j in z.row(i).0 {
            if j > i {
                edges.push(CoarseEdge::Pair(i, j));
            }
        }
    }
    CoarseGradient::from_edges(edges, p_const.ncols())
}

/// Adds one single-node coarse edge for every coarse node that owns the
/// interior endpoint of a fine Dirichlet edge.
pub fn augment_dirichlet_edges(
    cg: &CoarseGradient,
    d_h: &SparseMatrix,
    p_const: &SparseMatrix,
) -> Result<CoarseGradient> {
    let mut owners: Vec<usize> = Vec::new();
    for e in 0..d_h.nrows() {
        let (cols, _) = d_h.row(e);
        if cols.len() == 1 {
            owners.extend(p_const.row(cols[0]).0.iter().copied());
        }
    }
    owners.sort_unstable();
    owners.dedup();
    let mut edges = cg.edges.clone();
    for c in owners {
        let e = CoarseEdge::Single(c);
        if !edges.contains(&e) {
            edges.push(e);
        }
    }
    let mut out = CoarseGradient::from_edges(edges, cg.n_nodes())?;
    out.augmented_edges = cg.augmented_edges.clone();
    Ok(out)
}
