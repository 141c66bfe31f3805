//! Edge prolongator: feasible start, projected Jacobi energy minimization and
//! the piecewise-constant baseline.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emin_setup::{setup_emin, ConstraintSubproblem, EminSetup};
use crate::error::{Error, Result};
use crate::nodal::{
    aggregate, build_nodal_prolongator, strength_graph, tentative_prolongator, NodalProlongator,
};
use crate::sparse::{spgemm, SparseMatrix};
use crate::topology::{
    augment_dirichlet_edges, build_coarse_gradient, gen_piecewise_const, CoarseEdge,
    CoarseGradient,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EminMode {
    /// Smoothed nodal interpolation and energy-minimized edge interpolation.
    SpHcurl,
    /// Piecewise-constant nodal interpolation with ±1 edge interpolation.
    Rsamg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EminConfig {
    pub omega: f64,
    pub iterations: usize,
    pub mode: EminMode,
}

impl Default for EminConfig {
    fn default() -> Self {
        Self {
            omega: 0.5,
            iterations: 1,
            mode: EminMode::SpHcurl,
        }
    }
}

impl EminConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "emin omega must lie in (0, 2), got {}",
                self.omega
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EdgeProlongator {
    pub p_e: SparseMatrix,
    /// `trace(Pᵀ S P)` for the starting guess and after every step.
    pub energy_history: Vec<f64>,
    /// `max |P_e D_H - D_h P_n|`.
    pub commutator_residual: f64,
}

impl EdgeProlongator {
    /// True when no recorded step increased the energy beyond round-off.
    pub fn energy_monotone(&self) -> bool {
        self.energy_history
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-14)
    }
}

/// Setup statistics of one coarsening step.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SetupStats {
    /// `(|I|, |J|)` of every nonempty constraint subproblem, with counts.
    pub histogram: BTreeMap<(usize, usize), usize>,
    pub repaired_rows: usize,
    pub augmented_edges: usize,
    pub empty_rows: usize,
    pub commutator_residual: f64,
    pub energy_history: Vec<f64>,
}

/// Result of one edge coarsening step.
#[derive(Debug, Clone)]
pub struct EdgeCoarsening {
    pub edge: EdgeProlongator,
    pub coarse: CoarseGradient,
    pub nodal: NodalProlongator,
    pub stats: SetupStats,
}

fn row_rhs(rhs: &SparseMatrix, i: usize, nodes: &[usize]) -> Vec<f64> {
    let (cols, vals) = rhs.row(i);
    let mut out = vec![0.0; nodes.len()];
    for (&c, &v) in cols.iter().zip(vals) {
        if let Ok(b) = nodes.binary_search(&c) {
            out[b] = v;
        }
    }
    out
}

fn assemble_rows(subs: &[ConstraintSubproblem], rows: Vec<Vec<f64>>, ncols: usize) -> SparseMatrix {
    let mut offsets = Vec::with_capacity(subs.len() + 1);
    offsets.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for (sub, row) in subs.iter().zip(rows) {
        cols.extend_from_slice(&sub.coarse_edges);
        vals.extend(row);
        offsets.push(cols.len());
    }
    SparseMatrix::new(subs.len(), ncols, offsets, cols, vals).expect("rows follow the pattern")
}

/// Minimum-norm row values on the pattern that satisfy each row constraint exactly.
pub fn initial_feasible_guess(
    subs: &[ConstraintSubproblem],
    rhs: &SparseMatrix,
    n_coarse_edges: usize,
) -> Result<SparseMatrix> {
    let rows = subs
        .par_iter()
        .enumerate()
        .map(|(i, sub)| {
            if sub.is_empty() {
                return Ok(Vec::new());
            }
            if sub.q.len() != sub.n_i() * sub.rank {
                return Err(Error::MissingFactor { edge: i });
            }
            Ok(sub.least_norm(&row_rhs(rhs, i, &sub.coarse_nodes)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_rows(subs, rows, n_coarse_edges))
}

/// Projects every row of `dp` (pattern equal to the subproblem patterns)
/// onto the null space of its constraint.
pub fn project_correction(dp: &SparseMatrix, subs: &[ConstraintSubproblem]) -> SparseMatrix {
    let rows: Vec<Vec<f64>> = subs
        .par_iter()
        .enumerate()
        .map(|(i, sub)| {
            let mut v = dp.row(i).1.to_vec();
            sub.project(&mut v);
            v
        })
        .collect();
    assemble_rows(subs, rows, dp.ncols())
}

/// `trace(Pᵀ S P)` given `S P`.
fn energy(p: &SparseMatrix, sp: &SparseMatrix) -> f64 {
    (0..p.nrows())
        .map(|i| {
            let (cols, vals) = p.row(i);
            cols.iter()
                .zip(vals)
                .map(|(&c, &v)| v * sp.get(i, c).unwrap_or(0.0))
                .sum::<f64>()
        })
        .sum()
}

/// Jacobi diagonal of `S` with zero entries lifted to a tiny positive value.
fn shifted_diagonal(s: &SparseMatrix) -> Vec<f64> {
    let diag = s.diagonal();
    let shift = 1e-12 * diag.iter().fold(0.0f64, |m, &d| m.max(d));
    diag.into_iter()
        .map(|d| if d == 0.0 { shift } else { d })
        .collect()
}

/// One projected damped Jacobi step; returns the new prolongator and the
/// energy of the incoming one.
pub fn emin_step(
    s: &SparseMatrix,
    p: &SparseMatrix,
    omega: f64,
    subs: &[ConstraintSubproblem],
) -> Result<(SparseMatrix, f64)> {
    let sp = spgemm(s, p)?;
    let e0 = energy(p, &sp);
    let diag = shifted_diagonal(s);
    if let Some(row) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDiagonal { row });
    }
    let rows: Vec<Vec<f64>> = subs
        .par_iter()
        .enumerate()
        .map(|(i, sub)| {
            let mut delta: Vec<f64> = sub
                .coarse_edges
                .iter()
                .map(|&c| sp.get(i, c).unwrap_or(0.0) / diag[i])
                .collect();
            sub.project(&mut delta);
            p.row(i)
                .1
                .iter()
                .zip(delta)
                .map(|(v, d)| v - omega * d)
                .collect()
        })
        .collect();
    Ok((assemble_rows(subs, rows, p.ncols()), e0))
}

/// `max |P_e D_H - D_h P_n|`.
pub fn commutator_residual(
    p_e: &SparseMatrix,
    d_coarse: &SparseMatrix,
    rhs: &SparseMatrix,
) -> Result<f64> {
    Ok(spgemm(p_e, d_coarse)?.add_scaled(1.0, rhs, -1.0)?.max_abs())
}

/// Feasible start followed by `cfg.iterations` energy-minimization steps.
pub fn edge_prolongator_from_setup(
    s: &SparseMatrix,
    setup: &EminSetup,
    cfg: &EminConfig,
) -> Result<EdgeProlongator> {
    cfg.validate()?;
    let n_coarse = setup.coarse.n_edges();
    let mut p = initial_feasible_guess(&setup.subproblems, &setup.rhs, n_coarse)?;
    let iterations = match cfg.mode {
        EminMode::SpHcurl => cfg.iterations,
        EminMode::Rsamg => 0,
    };
    let mut energy_history = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let (next, e) = emin_step(s, &p, cfg.omega, &setup.subproblems)?;
        energy_history.push(e);
        p = next;
    }
    energy_history.push(energy(&p, &spgemm(s, &p)?));

    let residual = commutator_residual(&p, &setup.coarse.d_h, &setup.rhs)?;
    let bound = 1e-10 * setup.rhs.max_abs().max(1.0);
    if !(residual <= bound) {
        return Err(Error::StructureViolation(format!(
            "commutator residual {residual:e} exceeds {bound:e}"
        )));
    }
    Ok(EdgeProlongator {
        p_e: p,
        energy_history,
        commutator_residual: residual,
    })
}

/// Edge interpolation induced by an aggregate map: a fine edge joining two
/// aggregates copies the coarse edge between them with the orientation sign,
/// a Dirichlet edge copies the single-node edge of its interior endpoint and
/// an edge inside one aggregate interpolates nothing.
pub fn piecewise_edge_prolongator(
    d_h: &SparseMatrix,
    p_const: &SparseMatrix,
    coarse: &CoarseGradient,
) -> Result<SparseMatrix> {
    let index: HashMap<CoarseEdge, usize> =
        coarse.edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
    let agg = |node: usize| p_const.row(node).0[0];
    let lookup = |e: CoarseEdge| {
        index.get(&e).copied().ok_or_else(|| {
            Error::StructureViolation(format!("coarse edge {e:?} is missing"))
        })
    };
    let mut triplets = Vec::new();
    for i in 0..d_h.nrows() {
        let (cols, vals) = d_h.row(i);
        match cols.len() {
            1 => triplets.push((i, lookup(CoarseEdge::Single(agg(cols[0])))?, vals[0])),
            2 => {
                // orientation of the fine edge: from the -1 node to the +1 node
                let (tail, head) = if vals[0] < 0.0 {
                    (agg(cols[0]), agg(cols[1]))
                } else {
                    (agg(cols[1]), agg(cols[0]))
                };
                if tail != head {
                    let k = lookup(CoarseEdge::Pair(tail.min(head), tail.max(head)))?;
                    triplets.push((i, k, if tail < head { 1.0 } else { -1.0 }));
                }
            }
            _ => {
                return Err(Error::MalformedGradient {
                    which: "fine gradient",
                    row: i,
                    sum: vals.iter().map(|v| v.abs()).sum(),
                })
            }
        }
    }
    SparseMatrix::from_triplets(d_h.nrows(), coarse.n_edges(), &triplets)
}

/// Nodal prolongator, coarse gradient and edge prolongator for one level.
pub fn build_edge_prolongator(
    a_n: &SparseMatrix,
    s: &SparseMatrix,
    d_h: &SparseMatrix,
    cfg: &EminConfig,
    drop_tol: f64,
    n_passes: usize,
) -> Result<EdgeCoarsening> {
    cfg.validate()?;
    let (nodal, p_const) = match cfg.mode {
        EminMode::SpHcurl => {
            let (_, nodal) = build_nodal_prolongator(a_n, drop_tol)?;
            let p_const = gen_piecewise_const(&nodal.p, n_passes)?;
            (nodal, p_const)
        }
        EminMode::Rsamg => {
            let agg = aggregate(&strength_graph(a_n, drop_tol)?);
            let p = tentative_prolongator(&agg);
            let nodal = NodalProlongator {
                p: p.clone(),
                omega_used: 0.0,
                rho_estimate: 0.0,
            };
            (nodal, p)
        }
    };
    let coarse = build_coarse_gradient(d_h, &p_const)?;
    let coarse = augment_dirichlet_edges(&coarse, d_h, &p_const)?;
    if cfg.mode == EminMode::Rsamg {
        let p_e = piecewise_edge_prolongator(d_h, &p_const, &coarse)?;
        let rhs = spgemm(d_h, &p_const)?;
        let residual = commutator_residual(&p_e, &coarse.d_h, &rhs)?;
        if residual != 0.0 {
            return Err(Error::StructureViolation(format!(
                "piecewise-constant commutator residual {residual:e}"
            )));
        }
        let energy_history = vec![energy(&p_e, &spgemm(s, &p_e)?)];
        let stats = SetupStats {
            empty_rows: (0..p_e.nrows()).filter(|&i| p_e.row_nnz(i) == 0).count(),
            energy_history: energy_history.clone(),
            ..Default::default()
        };
        return Ok(EdgeCoarsening {
            edge: EdgeProlongator {
                p_e,
                energy_history,
                commutator_residual: residual,
            },
            coarse,
            nodal,
            stats,
        });
    }
    let setup = setup_emin(d_h, &nodal.p, coarse)?;
    let edge = edge_prolongator_from_setup(s, &setup, cfg)?;

    let mut stats = SetupStats {
        repaired_rows: setup.repaired_rows,
        augmented_edges: setup.coarse.augmented_edges.len(),
        commutator_residual: edge.commutator_residual,
        energy_history: edge.energy_history.clone(),
        ..Default::default()
    };
    for sub in &setup.subproblems {
        if sub.is_empty() {
            stats.empty_rows += 1;
        } else {
            *stats.histogram.entry((sub.n_i(), sub.n_j())).or_default() += 1;
        }
    }
    Ok(EdgeCoarsening {
        edge,
        coarse: setup.coarse,
        nodal,
        stats,
    })
}
