//! Preconditioned conjugate gradients.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::multigrid::{hiptmair_smooth, Hierarchy};
use crate::sparse::{dot, norm2, SparseMatrix};

/// A fixed linear operator approximating `A⁻¹`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>>;
}

impl Preconditioner for Hierarchy {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.v_cycle(r)
    }
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

/// One symmetric hybrid smoothing sweep from a zero guess, no coarse levels.
pub struct RelaxationOnly {
    a_e: SparseMatrix,
    d: SparseMatrix,
    nodal_aux: SparseMatrix,
}

impl RelaxationOnly {
    pub fn new(a_e: SparseMatrix, d: SparseMatrix) -> Result<Self> {
        let nodal_aux = a_e.galerkin(&d)?;
        Ok(Self { a_e, d, nodal_aux })
    }
}

impl Preconditioner for RelaxationOnly {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; r.len()];
        hiptmair_smooth(&self.a_e, &self.d, &self.nodal_aux, &mut x, r)?;
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// An update left the iterate bitwise unchanged.
    Stagnated,
    /// A search direction with `pᵀAp <= 0`, or a preconditioner with `rᵀz <= 0`.
    Indefinite,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
    /// `‖r_k‖ / ‖b‖` for the recurrence residual, starting with `k = 0`.
    pub residual_history: Vec<f64>,
    /// `‖b - A x‖ / ‖b‖` for the returned iterate.
    pub relative_residual: f64,
}

/// PCG from a zero initial guess until `‖r‖ <= rtol ‖b‖` or `maxit` iterations.
pub fn pcg_solve<P: Preconditioner + ?Sized>(
    a: &SparseMatrix,
    b: &[f64],
    precond: &P,
    rtol: f64,
    maxit: usize,
) -> Result<SolveOutcome> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(SolveOutcome {
            x,
            iterations: 0,
            status: SolveStatus::Converged,
            residual_history: vec![0.0],
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut z = precond.apply(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = vec![1.0];
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut ap = vec![0.0; n];

    while iterations < maxit {
        if !(rz > 0.0) {
            status = SolveStatus::Indefinite;
            break;
        }
        a.spmv(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            status = SolveStatus::Indefinite;
            break;
        }
        let alpha = rz / pap;
        let mut changed = false;
        for i in 0..n {
            let next = x[i] + alpha * p[i];
            changed |= next != x[i];
            x[i] = next;
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel <= rtol {
            status = SolveStatus::Converged;
            break;
        }
        if !changed {
            status = SolveStatus::Stagnated;
            break;
        }
        z = precond.apply(&r)?;
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let ax = a.mul_vec(&x);
    let true_res: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    Ok(SolveOutcome {
        relative_residual: norm2(&true_res) / bnorm,
        x,
        iterations,
        status,
        residual_history: history,
    })
}
