//! Galerkin hierarchy, hybrid (Hiptmair) smoothing and the V-cycle.

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prolongator::{build_edge_prolongator, EminConfig, SetupStats};
use crate::sparse::{spgemm, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub emin: EminConfig,
    /// Stop coarsening once a level has at most this many edges.
    pub coarse_size: usize,
    pub max_levels: usize,
    /// Strength-of-connection drop tolerance for nodal aggregation.
    pub drop_tol: f64,
    /// Sweeps of the piecewise-constant conversion.
    pub n_passes: usize,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            emin: EminConfig::default(),
            coarse_size: 200,
            max_levels: 10,
            drop_tol: 0.0,
            n_passes: 2,
        }
    }
}

/// Operators of one level; the prolongators map the next coarser level here.
#[derive(Debug, Clone)]
pub struct Level {
    pub a_e: SparseMatrix,
    pub s_e: SparseMatrix,
    pub d: SparseMatrix,
    pub a_n: SparseMatrix,
    /// `Dᵀ A_e D`.
    pub nodal_aux: SparseMatrix,
    pub p_e: Option<SparseMatrix>,
    pub p_n: Option<SparseMatrix>,
    pub stats: Option<SetupStats>,
}

impl Level {
    pub fn new(a_e: SparseMatrix, s_e: SparseMatrix, d: SparseMatrix, a_n: SparseMatrix) -> Result<Self> {
        let nodal_aux = a_e.galerkin(&d)?;
        Ok(Self {
            a_e,
            s_e,
            d,
            a_n,
            nodal_aux,
            p_e: None,
            p_n: None,
            stats: None,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.a_e.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.d.ncols()
    }

    /// `max |S D| / max |S|` (zero when `S` vanishes).
    pub fn null_space_defect(&self) -> Result<f64> {
        null_space_defect(&self.s_e, &self.d)
    }
}

pub fn null_space_defect(s: &SparseMatrix, d: &SparseMatrix) -> Result<f64> {
    let scale = s.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(spgemm(s, d)?.max_abs() / scale)
}

#[derive(Debug)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
    coarse_lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub operator_complexity: f64,
}

/// Coarsens until the edge count reaches `cfg.coarse_size` or `cfg.max_levels`.
pub fn build_hierarchy(
    a_e: SparseMatrix,
    s_e: SparseMatrix,
    a_n: SparseMatrix,
    d: SparseMatrix,
    cfg: &HierarchyConfig,
) -> Result<Hierarchy> {
    if cfg.max_levels == 0 {
        return Err(Error::InvalidParameter("max_levels must be positive".into()));
    }
    let defect = null_space_defect(&s_e, &d)?;
    if defect > 1e-12 {
        return Err(Error::StructureViolation(format!(
            "fine level: max|S D| / max|S| = {defect:e}"
        )));
    }
    let mut levels = vec![Level::new(a_e, s_e, d, a_n)?];
    while levels.len() < cfg.max_levels {
        let fine = levels.last().expect("nonempty");
        if fine.n_edges() <= cfg.coarse_size {
            break;
        }
        let step = build_edge_prolongator(
            &fine.a_n,
            &fine.s_e,
            &fine.d,
            &cfg.emin,
            cfg.drop_tol,
            cfg.n_passes,
        )?;
        let n_coarse = step.coarse.n_edges();
        if n_coarse == 0 {
            break;
        }
        if n_coarse as f64 >= 0.9 * fine.n_edges() as f64 {
            return Err(Error::CoarseningStagnation {
                level: levels.len() - 1,
                fine: fine.n_edges(),
                coarse: n_coarse,
            });
        }
        let p_e = step.edge.p_e;
        let p_n = step.nodal.p;
        let coarse = Level::new(
            fine.a_e.galerkin(&p_e)?,
            fine.s_e.galerkin(&p_e)?,
            step.coarse.d_h,
            fine.a_n.galerkin(&p_n)?,
        )?;
        let defect = coarse.null_space_defect()?;
        if defect > 1e-10 {
            return Err(Error::StructureViolation(format!(
                "level {}: max|S D| / max|S| = {defect:e}",
                levels.len()
            )));
        }
        let fine = levels.last_mut().expect("nonempty");
        fine.p_e = Some(p_e);
        fine.p_n = Some(p_n);
        fine.stats = Some(step.stats);
        levels.push(coarse);
    }

    let coarsest = &levels.last().expect("nonempty").a_e;
    let n = coarsest.nrows();
    let mut dense = DMatrix::zeros(n, n);
    for i in 0..n {
        let (cols, vals) = coarsest.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            dense[(i, j)] = v;
        }
    }
    let coarse_lu = dense.lu();
    if n > 0 && !coarse_lu.is_invertible() {
        return Err(Error::SingularMatrix);
    }
    let nnz0 = levels[0].a_e.nnz().max(1) as f64;
    let operator_complexity = levels.iter().map(|l| l.a_e.nnz() as f64).sum::<f64>() / nnz0;
    Ok(Hierarchy {
        levels,
        coarse_lu,
        operator_complexity,
    })
}

/// Forward then backward Gauss-Seidel, `sweeps` times, in place.
pub fn symmetric_gauss_seidel(a: &SparseMatrix, x: &mut [f64], b: &[f64], sweeps: usize) -> Result<()> {
    let n = a.nrows();
    let relax = |i: usize, x: &mut [f64]| -> Result<()> {
        let (cols, vals) = a.row(i);
        let mut s = b[i];
        let mut diag = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
            } else {
                s -= v * x[j];
            }
        }
        if diag == 0.0 {
            return Err(Error::ZeroDiagonal { row: i });
        }
        x[i] = s / diag;
        Ok(())
    };
    for _ in 0..sweeps {
        for i in 0..n {
            relax(i, x)?;
        }
        for i in (0..n).rev() {
            relax(i, x)?;
        }
    }
    Ok(())
}

/// One symmetric hybrid sweep: edge smoothing, a nodal correction in the
/// gradient space, edge smoothing again.
pub fn hiptmair_smooth(
    a_e: &SparseMatrix,
    d: &SparseMatrix,
    nodal_aux: &SparseMatrix,
    x: &mut [f64],
    b: &[f64],
) -> Result<()> {
    symmetric_gauss_seidel(a_e, x, b, 1)?;
    let ax = a_e.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let rn = d.transpose_mul_vec(&r);
    let mut c = vec![0.0; rn.len()];
    symmetric_gauss_seidel(nodal_aux, &mut c, &rn, 1)?;
    for (xi, gi) in x.iter_mut().zip(d.mul_vec(&c)) {
        *xi += gi;
    }
    symmetric_gauss_seidel(a_e, x, b, 1)
}

impl Hierarchy {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// One V-cycle from a zero initial guess.
    pub fn v_cycle(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.cycle(0, b)
    }

    fn cycle(&self, l: usize, b: &[f64]) -> Result<Vec<f64>> {
        let level = &self.levels[l];
        let Some(p) = &level.p_e else {
            if b.is_empty() {
                return Ok(Vec::new());
            }
            let sol = self
                .coarse_lu
                .solve(&DVector::from_column_slice(b))
                .ok_or(Error::SingularMatrix)?;
            return Ok(sol.as_slice().to_vec());
        };
        let mut x = vec![0.0; b.len()];
        hiptmair_smooth(&level.a_e, &level.d, &level.nodal_aux, &mut x, b)?;
        let ax = level.a_e.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let xc = self.cycle(l + 1, &p.transpose_mul_vec(&r))?;
        for (xi, ci) in x.iter_mut().zip(p.mul_vec(&xc)) {
            *xi += ci;
        }
        hiptmair_smooth(&level.a_e, &level.d, &level.nodal_aux, &mut x, b)?;
        Ok(x)
    }

    pub fn level_edge_counts(&self) -> Vec<usize> {
        self.levels.iter().map(Level::n_edges).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dot;

    fn tridiag(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn exact_solution_is_fixed() {
        let a = tridiag(8);
        let x_exact: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x_exact);
        let mut x = x_exact.clone();
        symmetric_gauss_seidel(&a, &mut x, &b, 1).unwrap();
        for (u, v) in x.iter().zip(&x_exact) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_system_solved_in_one_sweep() {
        let a = SparseMatrix::from_diagonal(&[2.0, 4.0, 8.0]);
        let mut x = vec![0.0; 3];
        symmetric_gauss_seidel(&a, &mut x, &[2.0, 2.0, 2.0], 1).unwrap();
        assert_eq!(x, vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn energy_error_decreases() {
        let a = tridiag(8);
        let b: Vec<f64> = (0..8).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let exact = {
            let dense = a.to_dense();
            let m = DMatrix::from_fn(8, 8, |i, j| dense[i][j]);
            m.lu().solve(&DVector::from_column_slice(&b)).unwrap()
        };
        let err_norm = |x: &[f64]| {
            let e: Vec<f64> = x.iter().zip(exact.iter()).map(|(u, v)| u - v).collect();
            dot(&e, &a.mul_vec(&e)).sqrt()
        };
        let mut x = vec![0.0; 8];
        let e0 = err_norm(&x);
        symmetric_gauss_seidel(&a, &mut x, &b, 1).unwrap();
        assert!(err_norm(&x) < e0);
    }

    #[test]
    fn zero_diagonal_is_reported() {
        let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 1.0]]);
        let mut x = vec![0.0; 2];
        assert!(matches!(
            symmetric_gauss_seidel(&a, &mut x, &[1.0, 1.0], 1),
            Err(Error::ZeroDiagonal { row: 0 })
        ));
    }
}
