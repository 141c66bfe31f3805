//! Stationarity of the geometric edge prolongator on nested triangle meshes.
//!
//! A coarse structured triangle mesh is refined by an integer factor with the
//! same diagonal orientation, so every fine triangle sits inside one coarse
//! triangle. The nodal prolongator is linear interpolation and the edge
//! prolongator samples coarse Whitney functions along fine edges. For such a
//! pair the commutator holds exactly, and `S P_0` vanishes on every fine edge
//! that does not lie on a coarse edge, so an energy-minimization step leaves
//! those rows untouched.

use serde::Serialize;

use crate::discretize::{assemble_curl_curl, build_discrete_gradient};
use crate::error::{Error, Result};
use crate::mesh::{build_structured_mesh, ElementKind, Mesh};
use crate::sparse::{spgemm, SparseMatrix};

#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub coarse_nodes: usize,
    pub refine: usize,
    pub n_fine_edges: usize,
    pub n_coarse_edges: usize,
    /// `max |P_0 D_H - D_h P_n|`.
    pub feasibility_residual: f64,
    /// Fine edges not contained in a coarse edge.
    pub interior_rows: usize,
    /// `max |S P_0|` over interior rows.
    pub interior_gradient_max: f64,
    /// `max |S P_0|` over the remaining rows, for contrast.
    pub boundary_gradient_max: f64,
}

/// Barycentric weights at a point of coarse cell `(ci, cj)` with local
/// coordinates `(a, b) / scale`, `0 <= a, b <= scale`, as
/// `(coarse cell corner offset, weight)` plus reference gradients.
struct Local {
    corners: [(usize, usize); 3],
    lambda: [f64; 3],
    grad: [[f64; 2]; 3],
}

fn local_frame(a: usize, b: usize, scale: usize) -> Local {
    let (s, t, r) = (a as f64, b as f64, scale as f64);
    if a >= b {
        // lower triangle (0,0), (1,0), (1,1)
        Local {
            corners: [(0, 0), (1, 0), (1, 1)],
            lambda: [(r - s) / r, (s - t) / r, t / r],
            grad: [[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]],
        }
    } else {
        // upper triangle (0,0), (1,1), (0,1)
        Local {
            corners: [(0, 0), (1, 1), (0, 1)],
            lambda: [(r - t) / r, s / r, (t - s) / r],
            grad: [[0.0, -1.0], [1.0, 0.0], [-1.0, 1.0]],
        }
    }
}

/// Coarse cell index and local offset along one axis for a position given in
/// units of `1 / scale` coarse cells.
fn locate(pos: usize, scale: usize, n_cells: usize) -> (usize, usize) {
    let cell = (pos / scale).min(n_cells - 1);
    (cell, pos - cell * scale)
}

/// Linear interpolation from coarse to fine nodes.
fn linear_nodal_prolongator(coarse: &Mesh, fine: &Mesh, refine: usize) -> SparseMatrix {
    let nc = coarse.nodal_shape()[0];
    let nf = fine.nodal_shape()[0];
    let mut triplets = Vec::new();
    for fj in 0..nf {
        for fi in 0..nf {
            let (ci, a) = locate(fi, refine, nc - 1);
            let (cj, b) = locate(fj, refine, nc - 1);
            let frame = local_frame(a, b, refine);
            for (&(di, dj), &w) in frame.corners.iter().zip(&frame.lambda) {
                if w != 0.0 {
                    triplets.push((fi + nf * fj, ci + di + nc * (cj + dj), w));
                }
            }
        }
    }
    SparseMatrix::from_triplets(fine.n_nodes(), coarse.n_nodes(), &triplets)
        .expect("indices in range")
}

/// Coarse Whitney functions integrated along each fine edge.
fn whitney_prolongator(coarse: &Mesh, fine: &Mesh, refine: usize) -> Result<SparseMatrix> {
    let nc = coarse.nodal_shape()[0];
    let nf = fine.nodal_shape()[0];
    let mut triplets = Vec::new();
    for (e, &[t, h]) in fine.edges().iter().enumerate() {
        let (ti, tj) = (t % nf, t / nf);
        let (hi, hj) = (h % nf, h / nf);
        // midpoint in half fine steps
        let (ci, a) = locate(ti + hi, 2 * refine, nc - 1);
        let (cj, b) = locate(tj + hj, 2 * refine, nc - 1);
        let frame = local_frame(a, b, 2 * refine);
        let delta = [hi as f64 - ti as f64, hj as f64 - tj as f64];
        let corner_node = |k: usize| {
            let (di, dj) = frame.corners[k];
            ci + di + nc * (cj + dj)
        };
        let along = |k: usize| (frame.grad[k][0] * delta[0] + frame.grad[k][1] * delta[1]) / refine as f64;
        for (p, q) in [(0, 1), (1, 2), (2, 0)] {
            let (np, nq) = (corner_node(p), corner_node(q));
            let edge = coarse.find_edge(np, nq).ok_or_else(|| {
                Error::InvalidStructure(format!("coarse edge {np}-{nq} missing"))
            })?;
            let [ct, _] = coarse.edges()[edge];
            let (tail, head) = if ct == np { (p, q) } else { (q, p) };
            let v = frame.lambda[tail] * along(head) - frame.lambda[head] * along(tail);
            if v != 0.0 {
                triplets.push((e, edge, v));
            }
        }
    }
    SparseMatrix::from_triplets(fine.n_edges(), coarse.n_edges(), &triplets)
}

/// Whether a fine edge lies on a coarse edge (grid line or cell diagonal).
fn on_coarse_edge(fine: &Mesh, refine: usize, edge: [usize; 2]) -> bool {
    let nf = fine.nodal_shape()[0];
    let [t, h] = edge;
    let (ti, tj) = (t % nf, t / nf);
    let (hi, hj) = (h % nf, h / nf);
    if ti == hi {
        return ti % refine == 0;
    }
    if tj == hj {
        return tj % refine == 0;
    }
    let (i0, j0) = (ti.min(hi), tj.min(hj));
    i0 % refine == j0 % refine
}

/// Builds the nested pair with `coarse_nodes` nodes per side and refinement
/// factor `refine`, and measures feasibility and the interior gradient.
pub fn validate_ideal_stationarity(coarse_nodes: usize, refine: usize) -> Result<StationarityReport> {
    if coarse_nodes < 2 {
        return Err(Error::InvalidParameter(format!(
            "coarse mesh needs at least 2 nodes per side, got {coarse_nodes}"
        )));
    }
    if refine < 2 {
        return Err(Error::InvalidParameter(format!(
            "refinement factor must be at least 2, got {refine}"
        )));
    }
    let fine_nodes = (coarse_nodes - 1) * refine + 1;
    let coarse = build_structured_mesh(2, ElementKind::Tri, &[coarse_nodes; 2], false)?;
    let fine = build_structured_mesh(2, ElementKind::Tri, &[fine_nodes; 2], false)?;

    let p_n = linear_nodal_prolongator(&coarse, &fine, refine);
    let p_0 = whitney_prolongator(&coarse, &fine, refine)?;
    let d_h = build_discrete_gradient(&fine);
    let d_c = build_discrete_gradient(&coarse);
    let feasibility_residual = spgemm(&p_0, &d_c)?
        .add_scaled(1.0, &spgemm(&d_h, &p_n)?, -1.0)?
        .max_abs();

    let sp = spgemm(&assemble_curl_curl(&fine)?, &p_0)?;
    let mut interior_rows = 0;
    let mut interior_gradient_max = 0.0f64;
    let mut boundary_gradient_max = 0.0f64;
    for (e, &edge) in fine.edges().iter().enumerate() {
        let row_max = sp.row(e).1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if on_coarse_edge(&fine, refine, edge) {
            boundary_gradient_max = boundary_gradient_max.max(row_max);
        } else {
            interior_rows += 1;
            interior_gradient_max = interior_gradient_max.max(row_max);
        }
    }

    Ok(StationarityReport {
        coarse_nodes,
        refine,
        n_fine_edges: fine.n_edges(),
        n_coarse_edges: coarse.n_edges(),
        feasibility_residual,
        interior_rows,
        interior_gradient_max,
        boundary_gradient_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_refined_twice() {
        let r = validate_ideal_stationarity(2, 2).unwrap();
        assert_eq!(r.n_coarse_edges, 5);
        assert_eq!(r.n_fine_edges, 16);
        // 3 interior edges per coarse triangle
        assert_eq!(r.interior_rows, 6);
        assert!(r.feasibility_residual <= 1e-12);
        assert!(r.interior_gradient_max <= 1e-12);
        assert!(r.boundary_gradient_max > 1e-3);
    }

    #[test]
    fn linear_interpolation_preserves_constants() {
        let coarse = build_structured_mesh(2, ElementKind::Tri, &[3, 3], false).unwrap();
        let fine = build_structured_mesh(2, ElementKind::Tri, &[7, 7], false).unwrap();
        let p = linear_nodal_prolongator(&coarse, &fine, 3);
        for s in p.mul_vec(&vec![1.0; coarse.n_nodes()]) {
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn refinement_below_two_is_rejected() {
        assert!(validate_ideal_stationarity(4, 1).is_err());
        assert!(validate_ideal_stationarity(1, 2).is_err());
    }
}
