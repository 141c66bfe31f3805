//! Lowest-order edge-element and nodal operators on structured meshes.
//!
//! Edge degrees of freedom are tangential line integrals along `tail -> head`.
//! The curl-curl matrix is assembled element by element in factored form
//! `Cᵀ W C`, where `C` maps edge values to face circulations (an integer
//! incidence) and `W` is the local mass of the curl on faces. Because
//! `C · grad = 0` holds exactly in integers, `S · D` vanishes to round-off.
//!
//! When the mesh carries Dirichlet nodes, every operator is restricted to the
//! free degrees of freedom: nodes without a Dirichlet flag, and edges with at
//! least one free endpoint.

use crate::error::{Error, Result};
use crate::mesh::{local_edge_table, ElementKind, Mesh};
use crate::sparse::SparseMatrix;

/// Operators for one model problem `curl curl u + sigma u = f`.
#[derive(Debug, Clone)]
pub struct DiscretizedSystem {
    /// Curl-curl matrix.
    pub s: SparseMatrix,
    /// Edge mass scaled by sigma.
    pub m: SparseMatrix,
    /// `s + m`.
    pub a_e: SparseMatrix,
    /// Nodal `-Δ + sigma` matrix on free nodes.
    pub a_n: SparseMatrix,
    /// Discrete gradient, free edges by free nodes.
    pub d: SparseMatrix,
    pub sigma: f64,
}

impl DiscretizedSystem {
    pub fn assemble(mesh: &Mesh, sigma: f64) -> Result<Self> {
        let s = assemble_curl_curl(mesh)?;
        let m = assemble_edge_mass(mesh, sigma)?;
        let a_e = s.add_scaled(1.0, &m, 1.0)?;
        let a_n = assemble_nodal_problem(mesh, sigma)?;
        let d = build_discrete_gradient(mesh);
        Ok(Self {
            s,
            m,
            a_e,
            a_n,
            d,
            sigma,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.a_e.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.a_n.nrows()
    }
}

/// Maps mesh edges and nodes to free degree-of-freedom indices.
#[derive(Debug, Clone)]
pub struct FreeDofs {
    pub edge_map: Vec<Option<usize>>,
    pub node_map: Vec<Option<usize>>,
    pub n_edges: usize,
    pub n_nodes: usize,
}

impl FreeDofs {
    pub fn new(mesh: &Mesh) -> Self {
        let dir = mesh.dirichlet_nodes();
        let mut n_nodes = 0;
        let node_map = dir
            .iter()
            .map(|&d| {
                (!d).then(|| {
                    n_nodes += 1;
                    n_nodes - 1
                })
            })
            .collect();
        let mut n_edges = 0;
        let edge_map = mesh
            .edges()
            .iter()
            .map(|&[t, h]| {
                (!(dir[t] && dir[h])).then(|| {
                    n_edges += 1;
                    n_edges - 1
                })
            })
            .collect();
        Self {
            edge_map,
            node_map,
            n_edges,
            n_nodes,
        }
    }
}

/// Row per free edge: -1 at the tail, +1 at the head; Dirichlet columns removed.
pub fn build_discrete_gradient(mesh: &Mesh) -> SparseMatrix {
    let free = FreeDofs::new(mesh);
    let mut triplets = Vec::with_capacity(2 * free.n_edges);
    for (e, &[t, h]) in mesh.edges().iter().enumerate() {
        let Some(row) = free.edge_map[e] else { continue };
        if let Some(c) = free.node_map[t] {
            triplets.push((row, c, -1.0));
        }
        if let Some(c) = free.node_map[h] {
            triplets.push((row, c, 1.0));
        }
    }
    SparseMatrix::from_triplets(free.n_edges, free.n_nodes, &triplets)
        .expect("gradient indices are in range")
}

/// Curl-curl matrix `S`, symmetric positive semidefinite.
pub fn assemble_curl_curl(mesh: &Mesh) -> Result<SparseMatrix> {
    assemble_edge_operator(mesh, |el| {
        let (incidence, weight) = element_curl(mesh, el)?;
        Ok(congruence(&incidence, &weight))
    })
}

/// Edge mass matrix scaled by `sigma > 0`.
pub fn assemble_edge_mass(mesh: &Mesh, sigma: f64) -> Result<SparseMatrix> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "edge mass needs sigma > 0, got {sigma}"
        )));
    }
    let unit = assemble_edge_operator(mesh, |el| element_edge_mass(mesh, el))?;
    Ok(unit.scaled(sigma))
}

/// First-order nodal matrix for `-Δ u + sigma u` on the free nodes.
pub fn assemble_nodal_problem(mesh: &Mesh, sigma: f64) -> Result<SparseMatrix> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "nodal problem needs sigma >= 0, got {sigma}"
        )));
    }
    let free = FreeDofs::new(mesh);
    let mut triplets = Vec::new();
    for (e, nodes) in mesh.elements().iter().enumerate() {
        let (stiff, mass) = element_nodal(mesh, e)?;
        let n = nodes.len();
        for a in 0..n {
            let Some(ra) = free.node_map[nodes[a]] else { continue };
            for b in 0..n {
                let Some(rb) = free.node_map[nodes[b]] else { continue };
                triplets.push((ra, rb, stiff[a * n + b] + sigma * mass[a * n + b]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(free.n_nodes, free.n_nodes, &triplets)?.compress(0.0))
}

/// Nodal mass matrix on the free nodes.
pub fn assemble_nodal_mass(mesh: &Mesh) -> Result<SparseMatrix> {
    let free = FreeDofs::new(mesh);
    let mut triplets = Vec::new();
    for (e, nodes) in mesh.elements().iter().enumerate() {
        let (_, mass) = element_nodal(mesh, e)?;
        let n = nodes.len();
        for a in 0..n {
            let Some(ra) = free.node_map[nodes[a]] else { continue };
            for b in 0..n {
                let Some(rb) = free.node_map[nodes[b]] else { continue };
                triplets.push((ra, rb, mass[a * n + b]));
            }
        }
    }
    SparseMatrix::from_triplets(free.n_nodes, free.n_nodes, &triplets)
}

/// Scatters element matrices (expressed in local edge orientation) into a
/// global matrix over free edges.
fn assemble_edge_operator<F>(mesh: &Mesh, local: F) -> Result<SparseMatrix>
where
    F: Fn(usize) -> Result<Vec<f64>>,
{
    let free = FreeDofs::new(mesh);
    let mut triplets = Vec::new();
    for (e, refs) in mesh.element_edges().iter().enumerate() {
        let k = local(e)?;
        let n = refs.len();
        for a in 0..n {
            let Some(ra) = free.edge_map[refs[a].edge] else { continue };
            for b in 0..n {
                let Some(rb) = free.edge_map[refs[b].edge] else { continue };
                let s = f64::from(refs[a].sign * refs[b].sign);
                triplets.push((ra, rb, s * k[a * n + b]));
            }
        }
    }
    SparseMatrix::from_triplets(free.n_edges, free.n_edges, &triplets)
}

/// `Cᵀ W C` for a row-major `C` (faces x edges) and `W` (faces x faces).
fn congruence(c: &[Vec<f64>], w: &[Vec<f64>]) -> Vec<f64> {
    let nf = c.len();
    let ne = c[0].len();
    let mut wc = vec![vec![0.0; ne]; nf];
    for f in 0..nf {
        for g in 0..nf {
            if w[f][g] != 0.0 {
                for e in 0..ne {
                    wc[f][e] += w[f][g] * c[g][e];
                }
            }
        }
    }
    let mut out = vec![0.0; ne * ne];
    for a in 0..ne {
        for b in 0..ne {
            out[a * ne + b] = (0..nf).map(|f| c[f][a] * wc[f][b]).sum();
        }
    }
    out
}

fn element_coords(mesh: &Mesh, el: usize) -> Vec<[f64; 3]> {
    mesh.elements()[el]
        .iter()
        .map(|&n| mesh.node_coords()[n])
        .collect()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Inverse of a 3x3 row-major matrix, or `None` when singular.
fn inverse3(m: [[f64; 3]; 3]) -> Option<([[f64; 3]; 3], f64)> {
    let c0 = cross(m[1], m[2]);
    let det = dot3(m[0], c0);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let c1 = cross(m[2], m[0]);
    let c2 = cross(m[0], m[1]);
    // columns of the inverse are the cofactor rows over det
    let inv = [
        [c0[0] / det, c1[0] / det, c2[0] / det],
        [c0[1] / det, c1[1] / det, c2[1] / det],
        [c0[2] / det, c1[2] / det, c2[2] / det],
    ];
    Some((inv, det))
}

/// Measure and barycentric gradients of a simplex.
pub(crate) fn simplex_geometry(
    coords: &[[f64; 3]],
    dim: usize,
    el: usize,
) -> Result<(f64, Vec<[f64; 3]>)> {
    let degenerate = || Error::DegenerateElement { element: el };
    match dim {
        2 => {
            let e1 = sub(coords[1], coords[0]);
            let e2 = sub(coords[2], coords[0]);
            let det = e1[0] * e2[1] - e1[1] * e2[0];
            if det == 0.0 || !det.is_finite() {
                return Err(degenerate());
            }
            // rows of inverse([[e1x, e2x], [e1y, e2y]])
            let g1 = [e2[1] / det, -e2[0] / det, 0.0];
            let g2 = [-e1[1] / det, e1[0] / det, 0.0];
            let g0 = [-g1[0] - g2[0], -g1[1] - g2[1], 0.0];
            Ok((det.abs() / 2.0, vec![g0, g1, g2]))
        }
        3 => {
            let e1 = sub(coords[1], coords[0]);
            let e2 = sub(coords[2], coords[0]);
            let e3 = sub(coords[3], coords[0]);
            // J has columns e1, e2, e3; gradients are the rows of J⁻¹
            let jac = [
                [e1[0], e2[0], e3[0]],
                [e1[1], e2[1], e3[1]],
                [e1[2], e2[2], e3[2]],
            ];
            let (inv, det) = inverse3(jac).ok_or_else(degenerate)?;
            let g0 = [
                -(inv[0][0] + inv[1][0] + inv[2][0]),
                -(inv[0][1] + inv[1][1] + inv[2][1]),
                -(inv[0][2] + inv[1][2] + inv[2][2]),
            ];
            Ok((det.abs() / 6.0, vec![g0, inv[0], inv[1], inv[2]]))
        }
        _ => Err(Error::UnsupportedMesh(format!("simplex of dimension {dim}"))),
    }
}

/// Axis-aligned box description of a tensor-product element.
struct BoxElement {
    lo: [f64; 3],
    h: [f64; 3],
    dim: usize,
}

impl BoxElement {
    fn new(coords: &[[f64; 3]], dim: usize, el: usize) -> Result<Self> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for c in coords {
            for k in 0..dim {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        let mut h = [1.0; 3];
        for k in 0..dim {
            h[k] = hi[k] - lo[k];
            if !(h[k] > 0.0) {
                return Err(Error::DegenerateElement { element: el });
            }
        }
        Ok(Self { lo, h, dim })
    }

    /// 0/1 position of a vertex along each axis.
    fn bits(&self, x: [f64; 3]) -> [usize; 3] {
        let mut b = [0; 3];
        for k in 0..self.dim {
            b[k] = usize::from((x[k] - self.lo[k]) > 0.5 * self.h[k]);
        }
        b
    }

    fn volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }
}

/// Edge axis, direction (+1 along the axis) and the 0/1 position on the other axes.
fn box_edge(bx: &BoxElement, a: [f64; 3], b: [f64; 3]) -> (usize, f64, [usize; 3]) {
    let (ba, bb) = (bx.bits(a), bx.bits(b));
    let axis = (0..bx.dim).find(|&k| ba[k] != bb[k]).expect("edge spans one axis");
    let dir = if bb[axis] > ba[axis] { 1.0 } else { -1.0 };
    (axis, dir, ba)
}

/// Face-circulation incidence (local edge orientation) and curl face mass.
fn element_curl(mesh: &Mesh, el: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let coords = element_coords(mesh, el);
    let kind = mesh.kind();
    match kind {
        ElementKind::Tri | ElementKind::Quad => {
            // local table follows the counter-clockwise boundary
            let area = if kind == ElementKind::Tri {
                simplex_geometry(&coords, 2, el)?.0
            } else {
                BoxElement::new(&coords, 2, el)?.volume()
            };
            let n = local_edge_table(kind).len();
            Ok((vec![vec![1.0; n]], vec![vec![1.0 / area]]))
        }
        ElementKind::Tet => {
            let (vol, _) = simplex_geometry(&coords, 3, el)?;
            let table = local_edge_table(kind);
            let local = |a: usize, b: usize| table.iter().position(|&p| p == (a, b)).unwrap();
            // three faces suffice: the fourth circulation is their signed sum
            let faces = [(0, 1, 2), (0, 1, 3), (0, 2, 3)];
            let mut c = vec![vec![0.0; 6]; 3];
            let mut normals = [[0.0; 3]; 3];
            for (f, &(a, b, d)) in faces.iter().enumerate() {
                c[f][local(a, b)] = 1.0;
                c[f][local(b, d)] = 1.0;
                c[f][local(a, d)] = -1.0;
                let n = cross(sub(coords[b], coords[a]), sub(coords[d], coords[a]));
                normals[f] = [0.5 * n[0], 0.5 * n[1], 0.5 * n[2]];
            }
            // circulation_f = N_f · curl, so curl = N⁻¹ circ and W = |T| N⁻ᵀ N⁻¹
            let (ninv, _) =
                inverse3(normals).ok_or(Error::DegenerateElement { element: el })?;
            let mut w = vec![vec![0.0; 3]; 3];
            for f in 0..3 {
                for g in 0..3 {
                    w[f][g] = vol * (0..3).map(|k| ninv[k][f] * ninv[k][g]).sum::<f64>();
                }
            }
            Ok((c, w))
        }
        ElementKind::Hex => {
            let bx = BoxElement::new(&coords, 3, el)?;
            let table = local_edge_table(kind);
            let edge_info: Vec<(usize, [usize; 3])> = table
                .iter()
                .map(|&(a, b)| {
                    let (axis, _, pos) = box_edge(&bx, coords[a], coords[b]);
                    (axis, pos)
                })
                .collect();
            let find = |axis: usize, pos: [usize; 3]| {
                edge_info
                    .iter()
                    .position(|&(ax, p)| {
                        ax == axis && (0..3).all(|k| k == axis || p[k] == pos[k])
                    })
                    .expect("hex edge exists")
            };
            let mut c = vec![vec![0.0; 12]; 6];
            let mut w = vec![vec![0.0; 6]; 6];
            for d in 0..3 {
                let (d1, d2) = ((d + 1) % 3, (d + 2) % 3);
                for s in 0..2 {
                    let row = 2 * d + s;
                    let at = |p1: usize, p2: usize| {
                        let mut p = [0; 3];
                        p[d] = s;
                        p[d1] = p1;
                        p[d2] = p2;
                        p
                    };
                    // counter-clockwise in the (d1, d2) plane, normal +e_d
                    c[row][find(d1, at(0, 0))] += 1.0;
                    c[row][find(d2, at(1, 0))] += 1.0;
                    c[row][find(d1, at(0, 1))] -= 1.0;
                    c[row][find(d2, at(0, 0))] -= 1.0;
                }
                let scale = bx.h[d] / (bx.h[d1] * bx.h[d2]);
                w[2 * d][2 * d] = scale / 3.0;
                w[2 * d + 1][2 * d + 1] = scale / 3.0;
                w[2 * d][2 * d + 1] = scale / 6.0;
                w[2 * d + 1][2 * d] = scale / 6.0;
            }
            Ok((c, w))
        }
    }
}

/// Exact edge mass in local edge orientation.
fn element_edge_mass(mesh: &Mesh, el: usize) -> Result<Vec<f64>> {
    let coords = element_coords(mesh, el);
    let kind = mesh.kind();
    let dim = kind.dim();
    let table = local_edge_table(kind);
    let n = table.len();
    let mut out = vec![0.0; n * n];
    if kind.is_simplex() {
        let (vol, grads) = simplex_geometry(&coords, dim, el)?;
        let denom = ((dim + 1) * (dim + 2)) as f64;
        let lam = |i: usize, j: usize| vol * if i == j { 2.0 } else { 1.0 } / denom;
        let g = |i: usize, j: usize| dot3(grads[i], grads[j]);
        // φ_ab = λ_a ∇λ_b - λ_b ∇λ_a
        for (p, &(a, b)) in table.iter().enumerate() {
            for (q, &(c, d)) in table.iter().enumerate() {
                out[p * n + q] =
                    g(b, d) * lam(a, c) - g(b, c) * lam(a, d) - g(a, d) * lam(b, c)
                        + g(a, c) * lam(b, d);
            }
        }
    } else {
        let bx = BoxElement::new(&coords, dim, el)?;
        let info: Vec<(usize, f64, [usize; 3])> = table
            .iter()
            .map(|&(a, b)| box_edge(&bx, coords[a], coords[b]))
            .collect();
        for (p, &(ax, dir_p, pos_p)) in info.iter().enumerate() {
            for (q, &(bx_axis, dir_q, pos_q)) in info.iter().enumerate() {
                if ax != bx_axis {
                    continue;
                }
                let mut v = 1.0 / bx.h[ax];
                for k in (0..dim).filter(|&k| k != ax) {
                    let m = if pos_p[k] == pos_q[k] { 1.0 / 3.0 } else { 1.0 / 6.0 };
                    v *= bx.h[k] * m;
                }
                out[p * n + q] = dir_p * dir_q * v;
            }
        }
    }
    Ok(out)
}

/// Local nodal stiffness and mass, row-major.
fn element_nodal(mesh: &Mesh, el: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let coords = element_coords(mesh, el);
    let kind = mesh.kind();
    let dim = kind.dim();
    let n = coords.len();
    let mut stiff = vec![0.0; n * n];
    let mut mass = vec![0.0; n * n];
    if kind.is_simplex() {
        let (vol, grads) = simplex_geometry(&coords, dim, el)?;
        let denom = ((dim + 1) * (dim + 2)) as f64;
        for a in 0..n {
            for b in 0..n {
                stiff[a * n + b] = vol * dot3(grads[a], grads[b]);
                mass[a * n + b] = vol * if a == b { 2.0 } else { 1.0 } / denom;
            }
        }
    } else {
        let bx = BoxElement::new(&coords, dim, el)?;
        let bits: Vec<[usize; 3]> = coords.iter().map(|&c| bx.bits(c)).collect();
        for a in 0..n {
            for b in 0..n {
                let m1: Vec<f64> = (0..dim)
                    .map(|k| bx.h[k] * if bits[a][k] == bits[b][k] { 1.0 / 3.0 } else { 1.0 / 6.0 })
                    .collect();
                let k1: Vec<f64> = (0..dim)
                    .map(|k| if bits[a][k] == bits[b][k] { 1.0 } else { -1.0 } / bx.h[k])
                    .collect();
                mass[a * n + b] = m1.iter().product();
                stiff[a * n + b] = (0..dim)
                    .map(|d| {
                        (0..dim)
                            .map(|k| if k == d { k1[k] } else { m1[k] })
                            .product::<f64>()
                    })
                    .sum();
            }
        }
    }
    Ok((stiff, mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;
    use crate::sparse::spgemm;

    fn mesh2(kind: ElementKind, n: usize) -> Mesh {
        build_structured_mesh(2, kind, &[n, n], false).unwrap()
    }

    #[test]
    fn single_edge_gradient_row() {
        let m = mesh2(ElementKind::Quad, 2);
        let d = build_discrete_gradient(&m);
        // edge (0, 1) is the first edge
        assert_eq!(m.edges()[0], [0, 1]);
        assert_eq!(d.row(0), (&[0usize, 1][..], &[-1.0, 1.0][..]));
    }

    #[test]
    fn gradient_of_2x2_quad() {
        let m = mesh2(ElementKind::Quad, 2);
        let d = build_discrete_gradient(&m);
        assert_eq!((d.nrows(), d.ncols(), d.nnz()), (4, 4, 8));
        let ones = vec![1.0; 4];
        assert!(d.mul_vec(&ones).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn curl_curl_annihilates_gradients() {
        for kind in [ElementKind::Tri, ElementKind::Quad] {
            let m = mesh2(kind, 10);
            let s = assemble_curl_curl(&m).unwrap();
            let d = build_discrete_gradient(&m);
            let sd = spgemm(&s, &d).unwrap();
            assert!(sd.max_abs() <= 1e-12 * s.max_abs(), "{kind:?}");
        }
    }

    #[test]
    fn unit_right_triangle_curl_curl() {
        // a single cell split into two triangles; check the first triangle alone
        let m = mesh2(ElementKind::Tri, 2);
        let (c, w) = element_curl(&m, 0).unwrap();
        let k = congruence(&c, &w);
        // |T| = 1/2, so S_T = 2 · c cᵀ with c all ones in traversal orientation
        assert!(k.iter().all(|&v| (v - 2.0).abs() < 1e-15));
    }

    #[test]
    fn mass_is_linear_in_sigma() {
        let m = mesh2(ElementKind::Tri, 4);
        let m1 = assemble_edge_mass(&m, 1.0).unwrap();
        let m10 = assemble_edge_mass(&m, 10.0).unwrap();
        for (a, b) in m1.values().iter().zip(m10.values()) {
            assert!((10.0 * a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
        assert!(matches!(
            assemble_edge_mass(&m, 0.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn nodal_rows_sum_to_zero_without_reaction() {
        for kind in [ElementKind::Tri, ElementKind::Quad] {
            let m = mesh2(kind, 5);
            let a = assemble_nodal_problem(&m, 0.0).unwrap();
            let ones = vec![1.0; a.ncols()];
            assert!(a.mul_vec(&ones).iter().all(|v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn interior_nodal_stencils() {
        // P1 on the split mesh reproduces the 5-point stencil
        let tri = assemble_nodal_problem(&mesh2(ElementKind::Tri, 5), 0.0).unwrap();
        let centre = 2 + 5 * 2;
        assert!((tri.get(centre, centre).unwrap() - 4.0).abs() < 1e-13);
        for nb in [centre - 1, centre + 1, centre - 5, centre + 5] {
            assert!((tri.get(centre, nb).unwrap() + 1.0).abs() < 1e-13);
        }
        // bilinear elements give the 9-point stencil 8/3, -1/3
        let quad = assemble_nodal_problem(&mesh2(ElementKind::Quad, 5), 0.0).unwrap();
        assert!((quad.get(centre, centre).unwrap() - 8.0 / 3.0).abs() < 1e-13);
        let (cols, vals) = quad.row(centre);
        assert_eq!(cols.len(), 9);
        for (&c, &v) in cols.iter().zip(vals) {
            if c != centre {
                assert!((v + 1.0 / 3.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn nodal_decomposes_into_stiffness_plus_mass() {
        let m = mesh2(ElementKind::Quad, 4);
        let a0 = assemble_nodal_problem(&m, 0.0).unwrap();
        let a1 = assemble_nodal_problem(&m, 1.0).unwrap();
        let mass = assemble_nodal_mass(&m).unwrap();
        let diff = a1.add_scaled(1.0, &a0, -1.0).unwrap().add_scaled(1.0, &mass, -1.0).unwrap();
        assert!(diff.max_abs() < 1e-14);
    }

    #[test]
    fn dirichlet_rows_have_single_entries() {
        let m = build_structured_mesh(2, ElementKind::Quad, &[4, 4], true).unwrap();
        let sys = DiscretizedSystem::assemble(&m, 1.0).unwrap();
        assert_eq!(sys.n_nodes(), 4);
        let mut singles = 0;
        for i in 0..sys.d.nrows() {
            match sys.d.row_nnz(i) {
                1 => singles += 1,
                2 => assert_eq!(sys.d.row(i).1.iter().sum::<f64>(), 0.0),
                k => panic!("row {i} has {k} entries"),
            }
        }
        assert_eq!(singles, 8);
        let sd = spgemm(&sys.s, &sys.d).unwrap();
        assert!(sd.max_abs() <= 1e-12 * sys.s.max_abs());
    }
}
