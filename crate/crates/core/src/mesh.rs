//! Structured meshes on the unit square and unit cube.
//!
//! Nodes are numbered lexicographically (x fastest). Every edge is stored
//! with `tail < head`, and edges are numbered in lexicographic order of
//! `(tail, head)`.

use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Tri,
    Quad,
    Tet,
    Hex,
}

impl ElementKind {
    pub fn dim(self) -> usize {
        match self {
            ElementKind::Tri | ElementKind::Quad => 2,
            ElementKind::Tet | ElementKind::Hex => 3,
        }
    }

    pub fn is_simplex(self) -> bool {
        matches!(self, ElementKind::Tri | ElementKind::Tet)
    }
}

/// Edge reference inside an element: global edge index and orientation sign.
///
/// In 2D the sign is relative to the counter-clockwise traversal of the
/// element boundary; in 3D it is relative to the local vertex order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedEdge {
    pub edge: usize,
    pub sign: i8,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    kind: ElementKind,
    nodal_shape: Vec<usize>,
    spacing: Vec<f64>,
    node_coords: Vec<[f64; 3]>,
    edges: Vec<[usize; 2]>,
    elements: Vec<Vec<usize>>,
    element_edges: Vec<Vec<SignedEdge>>,
    dirichlet_nodes: Vec<bool>,
}

impl Mesh {
    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn nodal_shape(&self) -> &[usize] {
        &self.nodal_shape
    }

    /// Uniform grid spacing per axis.
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node_coords(&self) -> &[[f64; 3]] {
        &self.node_coords
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn element_edges(&self) -> &[Vec<SignedEdge>] {
        &self.element_edges
    }

    pub fn dirichlet_nodes(&self) -> &[bool] {
        &self.dirichlet_nodes
    }

    pub fn has_dirichlet(&self) -> bool {
        self.dirichlet_nodes.iter().any(|&d| d)
    }

    /// Looks up the edge joining two nodes (either order).
    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        let key = [a.min(b), a.max(b)];
        self.edges.binary_search(&key).ok()
    }

    /// Human-readable nodal shape, e.g. `28x28`.
    pub fn shape_label(&self) -> String {
        self.nodal_shape
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("x")
    }
}

/// Closed-form edge count for a structured mesh with `n` nodes per axis.
pub fn expected_edge_count(kind: ElementKind, n: usize) -> usize {
    let m = n - 1;
    match kind {
        ElementKind::Quad => 2 * n * m,
        ElementKind::Tri => 2 * n * m + m * m,
        ElementKind::Hex => 3 * n * n * m,
        ElementKind::Tet => 3 * n * n * m + 3 * n * m * m + m * m * m,
    }
}

/// Builds a uniform mesh of the unit square (2D) or unit cube (3D).
///
/// Triangles split every cell along its (0,0)-(1,1) diagonal; tetrahedra use
/// the six-tetrahedron split around the main cell diagonal, so face diagonals
/// of neighbouring cells match. With `dirichlet` set, every boundary node is
/// flagged as carrying an essential condition.
pub fn build_structured_mesh(
    dim: usize,
    kind: ElementKind,
    nodal_shape: &[usize],
    dirichlet: bool,
) -> Result<Mesh> {
    if kind.dim() != dim {
        return Err(Error::UnsupportedMesh(format!(
            "{kind:?} elements in {dim} dimensions"
        )));
    }
    if nodal_shape.len() != dim {
        return Err(Error::UnsupportedMesh(format!(
            "nodal shape {nodal_shape:?} does not have {dim} entries"
        )));
    }
    if nodal_shape.iter().any(|&n| n < 2) {
        return Err(Error::UnsupportedMesh(format!(
            "nodal shape {nodal_shape:?} needs at least 2 nodes per axis"
        )));
    }

    let shape3 = [
        nodal_shape[0],
        nodal_shape[1],
        if dim == 3 { nodal_shape[2] } else { 1 },
    ];
    let spacing: Vec<f64> = nodal_shape.iter().map(|&n| 1.0 / (n - 1) as f64).collect();
    let node = |i: usize, j: usize, k: usize| i + shape3[0] * (j + shape3[1] * k);

    let mut node_coords = Vec::with_capacity(shape3.iter().product());
    let mut dirichlet_nodes = Vec::with_capacity(node_coords.capacity());
    for k in 0..shape3[2] {
        for j in 0..shape3[1] {
            for i in 0..shape3[0] {
                let z = if dim == 3 { k as f64 * spacing[2] } else { 0.0 };
                node_coords.push([i as f64 * spacing[0], j as f64 * spacing[1], z]);
                let on_boundary = i == 0
                    || j == 0
                    || i + 1 == shape3[0]
                    || j + 1 == shape3[1]
                    || (dim == 3 && (k == 0 || k + 1 == shape3[2]));
                dirichlet_nodes.push(dirichlet && on_boundary);
            }
        }
    }

    let cells = [
        shape3[0] - 1,
        shape3[1] - 1,
        if dim == 3 { shape3[2] - 1 } else { 1 },
    ];
    let mut elements: Vec<Vec<usize>> = Vec::new();
    for k in 0..cells[2] {
        for j in 0..cells[1] {
            for i in 0..cells[0] {
                match kind {
                    ElementKind::Quad => elements.push(vec![
                        node(i, j, 0),
                        node(i + 1, j, 0),
                        node(i + 1, j + 1, 0),
                        node(i, j + 1, 0),
                    ]),
                    ElementKind::Tri => {
                        let (n00, n10, n11, n01) = (
                            node(i, j, 0),
                            node(i + 1, j, 0),
                            node(i + 1, j + 1, 0),
                            node(i, j + 1, 0),
                        );
                        elements.push(vec![n00, n10, n11]);
                        elements.push(vec![n00, n11, n01]);
                    }
                    ElementKind::Hex => {
                        let mut v = Vec::with_capacity(8);
                        for b in 0..8 {
                            v.push(node(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1)));
                        }
                        elements.push(v);
                    }
                    ElementKind::Tet => {
                        const PERMS: [[usize; 3]; 6] = [
                            [0, 1, 2],
                            [0, 2, 1],
                            [1, 0, 2],
                            [1, 2, 0],
                            [2, 0, 1],
                            [2, 1, 0],
                        ];
                        for perm in PERMS {
                            let mut c = [i, j, k];
                            let mut v = vec![node(c[0], c[1], c[2])];
                            for axis in perm {
                                c[axis] += 1;
                                v.push(node(c[0], c[1], c[2]));
                            }
                            elements.push(v);
                        }
                    }
                }
            }
        }
    }

    let local_edges = local_edge_table(kind);
    let mut edges: Vec<[usize; 2]> = elements
        .iter()
        .flat_map(|el| {
            local_edges.iter().map(move |&(a, b)| {
                let (x, y) = (el[a], el[b]);
                [x.min(y), x.max(y)]
            })
        })
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let edge_index: HashMap<[usize; 2], usize> =
        edges.iter().enumerate().map(|(e, &k)| (k, e)).collect();

    let element_edges = elements
        .iter()
        .map(|el| {
            local_edges
                .iter()
                .map(|&(a, b)| {
                    let (x, y) = (el[a], el[b]);
                    SignedEdge {
                        edge: edge_index[&[x.min(y), x.max(y)]],
                        sign: if x < y { 1 } else { -1 },
                    }
                })
                .collect()
        })
        .collect();

    Ok(Mesh {
        kind,
        nodal_shape: nodal_shape.to_vec(),
        spacing,
        node_coords,
        edges,
        elements,
        element_edges,
        dirichlet_nodes,
    })
}

/// Local edges as ordered vertex pairs.
///
/// 2D entries follow the counter-clockwise boundary traversal. Hex edges run
/// from the lower to the higher local vertex along each axis.
pub(crate) fn local_edge_table(kind: ElementKind) -> &'static [(usize, usize)] {
    match kind {
        ElementKind::Tri => &[(0, 1), (1, 2), (2, 0)],
        ElementKind::Quad => &[(0, 1), (1, 2), (2, 3), (3, 0)],
        ElementKind::Tet => &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        ElementKind::Hex => &[
            // x-directed
            (0, 1),
            (2, 3),
            (4, 5),
            (6, 7),
            // y-directed
            (0, 2),
            (1, 3),
            (4, 6),
            (5, 7),
            // z-directed
            (0, 4),
            (1, 5),
            (2, 6),
            (3, 7),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_edge_counts() {
        let quad = build_structured_mesh(2, ElementKind::Quad, &[28, 28], false).unwrap();
        assert_eq!(quad.n_edges(), 1512);
        let tri = build_structured_mesh(2, ElementKind::Tri, &[28, 28], false).unwrap();
        assert_eq!(tri.n_edges(), 2241);
        let tet = build_structured_mesh(3, ElementKind::Tet, &[10, 10, 10], false).unwrap();
        assert_eq!(tet.n_edges(), 5859);
        let hex = build_structured_mesh(3, ElementKind::Hex, &[10, 10, 10], false).unwrap();
        assert_eq!(hex.n_edges(), 2700);
    }

    #[test]
    fn closed_form_counts_for_small_meshes() {
        for n in 2..=12 {
            for kind in [ElementKind::Tri, ElementKind::Quad] {
                let m = build_structured_mesh(2, kind, &[n, n], false).unwrap();
                assert_eq!(m.n_edges(), expected_edge_count(kind, n), "{kind:?} n={n}");
            }
        }
        for n in 2..=8 {
            for kind in [ElementKind::Tet, ElementKind::Hex] {
                let m = build_structured_mesh(3, kind, &[n, n, n], false).unwrap();
                assert_eq!(m.n_edges(), expected_edge_count(kind, n), "{kind:?} n={n}");
            }
        }
    }

    #[test]
    fn unsupported_combinations() {
        assert!(matches!(
            build_structured_mesh(3, ElementKind::Tri, &[3, 3, 3], false),
            Err(Error::UnsupportedMesh(_))
        ));
        assert!(build_structured_mesh(2, ElementKind::Quad, &[1, 3], false).is_err());
        assert!(build_structured_mesh(2, ElementKind::Quad, &[3, 3, 3], false).is_err());
    }

    #[test]
    fn edges_are_canonical_and_signs_valid() {
        for (dim, kind, shape) in [
            (2, ElementKind::Tri, vec![4, 5]),
            (2, ElementKind::Quad, vec![4, 3]),
            (3, ElementKind::Tet, vec![3, 3, 3]),
            (3, ElementKind::Hex, vec![3, 4, 3]),
        ] {
            let m = build_structured_mesh(dim, kind, &shape, false).unwrap();
            assert!(m.edges().iter().all(|e| e[0] < e[1] && e[1] < m.n_nodes()));
            for (el, refs) in m.elements().iter().zip(m.element_edges()) {
                for (&(a, b), se) in local_edge_table(kind).iter().zip(refs) {
                    let [t, h] = m.edges()[se.edge];
                    assert!(se.sign == 1 || se.sign == -1);
                    if se.sign == 1 {
                        assert_eq!((el[a], el[b]), (t, h));
                    } else {
                        assert_eq!((el[a], el[b]), (h, t));
                    }
                }
            }
        }
    }

    #[test]
    fn dirichlet_flags_boundary_only() {
        let m = build_structured_mesh(2, ElementKind::Quad, &[4, 4], true).unwrap();
        let flagged = m.dirichlet_nodes().iter().filter(|&&d| d).count();
        assert_eq!(flagged, 12);
        let natural = build_structured_mesh(2, ElementKind::Quad, &[4, 4], false).unwrap();
        assert!(!natural.has_dirichlet());
    }
}
