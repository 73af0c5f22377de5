use std::sync::Arc;

use super::basis::{tensor_eval, Lagrange1d};
use crate::mesh::{BoundaryTag, Side, StructuredMesh, NONE};

/// Nodes of the `Q_k` space over a structured mesh.
///
/// Lattice point `(I, J)` sits at grid subdivision `I / k` along x; the
/// vertices of the mesh are the points with `I, J` divisible by `k`.
#[derive(Debug, Clone)]
pub struct Lattice {
    mesh: Arc<StructuredMesh>,
    order: usize,
    nxl: usize,
    id: Vec<usize>,
    coords: Vec<[f64; 2]>,
    ij: Vec<(usize, usize)>,
    elem_nodes: Vec<usize>,
    basis: Lagrange1d,
}

fn sub(lines: &[f64], i: usize, k: usize) -> f64 {
    let (c, r) = (i / k, i % k);
    if r == 0 {
        lines[c]
    } else {
        lines[c] + (lines[c + 1] - lines[c]) * r as f64 / k as f64
    }
}

impl Lattice {
    pub fn new(mesh: Arc<StructuredMesh>, order: usize) -> Self {
        assert!(order >= 1);
        let k = order;
        let (nxl, nyl) = (k * mesh.nx() + 1, k * mesh.ny() + 1);
        let mut present = vec![false; nxl * nyl];
        for e in 0..mesh.elements().len() {
            let (i, j) = mesh.element_cell(e);
            for b in 0..=k {
                for a in 0..=k {
                    present[(k * j + b) * nxl + k * i + a] = true;
                }
            }
        }
        let mut id = vec![NONE; nxl * nyl];
        let mut coords = vec![];
        let mut ij = vec![];
        for jj in 0..nyl {
            for ii in 0..nxl {
                if present[jj * nxl + ii] {
                    id[jj * nxl + ii] = coords.len();
                    coords.push([sub(mesh.xs(), ii, k), sub(mesh.ys(), jj, k)]);
                    ij.push((ii, jj));
                }
            }
        }
        let nb = (k + 1) * (k + 1);
        let mut elem_nodes = Vec::with_capacity(nb * mesh.elements().len());
        for e in 0..mesh.elements().len() {
            let (i, j) = mesh.element_cell(e);
            for b in 0..=k {
                for a in 0..=k {
                    elem_nodes.push(id[(k * j + b) * nxl + k * i + a]);
                }
            }
        }
        Lattice { mesh, order, nxl, id, coords, ij, elem_nodes, basis: Lagrange1d::new(k) }
    }

    pub fn mesh(&self) -> &Arc<StructuredMesh> {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Lattice indices `(I, J)` of node `n`.
    pub fn lattice_index(&self, n: usize) -> (usize, usize) {
        self.ij[n]
    }

    /// Points per row and column of the full lattice.
    pub fn extent(&self) -> (usize, usize) {
        (self.nxl, self.id.len() / self.nxl)
    }

    pub fn node_at(&self, ii: usize, jj: usize) -> Option<usize> {
        if ii >= self.nxl || jj * self.nxl + ii >= self.id.len() {
            return None;
        }
        let n = self.id[jj * self.nxl + ii];
        (n != NONE).then_some(n)
    }

    pub fn nodes_per_element(&self) -> usize {
        (self.order + 1) * (self.order + 1)
    }

    pub fn element_nodes(&self, e: usize) -> &[usize] {
        let nb = self.nodes_per_element();
        &self.elem_nodes[e * nb..(e + 1) * nb]
    }

    /// Local node indices along one side of an element, in increasing x or y.
    pub fn side_local(&self, side: Side) -> Vec<usize> {
        let k = self.order;
        let m = k + 1;
        match side {
            Side::Bottom => (0..m).collect(),
            Side::Top => (0..m).map(|a| a + m * k).collect(),
            Side::Left => (0..m).map(|b| m * b).collect(),
            Side::Right => (0..m).map(|b| k + m * b).collect(),
        }
    }

    /// Nodes on the horizontal grid line `row`, sorted by x.
    pub fn line_nodes(&self, row: usize) -> Vec<usize> {
        let jj = row * self.order;
        (0..self.nxl).filter_map(|ii| self.node_at(ii, jj)).collect()
    }

    /// Nodes on boundary edges carrying `tag`, sorted and unique.
    pub fn tag_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut out = vec![];
        for edge in self.mesh.boundary_edges().iter().filter(|e| e.tag == tag) {
            let nodes = self.element_nodes(edge.element);
            out.extend(self.side_local(edge.side).into_iter().map(|a| nodes[a]));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Basis data at local point `xi` of any element.
    pub fn basis_at(&self, xi: [f64; 2]) -> Vec<[f64; 5]> {
        tensor_eval(&self.basis, xi[0], xi[1])
    }

    /// Finds the node whose coordinates equal `p` bit for bit.
    pub fn find_node(&self, p: [f64; 2]) -> Option<usize> {
        let (e, _) = self.mesh.locate(p[0], p[1])?;
        self.element_nodes(e)
            .iter()
            .copied()
            .find(|&n| self.coords[n][0].to_bits() == p[0].to_bits() && self.coords[n][1].to_bits() == p[1].to_bits())
    }
}
