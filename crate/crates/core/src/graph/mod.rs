//! Document similarity graphs.
//!
//! A [`DocumentGraph`] is an undirected, weighted graph over the `n` documents
//! of a corpus. The total-variation penalty acts through its edge incidence
//! matrix `Γ` (one row per edge, `+1` on the smaller endpoint and `-1` on the
//! larger one), whose Gram matrix `ΓᵀΓ` is the graph Laplacian.

mod envelope;
mod folds;
mod mst;
mod spectral;

use std::collections::{HashSet, VecDeque};

use nalgebra::DMatrix;

use crate::error::{GplsiError, Result};

pub use envelope::{LaplacianEnvelope, ShiftedFactor};
pub use folds::{mst_folds, FoldPartition};
pub use mst::minimum_spanning_tree;
pub use spectral::{inverse_scaling_factor, lambda_max_gamma, theoretical_rho, LaplacianEigen, PSEUDOINVERSE_NODE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Undirected graph with edges stored as `(i, j, w)`, `i < j`, no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentGraph {
    n_nodes: usize,
    edges: Vec<Edge>,
}

impl DocumentGraph {
    /// Builds a graph, orienting each edge so that `i < j`.
    ///
    /// Self-loops, duplicate pairs, out-of-range endpoints and non-positive or
    /// non-finite weights are rejected.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (a, b, w) in edges {
            let (i, j) = (a.min(b), a.max(b));
            if i == j {
                return Err(GplsiError::InvalidParameter(format!("self-loop on node {i}")));
            }
            if j >= n_nodes {
                return Err(GplsiError::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} nodes"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(GplsiError::InvalidParameter(format!(
                    "edge ({a}, {b}) has invalid weight {w}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(GplsiError::InvalidParameter(format!("duplicate edge ({i}, {j})")));
            }
            out.push(Edge { i, j, weight: w });
        }
        Ok(DocumentGraph { n_nodes, edges: out })
    }

    /// Like [`DocumentGraph::new`] but silently keeps the first occurrence of
    /// repeated pairs, which is what symmetrized neighbor lists produce.
    pub fn from_edges_dedup(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let unique: Vec<_> = edges
            .into_iter()
            .filter(|&(a, b, _)| seen.insert((a.min(b), a.max(b))))
            .collect();
        Self::new(n_nodes, unique)
    }

    pub fn empty(n_nodes: usize) -> Self {
        DocumentGraph {
            n_nodes,
            edges: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Adjacency lists of `(neighbor, weight)`, neighbors in edge order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for e in &self.edges {
            adj[e.i].push((e.j, e.weight));
            adj[e.j].push((e.i, e.weight));
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for e in &self.edges {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg
    }

    /// Same graph with every weight set to 1.
    pub fn unweighted(&self) -> Self {
        DocumentGraph {
            n_nodes: self.n_nodes,
            edges: self
                .edges
                .iter()
                .map(|e| Edge { weight: 1.0, ..*e })
                .collect(),
        }
    }
}

/// Sparse edge-by-node incidence matrix, stored row-wise.
///
/// Row `e` of an edge `(i, j)` carries `+s` in column `i` and `-s` in column
/// `j`, where `s` is the edge weight for a weighted matrix and 1 otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    n_cols: usize,
    rows: Vec<(usize, usize, f64)>,
}

pub fn incidence(g: &DocumentGraph, weighted: bool) -> IncidenceMatrix {
    IncidenceMatrix {
        n_cols: g.n_nodes,
        rows: g
            .edges
            .iter()
            .map(|e| (e.i, e.j, if weighted { e.weight } else { 1.0 }))
            .collect(),
    }
}

impl IncidenceMatrix {
    /// Number of edges `m`.
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Number of nodes `n`.
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn rows(&self) -> &[(usize, usize, f64)] {
        &self.rows
    }

    /// `ΓU` for an `n × k` matrix `U`.
    pub fn apply(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(u.nrows(), self.n_cols, "incidence: row count mismatch");
        let k = u.ncols();
        let mut out = DMatrix::zeros(self.rows.len(), k);
        for c in 0..k {
            let src = u.column(c);
            let mut dst = out.column_mut(c);
            for (e, &(i, j, s)) in self.rows.iter().enumerate() {
                dst[e] = s * (src[i] - src[j]);
            }
        }
        out
    }

    /// `Γᵀz` for an `m × k` matrix `z`.
    pub fn apply_transpose(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(z.nrows(), self.rows.len(), "incidence: edge count mismatch");
        let k = z.ncols();
        let mut out = DMatrix::zeros(self.n_cols, k);
        for c in 0..k {
            let src = z.column(c);
            let mut dst = out.column_mut(c);
            for (e, &(i, j, s)) in self.rows.iter().enumerate() {
                dst[i] += s * src[e];
                dst[j] -= s * src[e];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.rows.len(), self.n_cols);
        for (e, &(i, j, s)) in self.rows.iter().enumerate() {
            g[(e, i)] = s;
            g[(e, j)] = -s;
        }
        g
    }

    /// Dense `ΓᵀΓ`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n_cols, self.n_cols);
        for &(i, j, s) in &self.rows {
            let w = s * s;
            l[(i, i)] += w;
            l[(j, j)] += w;
            l[(i, j)] -= w;
            l[(j, i)] -= w;
        }
        l
    }

    /// `ΓᵀΓx` without forming the Laplacian.
    pub fn laplacian_apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply_transpose(&self.apply(x))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub count: usize,
    /// Component label per node; labels are numbered in order of each
    /// component's smallest node.
    pub component_of: Vec<usize>,
    /// Component sizes indexed by label.
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn sizes_descending(&self) -> Vec<usize> {
        let mut s = self.sizes.clone();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    pub fn smallest(&self) -> usize {
        self.sizes.iter().copied().min().unwrap_or(0)
    }

    /// Node lists per component, each sorted ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (node, &c) in self.component_of.iter().enumerate() {
            out[c].push(node);
        }
        out
    }
}

pub fn connected_components(g: &DocumentGraph) -> Components {
    let adj = g.adjacency();
    let mut component_of = vec![usize::MAX; g.n_nodes];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..g.n_nodes {
        if component_of[start] != usize::MAX {
            continue;
        }
        let label = sizes.len();
        component_of[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(v) = queue.pop_front() {
            size += 1;
            for &(u, _) in &adj[v] {
                if component_of[u] == usize::MAX {
                    component_of[u] = label;
                    queue.push_back(u);
                }
            }
        }
        sizes.push(size);
    }
    Components {
        count: sizes.len(),
        component_of,
        sizes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> DocumentGraph {
        DocumentGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn path_incidence_and_laplacian() {
        let gamma = incidence(&path3(), false);
        let dense = gamma.to_dense();
        assert_eq!(dense, DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]));
        let l = dense.transpose() * &dense;
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(l, expected);
        assert_eq!(gamma.laplacian(), expected);
    }

    #[test]
    fn empty_graph_has_zero_laplacian() {
        let gamma = incidence(&DocumentGraph::empty(4), false);
        assert_eq!(gamma.to_dense().shape(), (0, 4));
        assert_eq!(gamma.laplacian(), DMatrix::zeros(4, 4));
    }

    #[test]
    fn triangle_laplacian() {
        let g = DocumentGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let l = incidence(&g, false).laplacian();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l[(i, j)], if i == j { 2.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn weighted_rows_are_scaled() {
        let g = DocumentGraph::new(2, [(1, 0, 2.5)]).unwrap();
        assert_eq!(g.edges()[0], Edge { i: 0, j: 1, weight: 2.5 });
        let dense = incidence(&g, true).to_dense();
        assert_eq!(dense, DMatrix::from_row_slice(1, 2, &[2.5, -2.5]));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(DocumentGraph::new(3, [(1, 1, 1.0)]).is_err());
        assert!(DocumentGraph::new(3, [(0, 3, 1.0)]).is_err());
        assert!(DocumentGraph::new(3, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(DocumentGraph::new(3, [(0, 1, 0.0)]).is_err());
        let g = DocumentGraph::from_edges_dedup(3, [(0, 1, 1.0), (1, 0, 2.0)]).unwrap();
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.edges()[0].weight, 1.0);
    }

    #[test]
    fn apply_matches_dense() {
        let g = DocumentGraph::new(4, [(0, 1, 1.0), (1, 2, 3.0), (0, 3, 0.5)]).unwrap();
        let gamma = incidence(&g, true);
        let u = DMatrix::from_fn(4, 2, |i, j| (i * 3 + j) as f64 * 0.7 - 1.0);
        let dense = gamma.to_dense();
        assert!((gamma.apply(&u) - &dense * &u).norm() < 1e-14);
        let z = DMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 - 1.5);
        assert!((gamma.apply_transpose(&z) - dense.transpose() * &z).norm() < 1e-14);
    }

    #[test]
    fn components_examples() {
        let g = DocumentGraph::new(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let c = connected_components(&g);
        assert_eq!(c.count, 2);
        assert_eq!(c.sizes_descending(), vec![2, 2]);

        assert_eq!(connected_components(&path3()).count, 1);

        let c = connected_components(&DocumentGraph::empty(5));
        assert_eq!(c.count, 5);
        assert_eq!(c.smallest(), 1);
    }
}
