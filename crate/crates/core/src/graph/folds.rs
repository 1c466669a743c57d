use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{connected_components, minimum_spanning_tree, DocumentGraph};
use crate::error::{GplsiError, Result};

/// Assignment of documents to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    /// Fold index in `0..b` for every node.
    pub fold_of: Vec<usize>,
    /// One source node per connected component with at least one edge.
    pub sources: Vec<usize>,
    pub b: usize,
}

/// Splits the documents into `b` folds by tree distance from a random source.
///
/// The rule runs on the minimum spanning forest of `g`, separately for each
/// connected component. A node at tree distance `d` from its component's
/// source lands in fold `d mod b`, so tree neighbors (distances differing by
/// one) never share a fold. Isolated nodes are dealt to folds round-robin.
pub fn mst_folds(g: &DocumentGraph, b: usize, seed: u64) -> Result<FoldPartition> {
    if b < 2 {
        return Err(GplsiError::InvalidParameter(format!("fold count must be at least 2, got {b}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = minimum_spanning_tree(g);
    let sources: Vec<usize> = connected_components(&tree)
        .members()
        .into_iter()
        .filter(|m| m.len() > 1)
        .map(|m| m[rng.random_range(0..m.len())])
        .collect();
    FoldPartition::from_tree(&tree, &sources, b)
}

impl FoldPartition {
    /// Distance-mod-`b` folds on a forest with explicitly chosen sources.
    ///
    /// `sources` must contain exactly one node from every component of `tree`
    /// that has an edge.
    pub fn from_tree(tree: &DocumentGraph, sources: &[usize], b: usize) -> Result<Self> {
        if b < 2 {
            return Err(GplsiError::InvalidParameter(format!("fold count must be at least 2, got {b}")));
        }
        let n = tree.n_nodes();
        let adj = tree.adjacency();
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for &s in sources {
            if s >= n {
                return Err(GplsiError::InvalidParameter(format!("source {s} out of range")));
            }
            if dist[s] != usize::MAX {
                return Err(GplsiError::InvalidParameter(format!(
                    "source {s} shares a component with another source"
                )));
            }
            dist[s] = 0;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                for &(u, _) in &adj[v] {
                    if dist[u] == usize::MAX {
                        dist[u] = dist[v] + 1;
                        queue.push_back(u);
                    }
                }
            }
        }
        let mut fold_of = vec![0; n];
        let mut next_isolated = 0;
        for v in 0..n {
            if dist[v] != usize::MAX {
                fold_of[v] = dist[v] % b;
            } else if adj[v].is_empty() {
                fold_of[v] = next_isolated % b;
                next_isolated += 1;
            } else {
                return Err(GplsiError::InvalidParameter(format!(
                    "node {v} is in a component without a source"
                )));
            }
        }
        Ok(FoldPartition {
            fold_of,
            sources: sources.to_vec(),
            b,
        })
    }

    /// Nodes of fold `k`, ascending.
    pub fn members(&self, k: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&v| self.fold_of[v] == k).collect()
    }

    /// Nodes with at least one edge in `g` but no neighbor in another fold.
    pub fn invariant_violations(&self, g: &DocumentGraph) -> Vec<usize> {
        g.adjacency()
            .iter()
            .enumerate()
            .filter(|(v, nbrs)| {
                !nbrs.is_empty() && nbrs.iter().all(|&(u, _)| self.fold_of[u] == self.fold_of[*v])
            })
            .map(|(v, _)| v)
            .collect()
    }

    /// `node,fold` CSV for auditing.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node,fold\n");
        for (v, f) in self.fold_of.iter().enumerate() {
            let _ = writeln!(s, "{v},{f}");
        }
        s
    }
}
