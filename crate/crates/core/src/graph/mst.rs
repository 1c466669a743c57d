use super::{DocumentGraph, Edge};

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Minimum spanning forest by Kruskal's algorithm.
///
/// Edges are scanned in `(weight, i, j)` order, so the resulting forest does
/// not depend on the order edges were supplied in.
pub fn minimum_spanning_tree(g: &DocumentGraph) -> DocumentGraph {
    let mut order: Vec<&Edge> = g.edges().iter().collect();
    order.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    let mut dsu = DisjointSet::new(g.n_nodes());
    let mut kept = Vec::with_capacity(g.n_nodes().saturating_sub(1));
    for e in order {
        if dsu.union(e.i, e.j) {
            kept.push(*e);
            if kept.len() + 1 == g.n_nodes() {
                break;
            }
        }
    }
    DocumentGraph {
        n_nodes: g.n_nodes(),
        edges: kept,
    }
}
