//! Sparse Cholesky for shifted Laplacians `I + cL`.
//!
//! Nodes are renumbered by reverse Cuthill-McKee so the factor stays inside a
//! narrow envelope; the factor is stored row by row from each row's first
//! structural nonzero up to the diagonal.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use super::IncidenceMatrix;

/// Ordering and envelope pattern of a Laplacian, independent of the shift.
#[derive(Debug, Clone)]
pub struct LaplacianEnvelope {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// `first[r]`: first column of row `r` inside the envelope.
    first: Vec<usize>,
    /// Offset of row `r` in the packed storage.
    start: Vec<usize>,
    /// Packed lower triangle of `L` in permuted order.
    lower: Vec<f64>,
}

/// `LLᵀ` factor of `I + cL`.
#[derive(Debug, Clone)]
pub struct ShiftedFactor {
    shift: f64,
    values: Vec<f64>,
}

impl LaplacianEnvelope {
    pub fn new(gamma: &IncidenceMatrix) -> Self {
        let n = gamma.n_cols();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j, _) in gamma.rows() {
            adj[i].push(j);
            adj[j].push(i);
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in gamma.rows() {
            let (a, b) = (inv[i].min(inv[j]), inv[i].max(inv[j]));
            first[b] = first[b].min(a);
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for (r, &f) in first.iter().enumerate() {
            start.push(total);
            total += r - f + 1;
        }
        start.push(total);
        let mut lower = vec![0.0; total];
        for &(i, j, s) in gamma.rows() {
            let w = s * s;
            let (a, b) = (inv[i].min(inv[j]), inv[i].max(inv[j]));
            lower[start[a] + a - first[a]] += w;
            lower[start[b] + b - first[b]] += w;
            lower[start[b] + a - first[b]] -= w;
        }
        LaplacianEnvelope {
            perm,
            first,
            start,
            lower,
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Entries stored in the envelope, diagonal included.
    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    pub fn factor(&self, shift: f64) -> ShiftedFactor {
        let n = self.dim();
        let mut values: Vec<f64> = self.lower.iter().map(|v| v * shift).collect();
        for r in 0..n {
            values[self.start[r] + r - self.first[r]] += 1.0;
        }
        for r in 0..n {
            let fr = self.first[r];
            let row_r = self.start[r];
            for c in fr..=r {
                let fc = self.first[c];
                let row_c = self.start[c];
                let lo = fr.max(fc);
                let mut s = values[row_r + c - fr];
                for t in lo..c {
                    s -= values[row_r + t - fr] * values[row_c + t - fc];
                }
                if c == r {
                    // I + cL is positive definite, so the pivot stays >= 1 up to rounding
                    values[row_r + c - fr] = s.sqrt();
                } else {
                    values[row_r + c - fr] = s / values[row_c + c - fc];
                }
            }
        }
        ShiftedFactor { shift, values }
    }

    /// Solves `(I + cL)X = B` with a factor from [`Self::factor`].
    pub fn solve(&self, f: &ShiftedFactor, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let k = b.ncols();
        // node-major copy: the k values of node `r` sit at x[r*k..(r+1)*k]
        let mut x = vec![0.0; n * k];
        for (new, &old) in self.perm.iter().enumerate() {
            for c in 0..k {
                x[new * k + c] = b[(old, c)];
            }
        }
        // forward: L y = b
        for r in 0..n {
            let fr = self.first[r];
            let row = &f.values[self.start[r]..self.start[r + 1]];
            let (done, rest) = x.split_at_mut(r * k);
            let xr = &mut rest[..k];
            for t in fr..r {
                let l = row[t - fr];
                for (v, &o) in xr.iter_mut().zip(&done[t * k..(t + 1) * k]) {
                    *v -= l * o;
                }
            }
            let d = row[r - fr];
            xr.iter_mut().for_each(|v| *v /= d);
        }
        // backward: Lᵀ x = y, column-oriented over the stored rows
        for r in (0..n).rev() {
            let fr = self.first[r];
            let row = &f.values[self.start[r]..self.start[r + 1]];
            let (head, rest) = x.split_at_mut(r * k);
            let xr = &mut rest[..k];
            let d = row[r - fr];
            xr.iter_mut().for_each(|v| *v /= d);
            for t in fr..r {
                let l = row[t - fr];
                for (v, &o) in head[t * k..(t + 1) * k].iter_mut().zip(xr.iter()) {
                    *v -= l * o;
                }
            }
        }
        let mut out = DMatrix::zeros(n, k);
        for (new, &old) in self.perm.iter().enumerate() {
            for c in 0..k {
                out[(old, c)] = x[new * k + c];
            }
        }
        out
    }
}

impl ShiftedFactor {
    pub fn shift(&self) -> f64 {
        self.shift
    }
}

/// Breadth-first ordering from a minimum-degree start in every component,
/// neighbors visited by increasing degree, then reversed.
fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by_key(|&i| (degree[i], i));
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for &s in &seeds {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&j| !seen[j]).collect();
            next.sort_by_key(|&j| (degree[j], j));
            next.dedup();
            for j in next {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{incidence, DocumentGraph};

    #[test]
    fn matches_dense_solve() {
        let g = DocumentGraph::new(
            7,
            [
                (0, 3, 1.0),
                (3, 5, 2.0),
                (5, 1, 0.5),
                (1, 6, 1.0),
                (0, 6, 1.5),
                (2, 4, 1.0),
            ],
        )
        .unwrap();
        for weighted in [false, true] {
            let gamma = incidence(&g, weighted);
            let env = LaplacianEnvelope::new(&gamma);
            let b = DMatrix::from_fn(7, 3, |i, j| ((i * 3 + j) as f64).sin());
            for c in [0.0, 0.3, 7.0] {
                let f = env.factor(c);
                let x = env.solve(&f, &b);
                let a = DMatrix::identity(7, 7) + gamma.laplacian() * c;
                assert!((&a * &x - &b).norm() < 1e-12, "c = {c}");
            }
        }
    }

    #[test]
    fn path_envelope_is_tridiagonal() {
        let g = DocumentGraph::new(6, (0..5).map(|i| (i, i + 1, 1.0))).unwrap();
        let env = LaplacianEnvelope::new(&incidence(&g, false));
        assert_eq!(env.envelope_size(), 6 + 5);
    }
}
