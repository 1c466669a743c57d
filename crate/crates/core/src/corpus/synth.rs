//! Spatially coherent synthetic corpora.
//!
//! Documents are points in the unit square. The square is split into `n_grp`
//! k-means patches, each patch is given a dominant topic, and documents in a
//! patch share a Dirichlet mixture up to small Gaussian jitter. The document
//! graph links every point to its `knn` nearest neighbors.

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal};

use super::{CountMatrix, GroundTruth};
use crate::error::{GplsiError, Result};
use crate::graph::DocumentGraph;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    /// Words per document.
    pub doc_length: u64,
    pub n_grp: usize,
    pub knn: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(n: usize, p: usize, k: usize, doc_length: u64, seed: u64) -> Self {
        SyntheticConfig {
            n,
            p,
            k,
            doc_length,
            n_grp: 30,
            knn: 5,
            noise_sd: 0.03,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GplsiError::InvalidParameter(msg));
        if self.k == 0 || self.p == 0 {
            return bad("K and p must be positive".into());
        }
        if !(self.k <= self.n_grp && self.n_grp <= self.n) {
            return bad(format!(
                "need K <= n_grp <= n, got K={}, n_grp={}, n={}",
                self.k, self.n_grp, self.n
            ));
        }
        if self.k > self.p {
            return bad(format!("need K <= p for anchor words, got K={}, p={}", self.k, self.p));
        }
        if self.knn >= self.n {
            return bad(format!("knn={} must be below n={}", self.knn, self.n));
        }
        if self.doc_length == 0 {
            return bad("document length must be at least 1".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd must be finite and >= 0, got {}", self.noise_sd));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub counts: CountMatrix,
    pub truth: GroundTruth,
    pub graph: DocumentGraph,
}

/// Centers of the first `n_grp` cells of a near-square grid, row-major.
fn grid_centers(n_grp: usize) -> Vec<[f64; 2]> {
    let rows = ((n_grp as f64).sqrt().round() as usize).max(1);
    let cols = n_grp.div_ceil(rows);
    (0..n_grp)
        .map(|c| {
            let (r, col) = (c / cols, c % cols);
            [(col as f64 + 0.5) / cols as f64, (r as f64 + 0.5) / rows as f64]
        })
        .collect()
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Lloyd's algorithm from fixed initial centers.
///
/// Runs at most `max_iter` rounds. A cluster that empties is re-seeded at the
/// point farthest from its current center. Returns labels and final centers.
pub fn kmeans(points: &[[f64; 2]], init: &[[f64; 2]], max_iter: usize) -> (Vec<usize>, Vec<[f64; 2]>) {
    let mut centers = init.to_vec();
    let k = centers.len();
    let nearest = |p: &[f64; 2], centers: &[[f64; 2]]| {
        let mut best = (0, f64::INFINITY);
        for (c, ctr) in centers.iter().enumerate() {
            let d = dist2(p, ctr);
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    };
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..max_iter {
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            counts[l] += 1;
        }
        let mut reseeded = vec![false; points.len()];
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .filter(|&i| !reseeded[i])
                    .max_by(|&a, &b| {
                        dist2(&points[a], &centers[labels[a]])
                            .total_cmp(&dist2(&points[b], &centers[labels[b]]))
                            .then(b.cmp(&a))
                    });
                if let Some(i) = far {
                    reseeded[i] = true;
                    centers[c] = points[i];
                }
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    (labels, centers)
}

/// Dirichlet draw via normalized Gamma variates.
fn dirichlet(rng: &mut ChaCha8Rng, alpha: &[f64]) -> Vec<f64> {
    loop {
        let g: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let s: f64 = g.iter().sum();
        if s > 0.0 && s.is_finite() {
            return g.into_iter().map(|v| v / s).collect();
        }
    }
}

fn multinomial(rng: &mut ChaCha8Rng, trials: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut left = trials;
    let mut mass: f64 = probs.iter().sum();
    for (j, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if j + 1 == probs.len() {
            out[j] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q).expect("valid binomial").sample(rng);
        out[j] = draw;
        left -= draw;
        mass -= p;
    }
    out
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let (n, p, k) = (cfg.n, cfg.p, cfg.k);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let coords: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let (group_ids, _) = kmeans(&coords, &grid_centers(cfg.n_grp), 100);

    // Deal shuffled patches to topics in turn so every topic dominates some patch.
    let mut order: Vec<usize> = (0..cfg.n_grp).collect();
    order.shuffle(&mut rng);
    let mut group_topics = vec![0; cfg.n_grp];
    for (slot, &g) in order.iter().enumerate() {
        group_topics[g] = slot % k;
    }

    let mut group_alpha = Vec::with_capacity(cfg.n_grp);
    for &dominant in &group_topics {
        let alpha = if k == 1 {
            vec![1.0]
        } else {
            let u: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..0.5)).collect();
            let mut a = dirichlet(&mut rng, &u);
            let mut top = 0;
            for (t, &v) in a.iter().enumerate() {
                if v > a[top] {
                    top = t;
                }
            }
            a.swap(top, dominant);
            a
        };
        group_alpha.push(alpha);
    }

    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| GplsiError::InvalidParameter(e.to_string()))?;
    let mut w = DMatrix::zeros(n, k);
    for i in 0..n {
        let alpha = &group_alpha[group_ids[i]];
        let mut row: Vec<f64> = alpha
            .iter()
            .map(|&a| (a + noise.sample(&mut rng)).max(0.0))
            .collect();
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.clone_from(alpha);
        }
        for t in 0..k {
            w[(i, t)] = row[t];
        }
    }
    let anchor_docs = index::sample(&mut rng, n, k).into_vec();
    for (t, &d) in anchor_docs.iter().enumerate() {
        w.row_mut(d).fill(0.0);
        w[(d, t)] = 1.0;
    }

    let mut a = DMatrix::from_fn(k, p, |_, _| rng.random::<f64>());
    let anchor_words = index::sample(&mut rng, p, k).into_vec();
    for (t, &j) in anchor_words.iter().enumerate() {
        a.column_mut(j).fill(0.0);
        a[(t, j)] = 1.0;
    }
    for mut row in a.row_iter_mut() {
        let s: f64 = row.iter().sum();
        row /= s;
    }

    let m = &w * &a;
    let mut counts = DMatrix::zeros(n, p);
    for i in 0..n {
        let probs: Vec<f64> = m.row(i).iter().copied().collect();
        for (j, c) in multinomial(&mut rng, cfg.doc_length, &probs).into_iter().enumerate() {
            counts[(i, j)] = c;
        }
    }

    let graph = knn_graph(&coords, cfg.knn)?;
    Ok(SyntheticCorpus {
        counts: CountMatrix::new(counts, vec![cfg.doc_length; n])?,
        truth: GroundTruth {
            w,
            a,
            coords,
            group_ids,
            group_topics,
            anchor_docs,
            anchor_words,
        },
        graph,
    })
}

/// Symmetrized k-nearest-neighbor graph with inverse-distance weights.
fn knn_graph(coords: &[[f64; 2]], knn: usize) -> Result<DocumentGraph> {
    let n = coords.len();
    let mut edges = Vec::with_capacity(n * knn);
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist2(&coords[i], &coords[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d2, j) in others.iter().take(knn) {
            edges.push((i.min(j), i.max(j), 1.0 / d2.sqrt().max(1e-12)));
        }
    }
    DocumentGraph::from_edges_dedup(n, edges)
}
