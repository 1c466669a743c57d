mod common;

use gplsi_core::corpus::{generate_synthetic, validate_frequency, FrequencyMatrix, GroundTruth, SyntheticConfig};
use gplsi_core::decomposition::{fit_gplsi, fit_onestep, fit_onestep_with_rho, fit_plsi, FitConfig};
use gplsi_core::eval::{align_columns, column_space, sin_theta};
use gplsi_core::graph::DocumentGraph;
use gplsi_core::model::{fit_model, Method, TopicRecovery};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn noiseless(n: usize, p: usize, k: usize, seed: u64) -> (FrequencyMatrix, GroundTruth, DocumentGraph) {
    let c = generate_synthetic(&SyntheticConfig::new(n, p, k, 100, seed)).unwrap();
    let x = FrequencyMatrix::from_probabilities(c.truth.expected_frequencies(), vec![100; n]).unwrap();
    (x, c.truth, c.graph)
}

/// Largest entrywise error of `Ŵ` and `Â` under one shared column permutation.
fn shared_perm_error(w_hat: &DMatrix<f64>, a_hat: &DMatrix<f64>, t: &GroundTruth) -> f64 {
    let (perm, _) = align_columns(w_hat, &t.w).unwrap();
    let mut worst = 0.0f64;
    for (j, &k) in perm.iter().enumerate() {
        worst = worst.max((w_hat.column(j) - t.w.column(k)).amax());
        worst = worst.max((a_hat.row(j) - t.a.row(k)).amax());
    }
    worst
}

#[test]
fn noiseless_plsi_recovers_truth() {
    let (x, truth, g) = noiseless(200, 30, 3, 4);
    let m = fit_model(&x, Some(&g), Method::Plsi, &FitConfig::new(3), TopicRecovery::Regression).unwrap();
    assert!(shared_perm_error(&m.w, &m.a, &truth) < 1e-6);
}

#[test]
fn noiseless_gplsi_without_penalty_recovers_truth() {
    let (x, truth, g) = noiseless(200, 30, 3, 5);
    let mut cfg = FitConfig::new(3);
    cfg.rho_grid = Some(vec![0.0]);
    let m = fit_model(&x, Some(&g), Method::Gplsi, &cfg, TopicRecovery::Regression).unwrap();
    let err = shared_perm_error(&m.w, &m.a, &truth);
    assert!(err < 1e-6, "max error {err}");
    assert!(m.converged());
}

#[test]
fn edgeless_graph_reduces_to_plsi() {
    let c = generate_synthetic(&SyntheticConfig::new(120, 20, 3, 200, 2)).unwrap();
    let x = validate_frequency(&c.counts).unwrap();
    let plain = fit_plsi(&x, 3).unwrap();
    let (f, trace) = fit_gplsi(&x, &DocumentGraph::empty(120), &FitConfig::new(3)).unwrap();
    assert!(trace.converged);
    assert!(sin_theta(&f.u, &plain.u).unwrap() < 1e-4);
    assert!(sin_theta(&f.v, &plain.v).unwrap() < 1e-4);
}

#[test]
fn gplsi_is_deterministic() {
    let c = generate_synthetic(&SyntheticConfig::new(150, 20, 3, 50, 11)).unwrap();
    let x = validate_frequency(&c.counts).unwrap();
    let cfg = FitConfig::new(3);
    let (f1, t1) = fit_gplsi(&x, &c.graph, &cfg).unwrap();
    let (f2, t2) = fit_gplsi(&x, &c.graph, &cfg).unwrap();
    assert_eq!(f1.u, f2.u);
    assert_eq!(f1.v, f2.v);
    assert!(t1.same_numerics(&t2));
    assert_eq!(t1.to_csv(), t2.to_csv());
}

#[test]
fn generator_is_deterministic_per_seed() {
    let cfg = SyntheticConfig::new(80, 15, 3, 40, 7);
    let a = generate_synthetic(&cfg).unwrap();
    let b = generate_synthetic(&cfg).unwrap();
    assert_eq!(a.counts.counts(), b.counts.counts());
    assert_eq!(a.truth, b.truth);
    let c = generate_synthetic(&SyntheticConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(a.counts.counts(), c.counts.counts());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn generator_invariants(seed in 0u64..1_000_000, k in 2usize..5, doc_length in 1u64..300) {
        let cfg = SyntheticConfig { n_grp: 12, ..SyntheticConfig::new(60, 12, k, doc_length, seed) };
        let c = generate_synthetic(&cfg).unwrap();
        let t = &c.truth;
        prop_assert_eq!(t.w.shape(), (60, k));
        prop_assert_eq!(t.a.shape(), (k, 12));
        for r in t.w.row_iter() {
            prop_assert!((r.sum() - 1.0).abs() < 1e-12 && r.min() >= 0.0);
        }
        for r in t.a.row_iter() {
            prop_assert!((r.sum() - 1.0).abs() < 1e-12 && r.min() >= 0.0);
        }
        for (kk, &d) in t.anchor_docs.iter().enumerate() {
            prop_assert!((t.w[(d, kk)] - 1.0).abs() < 1e-12);
        }
        for (kk, &j) in t.anchor_words.iter().enumerate() {
            prop_assert!(t.a[(kk, j)] > 0.0);
            prop_assert!((0..k).filter(|&o| o != kk).all(|o| t.a[(o, j)] == 0.0));
        }
        prop_assert!(c.counts.doc_lengths().iter().all(|&l| l == doc_length));
        prop_assert_eq!(c.counts.counts().row_sum().iter().sum::<u64>(), 60 * doc_length);
        prop_assert!(c.graph.edges().iter().all(|e| e.i != e.j && e.weight > 0.0));
    }
}

/// Multinomial frequencies for block-constant rows on a path graph.
fn block_corpus(seed: u64, doc_length: u64) -> (FrequencyMatrix, DMatrix<f64>, DocumentGraph) {
    use rand::Rng;
    let mut r = common::rng(seed);
    let (n, p) = (120, 20);
    let mut a = DMatrix::from_fn(3, p, |_, _| r.random_range(0.05..1.0));
    for mut row in a.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    let blocks = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0]];
    let w = DMatrix::from_fn(n, 3, |i, k| blocks[i / 30][k]);
    let m = &w * &a;
    let mut counts = DMatrix::<u64>::zeros(n, p);
    for i in 0..n {
        for _ in 0..doc_length {
            let mut u = r.random_range(0.0..1.0);
            let mut j = 0;
            while j + 1 < p && u >= m[(i, j)] {
                u -= m[(i, j)];
                j += 1;
            }
            counts[(i, j)] += 1;
        }
    }
    let c = gplsi_core::corpus::CountMatrix::from_counts(counts).unwrap();
    let g = DocumentGraph::new(n, (0..n - 1).map(|i| (i, i + 1, 1.0))).unwrap();
    (validate_frequency(&c).unwrap(), m, g)
}

#[test]
fn onestep_without_penalty_is_plsi() {
    let (x, _, g) = block_corpus(1, 40);
    let (f, _) = fit_onestep_with_rho(&x, &g, &FitConfig::new(3), 0.0).unwrap();
    let plain = fit_plsi(&x, 3).unwrap();
    assert!(sin_theta(&f.u, &plain.u).unwrap() < 1e-8);
}

#[test]
fn onestep_noiseless_block_rows_select_no_smoothing() {
    // block-constant rows: neighbor interpolation is exact away from the
    // block boundaries, so smoothing can only hurt held-out prediction
    let (_, m, g) = block_corpus(3, 1);
    let x = FrequencyMatrix::from_probabilities(m.clone(), vec![100; m.nrows()]).unwrap();
    let mut cfg = FitConfig::new(3);
    cfg.rho_grid = Some(vec![0.0, 1e-3, 1e-2, 1e-1]);
    let (f, report) = fit_onestep(&x, &g, &cfg).unwrap();
    let err = sin_theta(&f.u, &column_space(&m, 3).unwrap()).unwrap();
    assert_eq!(report.rho, 0.0, "cv errors {:?}", report.cv_errors);
    assert!(err < 1e-8, "sin theta {err}");
}

#[test]
fn onestep_beats_plsi_on_block_constant_rows() {
    let mut onestep = Vec::new();
    let mut plain = Vec::new();
    for seed in 0..20 {
        let (x, m, g) = block_corpus(100 + seed, 30);
        let u = column_space(&m, 3).unwrap();
        let (f, _) = fit_onestep(&x, &g, &FitConfig::new(3)).unwrap();
        onestep.push(sin_theta(&f.u, &u).unwrap());
        plain.push(sin_theta(&fit_plsi(&x, 3).unwrap().u, &u).unwrap());
    }
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[9] + v[10])
    };
    let (o, p) = (median(onestep), median(plain));
    assert!(o <= p, "onestep {o} vs plsi {p}");
}
