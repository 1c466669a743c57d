mod common;

use common::*;
use gplsi_core::eval::{hungarian, morans_i, pas, sin_theta};
use gplsi_core::graph::{connected_components, minimum_spanning_tree, mst_folds, DocumentGraph};
use gplsi_core::simplex::project_to_simplex;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn assignment_total(cost: &DMatrix<f64>, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(r, &c)| cost[(r, c)]).sum()
}

#[test]
fn hungarian_matches_enumeration() {
    let mut r = rng(31);
    for trial in 0..50 {
        let k = 1 + trial % 6;
        let integer = trial % 2 == 0;
        let cost = DMatrix::from_fn(k, k, |_, _| {
            if integer {
                r.random_range(0..10) as f64
            } else {
                r.random_range(-2.0..5.0)
            }
        });
        let rows: Vec<Vec<f64>> = cost.row_iter().map(|row| row.iter().copied().collect()).collect();
        let (_, brute) = brute_force_assignment(&rows);
        let (perm, _) = hungarian(&cost);
        let mut seen = perm.clone();
        seen.sort();
        assert_eq!(seen, (0..k).collect::<Vec<_>>());
        assert_eq!(assignment_total(&cost, &perm), brute, "trial {trial}");
    }
}

#[test]
fn mst_weight_matches_enumeration() {
    let mut r = rng(12);
    for trial in 0..40 {
        let n = 3 + trial % 5;
        let g = random_connected_graph(&mut r, n, 1 + trial % 4, true);
        let tree = minimum_spanning_tree(&g);
        assert_eq!(tree.n_edges(), n - 1);
        assert_eq!(connected_components(&tree).count, 1);
        let brute = brute_force_mst_weight(&g).unwrap();
        assert!((tree.total_weight() - brute).abs() < 1e-12, "{} vs {brute}", tree.total_weight());
    }
}

#[test]
fn fold_invariant_on_random_graphs() {
    let mut r = rng(2024);
    for trial in 0..200u64 {
        let n = r.random_range(2..60);
        let extra = r.random_range(0..n);
        let g = random_connected_graph(&mut r, n, extra, trial % 3 == 0);
        for b in [2, 3, 5] {
            let folds = mst_folds(&g, b, trial).unwrap();
            assert!(folds.invariant_violations(&g).is_empty(), "trial {trial}, b={b}");
        }
    }
}

#[test]
fn sin_theta_matches_principal_angles() {
    let mut r = rng(6);
    for _ in 0..20 {
        let a = DMatrix::from_fn(12, 3, |_, _| r.random_range(-1.0..1.0)).qr().q();
        let b = DMatrix::from_fn(12, 3, |_, _| r.random_range(-1.0..1.0)).qr().q();
        assert!((sin_theta(&a, &b).unwrap() - sin_theta_reference(&a, &b)).abs() < 1e-10);
    }
}

#[test]
fn morans_i_on_alternating_path() {
    // perfectly alternating values on a path: every edge pairs opposite signs
    let g = DocumentGraph::new(4, (0..3).map(|i| (i, i + 1, 1.0))).unwrap();
    let i = morans_i(&[1.0, -1.0, 1.0, -1.0], &g, false).unwrap();
    assert!((i + 1.0).abs() < 1e-12);
    let smooth = morans_i(&[1.0, 1.0, -1.0, -1.0], &g, false).unwrap();
    // (n / W) · Σ_{i~j, both orders} z_i z_j / Σ z² = (4/6)(2·(1 − 1 + 1)) / 4
    assert!((smooth - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn pas_counts_disagreeing_nodes() {
    let star = DocumentGraph::new(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
    // the hub disagrees with all three leaves; each leaf disagrees with its only neighbour
    assert_eq!(pas(&[1, 0, 0, 0], &star, 0.6).unwrap(), 1.0);
    assert_eq!(pas(&[0, 0, 0, 1], &star, 0.6).unwrap(), 0.25);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_matches_support_enumeration(v in prop::collection::vec(-5.0f64..5.0, 1..8)) {
        let got = project_to_simplex(&v);
        let oracle = simplex_projection_by_supports(&v);
        prop_assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(got.iter().all(|&x| x >= 0.0));
        for (a, b) in got.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn hungarian_beats_identity_and_random_perms(seed in 0u64..10_000, k in 1usize..7) {
        let mut r = rng(seed);
        let cost = DMatrix::from_fn(k, k, |_, _| r.random_range(0.0..1.0));
        let (perm, total) = hungarian(&cost);
        prop_assert!((assignment_total(&cost, &perm) - total).abs() < 1e-12);
        let identity: Vec<usize> = (0..k).collect();
        prop_assert!(total <= assignment_total(&cost, &identity) + 1e-12);
    }
}
