//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the solver paths it is used to check.

#![allow(dead_code)]

use gplsi_core::graph::{DocumentGraph, IncidenceMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected graph: a random spanning tree plus extra random edges.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize, weighted: bool) -> DocumentGraph {
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        seen.insert((u, v));
        let w = if weighted { rng.random_range(0.1..5.0) } else { 1.0 };
        edges.push((u, v, w));
    }
    let mut tries = 0;
    while edges.len() < n - 1 + extra && tries < 10 * (extra + 1) {
        tries += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        let w = if weighted { rng.random_range(0.1..5.0) } else { 1.0 };
        edges.push((a, b, w));
    }
    DocumentGraph::new(n, edges).unwrap()
}

fn dense_laplacian_max_eig(gamma: &DMatrix<f64>) -> f64 {
    let l = gamma.transpose() * gamma;
    l.symmetric_eigen().eigenvalues.iter().copied().fold(0.0, f64::max)
}

fn project_rows_to_unit_ball(g: &mut DMatrix<f64>) {
    for mut row in g.row_iter_mut() {
        let n = row.norm();
        if n > 1.0 {
            row.scale_mut(1.0 / n);
        }
    }
}

/// Objective `‖U − Y‖² + ρ Σ_e ‖(ΓU)_e‖` evaluated with a dense `Γ`.
pub fn dense_tv_objective(y: &DMatrix<f64>, gamma: &DMatrix<f64>, rho: f64, u: &DMatrix<f64>) -> f64 {
    let gu = gamma * u;
    (u - y).norm_squared() + rho * gu.row_iter().map(|r| r.norm()).sum::<f64>()
}

/// Accelerated projected gradient on the dual of the TV problem.
///
/// Dual: `min_G ‖Y − (ρ/2)ΓᵀG‖²` over rows `‖g_e‖ ≤ 1`, primal recovered as
/// `U = Y − (ρ/2)ΓᵀG`. Runs until the duality gap is below `gap_tol`
/// (relative to the objective) and returns the primal objective and `U`.
pub fn tv_dual_oracle(y: &DMatrix<f64>, gamma: &IncidenceMatrix, rho: f64, gap_tol: f64) -> (f64, DMatrix<f64>) {
    let gd = gamma.to_dense();
    if rho == 0.0 || gd.nrows() == 0 {
        return (0.0, y.clone());
    }
    let lip = 0.5 * rho * rho * dense_laplacian_max_eig(&gd);
    let step = 1.0 / lip;
    let m = gd.nrows();
    let k = y.ncols();
    let mut g = DMatrix::<f64>::zeros(m, k);
    let mut prev = g.clone();
    let mut extrap = g.clone();
    let mut t = 1.0f64;
    let primal_of = |g: &DMatrix<f64>| y - gd.transpose() * g * (0.5 * rho);
    let mut best = (f64::INFINITY, y.clone());
    for it in 0..5_000_000usize {
        let u = primal_of(&extrap);
        let grad = -(&gd * &u) * rho;
        g = &extrap - grad * step;
        project_rows_to_unit_ball(&mut g);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        extrap = &g + (&g - &prev) * ((t - 1.0) / t_next);
        t = t_next;
        // adaptive restart keeps the dual sequence from oscillating
        if (&g - &prev).dot(&(&prev - &extrap)) > 0.0 {
            t = 1.0;
            extrap = g.clone();
        }
        prev = g.clone();
        if it % 50 == 0 {
            let u = primal_of(&g);
            let primal = dense_tv_objective(y, &gd, rho, &u);
            let gtg = gd.transpose() * &g;
            let dual = rho * gtg.dot(y) - 0.25 * rho * rho * gtg.norm_squared();
            if primal < best.0 {
                best = (primal, u);
            }
            if primal - dual <= gap_tol * primal.abs().max(1.0) {
                break;
            }
        }
    }
    best
}

/// Brute-force minimum of `Σ_k cost[k][σ(k)]` over all permutations.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    fn rec(cost: &[Vec<f64>], k: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut (Vec<usize>, f64)) {
        let n = cost.len();
        if k == n {
            let total: f64 = cur.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
            if total < best.1 {
                *best = (cur.clone(), total);
            }
            return;
        }
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                rec(cost, k + 1, used, cur, best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut best = (Vec::new(), f64::INFINITY);
    rec(cost, 0, &mut vec![false; cost.len()], &mut Vec::new(), &mut best);
    best
}

/// Minimum spanning tree weight by enumerating all `(n-1)`-edge subsets.
pub fn brute_force_mst_weight(g: &DocumentGraph) -> Option<f64> {
    let n = g.n_nodes();
    let edges = g.edges();
    let m = edges.len();
    assert!(m <= 20, "enumeration only for tiny graphs");
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let mut ok = true;
        let mut w = 0.0;
        for (e, edge) in edges.iter().enumerate() {
            if mask & (1 << e) != 0 {
                let (a, b) = (find(&mut parent, edge.i), find(&mut parent, edge.j));
                if a == b {
                    ok = false;
                    break;
                }
                parent[a] = b;
                w += edge.weight;
            }
        }
        if ok {
            best = Some(best.map_or(w, |b: f64| b.min(w)));
        }
    }
    best
}

/// Euclidean projection onto the simplex by enumerating supports.
///
/// For each candidate support `S` the projection restricted to `S` is
/// `x_i = v_i − θ` with `θ = (Σ_S v_i − 1)/|S|`; the feasible candidate
/// closest to `v` is the projection.
pub fn simplex_projection_by_supports(v: &[f64]) -> Vec<f64> {
    let d = v.len();
    assert!(d <= 12);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let theta = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; d];
        let mut feasible = true;
        for &i in &support {
            x[i] = v[i] - theta;
            if x[i] < -1e-15 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, x));
        }
    }
    best.unwrap().1
}

/// Minimizes `½‖x − v‖² + τ‖x‖₂` numerically.
///
/// The minimizer lies on the ray `s·v/‖v‖`, `s ≥ 0`; the convex 1-D objective
/// along the ray is minimized by bisection on its derivative
/// `⟨s·d − v, d⟩ + τ`.
pub fn prox_l2_by_bisection(v: &[f64], tau: f64) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; v.len()];
    }
    let d: Vec<f64> = v.iter().map(|x| x / norm).collect();
    let slope = |s: f64| {
        let inner: f64 = d.iter().zip(v).map(|(di, vi)| (s * di - vi) * di).sum();
        inner + tau
    };
    if slope(0.0) >= 0.0 {
        return vec![0.0; v.len()];
    }
    let (mut lo, mut hi) = (0.0, norm + tau + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    d.iter().map(|di| s * di).collect()
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Principal-angle distance `‖sin Θ‖_F` via the SVD of `AᵀB`.
pub fn sin_theta_reference(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let s = (a.transpose() * b).svd(false, false).singular_values;
    s.iter().map(|c| (1.0 - c.min(1.0).powi(2)).max(0.0)).sum::<f64>().sqrt()
}
