//! Graph group-total-variation denoising.
//!
//! Solves
//!
//! ```text
//! min_U ‖U − Y‖_F² + ρ Σ_e ‖(ΓU)_e‖₂
//! ```
//!
//! by over-relaxed ADMM on the splitting `Z = ΓU`. The `U`-update is a
//! shifted Laplacian system solved by a sparse envelope Cholesky factor,
//! refreshed whenever the penalty parameter `μ` is rebalanced. The
//! `Z`-update is a row-wise group soft-threshold.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{GplsiError, Result};
use crate::graph::{connected_components, IncidenceMatrix, LaplacianEigen, LaplacianEnvelope};

/// Proximal operator of `τ‖·‖₂`.
pub fn group_soft_threshold(v: &[f64], tau: f64) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= tau {
        vec![0.0; v.len()]
    } else {
        let scale = 1.0 - tau / norm;
        v.iter().map(|x| x * scale).collect()
    }
}

fn shrink_rows(v: &mut DMatrix<f64>, tau: f64) {
    for mut row in v.row_iter_mut() {
        let norm = row.norm();
        if norm <= tau {
            row.fill(0.0);
        } else {
            row.scale_mut(1.0 - tau / norm);
        }
    }
}

fn row_norms(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().map(|r| r.norm()).collect()
}

/// Incidence matrix bundled with the factorization the solver reuses.
#[derive(Debug, Clone)]
pub struct TvOperator {
    gamma: IncidenceMatrix,
    eigen: LaplacianEigen,
    envelope: LaplacianEnvelope,
    component_of: Vec<usize>,
    component_sizes: Vec<usize>,
}

impl TvOperator {
    pub fn new(gamma: IncidenceMatrix) -> Self {
        let eigen = LaplacianEigen::new(&gamma);
        let envelope = LaplacianEnvelope::new(&gamma);
        // components only depend on the sparsity pattern
        let n = gamma.n_cols();
        let g = crate::graph::DocumentGraph::new(
            n,
            gamma.rows().iter().map(|&(i, j, _)| (i, j, 1.0)),
        )
        .expect("incidence rows come from a valid graph");
        let comps = connected_components(&g);
        TvOperator {
            gamma,
            eigen,
            envelope,
            component_of: comps.component_of,
            component_sizes: comps.sizes,
        }
    }

    pub fn gamma(&self) -> &IncidenceMatrix {
        &self.gamma
    }

    pub fn n_nodes(&self) -> usize {
        self.gamma.n_cols()
    }

    /// Projection onto `ker Γ`: replaces each row by its component's mean row.
    pub fn component_means(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut sums = DMatrix::zeros(self.component_sizes.len(), y.ncols());
        for (i, &c) in self.component_of.iter().enumerate() {
            let mut row = sums.row_mut(c);
            row += y.row(i);
        }
        for (c, &size) in self.component_sizes.iter().enumerate() {
            sums.row_mut(c).scale_mut(1.0 / size as f64);
        }
        DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| sums[(self.component_of[i], j)])
    }
}

/// `min_U ‖U − Y‖_F² + ρ‖ΓU‖₂₁`.
#[derive(Debug, Clone, Copy)]
pub struct TvProblem<'a> {
    pub y: &'a DMatrix<f64>,
    pub op: &'a TvOperator,
    pub rho: f64,
}

impl TvProblem<'_> {
    pub fn objective(&self, u: &DMatrix<f64>) -> f64 {
        tv_objective(self.y, self.op.gamma(), self.rho, u)
    }

    fn validate(&self) -> Result<()> {
        if self.y.nrows() != self.op.n_nodes() {
            return Err(GplsiError::DimensionMismatch(format!(
                "target has {} rows but the graph has {} nodes",
                self.y.nrows(),
                self.op.n_nodes()
            )));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(GplsiError::InvalidParameter(format!("rho must be finite and >= 0, got {}", self.rho)));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(GplsiError::InvalidParameter("target contains non-finite values".into()));
        }
        Ok(())
    }
}

pub fn tv_objective(y: &DMatrix<f64>, gamma: &IncidenceMatrix, rho: f64, u: &DMatrix<f64>) -> f64 {
    let fit = (u - y).norm_squared();
    if rho == 0.0 {
        return fit;
    }
    fit + rho * row_norms(&gamma.apply(u)).iter().sum::<f64>()
}

#[derive(Debug, Clone, Copy)]
pub struct TvSettings {
    /// Bound on both the primal and the dual residual, relative to `‖Y‖_F`.
    pub tol: f64,
    pub max_iter: usize,
    pub compute_kkt: bool,
    pub record_trace: bool,
}

impl Default for TvSettings {
    fn default() -> Self {
        TvSettings {
            tol: 1e-7,
            max_iter: 5000,
            compute_kkt: true,
            record_trace: false,
        }
    }
}

/// ADMM iterate, reusable as a warm start for a nearby problem.
#[derive(Debug, Clone)]
pub struct TvState {
    pub u: DMatrix<f64>,
    pub z: DMatrix<f64>,
    /// Unscaled dual variable for the constraint `ΓU = Z`.
    pub dual: DMatrix<f64>,
    pub mu: f64,
}

impl TvState {
    /// Rotates every block by `r` on the right.
    ///
    /// The objective is invariant under `U ↦ UR` for orthogonal `R`, so this
    /// carries a solution for target `Y` over to target `YR`.
    pub fn rotated(&self, r: &DMatrix<f64>) -> TvState {
        TvState {
            u: &self.u * r,
            z: &self.z * r,
            dual: &self.dual * r,
            mu: self.mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvTraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct TvSolution {
    pub u: DMatrix<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `‖2(U − Y) + ρΓᵀG‖_F` for the best subgradient selection `G`.
    pub kkt_residual: Option<f64>,
    pub converged: bool,
    /// Accepted iterates only, i.e. those that lowered the objective.
    pub trace: Vec<TvTraceRow>,
    pub state: TvState,
}

impl TvSolution {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,objective,primal_residual,dual_residual,mu\n");
        for r in &self.trace {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.iteration, r.objective, r.primal_residual, r.dual_residual, r.mu
            );
        }
        s
    }
}

pub fn solve_tv(problem: TvProblem<'_>, settings: &TvSettings) -> Result<TvSolution> {
    solve_tv_warm(problem, settings, None)
}

/// Over-relaxation factor for the `Z`- and dual updates.
const RELAXATION: f64 = 1.6;

/// Row norms of `ΓU` below this count as fused edges.
const FUSED_NORM: f64 = 1e-10;

pub fn solve_tv_warm(
    problem: TvProblem<'_>,
    settings: &TvSettings,
    warm: Option<&TvState>,
) -> Result<TvSolution> {
    problem.validate()?;
    if !(settings.tol > 0.0) {
        return Err(GplsiError::InvalidParameter("tolerance must be positive".into()));
    }
    let y = problem.y;
    let op = problem.op;
    let gamma = op.gamma();
    let rho = problem.rho;
    let (n, k, m) = (y.nrows(), y.ncols(), gamma.n_rows());

    if rho == 0.0 || m == 0 {
        let state = TvState {
            u: y.clone(),
            z: gamma.apply(y),
            dual: DMatrix::zeros(m, k),
            mu: rho.max(1.0),
        };
        return Ok(TvSolution {
            u: y.clone(),
            objective: problem.objective(y),
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            kkt_residual: settings.compute_kkt.then_some(0.0),
            converged: true,
            trace: Vec::new(),
            state,
        });
    }

    if let Some(sol) = try_flat_solution(problem, settings) {
        return Ok(sol);
    }

    let (mut u, mut z, mut w, mut mu) = match warm {
        Some(s) if s.u.shape() == (n, k) && s.z.shape() == (m, k) && s.mu > 0.0 => {
            (s.u.clone(), s.z.clone(), &s.dual / s.mu, s.mu)
        }
        _ => {
            let z = gamma.apply(y);
            (y.clone(), z, DMatrix::zeros(m, k), rho)
        }
    };

    let mut best_obj = problem.objective(&u);
    let mut best_u = u.clone();
    let mut trace = Vec::new();
    let (mut primal, mut dual_res) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;
    let threshold = settings.tol * y.norm();
    let mut factor = op.envelope.factor(0.5 * mu);

    for it in 1..=settings.max_iter {
        iterations = it;
        let half_mu = 0.5 * mu;
        if factor.shift() != half_mu {
            factor = op.envelope.factor(half_mu);
        }
        let rhs = y + gamma.apply_transpose(&(&z - &w)) * half_mu;
        u = op.envelope.solve(&factor, &rhs);
        let gu = gamma.apply(&u);
        let relaxed = &gu * RELAXATION + &z * (1.0 - RELAXATION);

        let z_old = std::mem::replace(&mut z, &relaxed + &w);
        shrink_rows(&mut z, rho / mu);
        w += &relaxed - &z;

        primal = (&gu - &z).norm();
        dual_res = mu * gamma.apply_transpose(&(&z - &z_old)).norm();
        if !(primal.is_finite() && dual_res.is_finite()) {
            return Err(GplsiError::NumericalFailure(format!(
                "ADMM diverged at iteration {it} (rho = {rho})"
            )));
        }

        let obj = (&u - y).norm_squared() + rho * row_norms(&gu).iter().sum::<f64>();
        if obj < best_obj {
            best_obj = obj;
            best_u.copy_from(&u);
            if settings.record_trace {
                trace.push(TvTraceRow {
                    iteration: it,
                    objective: obj,
                    primal_residual: primal,
                    dual_residual: dual_res,
                    mu,
                });
            }
        }

        if primal <= threshold && dual_res <= threshold {
            converged = true;
            break;
        }

        if it % 10 == 0 {
            if primal > 10.0 * dual_res {
                mu *= 2.0;
                w /= 2.0;
            } else if dual_res > 10.0 * primal {
                mu /= 2.0;
                w *= 2.0;
            }
        }
    }

    let state = TvState {
        u: u.clone(),
        z: z.clone(),
        dual: &w * mu,
        mu,
    };

    // Numerically flat solutions are snapped onto the exact component means.
    if row_norms(&gamma.apply(&best_u)).iter().all(|&v| v < FUSED_NORM) {
        best_u = op.component_means(y);
        best_obj = problem.objective(&best_u);
    }

    let kkt_residual = settings
        .compute_kkt
        .then(|| kkt_residual(problem, &best_u, Some(&(&w * (mu / rho)))));

    Ok(TvSolution {
        u: best_u,
        objective: best_obj,
        iterations,
        primal_residual: primal,
        dual_residual: dual_res,
        kkt_residual,
        converged,
        trace,
        state,
    })
}

/// Returns the component-mean solution when a dual certificate proves it optimal.
///
/// `ΠY` is optimal iff some `G` with unit-bounded rows solves
/// `ΓᵀG = (2/ρ)(Y − ΠY)`; the least-norm solution `G = (2/ρ)ΓL†(Y − ΠY)` is
/// checked against the bound.
fn try_flat_solution(problem: TvProblem<'_>, settings: &TvSettings) -> Option<TvSolution> {
    let op = problem.op;
    let gamma = op.gamma();
    let flat = op.component_means(problem.y);
    let centered = problem.y - &flat;
    let g = gamma.apply(&op.eigen.pseudo_inverse_apply(&centered)) * (2.0 / problem.rho);
    if row_norms(&g).iter().any(|&v| v > 1.0) {
        return None;
    }
    let residual = (gamma.apply_transpose(&g) * problem.rho - &centered * 2.0).norm();
    // the certificate is exact only up to the pseudoinverse's rounding
    if residual > 1e-9 * (1.0 + centered.norm()) {
        return None;
    }
    let m = gamma.n_rows();
    let k = problem.y.ncols();
    let kkt = settings
        .compute_kkt
        .then(|| kkt_residual(problem, &flat, Some(&g)));
    Some(TvSolution {
        objective: problem.objective(&flat),
        iterations: 0,
        primal_residual: 0.0,
        dual_residual: 0.0,
        kkt_residual: kkt,
        converged: true,
        trace: Vec::new(),
        state: TvState {
            u: flat.clone(),
            z: DMatrix::zeros(m, k),
            dual: &g * problem.rho,
            mu: problem.rho,
        },
        u: flat,
    })
}

/// First-order optimality residual `‖2(U − Y) + ρΓᵀG‖_F`.
///
/// On edges where `ΓU` is nonzero `G` is the normalized difference. On fused
/// edges `G` ranges over the unit ball; the residual-minimizing choice is found
/// by projected gradient, started from `hint` when given.
pub fn kkt_residual(problem: TvProblem<'_>, u: &DMatrix<f64>, hint: Option<&DMatrix<f64>>) -> f64 {
    let gamma = problem.op.gamma();
    let rho = problem.rho;
    let base = (u - problem.y) * 2.0;
    if rho == 0.0 || gamma.n_rows() == 0 {
        return base.norm();
    }
    let gu = gamma.apply(u);
    let norms = row_norms(&gu);
    let fuse_cut = FUSED_NORM.max(1e-7 * u.norm());
    let fused: Vec<bool> = norms.iter().map(|&v| v <= fuse_cut).collect();

    let mut g = DMatrix::zeros(gu.nrows(), gu.ncols());
    for (e, mut row) in g.row_iter_mut().enumerate() {
        if fused[e] {
            if let Some(h) = hint {
                row.copy_from(&h.row(e));
                let nrm = row.norm();
                if nrm > 1.0 {
                    row.scale_mut(1.0 / nrm);
                }
            }
        } else {
            row.copy_from(&(gu.row(e) / norms[e]));
        }
    }
    let residual = |g: &DMatrix<f64>| &base + gamma.apply_transpose(g) * rho;
    if !fused.iter().any(|&f| f) {
        return residual(&g).norm();
    }

    // FISTA on ½‖base + ρΓᵀG‖² over the fused rows of G.
    let lip = rho * rho * problem.op.eigen.max_eigenvalue().max(1e-12);
    let step = 1.0 / lip;
    let mut best = residual(&g).norm();
    let mut prev = g.clone();
    let mut extrap = g.clone();
    let mut t = 1.0f64;
    for _ in 0..2000 {
        let grad = gamma.apply(&residual(&extrap)) * rho;
        let mut next = &extrap - grad * step;
        for (e, mut row) in next.row_iter_mut().enumerate() {
            if !fused[e] {
                row.copy_from(&g.row(e));
            } else {
                let nrm = row.norm();
                if nrm > 1.0 {
                    row.scale_mut(1.0 / nrm);
                }
            }
        }
        let res = residual(&next).norm();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        extrap = &next + (&next - &prev) * ((t - 1.0) / t_next);
        prev = next;
        t = t_next;
        if res < best {
            best = res;
        }
        if best < 1e-13 {
            break;
        }
    }
    best
}
