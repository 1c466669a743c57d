use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::cv::{CvContext, CvWarmCache};
use super::{fix_signs, initialize_v, left_singular_vectors, FitConfig, SvdFactors};
use crate::corpus::FrequencyMatrix;
use crate::error::{GplsiError, Result};
use crate::graph::{incidence, DocumentGraph};
use crate::tv::{solve_tv_warm, TvOperator, TvProblem, TvSettings, TvState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub rho: f64,
    /// Summed held-out error per grid value; empty when CV was skipped.
    pub cv_errors: Vec<f64>,
    pub cv_solver_iterations: usize,
    pub solver_iterations: usize,
    pub solver_converged: bool,
    pub score: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub t_max: usize,
    pub eps: f64,
    pub rho_grid: Vec<f64>,
    pub fold_sources: Vec<usize>,
    pub isolated_holdouts: Vec<usize>,
}

impl FitTrace {
    pub fn rho_path(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rho).collect()
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Equality of everything except wall-clock timings.
    pub fn same_numerics(&self, other: &FitTrace) -> bool {
        let strip = |t: &FitTrace| {
            let mut t = t.clone();
            t.records.iter_mut().for_each(|r| r.wall_ms = 0.0);
            t
        };
        strip(self) == strip(other)
    }

    /// One line per round. Wall times are left out so the file is reproducible.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,rho,score,solver_iterations,solver_converged,cv_solver_iterations,cv_errors\n");
        for r in &self.records {
            let errs: Vec<String> = r.cv_errors.iter().map(|e| format!("{e:?}")).collect();
            let _ = writeln!(
                s,
                "{},{:?},{:?},{},{},{},{}",
                r.t,
                r.rho,
                r.score,
                r.solver_iterations,
                r.solver_converged,
                r.cv_solver_iterations,
                errs.join(";")
            );
        }
        s
    }
}

/// `Û(ÛᵀXV̂)V̂ᵀ`, the projection of `X` onto both estimated subspaces.
fn two_sided_projection(x: &DMatrix<f64>, u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let core = u.tr_mul(&(x * v));
    u * core * v.transpose()
}

/// Two-way iterative graph-aligned SVD.
///
/// Starting from the bias-corrected `V̂⁰`, each round
/// 1. picks `ρ̂ᵗ` by spanning-tree cross-validation (every round, or only the
///    first when `cv_every_iteration` is off),
/// 2. denoises `Ūᵗ = argmin ‖U − XV̂ᵗ⁻¹‖² + ρ̂ᵗ‖ΓU‖₂₁`,
/// 3. sets `Ûᵗ` to the leading left singular vectors of `Ūᵗ`,
/// 4. sets `V̂ᵗ` to the leading left singular vectors of `XᵀÛᵗ`,
///
/// and stops once `‖P_uᵗ X P_vᵗ − P_uᵗ⁻¹ X P_vᵗ⁻¹‖_F < ε` or after `t_max`
/// rounds. The returned bases are rotated so that `ÛᵀXV̂` is diagonal.
pub fn fit_gplsi(x: &FrequencyMatrix, g: &DocumentGraph, cfg: &FitConfig) -> Result<(SvdFactors, FitTrace)> {
    cfg.validate(x)?;
    let xf = x.freqs();
    if g.n_nodes() != x.n_docs() {
        return Err(GplsiError::DimensionMismatch(format!(
            "graph has {} nodes but the corpus has {} documents",
            g.n_nodes(),
            x.n_docs()
        )));
    }
    let k = cfg.k;
    let grid = cfg.resolved_rho_grid(x);
    let t_max = cfg.resolved_t_max(x);
    let eps = cfg.resolved_eps(x);
    let tv_settings: TvSettings = cfg.tv.into();
    let cv_settings: TvSettings = cfg.cv_tv.into();

    let op = TvOperator::new(incidence(g, cfg.weighted));
    let ctx = CvContext::new(xf, g, cfg.folds, cfg.cv_seed)?;
    let mut cache = CvWarmCache::default();

    let mut v = initialize_v(x, k)?;
    let mut u = left_singular_vectors(&(xf * &v), k)?;
    let mut proj_prev = two_sided_projection(xf, &u, &v);

    let mut records = Vec::with_capacity(t_max);
    let mut rho = grid[0];
    let mut state: Option<(TvState, DMatrix<f64>)> = None;
    let mut converged = false;

    for t in 1..=t_max {
        let started = Instant::now();
        let (cv_errors, cv_iters) = if t == 1 || cfg.cv_every_iteration {
            let out = ctx.evaluate_subspace(xf, &op, &v, &grid, &cv_settings, Some(&mut cache))?;
            rho = out.rho;
            (out.errors, out.solver_iterations)
        } else {
            (Vec::new(), 0)
        };

        let y = xf * &v;
        let warm = state.as_ref().map(|(s, basis)| s.rotated(&basis.tr_mul(&v)));
        let sol = solve_tv_warm(TvProblem { y: &y, op: &op, rho }, &tv_settings, warm.as_ref())?;
        if !sol.converged {
            log::warn!("denoising did not converge at round {t} (rho = {rho})");
        }
        u = left_singular_vectors(&sol.u, k)?;
        let v_next = left_singular_vectors(&xf.tr_mul(&u), k)?;
        state = Some((sol.state, v.clone()));
        v = v_next;

        let proj = two_sided_projection(xf, &u, &v);
        let score = (&proj - &proj_prev).norm();
        proj_prev = proj;

        records.push(IterationRecord {
            t,
            rho,
            cv_errors,
            cv_solver_iterations: cv_iters,
            solver_iterations: sol.iterations,
            solver_converged: sol.converged,
            score,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if score < eps {
            converged = true;
            break;
        }
    }

    let factors = align_factors(xf, u, v)?;
    Ok((
        factors,
        FitTrace {
            records,
            converged,
            t_max,
            eps,
            rho_grid: grid,
            fold_sources: ctx.folds().sources.clone(),
            isolated_holdouts: ctx.isolated_holdouts.clone(),
        },
    ))
}

/// Rotates `u`, `v` within their spans so that `ÛᵀXV̂ = diag(λ)`, `λ` descending.
pub(crate) fn align_factors(x: &DMatrix<f64>, u: DMatrix<f64>, v: DMatrix<f64>) -> Result<SvdFactors> {
    let core = u.tr_mul(&(x * &v));
    let inner = super::truncated_svd(&core, core.nrows())?;
    let mut u = u * &inner.u;
    let mut v = v * &inner.v;
    fix_signs(&mut u, &mut v);
    Ok(SvdFactors {
        u,
        v,
        lambda: inner.lambda,
    })
}
