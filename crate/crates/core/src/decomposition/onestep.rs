use serde::{Deserialize, Serialize};

use super::cv::CvContext;
use super::{truncated_svd, FitConfig, SvdFactors};
use crate::corpus::FrequencyMatrix;
use crate::error::{GplsiError, Result};
use crate::graph::{incidence, DocumentGraph};
use crate::tv::{solve_tv, TvOperator, TvProblem, TvSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepReport {
    pub rho: f64,
    /// Empty when the penalty was supplied instead of cross-validated.
    pub cv_errors: Vec<f64>,
    pub solver_iterations: usize,
    pub solver_converged: bool,
}

/// Denoises the whole frequency matrix once, then takes a rank-`k` SVD.
/// The penalty is chosen by the same spanning-tree cross-validation as
/// [`super::fit_gplsi`], applied to `X` directly.
pub fn fit_onestep(x: &FrequencyMatrix, g: &DocumentGraph, cfg: &FitConfig) -> Result<(SvdFactors, OneStepReport)> {
    cfg.validate(x)?;
    check_graph(x, g)?;
    let grid = cfg.resolved_rho_grid(x);
    let op = TvOperator::new(incidence(g, cfg.weighted));
    let ctx = CvContext::new(x.freqs(), g, cfg.folds, cfg.cv_seed)?;
    let cv = ctx.evaluate_full(x.freqs(), &op, &grid, &cfg.cv_tv.into())?;
    let (factors, mut report) = denoise_and_factor(x, &op, cfg, cv.rho)?;
    report.cv_errors = cv.errors;
    Ok((factors, report))
}

pub fn fit_onestep_with_rho(
    x: &FrequencyMatrix,
    g: &DocumentGraph,
    cfg: &FitConfig,
    rho: f64,
) -> Result<(SvdFactors, OneStepReport)> {
    cfg.validate(x)?;
    check_graph(x, g)?;
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(GplsiError::InvalidParameter(format!("penalty must be finite and non-negative, got {rho}")));
    }
    let op = TvOperator::new(incidence(g, cfg.weighted));
    denoise_and_factor(x, &op, cfg, rho)
}

fn check_graph(x: &FrequencyMatrix, g: &DocumentGraph) -> Result<()> {
    if g.n_nodes() != x.n_docs() {
        return Err(GplsiError::DimensionMismatch(format!(
            "graph has {} nodes but the corpus has {} documents",
            g.n_nodes(),
            x.n_docs()
        )));
    }
    Ok(())
}

fn denoise_and_factor(
    x: &FrequencyMatrix,
    op: &TvOperator,
    cfg: &FitConfig,
    rho: f64,
) -> Result<(SvdFactors, OneStepReport)> {
    let settings: TvSettings = cfg.tv.into();
    let sol = solve_tv(TvProblem { y: x.freqs(), op, rho }, &settings)?;
    if !sol.converged {
        log::warn!("one-step denoising did not converge (rho = {rho})");
    }
    let factors = truncated_svd(&sol.u, cfg.k)?;
    Ok((
        factors,
        OneStepReport {
            rho,
            cv_errors: Vec::new(),
            solver_iterations: sol.iterations,
            solver_converged: sol.converged,
        },
    ))
}
