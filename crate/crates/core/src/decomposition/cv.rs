//! Penalty selection by cross-validation over spanning-tree folds.
//!
//! Each fold is held out in turn. Held-out rows are replaced by the mean of
//! their in-sample graph neighbors, the denoiser is run on the patched matrix
//! for every candidate penalty, and the held-out rows of the reconstruction are
//! compared against the observed ones.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::corpus::FrequencyMatrix;
use crate::error::Result;
use crate::graph::{incidence, mst_folds, DocumentGraph, FoldPartition};
use crate::tv::{solve_tv_warm, TvOperator, TvProblem, TvSettings, TvState};

/// Fold assignment plus the neighbor-interpolated matrix for every fold.
#[derive(Debug, Clone)]
pub struct CvContext {
    folds: FoldPartition,
    holdouts: Vec<Vec<usize>>,
    interpolated: Vec<DMatrix<f64>>,
    /// Held-out rows with no in-sample neighbor; they keep their observed values.
    pub isolated_holdouts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub rho: f64,
    pub rho_index: usize,
    /// Summed held-out squared error per candidate.
    pub errors: Vec<f64>,
    pub solver_iterations: usize,
    pub nonconverged_solves: usize,
}

/// Warm starts carried between successive cross-validation rounds.
#[derive(Debug, Clone, Default)]
pub struct CvWarmCache {
    states: Vec<Vec<Option<TvState>>>,
    basis: Option<DMatrix<f64>>,
}

impl CvContext {
    pub fn new(x: &DMatrix<f64>, g: &DocumentGraph, folds: usize, seed: u64) -> Result<Self> {
        let partition = mst_folds(g, folds, seed)?;
        let adj = g.adjacency();
        let mut holdouts = Vec::with_capacity(folds);
        let mut interpolated = Vec::with_capacity(folds);
        let mut isolated = Vec::new();
        for k in 0..folds {
            let members = partition.members(k);
            let mut xk = x.clone();
            for &i in &members {
                let available: Vec<usize> = adj[i]
                    .iter()
                    .map(|&(j, _)| j)
                    .filter(|&j| partition.fold_of[j] != k)
                    .collect();
                if available.is_empty() {
                    log::warn!("held-out document {i} has no in-sample neighbor; keeping its observed row");
                    isolated.push(i);
                    continue;
                }
                let mut row = xk.row_mut(i);
                row.fill(0.0);
                for &j in &available {
                    row += x.row(j);
                }
                row /= available.len() as f64;
            }
            holdouts.push(members);
            interpolated.push(xk);
        }
        isolated.sort_unstable();
        Ok(CvContext {
            folds: partition,
            holdouts,
            interpolated,
            isolated_holdouts: isolated,
        })
    }

    pub fn folds(&self) -> &FoldPartition {
        &self.folds
    }

    /// Patched matrix `Xᵏ` for fold `k`.
    pub fn interpolated(&self, k: usize) -> &DMatrix<f64> {
        &self.interpolated[k]
    }

    /// Scores penalties for denoising `XᵏV` and reconstructing through `Vᵀ`.
    pub fn evaluate_subspace(
        &self,
        x: &DMatrix<f64>,
        op: &TvOperator,
        v: &DMatrix<f64>,
        grid: &[f64],
        settings: &TvSettings,
        cache: Option<&mut CvWarmCache>,
    ) -> Result<CvOutcome> {
        let targets: Vec<DMatrix<f64>> = self.interpolated.iter().map(|xk| xk * v).collect();
        let score = |k: usize, u: &DMatrix<f64>| {
            self.holdouts[k]
                .iter()
                .map(|&i| (x.row(i) - u.row(i) * v.transpose()).norm_squared())
                .sum::<f64>()
        };
        match cache {
            Some(cache) => {
                let rotation = cache.basis.as_ref().map(|old| old.tr_mul(v));
                let warm: Vec<Vec<Option<TvState>>> = (0..self.holdouts.len())
                    .map(|k| {
                        (0..grid.len())
                            .map(|r| {
                                let s = cache.states.get(k)?.get(r)?.as_ref()?;
                                Some(match &rotation {
                                    Some(rot) => s.rotated(rot),
                                    None => s.clone(),
                                })
                            })
                            .collect()
                    })
                    .collect();
                let (outcome, states) = self.run(op, &targets, grid, settings, &warm, score)?;
                cache.states = states;
                cache.basis = Some(v.clone());
                Ok(outcome)
            }
            None => {
                let warm = vec![vec![None; grid.len()]; self.holdouts.len()];
                Ok(self.run(op, &targets, grid, settings, &warm, score)?.0)
            }
        }
    }

    /// Scores penalties for denoising the full patched matrix `Xᵏ`.
    pub fn evaluate_full(
        &self,
        x: &DMatrix<f64>,
        op: &TvOperator,
        grid: &[f64],
        settings: &TvSettings,
    ) -> Result<CvOutcome> {
        let score = |k: usize, m: &DMatrix<f64>| {
            self.holdouts[k]
                .iter()
                .map(|&i| (x.row(i) - m.row(i)).norm_squared())
                .sum::<f64>()
        };
        let warm = vec![vec![None; grid.len()]; self.holdouts.len()];
        Ok(self
            .run(op, &self.interpolated, grid, settings, &warm, score)?
            .0)
    }

    #[allow(clippy::type_complexity)]
    fn run(
        &self,
        op: &TvOperator,
        targets: &[DMatrix<f64>],
        grid: &[f64],
        settings: &TvSettings,
        warm: &[Vec<Option<TvState>>],
        score: impl Fn(usize, &DMatrix<f64>) -> f64 + Sync,
    ) -> Result<(CvOutcome, Vec<Vec<Option<TvState>>>)> {
        let per_fold: Vec<Result<(Vec<f64>, usize, usize, Vec<Option<TvState>>)>> = (0..targets.len())
            .into_par_iter()
            .map(|k| {
                let mut errors = Vec::with_capacity(grid.len());
                let mut states = Vec::with_capacity(grid.len());
                let (mut iters, mut nonconv) = (0, 0);
                let mut previous: Option<TvState> = None;
                for (r, &rho) in grid.iter().enumerate() {
                    let start = warm[k][r].as_ref().or(previous.as_ref());
                    let sol = solve_tv_warm(
                        TvProblem {
                            y: &targets[k],
                            op,
                            rho,
                        },
                        settings,
                        start,
                    )?;
                    iters += sol.iterations;
                    nonconv += usize::from(!sol.converged);
                    errors.push(score(k, &sol.u));
                    previous = Some(sol.state.clone());
                    states.push(Some(sol.state));
                }
                Ok((errors, iters, nonconv, states))
            })
            .collect();

        let mut totals = vec![0.0; grid.len()];
        let (mut iters, mut nonconv) = (0, 0);
        let mut states = Vec::with_capacity(per_fold.len());
        for fold in per_fold {
            let (errors, it, nc, st) = fold?;
            for (t, e) in totals.iter_mut().zip(errors) {
                *t += e;
            }
            iters += it;
            nonconv += nc;
            states.push(st);
        }
        // first minimum wins, so ties go to the smaller penalty
        let mut best = 0;
        for (r, &e) in totals.iter().enumerate() {
            if e < totals[best] {
                best = r;
            }
        }
        Ok((
            CvOutcome {
                rho: grid[best],
                rho_index: best,
                errors: totals,
                solver_iterations: iters,
                nonconverged_solves: nonconv,
            },
            states,
        ))
    }
}

/// One cross-validation pass for the subspace-denoising step.
///
/// Folds come from [`mst_folds`] with `seed`; the unweighted incidence matrix
/// of `g` defines the penalty.
pub fn cross_validate_rho(
    x: &FrequencyMatrix,
    g: &DocumentGraph,
    v_prev: &DMatrix<f64>,
    rho_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvOutcome> {
    let ctx = CvContext::new(x.freqs(), g, folds, seed)?;
    let op = TvOperator::new(incidence(g, false));
    let settings = TvSettings {
        tol: 1e-5,
        compute_kkt: false,
        ..TvSettings::default()
    };
    ctx.evaluate_subspace(x.freqs(), &op, v_prev, rho_grid, &settings, None)
}
