//! Synthetic benchmark sweeps producing long-format metric tables.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{generate_synthetic, validate_frequency, SyntheticConfig};
use crate::decomposition::FitConfig;
use crate::error::{GplsiError, Result};
use crate::eval::{evaluate, EvalInputs};
use crate::model::{fit_model, Method, TopicRecovery};

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_n_grp() -> usize {
    30
}

fn default_knn() -> usize {
    5
}

fn default_noise_sd() -> f64 {
    0.03
}

fn default_folds() -> usize {
    5
}

/// Experiment grid, read from JSON. Every combination of `n`, `N`, `p`, `K`
/// and seed is one cell; every method is fitted on each cell's corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchGrid {
    pub n: Vec<usize>,
    #[serde(rename = "N")]
    pub doc_length: Vec<u64>,
    pub p: Vec<usize>,
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_n_grp")]
    pub n_grp: usize,
    #[serde(default = "default_knn")]
    pub knn: usize,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub rho_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub t_max: Option<usize>,
}

impl BenchGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("n", self.n.is_empty()),
            ("N", self.doc_length.is_empty()),
            ("p", self.p.is_empty()),
            ("K", self.k.is_empty()),
            ("methods", self.methods.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return Err(GplsiError::InvalidParameter(format!("benchmark grid field {name} is empty")));
            }
        }
        Ok(())
    }

    /// Cells in output order.
    pub fn cells(&self) -> Vec<BenchCell> {
        let mut cells = Vec::new();
        for &n in &self.n {
            for &doc_length in &self.doc_length {
                for &p in &self.p {
                    for &k in &self.k {
                        for &seed in &self.seeds {
                            cells.push(BenchCell { n, doc_length, p, k, seed });
                        }
                    }
                }
            }
        }
        cells.sort();
        cells.dedup();
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BenchCell {
    pub n: usize,
    pub doc_length: u64,
    pub p: usize,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub cell: BenchCell,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellTiming {
    pub cell: BenchCell,
    pub method: Method,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub timings: Vec<CellTiming>,
}

pub const CSV_HEADER: &str = "method,seed,n,N,p,K,metric,value";

impl BenchOutput {
    /// Long-format table; contains no timings, so reruns are byte-identical.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{:?}",
                r.method, r.cell.seed, r.cell.n, r.cell.doc_length, r.cell.p, r.cell.k, r.metric, r.value
            );
        }
        s
    }

    pub fn any_nonconverged(&self) -> bool {
        self.rows.iter().any(|r| r.metric == "converged" && r.value == 0.0)
    }
}

/// Largest violation of the row-simplex constraints.
pub fn simplex_violation(m: &nalgebra::DMatrix<f64>) -> f64 {
    let sums = m
        .row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    let negative = m.iter().map(|&v| -v).fold(0.0, f64::max);
    sums.max(negative)
}

fn run_cell(grid: &BenchGrid, cell: BenchCell) -> Result<(Vec<BenchRow>, Vec<CellTiming>)> {
    let syn = SyntheticConfig {
        n_grp: grid.n_grp,
        knn: grid.knn,
        noise_sd: grid.noise_sd,
        ..SyntheticConfig::new(cell.n, cell.p, cell.k, cell.doc_length, cell.seed)
    };
    let corpus = generate_synthetic(&syn)?;
    let x = validate_frequency(&corpus.counts)?;
    let mut cfg = FitConfig::new(cell.k);
    cfg.folds = grid.folds;
    cfg.cv_seed = cell.seed;
    cfg.rho_grid = grid.rho_grid.clone();
    cfg.t_max = grid.t_max;

    let mut methods = grid.methods.clone();
    methods.sort();
    methods.dedup();
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for method in methods {
        let started = Instant::now();
        let model = fit_model(&x, Some(&corpus.graph), method, &cfg, TopicRecovery::Regression)?;
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        let report = evaluate(EvalInputs {
            w_hat: &model.w,
            w_true: &corpus.truth.w,
            a_hat: Some(&model.a),
            a_true: Some(&corpus.truth.a),
            u_hat: Some(&model.factors.u),
            v_hat: Some(&model.factors.v),
            graph: Some(&corpus.graph),
        })?;
        let metrics: [(&'static str, f64); 14] = [
            ("w_l2", report.w_l2),
            ("w_l1", report.w_l1),
            ("a_l2", report.a_l2.unwrap_or(f64::NAN)),
            ("a_l1", report.a_l1.unwrap_or(f64::NAN)),
            ("sintheta_U", report.sintheta_u.unwrap_or(f64::NAN)),
            ("sintheta_V", report.sintheta_v.unwrap_or(f64::NAN)),
            ("morans_I", report.morans_i.unwrap_or(f64::NAN)),
            ("pas", report.pas.unwrap_or(f64::NAN)),
            ("rho", model.meta.rho_path.last().copied().unwrap_or(0.0)),
            ("iterations", model.meta.iterations as f64),
            ("converged", if model.converged() { 1.0 } else { 0.0 }),
            ("w_repair_mass", model.meta.w_repair_mass),
            ("w_simplex_violation", simplex_violation(&model.w)),
            ("a_simplex_violation", simplex_violation(&model.a)),
        ];
        rows.extend(metrics.into_iter().map(|(metric, value)| BenchRow {
            method,
            cell,
            metric,
            value,
        }));
        timings.push(CellTiming { cell, method, wall_ms });
    }
    Ok((rows, timings))
}

/// Runs every cell, in parallel on the current rayon pool; the output order
/// is fixed by the grid and does not depend on scheduling.
pub fn run_benchmark(grid: &BenchGrid) -> Result<BenchOutput> {
    grid.validate()?;
    let results: Vec<Result<(Vec<BenchRow>, Vec<CellTiming>)>> =
        grid.cells().into_par_iter().map(|c| run_cell(grid, c)).collect();
    let mut out = BenchOutput {
        rows: Vec::new(),
        timings: Vec::new(),
    };
    for r in results {
        let (rows, timings) = r?;
        out.rows.extend(rows);
        out.timings.extend(timings);
    }
    Ok(out)
}
