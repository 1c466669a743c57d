//! End-to-end fitting and the on-disk model and ground-truth layouts.
//!
//! A model directory holds `W.csv`, `A.csv`, `U.csv`, `V.csv`, `trace.csv` and
//! `meta.json`; a ground-truth directory holds `W.csv`, `A.csv` and
//! `truth.json`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_dense_csv, write_dense_csv, FrequencyMatrix, GroundTruth};
use crate::decomposition::{
    fit_gplsi, fit_onestep, fit_plsi, FitConfig, FitTrace, OneStepReport, SvdFactors,
};
use crate::error::{GplsiError, Result};
use crate::graph::DocumentGraph;
use crate::simplex::{klopp_topics, recover_a, recover_w, spa};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gplsi,
    Onestep,
    Plsi,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gplsi, Method::Onestep, Method::Plsi];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gplsi => "gplsi",
            Method::Onestep => "onestep",
            Method::Plsi => "plsi",
        }
    }

    pub fn needs_graph(self) -> bool {
        !matches!(self, Method::Plsi)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = GplsiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gplsi" => Ok(Method::Gplsi),
            "onestep" => Ok(Method::Onestep),
            "plsi" => Ok(Method::Plsi),
            other => Err(GplsiError::InvalidParameter(format!(
                "unknown method {other:?}; expected gplsi, onestep or plsi"
            ))),
        }
    }
}

/// How topics are recovered once mixtures are known.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicRecovery {
    /// Simplex-constrained regression of `X` on `Ŵ`.
    #[default]
    Regression,
    /// `ĤΛ̂V̂ᵀ` projected onto the simplex; kept for debugging.
    Klopp,
}

/// Everything recorded about a fit besides the matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub method: Method,
    pub k: usize,
    pub n_docs: usize,
    pub n_words: usize,
    pub config: FitConfig,
    pub topic_recovery: TopicRecovery,
    /// Selected penalty per round; a single entry for the one-step fit.
    pub rho_path: Vec<f64>,
    pub iterations: usize,
    /// False when the outer loop or the topic regression hit its cap.
    pub converged: bool,
    pub anchors: Vec<usize>,
    pub lambda: Vec<f64>,
    /// Negative mixture mass clipped before renormalizing rows.
    pub w_repair_mass: f64,
    pub w_repaired: bool,
    pub w_uniform_rows: Vec<usize>,
    pub topic_iterations: usize,
    pub topic_residual: f64,
    pub fold_sources: Vec<usize>,
    pub onestep_cv_errors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TopicModel {
    pub w: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub factors: SvdFactors,
    pub meta: ModelMeta,
    pub trace: Option<FitTrace>,
}

impl TopicModel {
    pub fn converged(&self) -> bool {
        self.meta.converged
    }
}

/// Fits low-rank factors with `method`, then hunts vertices and recovers
/// `Ŵ` and `Â`.
pub fn fit_model(
    x: &FrequencyMatrix,
    g: Option<&DocumentGraph>,
    method: Method,
    cfg: &FitConfig,
    recovery: TopicRecovery,
) -> Result<TopicModel> {
    let graph = || {
        g.ok_or_else(|| GplsiError::InvalidParameter(format!("method {method} needs a document graph")))
    };
    let (factors, trace, onestep): (SvdFactors, Option<FitTrace>, Option<OneStepReport>) = match method {
        Method::Plsi => (fit_plsi(x, cfg.k)?, None, None),
        Method::Gplsi => {
            let (f, t) = fit_gplsi(x, graph()?, cfg)?;
            (f, Some(t), None)
        }
        Method::Onestep => {
            let (f, r) = fit_onestep(x, graph()?, cfg)?;
            (f, None, Some(r))
        }
    };
    let vertices = spa(&factors.u, cfg.k)?;
    let mix = recover_w(&factors.u, &vertices)?;
    let (a, topic_iterations, topic_residual, topic_converged) = match recovery {
        TopicRecovery::Regression => {
            let est = recover_a(x.freqs(), &mix.w)?;
            (est.a, est.iterations, est.residual, est.converged)
        }
        TopicRecovery::Klopp => {
            let a = klopp_topics(&vertices.h_hat, &factors.lambda, &factors.v);
            let residual = (x.freqs() - &mix.w * &a).norm();
            (a, 0, residual, true)
        }
    };
    let (rho_path, iterations, outer_converged, fold_sources) = match (&trace, &onestep) {
        (Some(t), _) => (t.rho_path(), t.iterations(), t.converged, t.fold_sources.clone()),
        (None, Some(r)) => (vec![r.rho], 1, r.solver_converged, Vec::new()),
        (None, None) => (Vec::new(), 0, true, Vec::new()),
    };
    let meta = ModelMeta {
        method,
        k: cfg.k,
        n_docs: x.n_docs(),
        n_words: x.n_words(),
        config: cfg.clone(),
        topic_recovery: recovery,
        rho_path,
        iterations,
        converged: outer_converged && topic_converged,
        anchors: vertices.indices.clone(),
        lambda: factors.lambda.clone(),
        w_repair_mass: mix.repair_mass,
        w_repaired: mix.repair_mass > 0.0 || !mix.uniform_rows.is_empty(),
        w_uniform_rows: mix.uniform_rows,
        topic_iterations,
        topic_residual,
        fold_sources,
        onestep_cv_errors: onestep.map(|r| r.cv_errors).unwrap_or_default(),
    };
    Ok(TopicModel {
        w: mix.w,
        a,
        factors,
        meta,
        trace,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| GplsiError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| GplsiError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GplsiError::io(dir, e))
}

pub fn save_model(dir: &Path, model: &TopicModel) -> Result<()> {
    ensure_dir(dir)?;
    write_dense_csv(&dir.join("W.csv"), &model.w, "topic")?;
    write_dense_csv(&dir.join("A.csv"), &model.a, "word")?;
    write_dense_csv(&dir.join("U.csv"), &model.factors.u, "u")?;
    write_dense_csv(&dir.join("V.csv"), &model.factors.v, "v")?;
    let trace = match &model.trace {
        Some(t) => t.to_csv(),
        None => FitTrace {
            records: Vec::new(),
            converged: true,
            t_max: 0,
            eps: 0.0,
            rho_grid: Vec::new(),
            fold_sources: Vec::new(),
            isolated_holdouts: Vec::new(),
        }
        .to_csv(),
    };
    let path = dir.join("trace.csv");
    fs::write(&path, trace).map_err(|e| GplsiError::io(&path, e))?;
    write_json(&dir.join("meta.json"), &model.meta)
}

/// Reads a model directory. The iteration trace is not reloaded.
pub fn load_model(dir: &Path) -> Result<TopicModel> {
    let meta: ModelMeta = read_json(&dir.join("meta.json"))?;
    let w = read_dense_csv(&dir.join("W.csv"))?;
    let a = read_dense_csv(&dir.join("A.csv"))?;
    let u = read_dense_csv(&dir.join("U.csv"))?;
    let v = read_dense_csv(&dir.join("V.csv"))?;
    if w.ncols() != meta.k || a.nrows() != meta.k || u.ncols() != meta.k || v.ncols() != meta.k {
        return Err(GplsiError::DimensionMismatch(format!(
            "model files in {} disagree with K = {}",
            dir.display(),
            meta.k
        )));
    }
    Ok(TopicModel {
        w,
        a,
        factors: SvdFactors {
            u,
            v,
            lambda: meta.lambda.clone(),
        },
        meta,
        trace: None,
    })
}

pub fn save_truth(dir: &Path, truth: &GroundTruth) -> Result<()> {
    ensure_dir(dir)?;
    write_dense_csv(&dir.join("W.csv"), &truth.w, "topic")?;
    write_dense_csv(&dir.join("A.csv"), &truth.a, "word")?;
    write_json(&dir.join("truth.json"), truth)
}

pub fn load_truth(dir: &Path) -> Result<GroundTruth> {
    let mut truth: GroundTruth = read_json(&dir.join("truth.json"))?;
    truth.w = read_dense_csv(&dir.join("W.csv"))?;
    truth.a = read_dense_csv(&dir.join("A.csv"))?;
    if truth.w.ncols() != truth.a.nrows() {
        return Err(GplsiError::DimensionMismatch(format!(
            "truth W has {} topics but A has {}",
            truth.w.ncols(),
            truth.a.nrows()
        )));
    }
    Ok(truth)
}
