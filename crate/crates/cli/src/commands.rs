use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gplsi_core::bench::{run_benchmark, BenchGrid};
use gplsi_core::corpus::{
    generate_synthetic, load_counts, load_graph, save_counts_matrix_market, save_graph, validate_frequency,
    CountFormat, SyntheticConfig,
};
use gplsi_core::decomposition::FitConfig;
use gplsi_core::eval::{evaluate, EvalInputs};
use gplsi_core::model::{fit_model, load_model, load_truth, save_model, save_truth, Method, TopicRecovery};

use crate::manifest::{RunManifest, MANIFEST_NAME};
use crate::{CliError, Outcome};

#[derive(Debug, Parser)]
#[command(name = "gplsi", version, about = "Graph-aligned topic models: generate, fit, evaluate, benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic spatially coherent corpus.
    Generate(GenerateArgs),
    /// Fit a topic model to a count matrix.
    Fit(FitArgs),
    /// Compare a fitted model with ground truth.
    Eval(EvalArgs),
    /// Sweep a grid of synthetic experiments.
    Benchmark(BenchmarkArgs),
    /// Re-hash the files listed in a manifest.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long = "N")]
    pub doc_length: u64,
    #[arg(long, default_value_t = 30)]
    pub n_grp: usize,
    #[arg(long, default_value_t = 5)]
    pub knn: usize,
    #[arg(long, default_value_t = 0.03)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Gplsi,
    Plsi,
    Onestep,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gplsi => Method::Gplsi,
            MethodArg::Plsi => Method::Plsi,
            MethodArg::Onestep => Method::Onestep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TopicsArg {
    Regression,
    Klopp,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Matrix Market (.mtx) or CSV count matrix.
    #[arg(long)]
    pub counts: PathBuf,
    /// Edge list `i j [weight]`; required for gplsi and onestep.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long = "K")]
    pub k: usize,
    /// Comma-separated ascending penalties.
    #[arg(long, value_delimiter = ',')]
    pub rho_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Seed for the cross-validation fold sources.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Select the penalty in the first round only.
    #[arg(long)]
    pub cv_once: bool,
    /// Scale the penalty on each edge by its weight.
    #[arg(long)]
    pub weighted: bool,
    #[arg(long, value_enum, default_value = "regression")]
    pub topics: TopicsArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Enables Moran's I and PAS.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// JSON experiment grid.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; `GPLSI_THREADS` caps this.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

pub fn run(cli: &Cli, args: Vec<String>) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Generate(a) => generate(a, args),
        Command::Fit(a) => fit(a, args),
        Command::Eval(a) => eval(a, args),
        Command::Benchmark(a) => benchmark(a, args),
        Command::Verify(a) => verify(a),
    }
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Manifest path for a command whose output is a single file.
fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn generate(a: &GenerateArgs, args: Vec<String>) -> Result<Outcome, CliError> {
    let cfg = SyntheticConfig {
        n_grp: a.n_grp,
        knn: a.knn,
        noise_sd: a.noise_sd,
        ..SyntheticConfig::new(a.n, a.p, a.k, a.doc_length, a.seed)
    };
    let started = Instant::now();
    let corpus = generate_synthetic(&cfg)?;
    let gen_ms = ms(started);

    make_dir(&a.out)?;
    let mut manifest = RunManifest::new("generate", args, serde_json::to_value(&cfg)?, vec![a.seed]);
    let counts = a.out.join("counts.mtx");
    let graph = a.out.join("graph.txt");
    let started = Instant::now();
    save_counts_matrix_market(&counts, &corpus.counts)?;
    save_graph(&graph, &corpus.graph)?;
    save_truth(&a.out, &corpus.truth)?;
    for name in ["counts.mtx", "graph.txt", "W.csv", "A.csv", "truth.json"] {
        manifest.add_output(&a.out.join(name))?;
    }
    manifest.stage_ms.insert("generate".into(), gen_ms);
    manifest.stage_ms.insert("write".into(), ms(started));
    manifest.write(&a.out.join(MANIFEST_NAME))?;
    Ok(Outcome::Done)
}

fn fit(a: &FitArgs, args: Vec<String>) -> Result<Outcome, CliError> {
    let method: Method = a.method.into();
    let started = Instant::now();
    let counts = load_counts(&a.counts, CountFormat::from_path(&a.counts))?;
    let x = validate_frequency(&counts)?;
    let graph = match &a.graph {
        Some(path) => Some(load_graph(path, Some(x.n_docs()))?),
        None if method.needs_graph() => {
            return Err(CliError::Usage(format!("--graph is required for --method {method}")));
        }
        None => None,
    };
    let load_ms = ms(started);

    let mut cfg = FitConfig::new(a.k);
    cfg.rho_grid = a.rho_grid.clone();
    cfg.folds = a.folds;
    cfg.eps = a.eps;
    cfg.t_max = a.t_max;
    cfg.cv_seed = a.seed;
    cfg.cv_every_iteration = !a.cv_once;
    cfg.weighted = a.weighted;
    let recovery = match a.topics {
        TopicsArg::Regression => TopicRecovery::Regression,
        TopicsArg::Klopp => TopicRecovery::Klopp,
    };

    let started = Instant::now();
    let model = fit_model(&x, graph.as_ref(), method, &cfg, recovery)?;
    let fit_ms = ms(started);

    save_model(&a.out, &model)?;
    let config = json!({ "method": method, "fit": cfg, "topic_recovery": recovery });
    let mut manifest = RunManifest::new("fit", args, config, vec![a.seed]);
    manifest.add_input(&a.counts)?;
    if let Some(g) = &a.graph {
        manifest.add_input(g)?;
    }
    for name in ["W.csv", "A.csv", "U.csv", "V.csv", "trace.csv", "meta.json"] {
        manifest.add_output(&a.out.join(name))?;
    }
    manifest.stage_ms.insert("load".into(), load_ms);
    manifest.stage_ms.insert("fit".into(), fit_ms);
    manifest.nonconverged = !model.converged();
    manifest.write(&a.out.join(MANIFEST_NAME))?;
    if model.converged() {
        Ok(Outcome::Done)
    } else {
        log::warn!("fit stopped at an iteration cap; outputs are flagged in meta.json");
        Ok(Outcome::NonConverged)
    }
}

fn eval(a: &EvalArgs, args: Vec<String>) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let model = load_model(&a.model)?;
    let truth = load_truth(&a.truth)?;
    let graph = a
        .graph
        .as_ref()
        .map(|p| load_graph(p, Some(model.w.nrows())))
        .transpose()?;
    let mut report = evaluate(EvalInputs {
        w_hat: &model.w,
        w_true: &truth.w,
        a_hat: Some(&model.a),
        a_true: Some(&truth.a),
        u_hat: Some(&model.factors.u),
        v_hat: Some(&model.factors.v),
        graph: graph.as_ref(),
    })?;
    // the fit's own wall time, when its manifest is present
    report.runtime_ms = RunManifest::read(&a.model.join(MANIFEST_NAME))
        .ok()
        .and_then(|m| m.stage_ms.get("fit").copied());

    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        make_dir(parent)?;
    }
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(&a.out, text).map_err(|e| CliError::io(&a.out, e))?;

    let mut manifest = RunManifest::new("eval", args, json!({}), Vec::new());
    for name in ["W.csv", "A.csv", "U.csv", "V.csv", "meta.json"] {
        manifest.add_input(&a.model.join(name))?;
    }
    for name in ["W.csv", "A.csv", "truth.json"] {
        manifest.add_input(&a.truth.join(name))?;
    }
    if let Some(g) = &a.graph {
        manifest.add_input(g)?;
    }
    manifest.add_output(&a.out)?;
    manifest.stage_ms.insert("eval".into(), ms(started));
    manifest.write(&sidecar(&a.out))?;
    Ok(Outcome::Done)
}

/// Thread count from the flag, capped by `GPLSI_THREADS`.
fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let env = match std::env::var("GPLSI_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("GPLSI_THREADS must be a positive integer, got {v:?}")))?,
        ),
        Err(_) => None,
    };
    let n = match (flag, env) {
        (Some(f), Some(e)) => Some(f.min(e)),
        (f, e) => f.or(e),
    };
    if n == Some(0) {
        return Err(CliError::Usage("thread count must be at least 1".into()));
    }
    Ok(n)
}

fn benchmark(a: &BenchmarkArgs, args: Vec<String>) -> Result<Outcome, CliError> {
    let text = fs::read_to_string(&a.grid).map_err(|e| CliError::io(&a.grid, e))?;
    let grid: BenchGrid = serde_json::from_str(&text)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(a.threads)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;

    let started = Instant::now();
    let output = pool.install(|| run_benchmark(&grid))?;
    let run_ms = ms(started);

    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        make_dir(parent)?;
    }
    fs::write(&a.out, output.to_csv()).map_err(|e| CliError::io(&a.out, e))?;

    let mut manifest = RunManifest::new("benchmark", args, serde_json::to_value(&grid)?, grid.seeds.clone());
    manifest.add_input(&a.grid)?;
    manifest.add_output(&a.out)?;
    manifest.stage_ms.insert("benchmark".into(), run_ms);
    for t in &output.timings {
        let key = format!(
            "{}/n={}/N={}/p={}/K={}/seed={}",
            t.method, t.cell.n, t.cell.doc_length, t.cell.p, t.cell.k, t.cell.seed
        );
        manifest.stage_ms.insert(key, t.wall_ms);
    }
    manifest.nonconverged = output.any_nonconverged();
    manifest.write(&sidecar(&a.out))?;
    if manifest.nonconverged {
        log::warn!("some fits stopped at an iteration cap; see the converged metric");
        Ok(Outcome::NonConverged)
    } else {
        Ok(Outcome::Done)
    }
}

fn verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let manifest = RunManifest::read(&a.manifest)?;
    let bad = manifest.mismatches();
    if bad.is_empty() {
        println!(
            "{} inputs and {} outputs match",
            manifest.inputs.len(),
            manifest.outputs.len()
        );
        Ok(Outcome::Done)
    } else {
        Err(CliError::ManifestMismatch(bad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar(Path::new("out/report.json")), PathBuf::from("out/report.json.manifest.json"));
    }

    #[test]
    fn cli_parses_documented_flags() {
        let cli = Cli::try_parse_from([
            "gplsi", "fit", "--method", "gplsi", "--counts", "c.mtx", "--graph", "g.txt", "--K", "3", "--rho-grid",
            "0.01,0.1", "--folds", "4", "--eps", "1e-5", "--t-max", "7", "--seed", "9", "--out", "m",
        ])
        .unwrap();
        match cli.command {
            Command::Fit(f) => {
                assert_eq!(f.rho_grid, Some(vec![0.01, 0.1]));
                assert_eq!(f.t_max, Some(7));
                assert_eq!(f.k, 3);
            }
            other => panic!("parsed {other:?}"),
        }
        assert!(Cli::try_parse_from(["gplsi", "generate", "--n", "10", "--p", "5", "--K", "2", "--N", "30", "--out", "d"]).is_ok());
    }
}
