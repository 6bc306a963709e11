//! `longnav` command line: suite runs, sweeps, affordance datasets, pointing
//! scores and trace plots.
//!
//! Exit codes: 0 success, 1 usage, 2 input or schema error, 3 backend or
//! transport error. Remote tokens are read from the environment only.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use longnav::affordance::{self, AffordanceError, AffordanceKind, RelationConfig};
use longnav::backend::BackendError;
use longnav::eval::{self, EvalConfig, EvalError, PointingSpec, ReasoningSpec, RolloutRow, Suite, SweepAxis};
use longnav::exec::Execution;
use longnav::geometry::Point2;
use longnav::plot;
use longnav::policy_global::{MissPolicy, OracleTable, PolicyError};
use longnav::policy_local::{EpisodeTrace, TerminateReason};
use longnav::remote::{RemoteConfig, DEFAULT_TOKEN_ENV};
use longnav::scene::AnnotationMode;
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "longnav", version, about = "Long-horizon object navigation benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a task suite and write report.json, report.txt and traces/.
    Run(RunArgs),
    /// Run the suite once per value of one axis and write sweep.json and sweep.txt.
    Sweep(SweepArgs),
    /// Generate affordance QA samples from COCO-style annotations.
    GenDataset(GenArgs),
    /// Score pointing predictions against generated samples.
    Score(ScoreArgs),
    /// Render a trace as an SVG map.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReasoningKind {
    Oracle,
    Remote,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PointingKind {
    Oracle,
    Noisy,
    Remote,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Miss {
    Error,
    Guess,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Suite file.
    #[arg(long)]
    suite: PathBuf,
    #[arg(long, value_enum, default_value = "oracle")]
    reasoning: ReasoningKind,
    #[arg(long, value_enum, default_value = "oracle")]
    pointing: PointingKind,
    /// Oracle table replacing the one named by the suite.
    #[arg(long)]
    oracle_table: Option<PathBuf>,
    /// Oracle behavior when no visible label matches the keyword.
    #[arg(long, value_enum, default_value = "error")]
    miss: Miss,
    /// Pixel noise of the noisy pointer.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// False-positive probability of the noisy pointer.
    #[arg(long, default_value_t = 0.0)]
    p_fp: f64,
    /// False-negative probability of the noisy pointer.
    #[arg(long, default_value_t = 0.0)]
    p_fn: f64,
    /// Base URL of a chat-completions endpoint (http only).
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Separate endpoint for pointing; defaults to --endpoint.
    #[arg(long)]
    pointing_endpoint: Option<String>,
    /// Separate model for pointing; defaults to --model.
    #[arg(long)]
    pointing_model: Option<String>,
    #[arg(long, default_value_t = 30_000, value_parser = clap::value_parser!(u64).range(1..))]
    timeout_ms: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=20))]
    max_attempts: u64,
    #[arg(long, default_value = "full")]
    mode: String,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..=360))]
    headings: u64,
    /// Scans without detection before the oracle switches region.
    #[arg(short = 'k', long = "k", default_value_t = 3, value_parser = clap::value_parser!(u64).range(0..=100))]
    k: u64,
    /// Step budget per episode.
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..=1_000_000))]
    budget: u64,
    /// Rollouts per task; defaults to the suite's value.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=10_000))]
    rollouts: Option<u64>,
    /// Master seed; defaults to the suite's value.
    #[arg(long)]
    seed: Option<u64>,
    /// Run rollouts one after another.
    #[arg(long)]
    sequential: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    eval: EvalArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// annotation_mode, pointing_noise or continue_threshold_k.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// COCO-style annotation file.
    #[arg(long)]
    annotations: PathBuf,
    /// Sidecar with free regions and depths per frame.
    #[arg(long)]
    free_regions: Option<PathBuf>,
    /// Output JSONL file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relation margin as a fraction of the smaller box size.
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Samples JSONL written by gen-dataset.
    #[arg(long)]
    samples: PathBuf,
    /// Predictions JSONL: {"frame", "query", "points": [[u, v], ...]} per line.
    #[arg(long)]
    predictions: PathBuf,
    /// Write the JSON score here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Output SVG file.
    #[arg(long)]
    out: PathBuf,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

fn backend_code(e: &BackendError) -> u8 {
    match e {
        BackendError::Config(_) => 1,
        _ => 3,
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let code = match &e {
            EvalError::Backend(b) | EvalError::Policy(PolicyError::Backend(b)) => backend_code(b),
            EvalError::SweepValue { .. } => 1,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<AffordanceError> for Failure {
    fn from(e: AffordanceError) -> Self {
        Self::input(e.to_string())
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn probability(flag: &str, p: f64) -> Result<f64, Failure> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Failure::usage(format!("--{flag} must lie in [0, 1], got {p}")))
    }
}

fn remote(endpoint: Option<&String>, model: Option<&String>, a: &EvalArgs, role: &str) -> Result<RemoteConfig, Failure> {
    let (Some(endpoint), Some(model)) = (endpoint, model) else {
        return Err(Failure::usage(format!("remote {role} needs --endpoint and --model")));
    };
    let mut c = RemoteConfig::new(endpoint.clone(), model.clone());
    c.timeout_ms = a.timeout_ms;
    c.max_attempts = a.max_attempts as usize;
    c.token_env = DEFAULT_TOKEN_ENV.into();
    Ok(c)
}

fn eval_config(a: &EvalArgs) -> Result<EvalConfig, Failure> {
    let mode = a.mode.parse::<AnnotationMode>().map_err(|e| Failure::usage(format!("--mode: {e}")))?;
    let mut c = EvalConfig { mode, k: a.k as usize, ..EvalConfig::default() };
    c.local.perception.n_headings = a.headings as usize;
    c.local.step_budget = a.budget as usize;
    c.reasoning = match a.reasoning {
        ReasoningKind::Oracle => ReasoningSpec::Oracle {
            miss: match a.miss {
                Miss::Error => MissPolicy::Error,
                Miss::Guess => MissPolicy::Guess,
            },
        },
        ReasoningKind::Remote => ReasoningSpec::Remote(remote(a.endpoint.as_ref(), a.model.as_ref(), a, "reasoning")?),
    };
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(Failure::usage(format!("--sigma must be finite and non-negative, got {}", a.sigma)));
    }
    c.pointing = match a.pointing {
        PointingKind::Oracle => PointingSpec::Oracle,
        PointingKind::Noisy => PointingSpec::Noisy { sigma: a.sigma, p_fp: probability("p-fp", a.p_fp)?, p_fn: probability("p-fn", a.p_fn)? },
        PointingKind::Remote => PointingSpec::Remote(remote(
            a.pointing_endpoint.as_ref().or(a.endpoint.as_ref()),
            a.pointing_model.as_ref().or(a.model.as_ref()),
            a,
            "pointing",
        )?),
    };
    if let Some(path) = &a.oracle_table {
        c.oracle_table = Some(OracleTable::load(path).map_err(|e| Failure::input(e.to_string()))?);
    }
    c.rollouts = a.rollouts.map(|r| r as usize);
    c.master_seed = a.seed;
    c.exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    Ok(c)
}

/// Per-episode backend failures are recorded in the rows; only a backend that
/// never answered at all turns into a failing exit.
fn check_reachable(rows: &[RolloutRow]) -> Result<(), Failure> {
    let unreachable = |r: &RolloutRow| {
        r.reason == TerminateReason::BackendError && matches!(r.error.as_deref(), Some("transport" | "timeout" | "http_status"))
    };
    if !rows.is_empty() && rows.iter().all(unreachable) {
        let tag = rows[0].error.as_deref().unwrap_or_default();
        return Err(Failure { code: 3, message: format!("every episode failed to reach the backend ({tag})") });
    }
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<(), Failure> {
    let config = EvalConfig { keep_traces: true, ..eval_config(&a.eval)? };
    let suite = Suite::load(&a.eval.suite)?;
    let mut run = eval::run_suite(&suite, &config)?;
    let out = &a.eval.out;
    eval::write_traces(&mut run, &out.join("traces"))?;
    write(&out.join("report.json"), &run.result.to_json())?;
    let table = run.result.to_text_table();
    write(&out.join("report.txt"), &table)?;
    print!("{table}");
    check_reachable(&run.result.rows)
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), Failure> {
    let axis: SweepAxis = a.axis.parse().map_err(|e: String| Failure::usage(format!("--axis: {e}")))?;
    let config = eval_config(&a.eval)?;
    let suite = Suite::load(&a.eval.suite)?;
    let table = eval::sweep(&suite, axis, &a.values, &config)?;
    write(&a.eval.out.join("sweep.json"), &table.to_json())?;
    let text = table.to_text_table();
    write(&a.eval.out.join("sweep.txt"), &text)?;
    print!("{text}");
    let rows: Vec<RolloutRow> = table.rows.into_iter().flat_map(|r| r.result.rows).collect();
    check_reachable(&rows)
}

fn cmd_gen_dataset(a: &GenArgs) -> Result<(), Failure> {
    if !(a.margin >= 0.0 && a.margin.is_finite()) {
        return Err(Failure::usage(format!("--margin must be finite and non-negative, got {}", a.margin)));
    }
    let frames = affordance::load_frames(&a.annotations, a.free_regions.as_deref())?;
    let cfg = RelationConfig { margin: a.margin, ..RelationConfig::default() };
    let samples = affordance::generate_all(&frames, a.seed, &cfg, Execution::Parallel)?;
    write(&a.out, &affordance::write_samples(&samples))?;
    let objects = samples.iter().filter(|s| s.kind == AffordanceKind::Object).count();
    println!("frames: {}", frames.len());
    println!("object samples: {objects}");
    println!("spatial samples: {}", samples.len() - objects);
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Prediction {
    frame: String,
    query: String,
    points: Vec<Point2>,
}

fn cmd_score(a: &ScoreArgs) -> Result<(), Failure> {
    let samples = affordance::read_samples(&read(&a.samples)?)?;
    let text = read(&a.predictions)?;
    let mut per_kind: std::collections::BTreeMap<AffordanceKind, (f64, usize)> = Default::default();
    let mut missing = 0usize;
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let p: Prediction = serde_json::from_str(line)
            .map_err(|e| Failure::input(format!("{} line {}: {e}", a.predictions.display(), n + 1)))?;
        let Some(sample) = samples.iter().find(|s| s.frame == p.frame && s.query == p.query) else {
            missing += 1;
            continue;
        };
        let acc = affordance::accuracy(&p.points, &sample.truth)
            .map_err(|e| Failure::input(format!("{} line {}: {e}", a.predictions.display(), n + 1)))?;
        let entry = per_kind.entry(sample.kind).or_default();
        entry.0 += acc;
        entry.1 += 1;
    }
    let (sum, count) = per_kind.values().fold((0.0, 0), |(s, c), (ks, kc)| (s + ks, c + kc));
    let kinds: serde_json::Map<String, serde_json::Value> = per_kind
        .iter()
        .map(|(k, (s, c))| {
            let name = serde_json::to_value(k).expect("kind serializes").as_str().expect("string tag").to_string();
            (name, serde_json::json!({"scored": c, "acc": s / *c as f64}))
        })
        .collect();
    let report = serde_json::json!({
        "scored": count,
        "unmatched": missing,
        "acc": if count > 0 { sum / count as f64 } else { 0.0 },
        "by_kind": kinds,
    });
    let mut s = serde_json::to_string_pretty(&report).expect("score serializes");
    s.push('\n');
    match &a.out {
        Some(path) => write(path, &s),
        None => {
            print!("{s}");
            Ok(())
        }
    }
}

fn cmd_plot(a: &PlotArgs) -> Result<(), Failure> {
    let trace = EpisodeTrace::from_jsonl(&read(&a.trace)?).map_err(|e| Failure::input(format!("{}: {e}", a.trace.display())))?;
    let svg = plot::render_svg(&trace).map_err(|e| Failure::input(format!("{}: {e}", a.trace.display())))?;
    write(&a.out, &svg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::GenDataset(a) => cmd_gen_dataset(a),
        Command::Score(a) => cmd_score(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
