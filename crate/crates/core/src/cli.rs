//! Command-line front end: `synth`, `partition`, `gradcheck`, `run`, `cv`.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregation::StrategyKind;
use crate::data::{class_histogram, load_jsonl, make_synthetic, partition_indices, write_jsonl, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{gradcheck, ModelKind};
use crate::orchestration::{
    mean_sd, prepare, run_cross_validation, run_experiment_with, summarize_trials, ExperimentConfig, RoundLog,
    RunOptions, LOG_SCHEMA_VERSION,
};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "fedagg", version, about = "Federated aggregation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled text corpus as JSONL.
    Synth(SynthArgs),
    /// Assign examples of a JSONL corpus to IID client shards.
    Partition(PartitionArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
    /// Run a federated experiment.
    Run(RunArgs),
    /// Cross-validate the centralized baseline on the config's dataset.
    Cv(CvArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.5)]
    pub positive_rate: f64,
    #[arg(long, default_value_t = 500)]
    pub vocab: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub per_client: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Fail on the first malformed line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GradModel {
    All,
    Logreg,
    Mlp,
    Textcnn,
    Lstm,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = GradModel::All)]
    pub model: GradModel,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Client-training threads; defaults to the number of CPUs.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub strategy: Option<StrategyKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Overrides `run_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
}

/// Describes one `run` invocation and where its artifacts live. Loading it
/// back with `run --config manifest.json` repeats the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub config_hash: String,
    pub started_at: String,
    pub finished_at: String,
    pub trials: usize,
    pub workers: usize,
    pub config: ExperimentConfig,
    pub trial_seeds: Vec<TrialSeeds>,
    pub artifacts: Artifacts,
    pub final_accuracy_mean: Option<f64>,
    pub final_accuracy_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub trial: usize,
    pub run_seed: u64,
    pub init_seed: u64,
    pub sampling_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub round_logs: Vec<String>,
    pub models: Vec<String>,
    pub curve: String,
}

pub fn main_from_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

/// Returns `Ok(false)` when the command ran but its check failed.
pub fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Synth(a) => synth(&a).map(|_| true),
        Command::Partition(a) => partition(&a).map(|_| true),
        Command::Gradcheck(a) => run_gradcheck(&a),
        Command::Run(a) => run(&a).map(|_| true),
        Command::Cv(a) => cv(&a).map(|_| true),
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        num_examples: a.n,
        num_classes: a.classes,
        vocab_size: a.vocab,
        positive_rate: a.positive_rate,
        seed: a.seed,
    };
    let examples = make_synthetic(&spec)?;
    write_jsonl(&a.out, &examples)?;
    let hist = class_histogram(&examples, a.classes);
    println!("wrote {} examples to {}", examples.len(), a.out.display());
    for (class, count) in hist.iter().enumerate() {
        println!("class {class}: {count} ({:.4})", *count as f64 / examples.len() as f64);
    }
    Ok(())
}

fn partition(a: &PartitionArgs) -> Result<()> {
    let report = load_jsonl(&a.input, a.strict)?;
    if !report.malformed_lines.is_empty() {
        eprintln!(
            "skipped {} malformed lines (first at line {})",
            report.malformed_lines.len(),
            report.malformed_lines[0]
        );
    }
    let assignment = partition_indices(report.examples.len(), a.k, a.per_client, a.seed)?;
    write_json(&a.out, &assignment)?;
    println!(
        "assigned {} of {} examples to {} clients ({} held out) -> {}",
        a.k * a.per_client,
        report.examples.len(),
        a.k,
        assignment.held_out.len(),
        a.out.display()
    );
    Ok(())
}

fn run_gradcheck(a: &GradcheckArgs) -> Result<bool> {
    let kinds: Vec<ModelKind> = match a.model {
        GradModel::All => ModelKind::ALL.to_vec(),
        GradModel::Logreg => vec![ModelKind::Logreg],
        GradModel::Mlp => vec![ModelKind::Mlp],
        GradModel::Textcnn => vec![ModelKind::Textcnn],
        GradModel::Lstm => vec![ModelKind::Lstm],
    };
    let mut all_passed = true;
    for kind in kinds {
        let (spec, params, batch) = gradcheck::instance(kind, a.seed, a.batch)?;
        let report = gradcheck::check(&spec, &params, &batch, gradcheck::DEFAULT_STEP)?;
        let verdict = if report.passed() { "PASS" } else { "FAIL" };
        all_passed &= report.passed();
        println!(
            "{verdict} {:<8} params={:<5} max_rel_error={:.3e} (tolerance {:.0e})",
            kind.name(),
            report.num_params,
            report.max_rel_error,
            gradcheck::TOLERANCE
        );
    }
    Ok(all_passed)
}

fn apply_overrides(config: &mut ExperimentConfig, a: &RunArgs) {
    if let Some(s) = a.strategy {
        config.aggregation.strategy = s;
    }
    if let Some(e) = a.epsilon {
        config.aggregation.epsilon = e;
    }
    if let Some(r) = a.rounds {
        config.aggregation.rounds = r;
    }
    if let Some(f) = a.fraction {
        config.aggregation.fraction = f;
    }
    if let Some(s) = a.seed {
        config.run_seed = s;
    }
}

/// First 8 bytes of the SHA-256 of the config's JSON form, hex encoded.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(&Sha256::digest(&json)[..8])
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Execute `run` and return the directory holding its artifacts.
pub fn run(a: &RunArgs) -> Result<PathBuf> {
    let mut config = ExperimentConfig::load(&a.config)?;
    apply_overrides(&mut config, a);
    config.validate()?;
    if a.trials == 0 {
        return Err(Error::config("--trials: must be positive"));
    }
    prepare(&config)?;
    let workers = a.workers.unwrap_or_else(default_workers).max(1);
    let hash = config_hash(&config);
    let started = Utc::now();
    let dir = fresh_dir(&a.out, &format!("{}-{hash}", started.format("%Y%m%dT%H%M%SZ")))?;

    let mut trial_logs = Vec::with_capacity(a.trials);
    let mut trial_seeds = Vec::with_capacity(a.trials);
    let mut artifacts = Artifacts {
        round_logs: Vec::new(),
        models: Vec::new(),
        curve: "curve.csv".into(),
    };
    for t in 0..a.trials {
        let trial = config.for_trial(t);
        trial_seeds.push(TrialSeeds {
            trial: t,
            run_seed: trial.run_seed,
            init_seed: trial.model.init_seed,
            sampling_seed: trial.aggregation.sampling_seed,
        });
        let log_name = format!("trial-{t}.jsonl");
        let log_path = dir.join(&log_name);
        let mut log_file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        let mut write_err = None;
        let outcome = run_experiment_with(&trial, RunOptions { workers }, |log, _| {
            if write_err.is_none() {
                if let Err(e) = writeln!(log_file, "{}", log.to_json_line()) {
                    write_err = Some(e);
                }
            }
        })?;
        if let Some(e) = write_err {
            return Err(Error::io(&log_path, e));
        }
        let model_name = format!("model-trial-{t}.json");
        write_json(
            &dir.join(&model_name),
            &serde_json::json!({ "spec": outcome.spec, "params": outcome.final_params }),
        )?;
        if let Some(last) = outcome.logs.last() {
            println!(
                "trial {t}: round {} accuracy {} loss {}",
                last.round,
                fmt_opt(last.test_accuracy),
                fmt_opt(last.mean_client_loss)
            );
        }
        artifacts.round_logs.push(log_name);
        artifacts.models.push(model_name);
        trial_logs.push(outcome.logs);
    }

    write_curve(&dir.join(&artifacts.curve), &trial_logs)?;
    let finals: Vec<f64> = trial_logs
        .iter()
        .filter_map(|l| l.last().and_then(|r| r.test_accuracy))
        .collect();
    let (mean, sd) = if finals.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_sd(&finals);
        (Some(m), Some(s))
    };
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        code_version: CODE_VERSION.into(),
        config_hash: hash,
        started_at: started.to_rfc3339(),
        finished_at: Utc::now().to_rfc3339(),
        trials: a.trials,
        workers,
        config,
        trial_seeds,
        artifacts,
        final_accuracy_mean: mean,
        final_accuracy_sd: sd,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    println!("final accuracy {} +/- {}", fmt_opt(mean), fmt_opt(sd));
    println!("artifacts in {}", dir.display());
    Ok(dir)
}

fn cv(a: &CvArgs) -> Result<()> {
    let config = ExperimentConfig::load(&a.config)?;
    config.validate()?;
    let summary = run_cross_validation(&config, a.folds)?;
    for (i, acc) in summary.fold_accuracies.iter().enumerate() {
        println!("fold {i}: accuracy {acc:.4}");
    }
    println!(
        "{}-fold accuracy {:.4} +/- {:.4}",
        summary.folds, summary.mean_accuracy, summary.sd_accuracy
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn fresh_dir(parent: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let mut attempt = 0;
    loop {
        let candidate = if attempt == 0 {
            parent.join(name)
        } else {
            parent.join(format!("{name}-{attempt}"))
        };
        match fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => attempt += 1,
            Err(e) => return Err(Error::io(&candidate, e)),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_curve(path: &Path, trials: &[Vec<RoundLog>]) -> Result<()> {
    let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut out = String::from("schema_version,round,loss_mean,accuracy_mean,accuracy_sd,auroc_mean\n");
    for p in summarize_trials(trials) {
        out.push_str(&format!(
            "{LOG_SCHEMA_VERSION},{},{},{},{},{}\n",
            p.round,
            cell(p.loss_mean),
            cell(p.accuracy_mean),
            cell(p.accuracy_sd),
            cell(p.auroc_mean)
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
