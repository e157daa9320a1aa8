use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DataConfig, ExperimentConfig};
use super::local::local_training;
use super::rounds::{run_rounds, ClientPool, RoundOptions};
use crate::aggregation::ClientUpdate;
use crate::data::{
    infer_num_classes, load_jsonl, make_synthetic, partition_iid, split_train_test, ClientShard, Encoder,
    LabeledExample, Vocabulary,
};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::{forward, init_params, Batch, Example, ModelSpec, ParameterVector};
use crate::rng::{derive_seed, stream};

pub const LOG_SCHEMA_VERSION: u32 = 1;
const EVAL_CHUNK: usize = 512;

/// One line of the per-trial JSONL log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub schema_version: u32,
    pub round: usize,
    pub sampled_clients: Vec<usize>,
    pub dropped_clients: Vec<usize>,
    pub mean_client_loss: Option<f64>,
    /// Global model on the held-out test set; absent on rounds skipped by `eval_every`.
    pub test_accuracy: Option<f64>,
    pub test_auroc: Option<f64>,
    pub wall_ms: u64,
}

impl RoundLog {
    /// The log with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_ms: 0,
            ..self.clone()
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("round log serializes")
    }
}

/// Load or generate the raw dataset named by the config, with its class count.
pub fn load_examples(data: &DataConfig) -> Result<(Vec<LabeledExample>, usize)> {
    match data {
        DataConfig::Synthetic(spec) => Ok((make_synthetic(spec)?, spec.num_classes)),
        DataConfig::Jsonl(src) => {
            let report = load_jsonl(&src.path, src.strict)?;
            let examples = report.examples;
            let inferred = infer_num_classes(&examples);
            let classes = match src.num_classes {
                Some(c) if c < inferred => {
                    return Err(Error::config(format!(
                        "data.num_classes is {c} but labels reach {}",
                        inferred - 1
                    )))
                }
                Some(c) => c,
                None => inferred,
            };
            Ok((examples, classes))
        }
    }
}

/// Build a vocabulary from `train` only and encode both splits.
pub fn encode_splits(
    config: &ExperimentConfig,
    train: &[LabeledExample],
    test: &[LabeledExample],
    num_classes: usize,
) -> Result<(ModelSpec, Encoder, Vec<Example>, Vec<Example>)> {
    let vocab = Vocabulary::build(train.iter().map(|e| e.text.as_str()), config.min_freq);
    let encoder = Encoder::new(vocab, config.model.kind, config.model.max_len);
    let spec = config.model.to_spec(encoder.input_dim(), num_classes);
    spec.validate()?;
    let train = encoder.encode_all(train);
    let test = encoder.encode_all(test);
    Ok((spec, encoder, train, test))
}

/// Data, shards and initial model for one run.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub spec: ModelSpec,
    pub encoder: Encoder,
    pub shards: Vec<ClientShard>,
    pub test: Vec<Example>,
    pub num_classes: usize,
    pub theta0: ParameterVector,
}

pub fn prepare(config: &ExperimentConfig) -> Result<PreparedExperiment> {
    config.validate()?;
    let (examples, num_classes) = load_examples(&config.data)?;
    if examples.is_empty() {
        return Err(Error::config("data: dataset is empty"));
    }
    let (train, test) = split_train_test(&examples, config.test_fraction, config.run_seed)?;
    let (spec, encoder, train, test) = encode_splits(config, &train, &test, num_classes)?;
    let shards = partition_iid(
        &train,
        config.aggregation.total_clients,
        config.per_client,
        config.run_seed,
    )
    .map_err(|e| {
        Error::config(format!(
            "per_client/total_clients vs {} training examples: {e}",
            train.len()
        ))
    })?;
    let theta0 = init_params(&spec)?;
    Ok(PreparedExperiment {
        spec,
        encoder,
        shards,
        test,
        num_classes,
        theta0,
    })
}

/// Clients backed by real shards and local SGD.
pub struct ShardPool<'a> {
    pub spec: &'a ModelSpec,
    pub shards: &'a [ClientShard],
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub run_seed: u64,
}

impl ClientPool for ShardPool<'_> {
    fn num_clients(&self) -> usize {
        self.shards.len()
    }

    fn train(&self, client_id: usize, theta: &ParameterVector, round: usize) -> Result<ClientUpdate> {
        let shard = &self.shards[client_id];
        let seed = derive_seed(self.run_seed, &[stream::LOCAL_SHUFFLE, round as u64, client_id as u64]);
        local_training(shard, theta, self.spec, self.epochs, self.batch_size, self.lr, seed)
    }
}

/// Accuracy (and AUROC for binary tasks) of `params` on `examples`.
pub fn evaluate(spec: &ModelSpec, params: &ParameterVector, examples: &[Example]) -> Result<EvalReport> {
    let mut scores = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(EVAL_CHUNK) {
        let batch = Batch::from_examples(chunk)?;
        scores.extend(forward(spec, params, &batch)?.class_scores);
    }
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    EvalReport::from_scores(&scores, &labels, spec.num_classes)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Client-training threads per round; results do not depend on it.
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub logs: Vec<RoundLog>,
    pub final_params: ParameterVector,
    pub spec: ModelSpec,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RoundLog>> {
    Ok(run_experiment_with(config, RunOptions::default(), |_, _| {})?.logs)
}

/// Run every round of `config`, calling `observer` with each log and the
/// post-aggregation global model.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    options: RunOptions,
    mut observer: impl FnMut(&RoundLog, &ParameterVector),
) -> Result<ExperimentOutcome> {
    let prepared = prepare(config)?;
    let agg = &config.aggregation;
    let pool = ShardPool {
        spec: &prepared.spec,
        shards: &prepared.shards,
        epochs: agg.local_epochs,
        batch_size: agg.local_batch,
        lr: agg.local_lr,
        run_seed: config.run_seed,
    };
    let round_options = RoundOptions {
        workers: options.workers,
        faults: config.faults,
    };
    let mut logs = Vec::with_capacity(agg.rounds);
    let mut started = Instant::now();
    let final_params = run_rounds(agg, prepared.theta0.clone(), &pool, &round_options, |outcome, theta| {
        let due = outcome.round % config.eval_every == 0 || outcome.round == agg.rounds;
        let report = if due {
            Some(evaluate(&prepared.spec, theta, &prepared.test)?)
        } else {
            None
        };
        let log = RoundLog {
            schema_version: LOG_SCHEMA_VERSION,
            round: outcome.round,
            sampled_clients: outcome.sampled.clone(),
            dropped_clients: outcome.dropped.clone(),
            mean_client_loss: outcome.mean_client_loss(),
            test_accuracy: report.as_ref().map(|r| r.accuracy),
            test_auroc: report.and_then(|r| r.auroc),
            wall_ms: started.elapsed().as_millis() as u64,
        };
        started = Instant::now();
        observer(&log, theta);
        logs.push(log);
        Ok(())
    })?;
    Ok(ExperimentOutcome {
        logs,
        final_params,
        spec: prepared.spec,
    })
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for one value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-round averages across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: usize,
    pub loss_mean: Option<f64>,
    pub accuracy_mean: Option<f64>,
    pub accuracy_sd: Option<f64>,
    pub auroc_mean: Option<f64>,
}

pub fn summarize_trials(trials: &[Vec<RoundLog>]) -> Vec<CurvePoint> {
    let rounds = trials.iter().map(Vec::len).max().unwrap_or(0);
    let collect = |r: usize, f: &dyn Fn(&RoundLog) -> Option<f64>| -> Vec<f64> {
        trials.iter().filter_map(|t| t.get(r).and_then(f)).collect()
    };
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| mean_sd(&v).0);
    (0..rounds)
        .map(|r| {
            let acc = collect(r, &|l| l.test_accuracy);
            CurvePoint {
                round: r + 1,
                loss_mean: mean(collect(r, &|l| l.mean_client_loss)),
                accuracy_sd: (!acc.is_empty()).then(|| mean_sd(&acc).1),
                accuracy_mean: mean(acc),
                auroc_mean: mean(collect(r, &|l| l.test_auroc)),
            }
        })
        .collect()
}
