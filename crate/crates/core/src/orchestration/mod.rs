//! The federated round loop: initialize, sample clients, train locally,
//! aggregate, evaluate, log. Client/server communication is in-process.

mod config;
mod crossval;
mod experiment;
mod local;
mod rounds;

pub use config::{DataConfig, ExperimentConfig, JsonlSource, ModelConfig, CONFIG_SCHEMA_VERSION};
pub use crossval::{fold_assignment, run_cross_validation, CrossValidationSummary};
pub use experiment::{
    encode_splits, evaluate, load_examples, mean_sd, prepare, run_experiment, run_experiment_with, summarize_trials,
    CurvePoint, ExperimentOutcome, PreparedExperiment, RoundLog, RunOptions, ShardPool, LOG_SCHEMA_VERSION,
};
pub use local::local_training;
pub use rounds::{run_rounds, ClientPool, FaultInjection, RoundOptions, RoundOutcome};
