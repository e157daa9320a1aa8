#![allow(dead_code)]

use fedagg::aggregation::{AggregationConfig, StrategyKind};
use fedagg::data::SyntheticSpec;
use fedagg::model::ModelKind;
use fedagg::orchestration::{DataConfig, ExperimentConfig, ModelConfig, RoundLog};

/// A synthetic-data experiment with `k` clients of 50 examples each.
pub fn experiment(
    kind: ModelKind,
    strategy: StrategyKind,
    classes: usize,
    k: usize,
    rounds: usize,
) -> ExperimentConfig {
    let mut model = ModelConfig::new(kind);
    model.init_seed = 1;
    let per_client = 50;
    ExperimentConfig {
        schema_version: 1,
        run_seed: 11,
        per_client,
        test_fraction: 0.2,
        eval_every: 1,
        min_freq: 2,
        centralized_epochs: 10,
        model,
        aggregation: AggregationConfig {
            strategy,
            epsilon: 1.0,
            fraction: 0.5,
            total_clients: k,
            local_epochs: 5,
            local_batch: 10,
            rounds,
            local_lr: 0.1,
            sampling_seed: 5,
        },
        data: DataConfig::Synthetic(SyntheticSpec {
            num_examples: k * per_client * 5 / 4,
            num_classes: classes,
            vocab_size: 300,
            positive_rate: if classes == 2 { 0.4816 } else { 0.5 },
            seed: 3,
        }),
        faults: None,
    }
}

pub fn untimed(logs: &[RoundLog]) -> Vec<String> {
    logs.iter().map(|l| l.without_timing().to_json_line()).collect()
}
