//! Dataset ingestion, tokenization, synthetic corpora and IID partitioning.

mod encode;
mod jsonl;
mod partition;
mod synthetic;
mod tokenize;

use serde::{Deserialize, Serialize};

pub use encode::{Encoder, Vocabulary, DEFAULT_MIN_FREQ};
pub use jsonl::{load_jsonl, write_jsonl, LoadReport};
pub use partition::{partition_iid, partition_indices, split_indices, split_train_test, ClientShard, ShardAssignment};
pub use synthetic::{make_synthetic, SyntheticSpec, MARKERS_PER_CLASS, MARKER_PROB};
pub use tokenize::tokenize;

/// One raw labeled text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub label: usize,
}

/// Number of classes implied by the largest label (at least 2).
pub fn infer_num_classes(examples: &[LabeledExample]) -> usize {
    examples.iter().map(|e| e.label + 1).max().unwrap_or(0).max(2)
}

/// Count of examples per class, indexed by label.
pub fn class_histogram(examples: &[LabeledExample], num_classes: usize) -> Vec<usize> {
    let mut hist = vec![0; num_classes.max(infer_num_classes(examples))];
    for e in examples {
        hist[e.label] += 1;
    }
    hist
}
