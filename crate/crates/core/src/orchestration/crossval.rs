use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{encode_splits, evaluate, load_examples, mean_sd};
use super::local::local_training;
use crate::data::ClientShard;
use crate::error::{Error, Result};
use crate::model::init_params;
use crate::rng::{derive_seed, stream, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationSummary {
    pub folds: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
}

/// Test indices of each fold: a seeded permutation of `0..n` cut into
/// `folds` contiguous runs whose sizes differ by at most one (larger first).
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::config(format!("folds must be >= 2, got {folds}")));
    }
    if folds > n {
        return Err(Error::config(format!("{folds} folds for only {n} examples")));
    }
    let order = SeededRng::derived(seed, &[stream::CROSS_VALIDATION]).permutation(n);
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut at = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        out.push(order[at..at + size].to_vec());
        at += size;
    }
    Ok(out)
}

/// Centralized baseline: for each fold, train one model on the pooled
/// remaining data (no federation) and test it on the fold.
pub fn run_cross_validation(config: &ExperimentConfig, folds: usize) -> Result<CrossValidationSummary> {
    config.validate()?;
    let (examples, num_classes) = load_examples(&config.data)?;
    let assignment = fold_assignment(examples.len(), folds, config.run_seed)?;
    let agg = &config.aggregation;
    let mut accuracies = Vec::with_capacity(folds);
    for (f, test_idx) in assignment.iter().enumerate() {
        let mut in_test = vec![false; examples.len()];
        test_idx.iter().for_each(|&i| in_test[i] = true);
        let test: Vec<_> = test_idx.iter().map(|&i| examples[i].clone()).collect();
        let train: Vec<_> = assignment
            .iter()
            .flatten()
            .filter(|&&i| !in_test[i])
            .map(|&i| examples[i].clone())
            .collect();
        let (spec, _, train, test) = encode_splits(config, &train, &test, num_classes)?;
        let theta0 = init_params(&spec)?;
        let pooled = ClientShard {
            client_id: 0,
            examples: train,
        };
        let seed = derive_seed(config.run_seed, &[stream::CROSS_VALIDATION, f as u64]);
        let trained = local_training(
            &pooled,
            &theta0,
            &spec,
            config.centralized_epochs,
            agg.local_batch,
            agg.local_lr,
            seed,
        )?;
        accuracies.push(evaluate(&spec, &trained.params, &test)?.accuracy);
    }
    let (mean, sd) = mean_sd(&accuracies);
    Ok(CrossValidationSummary {
        folds,
        fold_accuracies: accuracies,
        mean_accuracy: mean,
        sd_accuracy: sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_the_data() {
        let f = fold_assignment(100, 2, 3).unwrap();
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), [50, 50]);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(fold_assignment(100, 2, 3).unwrap(), f);
        let uneven = fold_assignment(10, 3, 0).unwrap();
        assert_eq!(uneven.iter().map(Vec::len).collect::<Vec<_>>(), [4, 3, 3]);
    }

    #[test]
    fn bad_fold_counts() {
        assert!(matches!(fold_assignment(10, 1, 0), Err(Error::Config(_))));
        assert!(matches!(fold_assignment(3, 4, 0), Err(Error::Config(_))));
    }

    #[test]
    fn mean_sd_values() {
        assert_eq!(mean_sd(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
