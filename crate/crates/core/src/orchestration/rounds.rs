use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate, sample_clients, AggregationConfig, ClientUpdate, StrategyKind};
use crate::error::{Error, Result};
use crate::model::ParameterVector;
use crate::rng::{stream, SeededRng};

/// Anything that can turn the current global model into a client update.
///
/// Implementations must be pure in `(client_id, theta, round)`: the round
/// loop may call them from several threads at once.
pub trait ClientPool: Sync {
    fn num_clients(&self) -> usize;

    fn train(&self, client_id: usize, theta: &ParameterVector, round: usize) -> Result<ClientUpdate>;
}

/// Seeded client disconnections. A sampled client drops out of round `t`
/// when `SeededRng::derived(seed, [FAULTS, t, id]).unit_f64() < rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultInjection {
    pub rate: f64,
    pub seed: u64,
}

impl FaultInjection {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::config(format!(
                "faults.rate must lie in [0, 1], got {}",
                self.rate
            )));
        }
        Ok(())
    }

    pub fn drops(&self, round: usize, client_id: usize) -> bool {
        self.rate > 0.0
            && SeededRng::derived(self.seed, &[stream::FAULTS, round as u64, client_id as u64]).bernoulli(self.rate)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RoundOptions {
    /// Client-training threads; 0 or 1 trains serially.
    pub workers: usize,
    pub faults: Option<FaultInjection>,
}

/// What happened in one round, before evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    /// 1-based round index.
    pub round: usize,
    pub sampled: Vec<usize>,
    /// Sampled clients that disconnected and were left out of the aggregate.
    pub dropped: Vec<usize>,
    /// Updates that were aggregated, in ascending client-id order.
    pub updates: Vec<ClientUpdate>,
}

impl RoundOutcome {
    /// Unweighted mean of the participating clients' final-epoch losses.
    pub fn mean_client_loss(&self) -> Option<f64> {
        if self.updates.is_empty() {
            return None;
        }
        Some(self.updates.iter().map(|u| u.train_loss).sum::<f64>() / self.updates.len() as f64)
    }
}

/// Run `config.rounds` rounds of sample, train, aggregate starting from `theta0`.
///
/// `on_round` sees each outcome together with the post-aggregation model.
/// A round in which every sampled client dropped leaves the model unchanged.
pub fn run_rounds<P, F>(
    config: &AggregationConfig,
    theta0: ParameterVector,
    pool: &P,
    options: &RoundOptions,
    mut on_round: F,
) -> Result<ParameterVector>
where
    P: ClientPool,
    F: FnMut(&RoundOutcome, &ParameterVector) -> Result<()>,
{
    config.validate()?;
    if pool.num_clients() != config.total_clients {
        return Err(Error::config(format!(
            "aggregation.total_clients is {} but {} clients exist",
            config.total_clients,
            pool.num_clients()
        )));
    }
    if let Some(f) = &options.faults {
        f.validate()?;
        if config.strategy == StrategyKind::Fullbatch && f.rate > 0.0 {
            return Err(Error::config(
                "faults: fullbatch aggregates every client and cannot run with disconnections",
            ));
        }
    }
    let threads = if options.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(options.workers)
                .build()
                .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?,
        )
    } else {
        None
    };

    let mut theta = theta0;
    for round in 1..=config.rounds {
        let sampled = sample_clients(config.total_clients, config.fraction, round, config.sampling_seed);
        let (dropped, active): (Vec<usize>, Vec<usize>) = sampled
            .iter()
            .partition(|&&id| options.faults.is_some_and(|f| f.drops(round, id)));

        let train = |&id: &usize| pool.train(id, &theta, round);
        // collect() keeps ascending id order whichever thread finishes first
        let updates: Vec<ClientUpdate> = match &threads {
            Some(tp) => tp.install(|| active.par_iter().map(train).collect::<Result<_>>())?,
            None => active.iter().map(train).collect::<Result<_>>()?,
        };

        if !updates.is_empty() {
            theta = aggregate(config, &theta, &updates)?;
        }
        let outcome = RoundOutcome {
            round,
            sampled,
            dropped,
            updates,
        };
        on_round(&outcome, &theta)?;
    }
    Ok(theta)
}
