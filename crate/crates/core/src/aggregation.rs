//! Server-side aggregation rules.
//!
//! The server treats aggregation as descent on the mean squared distance to
//! the returned client models,
//! `L(theta) = sum_k 1/(2n) * ||theta - theta_k||^2`, whose gradient is the
//! average difference `1/n * sum_k (theta - theta_k)`. `avgdiff` takes one step of
//! size `epsilon` along it; `average` replaces theta by the example-weighted
//! mean of the clients; `fullbatch` is `average` over every client with one
//! local epoch.
//!
//! All reductions run in ascending client-id order so results do not depend on
//! the order updates arrive in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{vec_mean, vec_sub, ParameterVector};
use crate::rng::{stream, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Fullbatch,
    Average,
    Avgdiff,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Fullbatch => "fullbatch",
            StrategyKind::Average => "average",
            StrategyKind::Avgdiff => "avgdiff",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fullbatch" => Ok(StrategyKind::Fullbatch),
            "average" => Ok(StrategyKind::Average),
            "avgdiff" => Ok(StrategyKind::Avgdiff),
            _ => Err(Error::config(format!(
                "aggregation.strategy: unknown strategy `{s}` (expected fullbatch, average or avgdiff)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationConfig {
    pub strategy: StrategyKind,
    /// Server step size; only read by `avgdiff`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Fraction `C` of clients sampled per round.
    pub fraction: f64,
    /// Total number of clients `K`.
    pub total_clients: usize,
    pub local_epochs: usize,
    pub local_batch: usize,
    pub rounds: usize,
    pub local_lr: f64,
    #[serde(default)]
    pub sampling_seed: u64,
}

fn default_epsilon() -> f64 {
    1.0
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::config(format!("aggregation.{field}: {msg}")));
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return bad("fraction", format!("must lie in (0, 1], got {}", self.fraction));
        }
        if self.strategy == StrategyKind::Avgdiff && !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("epsilon", format!("must lie in (0, 1], got {}", self.epsilon));
        }
        if self.total_clients == 0 {
            return bad("total_clients", "must be positive".into());
        }
        if self.local_epochs == 0 {
            return bad("local_epochs", "must be positive".into());
        }
        if self.local_batch == 0 {
            return bad("local_batch", "must be positive".into());
        }
        if self.rounds == 0 {
            return bad("rounds", "must be positive".into());
        }
        if !(self.local_lr > 0.0 && self.local_lr.is_finite()) {
            return bad("local_lr", format!("must be positive, got {}", self.local_lr));
        }
        if self.strategy == StrategyKind::Fullbatch {
            if self.fraction != 1.0 {
                return bad("fraction", format!("fullbatch requires 1.0, got {}", self.fraction));
            }
            if self.local_epochs != 1 {
                return bad(
                    "local_epochs",
                    format!("fullbatch requires 1, got {}", self.local_epochs),
                );
            }
        }
        Ok(())
    }

    pub fn clients_per_round(&self) -> usize {
        clients_per_round(self.total_clients, self.fraction)
    }
}

/// A locally trained model returned to the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub params: ParameterVector,
    pub num_examples: usize,
    pub train_loss: f64,
}

/// `m = max(floor(C * K), 1)`. A `1e-9` guard absorbs products such as
/// `0.29 * 100 = 28.999999999999996`.
pub fn clients_per_round(total: usize, fraction: f64) -> usize {
    ((fraction * total as f64 + 1e-9).floor() as usize).clamp(1, total.max(1))
}

/// Draw `m` distinct client ids uniformly without replacement from the stream
/// keyed by `(sampling_seed, round)`; returned in ascending order.
pub fn sample_clients(total: usize, fraction: f64, round: usize, sampling_seed: u64) -> Vec<usize> {
    let m = clients_per_round(total, fraction);
    if m >= total {
        return (0..total).collect();
    }
    let mut rng = SeededRng::derived(sampling_seed, &[stream::SAMPLING, round as u64]);
    let mut ids: Vec<usize> = (0..total).collect();
    // partial Fisher-Yates: the first m slots end up a uniform sample
    for i in 0..m {
        let j = i + rng.below_usize(total - i);
        ids.swap(i, j);
    }
    let mut chosen = ids[..m].to_vec();
    chosen.sort_unstable();
    chosen
}

fn check_clients(theta: &ParameterVector, clients: &[ParameterVector]) -> Result<()> {
    if clients.is_empty() {
        return Err(Error::config("aggregation over an empty client set"));
    }
    if let Some(c) = clients.iter().find(|c| c.len() != theta.len()) {
        return Err(Error::shape(format!(
            "client vector has {} entries, server has {}",
            c.len(),
            theta.len()
        )));
    }
    Ok(())
}

/// `sum_k 1/(2n) ||theta - theta_k||^2`.
pub fn server_objective(theta: &ParameterVector, clients: &[ParameterVector]) -> Result<f64> {
    check_clients(theta, clients)?;
    let n = clients.len() as f64;
    Ok(clients
        .iter()
        .map(|c| {
            let sq: f64 = theta
                .as_slice()
                .iter()
                .zip(c.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sq / (2.0 * n)
        })
        .sum())
}

/// `1/n sum_k (theta - theta_k)`, summed in the order given.
pub fn avg_difference(theta: &ParameterVector, clients: &[ParameterVector]) -> Result<ParameterVector> {
    check_clients(theta, clients)?;
    let diffs = clients.iter().map(|c| vec_sub(theta, c)).collect::<Result<Vec<_>>>()?;
    vec_mean(&diffs)
}

/// `theta - epsilon * avg_difference(theta, clients)`.
pub fn apply_avgdiff(theta: &ParameterVector, clients: &[ParameterVector], epsilon: f64) -> Result<ParameterVector> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::config(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let grad = avg_difference(theta, clients)?;
    let out = theta
        .as_slice()
        .iter()
        .zip(grad.as_slice())
        .map(|(t, g)| t - epsilon * g)
        .collect::<Vec<_>>();
    ParameterVector::new(out).ensure_finite("avgdiff update")
}

fn sorted_by_id(updates: &[ClientUpdate]) -> Result<Vec<&ClientUpdate>> {
    let mut sorted: Vec<&ClientUpdate> = updates.iter().collect();
    sorted.sort_by_key(|u| u.client_id);
    if sorted.windows(2).any(|w| w[0].client_id == w[1].client_id) {
        return Err(Error::config("duplicate client id among updates"));
    }
    Ok(sorted)
}

/// Example-count weighted mean `sum_k (n_k / sum_j n_j) theta_k`.
pub fn apply_average(updates: &[ClientUpdate]) -> Result<ParameterVector> {
    let sorted = sorted_by_id(updates)?;
    let first = sorted
        .first()
        .ok_or_else(|| Error::config("aggregation over an empty client set"))?;
    let total: usize = sorted.iter().map(|u| u.num_examples).sum();
    if total == 0 {
        return Err(Error::config("client updates report zero examples"));
    }
    let mut acc = vec![0.0; first.params.len()];
    for u in &sorted {
        if u.params.len() != acc.len() {
            return Err(Error::shape(format!(
                "client {} returned {} parameters, expected {}",
                u.client_id,
                u.params.len(),
                acc.len()
            )));
        }
        let w = u.num_examples as f64 / total as f64;
        for (a, p) in acc.iter_mut().zip(u.params.as_slice()) {
            *a += w * p;
        }
    }
    ParameterVector::new(acc).ensure_finite("average")
}

/// Averaging over all `total_clients` clients; each must be present exactly once.
pub fn apply_fullbatch(updates: &[ClientUpdate], total_clients: usize) -> Result<ParameterVector> {
    let sorted = sorted_by_id(updates)?;
    let complete = sorted.len() == total_clients && sorted.iter().enumerate().all(|(i, u)| u.client_id == i);
    if !complete {
        return Err(Error::config(format!(
            "fullbatch needs updates from all {total_clients} clients, got {}",
            updates.len()
        )));
    }
    apply_average(updates)
}

/// Apply the configured rule to this round's updates.
pub fn aggregate(
    config: &AggregationConfig,
    theta: &ParameterVector,
    updates: &[ClientUpdate],
) -> Result<ParameterVector> {
    match config.strategy {
        StrategyKind::Fullbatch => apply_fullbatch(updates, config.total_clients),
        StrategyKind::Average => apply_average(updates),
        StrategyKind::Avgdiff => {
            let clients: Vec<ParameterVector> = sorted_by_id(updates)?.into_iter().map(|u| u.params.clone()).collect();
            apply_avgdiff(theta, &clients, config.epsilon)
        }
    }
}
