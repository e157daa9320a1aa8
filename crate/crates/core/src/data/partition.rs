use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Example;
use crate::rng::{stream, SeededRng};

pub const SHARD_MANIFEST_SCHEMA_VERSION: u32 = 1;

/// One client's private training data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    pub client_id: usize,
    pub examples: Vec<Example>,
}

/// Which source indices each client received. Serialized as the shard manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardAssignment {
    pub schema_version: u32,
    pub num_examples: usize,
    pub num_clients: usize,
    pub per_client: usize,
    pub seed: u64,
    /// `shards[k]` lists the indices given to client `k`.
    pub shards: Vec<Vec<usize>>,
    /// Indices not assigned to any client.
    pub held_out: Vec<usize>,
}

/// Seeded shuffle of `0..n`, then contiguous slices of `per_client` indices
/// for clients `0..k`; the tail is held out.
pub fn partition_indices(n: usize, k: usize, per_client: usize, seed: u64) -> Result<ShardAssignment> {
    if k == 0 || per_client == 0 {
        return Err(Error::config(format!(
            "need at least one client and one example per client (k={k}, per_client={per_client})"
        )));
    }
    let needed = k
        .checked_mul(per_client)
        .ok_or_else(|| Error::config("k * per_client overflows"))?;
    if needed > n {
        return Err(Error::config(format!(
            "{k} clients x {per_client} examples needs {needed} examples, only {n} available"
        )));
    }
    let order = SeededRng::derived(seed, &[stream::PARTITION]).permutation(n);
    let shards = order[..needed].chunks(per_client).map(<[usize]>::to_vec).collect();
    Ok(ShardAssignment {
        schema_version: SHARD_MANIFEST_SCHEMA_VERSION,
        num_examples: n,
        num_clients: k,
        per_client,
        seed,
        shards,
        held_out: order[needed..].to_vec(),
    })
}

pub fn partition_iid(examples: &[Example], k: usize, per_client: usize, seed: u64) -> Result<Vec<ClientShard>> {
    let assignment = partition_indices(examples.len(), k, per_client, seed)?;
    Ok(assignment
        .shards
        .iter()
        .enumerate()
        .map(|(client_id, idx)| ClientShard {
            client_id,
            examples: idx.iter().map(|&i| examples[i].clone()).collect(),
        })
        .collect())
}

/// Seeded shuffle, then the first `round(n * test_fraction)` shuffled indices
/// form the test split and the rest the training split.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::config(format!(
            "test_fraction {test_fraction} of {n} examples leaves an empty split"
        )));
    }
    let order = SeededRng::derived(seed, &[stream::SPLIT]).permutation(n);
    let (test, train) = order.split_at(n_test);
    Ok((train.to_vec(), test.to_vec()))
}

pub fn split_train_test<T: Clone>(items: &[T], test_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let (train, test) = split_indices(items.len(), test_fraction, seed)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| items[i].clone()).collect();
    Ok((pick(train), pick(test)))
}
