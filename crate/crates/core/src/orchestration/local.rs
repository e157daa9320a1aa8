use crate::aggregation::ClientUpdate;
use crate::data::ClientShard;
use crate::error::{Error, Result};
use crate::model::{forward_backward, sgd_step, Batch, ModelSpec, ParameterVector};
use crate::rng::SeededRng;

/// Local minibatch SGD on one client's shard, starting from a copy of `theta`.
///
/// Each epoch reshuffles the shard with the stream `(shuffle_seed, epoch)` and
/// walks it in batches of `batch_size`; the final partial batch is kept. The
/// reported loss is the example-weighted mean of the batch losses seen during
/// the last epoch, each measured before its step.
pub fn local_training(
    shard: &ClientShard,
    theta: &ParameterVector,
    spec: &ModelSpec,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    shuffle_seed: u64,
) -> Result<ClientUpdate> {
    let n = shard.examples.len();
    if n == 0 {
        return Err(Error::config(format!("client {} has an empty shard", shard.client_id)));
    }
    if epochs == 0 || batch_size == 0 {
        return Err(Error::config("local training needs epochs >= 1 and batch size >= 1"));
    }
    let mut params = theta.clone();
    let mut last_epoch_loss = 0.0;
    for epoch in 0..epochs {
        let order = SeededRng::derived(shuffle_seed, &[epoch as u64]).permutation(n);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch = Batch::from_examples(chunk.iter().map(|&i| &shard.examples[i]))?;
            let (out, grad) = forward_backward(spec, &params, &batch)?;
            loss_sum += out.loss * chunk.len() as f64;
            params = sgd_step(&params, &grad, lr)?;
        }
        last_epoch_loss = loss_sum / n as f64;
    }
    Ok(ClientUpdate {
        client_id: shard.client_id,
        params,
        num_examples: n,
        train_loss: last_epoch_loss,
    })
}
