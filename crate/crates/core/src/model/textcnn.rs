use super::layers::{affine, affine_backward, softmax_xent, xent_grad};
use super::{check_label, token_input, Batch, ForwardOutput, Layout, ModelSpec, PAD_ID};
use crate::error::{Error, Result};

pub(super) struct Offsets {
    embedding: usize,
    /// (filter offset, bias offset, width) per bank
    banks: Vec<(usize, usize, usize)>,
    head_w: usize,
    head_b: usize,
}

pub(super) fn layout(spec: &ModelSpec) -> (Layout, Offsets) {
    let (e, f) = (spec.embed_dim, spec.hidden_dims[0]);
    let mut l = Layout::default();
    let embedding = l.embedding(spec.input_dim, e);
    let banks = spec
        .conv_widths
        .iter()
        .map(|&w| (l.matrix(f, w * e), l.bias(f), w))
        .collect();
    let features = f * spec.conv_widths.len();
    let head_w = l.matrix(spec.num_classes, features);
    let head_b = l.bias(spec.num_classes);
    (
        l,
        Offsets {
            embedding,
            banks,
            head_w,
            head_b,
        },
    )
}

pub(super) fn run(
    spec: &ModelSpec,
    params: &[f64],
    batch: &Batch,
    mut grad: Option<&mut [f64]>,
) -> Result<ForwardOutput> {
    let (_, off) = layout(spec);
    let (e, nf, k) = (spec.embed_dim, spec.hidden_dims[0], spec.num_classes);
    let features = nf * off.banks.len();
    let head_w = &params[off.head_w..off.head_w + k * features];
    let head_b = &params[off.head_b..off.head_b + k];
    let n = batch.len();
    let mut loss = 0.0;
    let mut scores = Vec::with_capacity(n);

    for (input, &label) in batch.inputs().iter().zip(batch.labels()) {
        let tokens = token_input(input, spec.input_dim)?;
        check_label(label, k)?;
        let len = tokens.len();
        if let Some(&(_, _, w)) = off.banks.iter().find(|b| b.2 > len) {
            return Err(Error::shape(format!(
                "sequence of length {len} is shorter than conv width {w}"
            )));
        }
        // Embedded sequence, row per position; padding rows stay zero.
        let mut x = vec![0.0; len * e];
        for (t, &id) in tokens.iter().enumerate() {
            if id != PAD_ID {
                let src = off.embedding + id * e;
                x[t * e..(t + 1) * e].copy_from_slice(&params[src..src + e]);
            }
        }

        // Max-pooled ReLU features plus the winning position of each filter.
        let mut h = vec![0.0; features];
        let mut winners = vec![(0usize, 0.0f64); features];
        for (bi, &(f_off, b_off, w)) in off.banks.iter().enumerate() {
            let span = w * e;
            for f in 0..nf {
                let filt = &params[f_off + f * span..f_off + (f + 1) * span];
                let mut best = (0usize, f64::NEG_INFINITY, 0.0f64);
                for p in 0..=len - w {
                    let window = &x[p * e..p * e + span];
                    let z = params[b_off + f] + filt.iter().zip(window).map(|(a, b)| a * b).sum::<f64>();
                    let a = z.max(0.0);
                    if a > best.1 {
                        best = (p, a, z);
                    }
                }
                h[bi * nf + f] = best.1;
                winners[bi * nf + f] = (best.0, best.2);
            }
        }

        let logits = affine(head_w, head_b, &h);
        let (l, probs) = softmax_xent(&logits, label);
        loss += l;

        if let Some(g) = grad.as_deref_mut() {
            let dlogits = xent_grad(&probs, label, n);
            let dh = affine_backward(head_w, &h, &dlogits, g, off.head_w, off.head_b);
            let mut dx = vec![0.0; len * e];
            for (bi, &(f_off, b_off, w)) in off.banks.iter().enumerate() {
                let span = w * e;
                for f in 0..nf {
                    let (p, z) = winners[bi * nf + f];
                    let gf = dh[bi * nf + f];
                    if z <= 0.0 || gf == 0.0 {
                        continue;
                    }
                    g[b_off + f] += gf;
                    let filt = &params[f_off + f * span..f_off + (f + 1) * span];
                    let window = &x[p * e..p * e + span];
                    let gfilt = &mut g[f_off + f * span..f_off + (f + 1) * span];
                    let dwin = &mut dx[p * e..p * e + span];
                    for j in 0..span {
                        gfilt[j] += gf * window[j];
                        dwin[j] += gf * filt[j];
                    }
                }
            }
            for (t, &id) in tokens.iter().enumerate() {
                if id == PAD_ID {
                    continue;
                }
                let dst = off.embedding + id * e;
                for j in 0..e {
                    g[dst + j] += dx[t * e + j];
                }
            }
        }
        scores.push(probs);
    }
    Ok(ForwardOutput {
        loss: loss / n as f64,
        class_scores: scores,
    })
}

/// Smallest distance from a non-differentiable point over the batch: the gap
/// between the two largest distinct window pre-activations of each filter, or
/// the winner's distance from the ReLU hinge, whichever is smaller.
pub(super) fn kink_margin(spec: &ModelSpec, params: &[f64], batch: &Batch) -> Result<f64> {
    let (_, off) = layout(spec);
    let (e, nf) = (spec.embed_dim, spec.hidden_dims[0]);
    let mut margin = f64::INFINITY;
    for input in batch.inputs() {
        let tokens = token_input(input, spec.input_dim)?;
        let embed = |id: usize, j: usize| {
            if id == PAD_ID {
                0.0
            } else {
                params[off.embedding + id * e + j]
            }
        };
        for &(f_off, b_off, w) in &off.banks {
            if w > tokens.len() {
                return Err(Error::shape("sequence shorter than conv width"));
            }
            for f in 0..nf {
                let mut zs: Vec<f64> = (0..=tokens.len() - w)
                    .map(|p| {
                        let mut z = params[b_off + f];
                        for k in 0..w {
                            for j in 0..e {
                                z += params[f_off + f * w * e + k * e + j] * embed(tokens[p + k], j);
                            }
                        }
                        z
                    })
                    .collect();
                zs.sort_by(|a, b| b.total_cmp(a));
                zs.dedup();
                margin = margin.min(zs[0].abs());
                if zs[0] > 0.0 {
                    if let Some(second) = zs.get(1) {
                        margin = margin.min(zs[0] - second.max(0.0));
                    }
                }
            }
        }
    }
    Ok(margin)
}
