use super::layers::{affine, affine_backward, softmax_xent, xent_grad};
use super::{check_label, dense_input, Batch, ForwardOutput, Layout, ModelSpec};
use crate::error::Result;

fn widths(spec: &ModelSpec) -> Vec<usize> {
    let mut dims = Vec::with_capacity(spec.hidden_dims.len() + 2);
    dims.push(spec.input_dim);
    dims.extend_from_slice(&spec.hidden_dims);
    dims.push(spec.num_classes);
    dims
}

pub(super) fn layout(spec: &ModelSpec) -> Layout {
    let mut l = Layout::default();
    for pair in widths(spec).windows(2) {
        l.matrix(pair[1], pair[0]);
        l.bias(pair[1]);
    }
    l
}

pub(super) fn run(
    spec: &ModelSpec,
    params: &[f64],
    batch: &Batch,
    mut grad: Option<&mut [f64]>,
) -> Result<ForwardOutput> {
    let dims = widths(spec);
    let mut offsets = Vec::with_capacity(dims.len() - 1);
    let mut at = 0;
    for pair in dims.windows(2) {
        let (w_off, b_off) = (at, at + pair[0] * pair[1]);
        at = b_off + pair[1];
        offsets.push((w_off, b_off, pair[0], pair[1]));
    }
    let layers = offsets.len();
    let n = batch.len();
    let mut loss = 0.0;
    let mut scores = Vec::with_capacity(n);

    for (input, &label) in batch.inputs().iter().zip(batch.labels()) {
        let x = dense_input(input, spec.input_dim)?;
        check_label(label, spec.num_classes)?;
        // activations[i] is the input to layer i
        let mut activations = vec![x.to_vec()];
        let mut logits = Vec::new();
        for (i, &(w_off, b_off, fan_in, fan_out)) in offsets.iter().enumerate() {
            let w = &params[w_off..w_off + fan_in * fan_out];
            let b = &params[b_off..b_off + fan_out];
            let z = affine(w, b, activations.last().unwrap());
            if i + 1 < layers {
                activations.push(z.into_iter().map(f64::tanh).collect());
            } else {
                logits = z;
            }
        }
        let (l, probs) = softmax_xent(&logits, label);
        loss += l;
        if let Some(g) = grad.as_deref_mut() {
            let mut delta = xent_grad(&probs, label, n);
            for i in (0..layers).rev() {
                let (w_off, _, fan_in, fan_out) = offsets[i];
                let w = &params[w_off..w_off + fan_in * fan_out];
                let dx = affine_backward(w, &activations[i], &delta, g, w_off, offsets[i].1);
                if i > 0 {
                    delta = dx.iter().zip(&activations[i]).map(|(d, a)| d * (1.0 - a * a)).collect();
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
