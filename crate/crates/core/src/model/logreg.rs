use super::layers::{affine, affine_backward, softmax_xent, xent_grad};
use super::{check_label, dense_input, Batch, ForwardOutput, Layout, ModelSpec};
use crate::error::Result;

pub(super) fn layout(spec: &ModelSpec) -> Layout {
    let mut l = Layout::default();
    l.matrix(spec.num_classes, spec.input_dim);
    l.bias(spec.num_classes);
    l
}

pub(super) fn run(
    spec: &ModelSpec,
    params: &[f64],
    batch: &Batch,
    mut grad: Option<&mut [f64]>,
) -> Result<ForwardOutput> {
    let (d, k) = (spec.input_dim, spec.num_classes);
    let (w, b) = params.split_at(k * d);
    let n = batch.len();
    let mut loss = 0.0;
    let mut scores = Vec::with_capacity(n);
    for (input, &label) in batch.inputs().iter().zip(batch.labels()) {
        let x = dense_input(input, d)?;
        check_label(label, k)?;
        let logits = affine(w, b, x);
        let (l, probs) = softmax_xent(&logits, label);
        loss += l;
        if let Some(g) = grad.as_deref_mut() {
            let dlogits = xent_grad(&probs, label, n);
            affine_backward(w, x, &dlogits, g, 0, k * d);
        }
        scores.push(probs);
    }
    Ok(ForwardOutput {
        loss: loss / n as f64,
        class_scores: scores,
    })
}
