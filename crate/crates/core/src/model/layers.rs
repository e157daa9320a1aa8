//! Dense building blocks shared by the model kinds.

/// Mean-reduction helper: returns `(loss, probs)` for one example and
/// leaves `probs` as the softmax of `logits`.
pub(super) fn softmax_xent(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = (sum.ln() + max - logits[label]).max(0.0);
    let probs = exps.into_iter().map(|e| e / sum).collect();
    (loss, probs)
}

/// `dL/dlogits` for the mean loss over `n` examples.
pub(super) fn xent_grad(probs: &[f64], label: usize, n: usize) -> Vec<f64> {
    let scale = 1.0 / n as f64;
    probs
        .iter()
        .enumerate()
        .map(|(c, &p)| (p - if c == label { 1.0 } else { 0.0 }) * scale)
        .collect()
}

/// `out = W x + b` with `W` row-major `[out.len() x x.len()]`.
pub(super) fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            let row = &w[r * cols..(r + 1) * cols];
            bias + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>()
        })
        .collect()
}

/// Accumulates `dW += dout x^T` and `db += dout` into `grad`, returning `W^T dout`.
pub(super) fn affine_backward(
    w: &[f64],
    x: &[f64],
    dout: &[f64],
    grad: &mut [f64],
    w_off: usize,
    b_off: usize,
) -> Vec<f64> {
    let cols = x.len();
    let mut dx = vec![0.0; cols];
    for (r, &g) in dout.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grad[b_off + r] += g;
        let row = &w[r * cols..(r + 1) * cols];
        let grow = &mut grad[w_off + r * cols..w_off + (r + 1) * cols];
        for c in 0..cols {
            grow[c] += g * x[c];
            dx[c] += g * row[c];
        }
    }
    dx
}

pub(super) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
