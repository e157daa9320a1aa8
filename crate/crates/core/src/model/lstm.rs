use super::layers::{affine, affine_backward, sigmoid, softmax_xent, xent_grad};
use super::{check_label, token_input, Batch, ForwardOutput, Layout, ModelSpec, PAD_ID};
use crate::error::Result;

pub(super) struct Offsets {
    embedding: usize,
    wx: usize,
    wh: usize,
    bias: usize,
    head_w: usize,
    head_b: usize,
}

pub(super) fn layout(spec: &ModelSpec) -> (Layout, Offsets) {
    let (e, h) = (spec.embed_dim, spec.hidden_dims[0]);
    let mut l = Layout::default();
    let embedding = l.embedding(spec.input_dim, e);
    let wx = l.matrix(4 * h, e);
    let wh = l.matrix(4 * h, h);
    let bias = l.bias(4 * h);
    let head_w = l.matrix(spec.num_classes, h);
    let head_b = l.bias(spec.num_classes);
    (
        l,
        Offsets {
            embedding,
            wx,
            wh,
            bias,
            head_w,
            head_b,
        },
    )
}

struct Step {
    id: usize,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// gate activations laid out as [i, f, g, o]
    gates: Vec<f64>,
    c: Vec<f64>,
}

/// Steps actually run: everything up to the last non-padding token.
fn effective_len(tokens: &[usize]) -> usize {
    tokens.iter().rposition(|&id| id != PAD_ID).map_or(0, |p| p + 1)
}

pub(super) fn run(
    spec: &ModelSpec,
    params: &[f64],
    batch: &Batch,
    mut grad: Option<&mut [f64]>,
) -> Result<ForwardOutput> {
    let (_, off) = layout(spec);
    let (e, hd, k) = (spec.embed_dim, spec.hidden_dims[0], spec.num_classes);
    let wx = &params[off.wx..off.wx + 4 * hd * e];
    let wh = &params[off.wh..off.wh + 4 * hd * hd];
    let bias = &params[off.bias..off.bias + 4 * hd];
    let head_w = &params[off.head_w..off.head_w + k * hd];
    let head_b = &params[off.head_b..off.head_b + k];
    let zero_e = vec![0.0; e];
    let embed = |id: usize| -> &[f64] {
        if id == PAD_ID {
            &zero_e
        } else {
            &params[off.embedding + id * e..off.embedding + (id + 1) * e]
        }
    };

    let n = batch.len();
    let mut loss = 0.0;
    let mut scores = Vec::with_capacity(n);
    for (input, &label) in batch.inputs().iter().zip(batch.labels()) {
        let tokens = token_input(input, spec.input_dim)?;
        check_label(label, k)?;
        let steps_len = effective_len(tokens);

        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut steps = Vec::with_capacity(steps_len);
        for &id in &tokens[..steps_len] {
            let zx = affine(wx, bias, embed(id));
            let zh = affine(wh, &vec![0.0; 4 * hd], &h);
            let mut gates = vec![0.0; 4 * hd];
            for j in 0..4 * hd {
                let z = zx[j] + zh[j];
                gates[j] = if (2 * hd..3 * hd).contains(&j) {
                    z.tanh()
                } else {
                    sigmoid(z)
                };
            }
            let mut c_new = vec![0.0; hd];
            let mut h_new = vec![0.0; hd];
            for j in 0..hd {
                let (i_g, f_g, g_g, o_g) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
                c_new[j] = f_g * c[j] + i_g * g_g;
                h_new[j] = o_g * c_new[j].tanh();
            }
            steps.push(Step {
                id,
                h_prev: std::mem::replace(&mut h, h_new),
                c_prev: std::mem::replace(&mut c, c_new.clone()),
                gates,
                c: c_new,
            });
        }

        let logits = affine(head_w, head_b, &h);
        let (l, probs) = softmax_xent(&logits, label);
        loss += l;

        if let Some(g) = grad.as_deref_mut() {
            let dlogits = xent_grad(&probs, label, n);
            let mut dh = affine_backward(head_w, &h, &dlogits, g, off.head_w, off.head_b);
            let mut dc = vec![0.0; hd];
            for step in steps.iter().rev() {
                let mut dz = vec![0.0; 4 * hd];
                for j in 0..hd {
                    let (i_g, f_g, g_g, o_g) = (
                        step.gates[j],
                        step.gates[hd + j],
                        step.gates[2 * hd + j],
                        step.gates[3 * hd + j],
                    );
                    let tc = step.c[j].tanh();
                    let d_o = dh[j] * tc;
                    dc[j] += dh[j] * o_g * (1.0 - tc * tc);
                    let d_i = dc[j] * g_g;
                    let d_g = dc[j] * i_g;
                    let d_f = dc[j] * step.c_prev[j];
                    dz[j] = d_i * i_g * (1.0 - i_g);
                    dz[hd + j] = d_f * f_g * (1.0 - f_g);
                    dz[2 * hd + j] = d_g * (1.0 - g_g * g_g);
                    dz[3 * hd + j] = d_o * o_g * (1.0 - o_g);
                    dc[j] *= f_g;
                }
                let dx = affine_backward(wx, embed(step.id), &dz, g, off.wx, off.bias);
                // The bias was already credited above; only accumulate Wh here.
                let mut dh_prev = vec![0.0; hd];
                for (r, &gz) in dz.iter().enumerate() {
                    if gz == 0.0 {
                        continue;
                    }
                    let row = &wh[r * hd..(r + 1) * hd];
                    let grow = &mut g[off.wh + r * hd..off.wh + (r + 1) * hd];
                    for j in 0..hd {
                        grow[j] += gz * step.h_prev[j];
                        dh_prev[j] += gz * row[j];
                    }
                }
                if step.id != PAD_ID {
                    let dst = off.embedding + step.id * e;
                    for j in 0..e {
                        g[dst + j] += dx[j];
                    }
                }
                dh = dh_prev;
            }
        }
        scores.push(probs);
    }
    Ok(ForwardOutput {
        loss: loss / n as f64,
        class_scores: scores,
    })
}
