//! Central finite-difference check of [`backward`](super::backward) against
//! the loss reported by [`forward`](super::forward).

use super::{backward, forward, Batch, Input, ModelKind, ModelSpec, ParameterVector, PAD_ID};
use crate::error::Result;
use crate::rng::SeededRng;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Magnitudes below this are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub kind: ModelKind,
    pub num_params: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Numerical gradient of the mean batch loss by central differences.
pub fn numeric_gradient(spec: &ModelSpec, params: &ParameterVector, batch: &Batch, h: f64) -> Result<Vec<f64>> {
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + h;
        let plus = forward(spec, &probe, batch)?.loss;
        probe.as_mut_slice()[i] = orig - h;
        let minus = forward(spec, &probe, batch)?.loss;
        probe.as_mut_slice()[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

pub fn check(spec: &ModelSpec, params: &ParameterVector, batch: &Batch, h: f64) -> Result<GradReport> {
    let analytic = backward(spec, params, batch)?;
    let numeric = numeric_gradient(spec, params, batch, h)?;
    let (worst_index, max_rel_error) = analytic
        .as_slice()
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
    Ok(GradReport {
        kind: spec.kind,
        num_params: params.len(),
        max_rel_error,
        worst_index,
    })
}

/// Instances closer than this to a pooling or ReLU kink are redrawn.
pub const KINK_MARGIN: f64 = 1e-3;

/// A small seeded instance for one model kind: spec, generic (non-initial)
/// parameters and a batch of `batch_size` random examples. Textcnn draws are
/// repeated until every max-pool winner sits at least [`KINK_MARGIN`] away
/// from a tie or the ReLU hinge, since finite differences are meaningless there.
pub fn instance(kind: ModelKind, seed: u64, batch_size: usize) -> Result<(ModelSpec, ParameterVector, Batch)> {
    let mut rng = SeededRng::new(seed);
    loop {
        let (spec, params, batch) = draw(kind, seed, batch_size, &mut rng)?;
        if kind != ModelKind::Textcnn || super::textcnn::kink_margin(&spec, params.as_slice(), &batch)? >= KINK_MARGIN {
            return Ok((spec, params, batch));
        }
    }
}

fn draw(
    kind: ModelKind,
    seed: u64,
    batch_size: usize,
    rng: &mut SeededRng,
) -> Result<(ModelSpec, ParameterVector, Batch)> {
    let classes = 3;
    let spec = match kind {
        ModelKind::Logreg => ModelSpec::logreg(6, classes, seed),
        ModelKind::Mlp => ModelSpec::mlp(6, vec![5, 4], classes, seed),
        ModelKind::Textcnn => ModelSpec::textcnn(12, 4, 3, vec![2, 3, 4], 8, classes, seed),
        ModelKind::Lstm => ModelSpec::lstm(12, 4, 5, 8, classes, seed),
    };
    spec.validate()?;
    let params = ParameterVector::new((0..spec.param_count()).map(|_| rng.uniform(-0.5, 0.5)).collect());
    let mut inputs = Vec::with_capacity(batch_size);
    let mut labels = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let input = if kind.uses_tokens() {
            let real = 3 + rng.below_usize(spec.max_len - 2);
            let mut tokens: Vec<usize> = (0..real).map(|_| 1 + rng.below_usize(spec.input_dim - 1)).collect();
            tokens.resize(spec.max_len, PAD_ID);
            Input::Tokens(tokens)
        } else {
            Input::Dense((0..spec.input_dim).map(|_| rng.uniform(-1.0, 1.0)).collect())
        };
        inputs.push(input);
        labels.push(rng.below_usize(classes));
    }
    Ok((spec, params, Batch::new(inputs, labels)?))
}
