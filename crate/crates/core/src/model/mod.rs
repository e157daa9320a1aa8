//! Parameter-vector arithmetic and a small zoo of text classifiers with
//! hand-written gradients.
//!
//! Every model keeps all of its weights in one [`ParameterVector`]. Blocks are
//! laid out in a fixed order per kind (row-major matrices, then biases):
//!
//! * `logreg`: `W[classes x input]`, `b[classes]`.
//! * `mlp`: for each layer `W[out x in]`, `b[out]`; tanh on hidden layers.
//! * `textcnn`: embedding `E[vocab x embed]`; per conv width `w` a filter bank
//!   `F[filters x (w * embed)]`, `b[filters]`; head `W[classes x (filters * banks)]`, `b[classes]`.
//!   Filters use ReLU followed by max-over-time pooling; bank outputs are concatenated.
//! * `lstm`: embedding `E[vocab x embed]`, `Wx[4h x embed]`, `Wh[4h x h]`, `b[4h]`
//!   (gate order input, forget, cell, output), head `W[classes x h]`, `b[classes]`.
//!
//! Initialization draws, in layout order, one `uniform(-s, s)` value per matrix
//! entry with `s = sqrt(6 / (fan_in + fan_out))` (`fan_in` = columns,
//! `fan_out` = rows) from [`SeededRng::new(init_seed)`](crate::rng::SeededRng).
//! Biases start at zero and consume no draws. Embedding row 0 is the padding
//! vector: it is zero, consumes no draws, and never receives gradient.
//!
//! The loss is the mean softmax cross-entropy over the batch.

pub mod gradcheck;
mod layers;
mod logreg;
mod lstm;
mod mlp;
mod params;
mod textcnn;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub use params::{sgd_step, vec_axpy, vec_mean, vec_scale, vec_sub, ParameterVector};

/// Token id reserved for padding.
pub const PAD_ID: usize = 0;
/// Token id reserved for out-of-vocabulary tokens.
pub const UNK_ID: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logreg,
    Mlp,
    Textcnn,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Logreg, ModelKind::Mlp, ModelKind::Textcnn, ModelKind::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Mlp => "mlp",
            ModelKind::Textcnn => "textcnn",
            ModelKind::Lstm => "lstm",
        }
    }

    /// Whether the model reads token-id sequences (otherwise dense features).
    pub fn uses_tokens(self) -> bool {
        matches!(self, ModelKind::Textcnn | ModelKind::Lstm)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::config(format!(
                "unknown model kind `{s}` (expected logreg, mlp, textcnn or lstm)"
            ))
        })
    }
}

/// Architecture descriptor. For token models `input_dim` is the vocabulary
/// size; for dense models it is the feature width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub embed_dim: usize,
    /// mlp: hidden layer widths. textcnn: `[filters per width]`. lstm: `[hidden size]`.
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub conv_widths: Vec<usize>,
    /// Encoded sequence length for token models.
    pub max_len: usize,
    pub init_seed: u64,
}

impl ModelSpec {
    pub fn logreg(input_dim: usize, num_classes: usize, init_seed: u64) -> Self {
        Self {
            kind: ModelKind::Logreg,
            input_dim,
            embed_dim: 1,
            hidden_dims: vec![],
            num_classes,
            conv_widths: vec![],
            max_len: 1,
            init_seed,
        }
    }

    pub fn mlp(input_dim: usize, hidden_dims: Vec<usize>, num_classes: usize, init_seed: u64) -> Self {
        Self {
            kind: ModelKind::Mlp,
            hidden_dims,
            ..Self::logreg(input_dim, num_classes, init_seed)
        }
    }

    pub fn textcnn(
        vocab_size: usize,
        embed_dim: usize,
        filters: usize,
        conv_widths: Vec<usize>,
        max_len: usize,
        num_classes: usize,
        init_seed: u64,
    ) -> Self {
        Self {
            kind: ModelKind::Textcnn,
            input_dim: vocab_size,
            embed_dim,
            hidden_dims: vec![filters],
            num_classes,
            conv_widths,
            max_len,
            init_seed,
        }
    }

    pub fn lstm(
        vocab_size: usize,
        embed_dim: usize,
        hidden: usize,
        max_len: usize,
        num_classes: usize,
        init_seed: u64,
    ) -> Self {
        Self {
            kind: ModelKind::Lstm,
            input_dim: vocab_size,
            embed_dim,
            hidden_dims: vec![hidden],
            num_classes,
            conv_widths: vec![],
            max_len,
            init_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config(format!(
                "model.num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        if self.input_dim == 0 {
            return Err(Error::config("model.input_dim must be positive"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::config("model.hidden_dims entries must be positive"));
        }
        match self.kind {
            ModelKind::Logreg => {}
            ModelKind::Mlp => {
                if self.hidden_dims.is_empty() {
                    return Err(Error::config("mlp needs at least one hidden layer"));
                }
            }
            ModelKind::Textcnn | ModelKind::Lstm => {
                if self.input_dim < 2 {
                    return Err(Error::config(
                        "token models need a vocabulary with at least the pad and unknown ids",
                    ));
                }
                if self.embed_dim == 0 {
                    return Err(Error::config("model.embed_dim must be positive"));
                }
                if self.hidden_dims.len() != 1 {
                    return Err(Error::config(format!(
                        "{} takes exactly one hidden_dims entry, got {}",
                        self.kind.name(),
                        self.hidden_dims.len()
                    )));
                }
                if self.max_len == 0 {
                    return Err(Error::config("model.max_len must be positive"));
                }
            }
        }
        if self.kind == ModelKind::Textcnn {
            if self.conv_widths.is_empty() || self.conv_widths.contains(&0) {
                return Err(Error::config("textcnn needs one or more positive conv_widths"));
            }
            let widest = self.conv_widths.iter().copied().max().unwrap_or(0);
            if widest > self.max_len {
                return Err(Error::config(format!(
                    "conv width {widest} exceeds max_len {}",
                    self.max_len
                )));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    fn layout(&self) -> Layout {
        match self.kind {
            ModelKind::Logreg => logreg::layout(self),
            ModelKind::Mlp => mlp::layout(self),
            ModelKind::Textcnn => textcnn::layout(self).0,
            ModelKind::Lstm => lstm::layout(self).0,
        }
    }
}

/// One encoded model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Input {
    Tokens(Vec<usize>),
    Dense(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub input: Input,
    pub label: usize,
}

/// A non-empty set of examples with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Vec<Input>,
    labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Vec<Input>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::shape(format!(
                "batch has {} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::shape("batch is empty"));
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a Example>) -> Result<Self> {
        let (inputs, labels) = examples.into_iter().map(|e| (e.input.clone(), e.label)).unzip();
        Self::new(inputs, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &[Input] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    /// Softmax probabilities, one row per example.
    pub class_scores: Vec<Vec<f64>>,
}

impl ForwardOutput {
    /// Arg-max class per row; the lowest index wins ties.
    pub fn predictions(&self) -> Vec<usize> {
        self.class_scores
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (i, &p)| {
                            if p > best.1 {
                                (i, p)
                            } else {
                                best
                            }
                        },
                    )
                    .0
            })
            .collect()
    }
}

pub fn init_params(spec: &ModelSpec) -> Result<ParameterVector> {
    spec.validate()?;
    let layout = spec.layout();
    let mut rng = SeededRng::new(spec.init_seed);
    let mut values = vec![0.0; layout.total];
    for block in &layout.blocks {
        let dst = &mut values[block.start..block.start + block.rows * block.cols];
        match block.init {
            BlockInit::Zero => {}
            BlockInit::Glorot | BlockInit::Embedding => {
                let s = (6.0 / (block.rows + block.cols) as f64).sqrt();
                let skip = if block.init == BlockInit::Embedding {
                    block.cols
                } else {
                    0
                };
                for v in &mut dst[skip..] {
                    *v = rng.uniform(-s, s);
                }
            }
        }
    }
    Ok(ParameterVector::new(values))
}

pub fn forward(spec: &ModelSpec, params: &ParameterVector, batch: &Batch) -> Result<ForwardOutput> {
    run(spec, params, batch, None)
}

/// Gradient of the mean batch loss with respect to every parameter.
pub fn backward(spec: &ModelSpec, params: &ParameterVector, batch: &Batch) -> Result<ParameterVector> {
    Ok(forward_backward(spec, params, batch)?.1)
}

/// Forward pass and gradient from a single sweep.
pub fn forward_backward(
    spec: &ModelSpec,
    params: &ParameterVector,
    batch: &Batch,
) -> Result<(ForwardOutput, ParameterVector)> {
    let mut grad = vec![0.0; params.len()];
    let out = run(spec, params, batch, Some(&mut grad))?;
    let grad = ParameterVector::new(grad).ensure_finite("backward")?;
    Ok((out, grad))
}

fn run(spec: &ModelSpec, params: &ParameterVector, batch: &Batch, grad: Option<&mut [f64]>) -> Result<ForwardOutput> {
    spec.validate()?;
    let expected = spec.param_count();
    if params.len() != expected {
        return Err(Error::shape(format!(
            "{} expects {expected} parameters, got {}",
            spec.kind.name(),
            params.len()
        )));
    }
    let out = match spec.kind {
        ModelKind::Logreg => logreg::run(spec, params.as_slice(), batch, grad),
        ModelKind::Mlp => mlp::run(spec, params.as_slice(), batch, grad),
        ModelKind::Textcnn => textcnn::run(spec, params.as_slice(), batch, grad),
        ModelKind::Lstm => lstm::run(spec, params.as_slice(), batch, grad),
    }?;
    if !out.loss.is_finite() {
        return Err(Error::Numerical("loss is not finite".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockInit {
    Glorot,
    Zero,
    Embedding,
}

#[derive(Debug, Clone)]
struct Block {
    start: usize,
    rows: usize,
    cols: usize,
    init: BlockInit,
}

#[derive(Debug, Clone, Default)]
struct Layout {
    blocks: Vec<Block>,
    total: usize,
}

impl Layout {
    fn push(&mut self, rows: usize, cols: usize, init: BlockInit) -> usize {
        let start = self.total;
        self.blocks.push(Block {
            start,
            rows,
            cols,
            init,
        });
        self.total += rows * cols;
        start
    }

    /// Row-major `rows x cols` weight matrix; returns its offset.
    fn matrix(&mut self, rows: usize, cols: usize) -> usize {
        self.push(rows, cols, BlockInit::Glorot)
    }

    fn bias(&mut self, len: usize) -> usize {
        self.push(1, len, BlockInit::Zero)
    }

    fn embedding(&mut self, vocab: usize, dim: usize) -> usize {
        self.push(vocab, dim, BlockInit::Embedding)
    }
}

fn dense_input(input: &Input, dim: usize) -> Result<&[f64]> {
    match input {
        Input::Dense(x) if x.len() == dim => Ok(x),
        Input::Dense(x) => Err(Error::shape(format!(
            "dense input has width {}, model expects {dim}",
            x.len()
        ))),
        Input::Tokens(_) => Err(Error::shape("model expects dense features, got tokens")),
    }
}

fn token_input(input: &Input, vocab: usize) -> Result<&[usize]> {
    match input {
        Input::Tokens(t) => {
            if let Some(&bad) = t.iter().find(|&&id| id >= vocab) {
                return Err(Error::shape(format!(
                    "token id {bad} outside vocabulary of size {vocab}"
                )));
            }
            Ok(t)
        }
        Input::Dense(_) => Err(Error::shape("model expects token ids, got dense features")),
    }
}

fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        return Err(Error::shape(format!("label {label} outside [0, {classes})")));
    }
    Ok(())
}
