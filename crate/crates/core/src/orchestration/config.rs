use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FaultInjection;
use crate::aggregation::AggregationConfig;
use crate::data::{SyntheticSpec, DEFAULT_MIN_FREQ};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec};
use crate::rng::{derive_seed, stream};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Model architecture minus the data-dependent sizes (vocabulary and class
/// count), which are filled in once the dataset is loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    /// Defaults: mlp `[32]`, textcnn `[8]` filters per width, lstm `[16]`.
    #[serde(default)]
    pub hidden_dims: Option<Vec<usize>>,
    #[serde(default = "default_conv_widths")]
    pub conv_widths: Vec<usize>,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default)]
    pub init_seed: u64,
}

fn default_embed_dim() -> usize {
    16
}
fn default_conv_widths() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_max_len() -> usize {
    32
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            embed_dim: default_embed_dim(),
            hidden_dims: None,
            conv_widths: default_conv_widths(),
            max_len: default_max_len(),
            init_seed: 0,
        }
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.hidden_dims.clone().unwrap_or_else(|| match self.kind {
            ModelKind::Logreg => vec![],
            ModelKind::Mlp => vec![32],
            ModelKind::Textcnn => vec![8],
            ModelKind::Lstm => vec![16],
        })
    }

    pub fn to_spec(&self, input_dim: usize, num_classes: usize) -> ModelSpec {
        ModelSpec {
            kind: self.kind,
            input_dim,
            embed_dim: self.embed_dim,
            hidden_dims: self.hidden_dims(),
            num_classes,
            conv_widths: if self.kind == ModelKind::Textcnn {
                self.conv_widths.clone()
            } else {
                vec![]
            },
            max_len: self.max_len,
            init_seed: self.init_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataConfig {
    Synthetic(SyntheticSpec),
    Jsonl(JsonlSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonlSource {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    /// Defaults to one more than the largest label.
    #[serde(default)]
    pub num_classes: Option<usize>,
    #[serde(default)]
    pub strict: bool,
}

/// Everything that determines a run. Two equal configs give identical logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    /// Seeds the train/test split, partition and local shuffles.
    pub run_seed: u64,
    pub per_client: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Evaluate the global model every this many rounds (the last round always).
    #[serde(default = "one")]
    pub eval_every: usize,
    #[serde(default = "default_min_freq")]
    pub min_freq: usize,
    /// Epochs for the pooled-data baseline used by cross-validation.
    #[serde(default = "default_centralized_epochs")]
    pub centralized_epochs: usize,
    pub model: ModelConfig,
    pub aggregation: AggregationConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub faults: Option<FaultInjection>,
}

fn schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}
fn default_test_fraction() -> f64 {
    0.2
}
fn one() -> usize {
    1
}
fn default_min_freq() -> usize {
    DEFAULT_MIN_FREQ
}
fn default_centralized_epochs() -> usize {
    10
}

impl ExperimentConfig {
    /// Checks that can run before any data is touched.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version: expected {CONFIG_SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.per_client == 0 {
            return Err(Error::config("per_client: must be positive"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config(format!(
                "test_fraction: must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every: must be positive"));
        }
        if self.centralized_epochs == 0 {
            return Err(Error::config("centralized_epochs: must be positive"));
        }
        self.aggregation.validate()?;
        if let Some(f) = &self.faults {
            f.validate()?;
        }
        if let DataConfig::Synthetic(s) = &self.data {
            s.validate()?;
        }
        // probe the architecture with placeholder sizes
        self.model
            .to_spec(2, 2)
            .validate()
            .map_err(|e| Error::config(format!("model: {e}")))?;
        Ok(())
    }

    /// Trial 0 is the config itself; later trials re-derive every seed that
    /// drives training (split, partition, init, sampling, faults). The
    /// dataset itself is unchanged.
    pub fn for_trial(&self, trial: usize) -> Self {
        if trial == 0 {
            return self.clone();
        }
        let t = trial as u64;
        let mut c = self.clone();
        c.run_seed = derive_seed(self.run_seed, &[stream::TRIAL, t]);
        c.model.init_seed = derive_seed(self.model.init_seed, &[stream::TRIAL, t]);
        c.aggregation.sampling_seed = derive_seed(self.aggregation.sampling_seed, &[stream::TRIAL, t]);
        if let Some(f) = &mut c.faults {
            f.seed = derive_seed(f.seed, &[stream::TRIAL, t]);
        }
        c
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Load a TOML config, a JSON config, or a run manifest (whose `config`
    /// field is used). Relative dataset paths are made absolute.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
            let inner = match value.get("config") {
                Some(c) => c.clone(),
                None => value,
            };
            serde_json::from_value(inner).map_err(|e| Error::config(format!("invalid config: {e}")))?
        } else {
            Self::from_toml_str(&text)?
        };
        if let DataConfig::Jsonl(src) = &mut config.data {
            if src.path.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                src.path = base.join(&src.path);
            }
        }
        Ok(config)
    }
}
