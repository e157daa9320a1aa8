use serde::{Deserialize, Serialize};

use super::LabeledExample;
use crate::error::{Error, Result};
use crate::rng::{stream, SeededRng};

pub const MARKERS_PER_CLASS: usize = 10;
/// Probability that a token of a class-`c` example is one of `c`'s markers.
pub const MARKER_PROB: f64 = 0.3;
const MIN_LEN: usize = 5;
const MAX_LEN: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_examples: usize,
    pub num_classes: usize,
    pub vocab_size: usize,
    /// Fraction of label-1 examples; only used when `num_classes == 2`.
    #[serde(default = "default_positive_rate")]
    pub positive_rate: f64,
    pub seed: u64,
}

fn default_positive_rate() -> f64 {
    0.5
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config(format!(
                "synthetic num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        if self.vocab_size <= self.num_classes * MARKERS_PER_CLASS {
            return Err(Error::config(format!(
                "synthetic vocab_size must exceed {} for {} classes, got {}",
                self.num_classes * MARKERS_PER_CLASS,
                self.num_classes,
                self.vocab_size
            )));
        }
        if !(0.0..=1.0).contains(&self.positive_rate) {
            return Err(Error::config(format!(
                "positive_rate must lie in [0, 1], got {}",
                self.positive_rate
            )));
        }
        Ok(())
    }
}

fn word(id: usize) -> String {
    format!("w{id}")
}

/// Planted-marker corpus. Class `c` owns the words `w{10c} .. w{10c+9}`; the
/// remaining words are background. Each example has `Uniform[5, 30]` tokens,
/// each a uniform marker of its class with probability 0.3, else a uniform
/// background word. Binary labels are Bernoulli(`positive_rate`), multiclass
/// labels uniform.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Vec<LabeledExample>> {
    spec.validate()?;
    let mut rng = SeededRng::derived(spec.seed, &[stream::SYNTHETIC]);
    let markers = spec.num_classes * MARKERS_PER_CLASS;
    let background = spec.vocab_size - markers;
    let examples = (0..spec.num_examples)
        .map(|_| {
            let label = if spec.num_classes == 2 {
                usize::from(rng.bernoulli(spec.positive_rate))
            } else {
                rng.below_usize(spec.num_classes)
            };
            let len = MIN_LEN + rng.below_usize(MAX_LEN - MIN_LEN + 1);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    let id = if rng.bernoulli(MARKER_PROB) {
                        label * MARKERS_PER_CLASS + rng.below_usize(MARKERS_PER_CLASS)
                    } else {
                        markers + rng.below_usize(background)
                    };
                    word(id)
                })
                .collect();
            LabeledExample {
                text: words.join(" "),
                label,
            }
        })
        .collect();
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenize;

    fn spec(n: usize, classes: usize, rate: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            num_examples: n,
            num_classes: classes,
            vocab_size: 500,
            positive_rate: rate,
            seed,
        }
    }

    fn positive_fraction(data: &[LabeledExample]) -> f64 {
        data.iter().filter(|e| e.label == 1).count() as f64 / data.len() as f64
    }

    #[test]
    fn reddit_like_balance() {
        let data = make_synthetic(&spec(1000, 2, 0.4816, 7)).unwrap();
        assert_eq!(data.len(), 1000);
        assert!((positive_fraction(&data) - 0.4816).abs() <= 0.05);
    }

    #[test]
    fn twitter_like_balance() {
        let data = make_synthetic(&spec(1000, 2, 0.058, 7)).unwrap();
        assert!((positive_fraction(&data) - 0.058).abs() <= 0.02);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(
            make_synthetic(&spec(50, 3, 0.5, 1)).unwrap(),
            make_synthetic(&spec(50, 3, 0.5, 1)).unwrap()
        );
        assert_ne!(
            make_synthetic(&spec(50, 3, 0.5, 1)).unwrap(),
            make_synthetic(&spec(50, 3, 0.5, 2)).unwrap()
        );
    }

    #[test]
    fn multiclass_uses_every_label_and_planted_words() {
        let data = make_synthetic(&spec(500, 5, 0.5, 3)).unwrap();
        let mut seen = [false; 5];
        for e in &data {
            seen[e.label] = true;
            let toks = tokenize(&e.text);
            assert!((5..=30).contains(&toks.len()));
            for t in toks {
                let id: usize = t[1..].parse().unwrap();
                assert!(id < 500);
                if id < 50 {
                    assert_eq!(id / MARKERS_PER_CLASS, e.label, "foreign marker {t}");
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(make_synthetic(&spec(10, 2, 1.5, 0)).is_err());
        assert!(make_synthetic(&spec(10, 2, -0.1, 0)).is_err());
        assert!(make_synthetic(&spec(10, 1, 0.5, 0)).is_err());
        let mut small = spec(10, 5, 0.5, 0);
        small.vocab_size = 50;
        assert!(matches!(make_synthetic(&small), Err(Error::Config(_))));
    }
}
