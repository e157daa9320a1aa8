use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{tokenize, LabeledExample};
use crate::model::{Example, Input, ModelKind, PAD_ID, UNK_ID};

/// Tokens seen fewer times than this in the training split map to the unknown id.
pub const DEFAULT_MIN_FREQ: usize = 2;

/// Token to id map. Ids are dense: 0 is padding, 1 is unknown, then
/// training tokens ordered by descending frequency and then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_freq: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for tok in tokenize(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_freq.max(1)).collect();
        // stable sort keeps the lexicographic order within equal counts
        kept.sort_by_key(|&(_, c)| std::cmp::Reverse(c));
        let tokens = ["<pad>".to_string(), "<unk>".to_string()]
            .into_iter()
            .chain(kept.into_iter().map(|(t, _)| t))
            .collect();
        Self::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().skip(2).map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }
}

/// Turns raw text into model inputs: padded/truncated id sequences for token
/// models, term-frequency vectors over the vocabulary for dense models.
#[derive(Debug, Clone)]
pub struct Encoder {
    vocab: Vocabulary,
    max_len: usize,
    bag_of_words: bool,
}

impl Encoder {
    pub fn new(vocab: Vocabulary, kind: ModelKind, max_len: usize) -> Self {
        Self {
            vocab,
            max_len,
            bag_of_words: !kind.uses_tokens(),
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Width of the model input: the vocabulary size for either encoding.
    pub fn input_dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn encode(&self, text: &str) -> Input {
        let ids = tokenize(text).into_iter().map(|t| self.vocab.id(&t));
        if self.bag_of_words {
            let mut counts = vec![0.0; self.vocab.len()];
            let mut n = 0usize;
            for id in ids {
                counts[id] += 1.0;
                n += 1;
            }
            if n > 0 {
                let inv = 1.0 / n as f64;
                counts.iter_mut().for_each(|c| *c *= inv);
            }
            Input::Dense(counts)
        } else {
            let mut seq: Vec<usize> = ids.take(self.max_len).collect();
            seq.resize(self.max_len, PAD_ID);
            Input::Tokens(seq)
        }
    }

    pub fn encode_all(&self, examples: &[LabeledExample]) -> Vec<Example> {
        examples
            .iter()
            .map(|e| Example {
                input: self.encode(&e.text),
                label: e.label,
            })
            .collect()
    }
}
