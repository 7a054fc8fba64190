//! Desk-scale sentiment classifiers: hashed character n-gram features, a
//! multinomial naive Bayes baseline, and a small feed-forward network
//! trained with slanted triangular learning rates, discriminative per-group
//! rates and gradual unfreezing.

pub mod mlp;
pub mod model_io;
pub mod nb;
pub mod schedule;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LABELS};
use crate::error::{Error, Result};

pub use mlp::{train_mlp, MlpModel};
pub use model_io::{load_model, save_model, Model, ModelFile};
pub use nb::{train_nb, NbModel};
pub use schedule::{discriminative_lrs, stlr_lr, StlrParams, TrainConfig, UnfreezeSchedule};

/// Which classifier a report cell refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nb,
    Mlp,
}

pub const MODEL_KINDS: [ModelKind; 2] = [ModelKind::Nb, ModelKind::Mlp];

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Nb => "nb",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nb" => Some(ModelKind::Nb),
            "mlp" => Some(ModelKind::Mlp),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Boundary symbol padding each word for character n-grams of size > 1.
pub const WORD_BOUNDARY: char = '\u{0}';

/// Hashed text feature space: character n-grams in `[ngram_lo, ngram_hi]`
/// plus optional word unigrams, bucketed into `dim` slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub ngram_lo: usize,
    pub ngram_hi: usize,
    pub word_unigrams: bool,
    pub dim: usize,
}

impl FeatureSpace {
    pub fn new(ngram_lo: usize, ngram_hi: usize, word_unigrams: bool, dim: usize) -> Result<Self> {
        if ngram_lo < 1 || ngram_lo > ngram_hi || ngram_hi > 6 {
            return Err(Error::contract(format!(
                "n-gram range must satisfy 1 <= lo <= hi <= 6, got [{ngram_lo}, {ngram_hi}]"
            )));
        }
        if dim < (1 << 10) || !dim.is_power_of_two() {
            return Err(Error::contract(format!(
                "hashing dimension must be a power of two >= 1024, got {dim}"
            )));
        }
        Ok(FeatureSpace {
            ngram_lo,
            ngram_hi,
            word_unigrams,
            dim,
        })
    }
}

impl Default for FeatureSpace {
    fn default() -> Self {
        FeatureSpace {
            ngram_lo: 1,
            ngram_hi: 3,
            word_unigrams: true,
            dim: 1 << 15,
        }
    }
}

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    pairs: Vec<(u32, f64)>,
}

impl SparseVec {
    pub fn pairs(&self) -> &[(u32, f64)] {
        &self.pairs
    }

    pub fn nnz(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// FNV-1a hash of a feature key, reduced to a bucket index. The hash is
/// fixed so feature vectors are identical across runs and platforms.
pub fn bucket(key: &str, dim: usize) -> u32 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in key.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    (h % dim as u64) as u32
}

/// Counts character n-grams (each word padded with n-1 boundary symbols on
/// both sides for n > 1) and optional word unigrams, hashed into the
/// feature space. Deterministic for a given input.
pub fn featurize(text: &str, space: &FeatureSpace) -> SparseVec {
    let mut counts: HashMap<u32, f64> = HashMap::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        for n in space.ngram_lo..=space.ngram_hi {
            let mut padded = Vec::with_capacity(chars.len() + 2 * (n - 1));
            padded.extend(std::iter::repeat_n(WORD_BOUNDARY, n - 1));
            padded.extend(&chars);
            padded.extend(std::iter::repeat_n(WORD_BOUNDARY, n - 1));
            if padded.len() < n {
                continue;
            }
            for window in padded.windows(n) {
                let gram: String = window.iter().collect();
                let idx = bucket(&format!("c:{gram}"), space.dim);
                *counts.entry(idx).or_insert(0.0) += 1.0;
            }
        }
        if space.word_unigrams {
            let idx = bucket(&format!("w:{word}"), space.dim);
            *counts.entry(idx).or_insert(0.0) += 1.0;
        }
    }
    let mut pairs: Vec<(u32, f64)> = counts.into_iter().collect();
    pairs.sort_by_key(|&(i, _)| i);
    SparseVec { pairs }
}

/// Truncates to at most `max_len` characters, on a char boundary.
pub fn truncate_chars(text: &str, max_len: usize) -> &str {
    match text.char_indices().nth(max_len) {
        Some((byte, _)) => &text[..byte],
        None => text,
    }
}

/// A trained classifier that can score a text over the five classes.
pub trait TextClassifier {
    /// Class scores in fixed Label order. NB yields log-posteriors, the MLP
    /// yields pre-softmax logits.
    fn class_scores(&self, text: &str, space: &FeatureSpace) -> Result<[f64; 5]>;
}

/// Argmax prediction with ties broken by fixed Label declaration order.
pub fn predict<M: TextClassifier + ?Sized>(
    model: &M,
    text: &str,
    space: &FeatureSpace,
) -> Result<(Label, [f64; 5])> {
    let scores = model.class_scores(text, space)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((LABELS[best], scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_space_validation() {
        assert!(FeatureSpace::new(1, 3, true, 1 << 12).is_ok());
        assert!(FeatureSpace::new(0, 3, true, 1 << 12).is_err());
        assert!(FeatureSpace::new(3, 2, true, 1 << 12).is_err());
        assert!(FeatureSpace::new(1, 7, true, 1 << 12).is_err());
        assert!(FeatureSpace::new(1, 3, true, 1000).is_err());
        assert!(FeatureSpace::new(1, 3, true, 512).is_err());
    }

    #[test]
    fn empty_text_has_no_features() {
        let space = FeatureSpace::default();
        assert!(featurize("", &space).is_empty());
        assert!(featurize("   ", &space).is_empty());
    }

    // Oracle: enumerate the n-grams of "ab" for range [1,2] by hand. The
    // unigrams are a, b; the bigrams over the padded word are
    // BOUNDARY+a, ab, b+BOUNDARY.
    #[test]
    fn featurize_matches_hand_enumeration() {
        let space = FeatureSpace::new(1, 2, false, 1 << 12).unwrap();
        let got = featurize("ab", &space);
        let mut want: Vec<(u32, f64)> = [
            "c:a".to_string(),
            "c:b".to_string(),
            format!("c:{WORD_BOUNDARY}a"),
            "c:ab".to_string(),
            format!("c:b{WORD_BOUNDARY}"),
        ]
        .iter()
        .map(|key| (bucket(key, space.dim), 1.0))
        .collect();
        want.sort_by_key(|&(i, _)| i);
        assert_eq!(got.pairs(), want.as_slice());
    }

    #[test]
    fn word_unigrams_are_separate_features() {
        let space_with = FeatureSpace::new(1, 1, true, 1 << 12).unwrap();
        let space_without = FeatureSpace::new(1, 1, false, 1 << 12).unwrap();
        let with = featurize("ab ab", &space_with);
        let without = featurize("ab ab", &space_without);
        assert_eq!(with.nnz(), without.nnz() + 1);
        let idx = bucket("w:ab", space_with.dim);
        assert!(with.pairs().iter().any(|&(i, v)| i == idx && v == 2.0));
    }

    #[test]
    fn featurize_is_deterministic() {
        let space = FeatureSpace::default();
        let a = featurize("kanasu nanna super movie 123", &space);
        let b = featurize("kanasu nanna super movie 123", &space);
        assert_eq!(a, b);
        let mut last = None;
        for &(i, v) in a.pairs() {
            assert!(v.is_finite());
            if let Some(prev) = last {
                assert!(i > prev, "indices must strictly increase");
            }
            last = Some(i);
        }
    }

    #[test]
    fn truncation_respects_char_boundaries() {
        assert_eq!(truncate_chars("hello", 3), "hel");
        assert_eq!(truncate_chars("hello", 10), "hello");
        assert_eq!(truncate_chars("ಕನಸು", 2), "ಕನ");
    }
}
