//! Add-alpha smoothed character n-gram language model used to rerank
//! transliteration candidates.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel padding character for line starts and the single end-of-line
/// event. Training lines must not contain it.
pub const BOUNDARY: char = '\u{0}';

/// Character n-gram model with add-alpha smoothing:
/// P(c | ctx) = (count(ctx, c) + alpha) / (total(ctx) + alpha * |alphabet|).
/// Contexts never seen in training back off to the uniform distribution.
#[derive(Debug, Clone)]
pub struct CharLm {
    order: usize,
    alpha: f64,
    counts: BTreeMap<(String, char), u64>,
    context_totals: BTreeMap<String, u64>,
    alphabet: BTreeSet<char>,
}

#[derive(Serialize, Deserialize)]
struct CharLmFile {
    version: u32,
    order: usize,
    alpha: f64,
    alphabet: Vec<char>,
    counts: Vec<(String, char, u64)>,
}

impl CharLm {
    /// Accumulates counts over `lines`, padding each line with (n-1) leading
    /// boundary symbols and one trailing boundary event.
    pub fn train<S: AsRef<str>>(lines: &[S], order: usize, alpha: f64) -> Result<CharLm> {
        if order < 1 {
            return Err(Error::contract("char LM order must be >= 1"));
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::contract("char LM alpha must be > 0"));
        }
        if lines.is_empty() {
            return Err(Error::contract("char LM training corpus is empty"));
        }
        let mut lm = CharLm {
            order,
            alpha,
            counts: BTreeMap::new(),
            context_totals: BTreeMap::new(),
            alphabet: BTreeSet::new(),
        };
        lm.alphabet.insert(BOUNDARY);
        for line in lines {
            let padded = pad(line.as_ref(), order);
            for &c in &padded[order - 1..] {
                lm.alphabet.insert(c);
            }
            for i in (order - 1)..padded.len() {
                let ctx: String = padded[i - (order - 1)..i].iter().collect();
                *lm.counts.entry((ctx.clone(), padded[i])).or_insert(0) += 1;
                *lm.context_totals.entry(ctx).or_insert(0) += 1;
            }
        }
        Ok(lm)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.len()
    }

    /// Smoothed conditional probability of `c` after `ctx`.
    pub fn prob(&self, ctx: &str, c: char) -> f64 {
        let count = self.counts.get(&(ctx.to_string(), c)).copied().unwrap_or(0) as f64;
        let total = self.context_totals.get(ctx).copied().unwrap_or(0) as f64;
        (count + self.alpha) / (total + self.alpha * self.alphabet.len() as f64)
    }

    pub fn log_prob(&self, ctx: &str, c: char) -> f64 {
        self.prob(ctx, c).ln()
    }

    /// Mean per-character log-probability of `text`, including the
    /// end-of-line event. Always finite and <= 0.
    pub fn mean_log_prob(&self, text: &str) -> f64 {
        let padded = pad(text, self.order);
        let events = padded.len() - (self.order - 1);
        let mut sum = 0.0;
        for i in (self.order - 1)..padded.len() {
            let ctx: String = padded[i - (self.order - 1)..i].iter().collect();
            sum += self.log_prob(&ctx, padded[i]);
        }
        sum / events as f64
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CharLmFile {
            version: 1,
            order: self.order,
            alpha: self.alpha,
            alphabet: self.alphabet.iter().copied().collect(),
            counts: self
                .counts
                .iter()
                .map(|((ctx, c), n)| (ctx.clone(), *c, *n))
                .collect(),
        };
        let json = serde_json::to_string(&file)
            .map_err(|e| Error::ModelFormat(format!("char LM encode: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CharLm> {
        let json = std::fs::read_to_string(path)?;
        let file: CharLmFile = serde_json::from_str(&json)
            .map_err(|e| Error::ModelFormat(format!("char LM decode: {e}")))?;
        if file.version != 1 {
            return Err(Error::ModelFormat(format!(
                "unsupported char LM version {}",
                file.version
            )));
        }
        let mut context_totals = BTreeMap::new();
        let mut counts = BTreeMap::new();
        for (ctx, c, n) in file.counts {
            *context_totals.entry(ctx.clone()).or_insert(0) += n;
            counts.insert((ctx, c), n);
        }
        Ok(CharLm {
            order: file.order,
            alpha: file.alpha,
            counts,
            context_totals,
            alphabet: file.alphabet.into_iter().collect(),
        })
    }
}

fn pad(line: &str, order: usize) -> Vec<char> {
    let mut padded = vec![BOUNDARY; order - 1];
    padded.extend(line.chars().filter(|&c| c != BOUNDARY));
    padded.push(BOUNDARY);
    padded
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Hand-computed from the count definition: corpus "ab" with n=1 yields
    // the 3-event sequence [a, b, BOUNDARY], so with alpha=1 and the
    // alphabet {a, b, BOUNDARY}: P(a) = (1+1)/(3+1*3) = 1/3.
    #[test]
    fn unigram_counts_match_hand_computation() {
        let lm = CharLm::train(&["ab"], 1, 1.0).unwrap();
        assert_eq!(lm.alphabet_size(), 3);
        assert_eq!(lm.prob("", 'a'), (1.0 + 1.0) / (3.0 + 3.0));
        assert_eq!(lm.prob("", 'b'), 1.0 / 3.0);
        assert_eq!(lm.prob("", BOUNDARY), 1.0 / 3.0);
    }

    #[test]
    fn unseen_context_is_uniform() {
        let lm = CharLm::train(&["abc"], 3, 0.5).unwrap();
        let uniform = 1.0 / lm.alphabet_size() as f64;
        assert!((lm.prob("zz", 'a') - uniform).abs() < 1e-12);
        assert!((lm.prob("zz", 'q') - uniform).abs() < 1e-12);
    }

    #[test]
    fn bigram_context_counting() {
        // "aa" with n=2: events (BOUNDARY->a), (a->a), (a->BOUNDARY)
        let lm = CharLm::train(&["aa"], 2, 1.0).unwrap();
        // alphabet {a, BOUNDARY}; ctx "a" saw a once and BOUNDARY once
        assert_eq!(lm.prob("a", 'a'), (1.0 + 1.0) / (2.0 + 2.0));
        assert_eq!(lm.prob("a", BOUNDARY), 0.5);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(CharLm::train(&["x"], 0, 1.0).is_err());
        assert!(CharLm::train(&["x"], 1, 0.0).is_err());
        assert!(CharLm::train::<&str>(&[], 2, 1.0).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let lm = CharLm::train(&["ಕನಸು", "ಹಾಡು", "super"], 3, 0.1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lm.json");
        lm.save(&path).unwrap();
        let loaded = CharLm::load(&path).unwrap();
        for text in ["ಕನಸು", "xyz", ""] {
            assert_eq!(lm.mean_log_prob(text), loaded.mean_log_prob(text));
        }
    }

    proptest! {
        // Conditional probabilities over the alphabet sum to 1 for any context.
        #[test]
        fn probabilities_normalize(
            lines in proptest::collection::vec("[a-d]{1,6}", 1..5),
            order in 1usize..4,
            ctx in "[a-e]{0,3}",
        ) {
            let lm = CharLm::train(&lines, order, 0.3).unwrap();
            let ctx: String = ctx.chars().take(order - 1).collect();
            let ctx = format!(
                "{}{}",
                BOUNDARY.to_string().repeat((order - 1).saturating_sub(ctx.chars().count())),
                ctx
            );
            let sum: f64 = lm.alphabet.iter().map(|&c| lm.prob(&ctx, c)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9, "sum = {sum}");
        }

        // Scores are finite and non-positive.
        #[test]
        fn scores_are_finite_log_probs(
            lines in proptest::collection::vec("[a-d]{1,6}", 1..5),
            text in "[a-f]{0,8}",
        ) {
            let lm = CharLm::train(&lines, 2, 0.1).unwrap();
            let score = lm.mean_log_prob(&text);
            prop_assert!(score.is_finite());
            prop_assert!(score <= 0.0);
        }
    }
}
