//! Multinomial naive Bayes over hashed features, the deterministic baseline
//! classifier.

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::learn::{featurize, FeatureSpace, TextClassifier};

/// Class log-priors and per-class smoothed feature log-likelihoods.
/// A class absent from the training corpus keeps its maximum-likelihood
/// prior of zero (log-prior -inf), so it can never win the argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    pub alpha: f64,
    pub dim: usize,
    pub log_priors: [f64; 5],
    pub feature_log_likelihood: Vec<Vec<f64>>,
}

/// Trains the model: maximum-likelihood priors and add-alpha feature
/// smoothing, P(f|c) = (count(f,c) + alpha) / (total(c) + alpha * D).
pub fn train_nb(corpus: &Corpus, space: &FeatureSpace, alpha: f64) -> Result<NbModel> {
    if corpus.is_empty() {
        return Err(Error::contract(
            "cannot train naive Bayes on an empty corpus",
        ));
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::contract("naive Bayes smoothing alpha must be > 0"));
    }
    let dim = space.dim;
    let mut feature_counts = vec![vec![0.0f64; dim]; 5];
    let mut doc_counts = [0u64; 5];
    for sample in &corpus.samples {
        let class = sample.label.index();
        doc_counts[class] += 1;
        for &(idx, value) in featurize(&sample.text, space).pairs() {
            feature_counts[class][idx as usize] += value;
        }
    }
    let total_docs = corpus.len() as f64;
    let mut log_priors = [0.0f64; 5];
    for (class, prior) in log_priors.iter_mut().enumerate() {
        *prior = (doc_counts[class] as f64 / total_docs).ln();
    }
    let mut feature_log_likelihood = vec![vec![0.0f64; dim]; 5];
    for class in 0..5 {
        let total: f64 = feature_counts[class].iter().sum();
        let denom = total + alpha * dim as f64;
        for (f, out) in feature_log_likelihood[class].iter_mut().enumerate() {
            *out = ((feature_counts[class][f] + alpha) / denom).ln();
        }
    }
    Ok(NbModel {
        alpha,
        dim,
        log_priors,
        feature_log_likelihood,
    })
}

impl TextClassifier for NbModel {
    fn class_scores(&self, text: &str, space: &FeatureSpace) -> Result<[f64; 5]> {
        if space.dim != self.dim {
            return Err(Error::contract(format!(
                "feature space dimension {} does not match model dimension {}",
                space.dim, self.dim
            )));
        }
        let features = featurize(text, space);
        let mut scores = [0.0f64; 5];
        for (class, score) in scores.iter_mut().enumerate() {
            let mut s = self.log_priors[class];
            for &(idx, value) in features.pairs() {
                s += value * self.feature_log_likelihood[class][idx as usize];
            }
            *score = s;
        }
        Ok(scores)
    }
}
