//! Three-group feed-forward classifier over hashed n-gram features. The
//! groups mirror fine-tuning layer groups: G0 projects the sparse input,
//! G1 is the ReLU hidden layer, G2 the 5-way output. Training combines
//! mini-batch cross-entropy, adaptive-moment updates, the slanted
//! triangular schedule, discriminative per-group rates and gradual
//! unfreezing, and is fully deterministic given the seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::learn::schedule::{
    discriminative_lrs, stlr_lr, train_steps, StlrParams, TrainConfig, UnfreezeSchedule,
};
use crate::learn::{featurize, truncate_chars, FeatureSpace, SparseVec, TextClassifier};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;
pub const GROUPS: usize = 3;
const CLASSES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGroup {
    pub in_dim: usize,
    pub out_dim: usize,
    /// row-major `[out_dim][in_dim]`
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl LayerGroup {
    fn zeros(in_dim: usize, out_dim: usize) -> LayerGroup {
        LayerGroup {
            in_dim,
            out_dim,
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
        }
    }

    fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> LayerGroup {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut group = LayerGroup::zeros(in_dim, out_dim);
        for w in &mut group.w {
            *w = rng.random_range(-limit..limit);
        }
        group
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn get_param(&self, i: usize) -> f64 {
        if i < self.w.len() {
            self.w[i]
        } else {
            self.b[i - self.w.len()]
        }
    }

    pub fn set_param(&mut self, i: usize, value: f64) {
        if i < self.w.len() {
            self.w[i] = value;
        } else {
            self.b[i - self.w.len()] = value;
        }
    }

    fn forward_sparse(&self, x: &SparseVec) -> Vec<f64> {
        let mut out = self.b.clone();
        for &(idx, value) in x.pairs() {
            let col = idx as usize;
            for (row, o) in out.iter_mut().enumerate() {
                *o += self.w[row * self.in_dim + col] * value;
            }
        }
        out
    }

    fn forward_dense(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        for (row, o) in out.iter_mut().enumerate() {
            let weights = &self.w[row * self.in_dim..(row + 1) * self.in_dim];
            let mut acc = 0.0;
            for (w, v) in weights.iter().zip(x) {
                acc += w * v;
            }
            *o += acc;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub groups: Vec<LayerGroup>,
    pub dim: usize,
    pub dropout: f64,
    pub max_len: usize,
}

/// Per-group gradients, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub groups: Vec<LayerGroup>,
}

/// Per-sample dropout masks for the two hidden activations (inverted
/// dropout: kept units are scaled by 1/(1-p)).
struct DropoutMasks {
    g0: Vec<Vec<f64>>,
    g1: Vec<Vec<f64>>,
}

impl MlpModel {
    pub fn init(
        dim: usize,
        hidden0: usize,
        hidden1: usize,
        dropout: f64,
        max_len: usize,
        rng: &mut ChaCha8Rng,
    ) -> MlpModel {
        MlpModel {
            groups: vec![
                LayerGroup::init(dim, hidden0, rng),
                LayerGroup::init(hidden0, hidden1, rng),
                LayerGroup::init(hidden1, CLASSES, rng),
            ],
            dim,
            dropout,
            max_len,
        }
    }

    pub fn logits(&self, x: &SparseVec) -> [f64; 5] {
        let z0 = self.groups[0].forward_sparse(x);
        let mut a1 = self.groups[1].forward_dense(&z0);
        for v in &mut a1 {
            *v = v.max(0.0);
        }
        let out = self.groups[2].forward_dense(&a1);
        let mut logits = [0.0f64; 5];
        logits.copy_from_slice(&out);
        logits
    }

    /// Mean cross-entropy over the batch, without dropout.
    pub fn batch_loss(&self, batch: &[(SparseVec, usize)]) -> f64 {
        let mut total = 0.0;
        for (x, y) in batch {
            let logits = self.logits(x);
            total += cross_entropy(&logits, *y).0;
        }
        total / batch.len() as f64
    }

    /// Mean cross-entropy and analytic gradients over the batch, without
    /// dropout. This is the entry point gradient checks exercise.
    pub fn loss_and_gradients(&self, batch: &[(SparseVec, usize)]) -> (f64, Gradients) {
        self.batch_gradients(batch, None)
    }

    fn batch_gradients(
        &self,
        batch: &[(SparseVec, usize)],
        masks: Option<&DropoutMasks>,
    ) -> (f64, Gradients) {
        let mut grads = Gradients {
            groups: self
                .groups
                .iter()
                .map(|g| LayerGroup::zeros(g.in_dim, g.out_dim))
                .collect(),
        };
        let scale = 1.0 / batch.len() as f64;
        let mut total_loss = 0.0;

        for (sample_idx, (x, y)) in batch.iter().enumerate() {
            let z0 = self.groups[0].forward_sparse(x);
            let d0: Vec<f64> = match masks {
                Some(m) => z0
                    .iter()
                    .zip(&m.g0[sample_idx])
                    .map(|(v, k)| v * k)
                    .collect(),
                None => z0.clone(),
            };
            let u1 = self.groups[1].forward_dense(&d0);
            let a1: Vec<f64> = u1.iter().map(|&v| v.max(0.0)).collect();
            let d1: Vec<f64> = match masks {
                Some(m) => a1
                    .iter()
                    .zip(&m.g1[sample_idx])
                    .map(|(v, k)| v * k)
                    .collect(),
                None => a1.clone(),
            };
            let logits_vec = self.groups[2].forward_dense(&d1);
            let mut logits = [0.0f64; 5];
            logits.copy_from_slice(&logits_vec);
            let (loss, mut dlogits) = cross_entropy(&logits, *y);
            total_loss += loss;
            for d in &mut dlogits {
                *d *= scale;
            }

            // output layer
            let g2 = &self.groups[2];
            let dg2 = &mut grads.groups[2];
            let mut dd1 = vec![0.0f64; g2.in_dim];
            for (row, &dl) in dlogits.iter().enumerate() {
                dg2.b[row] += dl;
                for col in 0..g2.in_dim {
                    dg2.w[row * g2.in_dim + col] += dl * d1[col];
                    dd1[col] += g2.w[row * g2.in_dim + col] * dl;
                }
            }

            // hidden layer: undo dropout, then the ReLU gate
            let mut du1 = vec![0.0f64; self.groups[1].out_dim];
            for i in 0..du1.len() {
                let da1 = match masks {
                    Some(m) => dd1[i] * m.g1[sample_idx][i],
                    None => dd1[i],
                };
                du1[i] = if u1[i] > 0.0 { da1 } else { 0.0 };
            }
            let g1 = &self.groups[1];
            let dg1 = &mut grads.groups[1];
            let mut dd0 = vec![0.0f64; g1.in_dim];
            for (row, &du) in du1.iter().enumerate() {
                dg1.b[row] += du;
                for col in 0..g1.in_dim {
                    dg1.w[row * g1.in_dim + col] += du * d0[col];
                    dd0[col] += g1.w[row * g1.in_dim + col] * du;
                }
            }

            // projection layer over the sparse input
            let g0 = &self.groups[0];
            let dg0 = &mut grads.groups[0];
            for (row, dd) in dd0.iter().enumerate() {
                let dz0 = match masks {
                    Some(m) => dd * m.g0[sample_idx][row],
                    None => *dd,
                };
                dg0.b[row] += dz0;
                for &(idx, value) in x.pairs() {
                    dg0.w[row * g0.in_dim + idx as usize] += dz0 * value;
                }
            }
        }

        (total_loss * scale, grads)
    }
}

impl TextClassifier for MlpModel {
    fn class_scores(&self, text: &str, space: &FeatureSpace) -> Result<[f64; 5]> {
        if space.dim != self.dim {
            return Err(Error::contract(format!(
                "feature space dimension {} does not match model dimension {}",
                space.dim, self.dim
            )));
        }
        let text = truncate_chars(text, self.max_len);
        Ok(self.logits(&featurize(text, space)))
    }
}

/// Numerically stable softmax cross-entropy; returns the loss and the
/// gradient w.r.t. the logits.
pub fn cross_entropy(logits: &[f64; 5], target: usize) -> (f64, [f64; 5]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut exp_sum = 0.0;
    let mut probs = [0.0f64; 5];
    for (i, &l) in logits.iter().enumerate() {
        probs[i] = (l - max).exp();
        exp_sum += probs[i];
    }
    let loss = exp_sum.ln() + max - logits[target];
    let mut grad = [0.0f64; 5];
    for i in 0..5 {
        grad[i] = probs[i] / exp_sum - if i == target { 1.0 } else { 0.0 };
    }
    (loss, grad)
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

/// Epoch-by-epoch training driver. The per-step rate is `stlr_lr(t)` scaled
/// per group by the discriminative factors; groups outside an epoch's
/// trainable set receive no updates at all, so their parameters stay
/// bit-identical through the epoch.
pub struct MlpTrainer {
    model: MlpModel,
    data: Vec<(SparseVec, usize)>,
    config: TrainConfig,
    stlr: StlrParams,
    unfreeze: UnfreezeSchedule,
    group_factors: Vec<f64>,
    rng: ChaCha8Rng,
    adam: AdamState,
    step: usize,
    epoch: usize,
}

impl MlpTrainer {
    pub fn new(
        corpus: &Corpus,
        space: &FeatureSpace,
        config: &TrainConfig,
        stlr: &StlrParams,
        unfreeze: &UnfreezeSchedule,
    ) -> Result<MlpTrainer> {
        if corpus.is_empty() {
            return Err(Error::contract("cannot train the MLP on an empty corpus"));
        }
        config.validate()?;
        unfreeze.validate(GROUPS, config.epochs)?;
        let steps = train_steps(corpus.len(), config.batch_size, config.epochs);
        if stlr.total_steps < steps {
            return Err(Error::contract(format!(
                "stlr covers {} steps but training takes {steps}",
                stlr.total_steps
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = MlpModel::init(
            space.dim,
            config.hidden0,
            config.hidden1,
            config.dropout,
            config.max_len,
            &mut rng,
        );
        let data: Vec<(SparseVec, usize)> = corpus
            .samples
            .iter()
            .map(|s| {
                (
                    featurize(truncate_chars(&s.text, config.max_len), space),
                    s.label.index(),
                )
            })
            .collect();
        let adam = AdamState {
            m: model
                .groups
                .iter()
                .map(|g| vec![0.0; g.param_count()])
                .collect(),
            v: model
                .groups
                .iter()
                .map(|g| vec![0.0; g.param_count()])
                .collect(),
        };
        Ok(MlpTrainer {
            group_factors: discriminative_lrs(1.0, GROUPS, config.decay),
            model,
            data,
            config: config.clone(),
            stlr: *stlr,
            unfreeze: unfreeze.clone(),
            rng,
            adam,
            step: 0,
            epoch: 0,
        })
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    /// Runs one epoch; returns the mean batch loss seen during it.
    pub fn run_epoch(&mut self) -> Result<f64> {
        if self.finished() {
            return Err(Error::contract("training already finished"));
        }
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        shuffle(&mut order, &mut self.rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<(SparseVec, usize)> =
                chunk.iter().map(|&i| self.data[i].clone()).collect();
            let masks = draw_masks(&self.model, batch.len(), self.config.dropout, &mut self.rng);
            let (loss, grads) = self.model.batch_gradients(&batch, masks.as_ref());
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss {loss} at epoch {}, step {}",
                    self.epoch, self.step
                )));
            }
            epoch_loss += loss;
            batches += 1;
            let lr = stlr_lr(self.step, &self.stlr)?;
            let step = self.step + 1;
            let bc1 = 1.0 - BETA1.powi(step as i32);
            let bc2 = 1.0 - BETA2.powi(step as i32);
            for &group in self.unfreeze.trainable(self.epoch) {
                let lr_g = lr * self.group_factors[group];
                let params = &mut self.model.groups[group];
                let grad = &grads.groups[group];
                let m = &mut self.adam.m[group];
                let v = &mut self.adam.v[group];
                for i in 0..params.param_count() {
                    let g = grad.get_param(i);
                    m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
                    v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    let mut p = params.get_param(i) - lr_g * m_hat / (v_hat.sqrt() + EPS);
                    if self.config.weight_decay > 0.0 {
                        p -= lr_g * self.config.weight_decay * p;
                    }
                    params.set_param(i, p);
                }
            }
            self.step += 1;
        }
        self.epoch += 1;
        Ok(epoch_loss / batches as f64)
    }

    pub fn into_model(self) -> MlpModel {
        self.model
    }
}

/// Trains to completion; see [`MlpTrainer`] for the mechanics.
pub fn train_mlp(
    corpus: &Corpus,
    space: &FeatureSpace,
    config: &TrainConfig,
    stlr: &StlrParams,
    unfreeze: &UnfreezeSchedule,
) -> Result<MlpModel> {
    let mut trainer = MlpTrainer::new(corpus, space, config, stlr, unfreeze)?;
    while !trainer.finished() {
        trainer.run_epoch()?;
    }
    Ok(trainer.into_model())
}

// Fisher-Yates on the seeded stream; kept local so the byte-for-byte
// training trace depends only on this crate.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

fn draw_masks(
    model: &MlpModel,
    batch_len: usize,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> Option<DropoutMasks> {
    if dropout <= 0.0 {
        return None;
    }
    let keep_scale = 1.0 / (1.0 - dropout);
    let mut draw_layer = |width: usize| -> Vec<Vec<f64>> {
        (0..batch_len)
            .map(|_| {
                (0..width)
                    .map(|_| {
                        if rng.random::<f64>() < dropout {
                            0.0
                        } else {
                            keep_scale
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let g0 = draw_layer(model.groups[0].out_dim);
    let g1 = draw_layer(model.groups[1].out_dim);
    Some(DropoutMasks { g0, g1 })
}

/// Fraction of samples whose argmax prediction matches the gold label.
pub fn accuracy(model: &impl TextClassifier, corpus: &Corpus, space: &FeatureSpace) -> Result<f64> {
    let mut correct = 0usize;
    for sample in &corpus.samples {
        let (label, _) = crate::learn::predict(model, &sample.text, space)?;
        if label == sample.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / corpus.len() as f64)
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::corpus::Label;
    use crate::learn::predict;
    use std::collections::BTreeSet;

    fn random_batch(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Vec<(SparseVec, usize)> {
        let space = FeatureSpace::new(1, 2, true, dim).unwrap();
        (0..n)
            .map(|_| {
                let text: String = (0..rng.random_range(3..12))
                    .map(|_| (b'a' + rng.random_range(0..6u8)) as char)
                    .collect();
                (featurize(&text, &space), rng.random_range(0..5usize))
            })
            .collect()
    }

    #[test]
    fn loss_at_uniform_logits_is_ln_classes() {
        let (loss, _) = cross_entropy(&[0.0; 5], 2);
        assert!((loss - 5.0f64.ln()).abs() < 1e-12);
        // zeroed weights and biases produce uniform logits for any input
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = MlpModel::init(1 << 10, 8, 6, 0.0, 128, &mut rng);
        for g in &mut model.groups {
            g.w.iter_mut().for_each(|w| *w = 0.0);
        }
        let batch = vec![(featurize("x", &small_space()), 1usize)];
        assert!((model.batch_loss(&batch) - 5.0f64.ln()).abs() < 1e-12);
        assert!(model.batch_loss(&batch) >= 0.0);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let dim = 1 << 10;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for instance in 0..3 {
            let model = MlpModel::init(dim, 6, 5, 0.0, 128, &mut rng);
            let batch = random_batch(&mut rng, dim, 3);
            let (_, grads) = model.loss_and_gradients(&batch);
            let h = 1e-5;
            let mut perturbed = model.clone();
            for g in 0..GROUPS {
                for i in 0..model.groups[g].param_count() {
                    let orig = model.groups[g].get_param(i);
                    perturbed.groups[g].set_param(i, orig + h);
                    let up = perturbed.batch_loss(&batch);
                    perturbed.groups[g].set_param(i, orig - h);
                    let down = perturbed.batch_loss(&batch);
                    perturbed.groups[g].set_param(i, orig);
                    let fd = (up - down) / (2.0 * h);
                    let analytic = grads.groups[g].get_param(i);
                    let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6);
                    assert!(
                        rel < 1e-4,
                        "instance {instance} group {g} param {i}: analytic {analytic}, fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn frozen_groups_stay_bit_identical_through_epoch() {
        let corpus = separable_corpus(64);
        let space = small_space();
        let mut config = quick_config(3);
        config.epochs = 2;
        let stlr = stlr_for(&corpus, &config, 0.05);
        let unfreeze =
            UnfreezeSchedule::from_sets(vec![BTreeSet::from([2]), BTreeSet::from([0, 1, 2])]);
        let mut trainer = MlpTrainer::new(&corpus, &space, &config, &stlr, &unfreeze).unwrap();
        let g0_before = trainer.model().groups[0].clone();
        let g1_before = trainer.model().groups[1].clone();
        let g2_before = trainer.model().groups[2].clone();

        trainer.run_epoch().unwrap();
        assert_eq!(trainer.model().groups[0], g0_before);
        assert_eq!(trainer.model().groups[1], g1_before);
        assert_ne!(trainer.model().groups[2], g2_before);

        trainer.run_epoch().unwrap();
        assert_ne!(trainer.model().groups[0], g0_before);
        assert_ne!(trainer.model().groups[1], g1_before);
        assert!(trainer.finished());
    }

    #[test]
    fn training_is_deterministic_given_seed() {
        let corpus = separable_corpus(48);
        let space = small_space();
        let config = quick_config(11);
        let stlr = stlr_for(&corpus, &config, 0.05);
        let unfreeze = UnfreezeSchedule::gradual(GROUPS, config.epochs);
        let a = train_mlp(&corpus, &space, &config, &stlr, &unfreeze).unwrap();
        let b = train_mlp(&corpus, &space, &config, &stlr, &unfreeze).unwrap();
        assert_eq!(a, b);

        let mut other = config.clone();
        other.seed = 12;
        let c = train_mlp(&corpus, &space, &other, &stlr, &unfreeze).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn separable_corpus_is_learned() {
        let corpus = separable_corpus(200);
        let space = small_space();
        let config = quick_config(5);
        let stlr = stlr_for(&corpus, &config, 0.05);
        let unfreeze = UnfreezeSchedule::gradual(GROUPS, config.epochs);
        let model = train_mlp(&corpus, &space, &config, &stlr, &unfreeze).unwrap();
        let acc = accuracy(&model, &corpus, &space).unwrap();
        assert!(acc >= 0.95, "training accuracy {acc}");
        let (label, scores) = predict(&model, "good fine super nalla w0", &space).unwrap();
        assert_eq!(label, Label::Positive);
        assert_eq!(scores.len(), 5);
    }

    #[test]
    fn stlr_shorter_than_run_is_rejected() {
        let corpus = separable_corpus(40);
        let space = small_space();
        let config = quick_config(1);
        let stlr = StlrParams::new(0.05, 32.0, 0.5, 3).unwrap();
        let unfreeze = UnfreezeSchedule::gradual(GROUPS, config.epochs);
        assert!(MlpTrainer::new(&corpus, &space, &config, &stlr, &unfreeze).is_err());
    }

    #[test]
    fn diverging_run_aborts_with_diagnostics() {
        let corpus = separable_corpus(32);
        let space = small_space();
        let mut config = quick_config(4);
        config.epochs = 1;
        config.batch_size = 8;
        config.dropout = 0.0;
        // an absurd peak rate overflows the weights within a few steps
        let stlr = stlr_for(&corpus, &config, 1e200);
        let unfreeze = UnfreezeSchedule::gradual(GROUPS, config.epochs);
        match train_mlp(&corpus, &space, &config, &stlr, &unfreeze) {
            Err(Error::Training(msg)) => assert!(msg.contains("non-finite"), "{msg}"),
            other => panic!("expected a training abort, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let corpus = separable_corpus(16);
        let space = small_space();
        let mut config = quick_config(0);
        config.epochs = 1;
        let stlr = stlr_for(&corpus, &config, 0.05);
        let unfreeze = UnfreezeSchedule::gradual(GROUPS, 1);
        let model = train_mlp(&corpus, &space, &config, &stlr, &unfreeze).unwrap();
        let other = FeatureSpace::new(1, 2, true, 1 << 11).unwrap();
        assert!(model.class_scores("x", &other).is_err());
    }
}
