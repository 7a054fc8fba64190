//! Training-schedule machinery: slanted triangular learning rates,
//! discriminative per-group rates, gradual unfreezing and the shared
//! training configuration.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slanted triangular schedule: the rate climbs linearly from
/// lr_max/ratio to lr_max over the first `cut` steps, then decays linearly
/// back to lr_max/ratio at step `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StlrParams {
    pub lr_max: f64,
    pub ratio: f64,
    pub cut_frac: f64,
    pub total_steps: usize,
}

impl StlrParams {
    pub const DEFAULT_RATIO: f64 = 32.0;
    pub const DEFAULT_CUT_FRAC: f64 = 0.1;

    pub fn new(lr_max: f64, ratio: f64, cut_frac: f64, total_steps: usize) -> Result<StlrParams> {
        if !lr_max.is_finite() || lr_max <= 0.0 {
            return Err(Error::contract("stlr lr_max must be > 0"));
        }
        if !ratio.is_finite() || ratio <= 1.0 {
            return Err(Error::contract("stlr ratio must be > 1"));
        }
        if !cut_frac.is_finite() || cut_frac <= 0.0 || cut_frac >= 1.0 {
            return Err(Error::contract("stlr cut_frac must lie in (0, 1)"));
        }
        if total_steps < 2 {
            return Err(Error::contract("stlr total_steps must be >= 2"));
        }
        let params = StlrParams {
            lr_max,
            ratio,
            cut_frac,
            total_steps,
        };
        if params.cut() < 1 {
            return Err(Error::contract(
                "stlr cut_frac * total_steps must give at least one warm-up step",
            ));
        }
        Ok(params)
    }

    /// Step index of the triangle peak: floor(total_steps * cut_frac).
    pub fn cut(&self) -> usize {
        (self.total_steps as f64 * self.cut_frac).floor() as usize
    }

    /// Parameters sized for a full training run over `corpus_len` samples.
    /// Runs too short for `cut_frac` to give a warm-up step get their cut
    /// fraction widened so the peak still exists.
    pub fn for_run(
        lr_max: f64,
        ratio: f64,
        cut_frac: f64,
        corpus_len: usize,
        batch_size: usize,
        epochs: usize,
    ) -> Result<StlrParams> {
        let steps = train_steps(corpus_len, batch_size, epochs).max(2);
        let cut_frac = if (steps as f64 * cut_frac).floor() < 1.0 {
            1.5 / steps as f64
        } else {
            cut_frac
        };
        StlrParams::new(lr_max, ratio, cut_frac, steps)
    }
}

/// Number of optimizer steps a run will take (last partial batch kept).
pub fn train_steps(corpus_len: usize, batch_size: usize, epochs: usize) -> usize {
    epochs * corpus_len.div_ceil(batch_size)
}

/// Learning rate at step `t` of the slanted triangular schedule.
pub fn stlr_lr(t: usize, params: &StlrParams) -> Result<f64> {
    let total = params.total_steps;
    if t > total {
        return Err(Error::contract(format!(
            "stlr step {t} beyond total_steps {total}"
        )));
    }
    let cut = params.cut();
    let frac = if t < cut {
        t as f64 / cut as f64
    } else {
        1.0 - (t - cut) as f64 / (total - cut) as f64
    };
    Ok(params.lr_max * ((1.0 + frac * (params.ratio - 1.0)) / params.ratio))
}

/// Per-group learning rates for discriminative fine-tuning: the last group
/// gets `base_lr` and each earlier group the next one divided by `decay`.
pub fn discriminative_lrs(base_lr: f64, groups: usize, decay: f64) -> Vec<f64> {
    let mut lrs = vec![0.0; groups];
    let mut lr = base_lr;
    for slot in lrs.iter_mut().rev() {
        *slot = lr;
        lr /= decay;
    }
    lrs
}

/// Which layer groups train in which epoch. Trainable sets grow
/// monotonically and the final epoch trains everything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnfreezeSchedule {
    trainable: Vec<BTreeSet<usize>>,
}

impl UnfreezeSchedule {
    /// Gradual unfreezing: the last group trains from epoch 0 and one more
    /// group joins each epoch. If there are fewer epochs than groups, the
    /// final epoch unfreezes whatever is left.
    pub fn gradual(groups: usize, epochs: usize) -> UnfreezeSchedule {
        let mut trainable = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            let first = if epoch + 1 == epochs {
                0
            } else {
                groups.saturating_sub(epoch + 1)
            };
            trainable.push((first..groups).collect());
        }
        UnfreezeSchedule { trainable }
    }

    /// Every group trainable in every epoch.
    pub fn all(groups: usize, epochs: usize) -> UnfreezeSchedule {
        UnfreezeSchedule {
            trainable: vec![(0..groups).collect(); epochs],
        }
    }

    pub fn from_sets(sets: Vec<BTreeSet<usize>>) -> UnfreezeSchedule {
        UnfreezeSchedule { trainable: sets }
    }

    pub fn epochs(&self) -> usize {
        self.trainable.len()
    }

    pub fn trainable(&self, epoch: usize) -> &BTreeSet<usize> {
        &self.trainable[epoch]
    }

    pub fn is_trainable(&self, epoch: usize, group: usize) -> bool {
        self.trainable[epoch].contains(&group)
    }

    /// Checks the schedule covers `epochs` epochs of `groups` groups, grows
    /// monotonically, and ends with everything trainable.
    pub fn validate(&self, groups: usize, epochs: usize) -> Result<()> {
        if self.trainable.len() != epochs {
            return Err(Error::contract(format!(
                "unfreeze schedule covers {} epochs, expected {epochs}",
                self.trainable.len()
            )));
        }
        for (epoch, set) in self.trainable.iter().enumerate() {
            if set.iter().any(|&g| g >= groups) {
                return Err(Error::contract(format!(
                    "unfreeze schedule epoch {epoch} names a group >= {groups}"
                )));
            }
            if epoch > 0 && !set.is_superset(&self.trainable[epoch - 1]) {
                return Err(Error::contract(format!(
                    "unfreeze schedule shrinks at epoch {epoch}"
                )));
            }
        }
        match self.trainable.last() {
            Some(last) if last.len() == groups => Ok(()),
            _ => Err(Error::contract(
                "final epoch of an unfreeze schedule must train all groups",
            )),
        }
    }
}

/// Shared training configuration. Loss is cross-entropy and the optimizer
/// adaptive-moment (decoupled weight decay only when `weight_decay` > 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub base_lr: f64,
    pub max_len: usize,
    pub seed: u64,
    pub decay: f64,
    pub dropout: f64,
    pub weight_decay: f64,
    pub hidden0: usize,
    pub hidden1: usize,
}

impl TrainConfig {
    /// Learning-rate range quoted for the fine-tuning recipe; stored as
    /// plain constants with no special semantics.
    pub const LR_RANGE: (f64, f64) = (1e-8, 1e-2);
    /// Dropout quoted for the language-model fine-tuning recipe (the
    /// default below is the classifier-table value).
    pub const LM_DROPOUT: f64 = 0.5;
    pub const DEFAULT_DECAY: f64 = 2.6;

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::contract("epochs must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::contract("batch size must be >= 1"));
        }
        if !self.dropout.is_finite() || self.dropout < 0.0 || self.dropout >= 1.0 {
            return Err(Error::contract("dropout must lie in [0, 1)"));
        }
        if !self.decay.is_finite() || self.decay <= 1.0 {
            return Err(Error::contract("discriminative decay must be > 1"));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 5,
            base_lr: 2e-5,
            max_len: 128,
            seed: 0,
            decay: Self::DEFAULT_DECAY,
            dropout: 0.4,
            weight_decay: 0.0,
            hidden0: 64,
            hidden1: 32,
        }
    }
}
