//! Classifier backbone, losses, optimizer, schedule and training loop.
//!
//! All arithmetic is in `f64`. Training is single-threaded and deterministic
//! for a fixed seed.

mod checkpoint;
mod loss;
mod model;
mod optim;
mod schedule;
mod tensor;
mod train;

use serde::{Deserialize, Serialize};

pub use checkpoint::{ModelCheckpoint, FORMAT_VERSION, MAGIC};
pub use loss::{cross_entropy, focal_loss, FocalParams, LossKind, LossValue, Reduction, LOG_EPS};
pub use model::{Backbone, BackboneConfig, MeanPoolClassifier};
pub use optim::{adamw_step, AdamState, AdamWHyper};
pub use schedule::{cosine_with_warmup, decay_lr, lr_at, warmup_lr, warmup_steps};
pub use tensor::Tensor;
pub use train::{argmax, fit, predict, total_steps, train, TrainOutcome};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub peak_lr: f64,
    pub warmup_fraction: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::desk()
    }
}

impl TrainConfig {
    /// Settings for a from-scratch backbone: peak rate 1e-3.
    pub fn desk() -> Self {
        TrainConfig {
            batch_size: 32,
            peak_lr: 1e-3,
            warmup_fraction: 0.10,
            epochs: 30,
            weight_decay: 0.01,
            loss: LossKind::default(),
            seed: 0,
        }
    }

    /// The fine-tuning settings reported for pretrained encoders: peak rate 5e-5.
    pub fn finetune() -> Self {
        TrainConfig {
            peak_lr: 5e-5,
            ..TrainConfig::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::invalid(format!(
                "warmup_fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if !(self.peak_lr >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::invalid("peak_lr and weight_decay must be nonnegative"));
        }
        self.loss.validate()
    }
}
