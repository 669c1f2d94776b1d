use rand::seq::SliceRandom;

use super::checkpoint::ModelCheckpoint;
use super::model::{Backbone, BackboneConfig, MeanPoolClassifier};
use super::optim::{adamw_step, AdamState, AdamWHyper};
use super::schedule::lr_at;
use super::TrainConfig;
use crate::corpus::LabelCodec;
use crate::error::{Error, Result};
use crate::seed::stage_rng;
use crate::wordpiece::TokenSeq;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: ModelCheckpoint,
    /// Mean per-item loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Optimizer steps for `n` items: `epochs * ceil(n / batch_size)`.
pub fn total_steps(n: usize, cfg: &TrainConfig) -> u64 {
    (cfg.epochs * n.div_ceil(cfg.batch_size.max(1))) as u64
}

/// Runs the mini-batch loop on any backbone: a seeded shuffle per epoch,
/// batches of `batch_size` (the last one may be short), AdamW steps at the
/// scheduled rate. Returns the per-epoch mean loss.
pub fn fit<B: Backbone>(model: &mut B, data: &[TokenSeq], cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total = total_steps(data.len(), cfg);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle_rng = stage_rng(cfg.seed, "train/shuffle");
    let mut dropout_rng = stage_rng(cfg.seed, "train/dropout");
    let mut state = AdamState::new();
    let mut step = 0u64;
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (losses, grads) = model.loss_and_gradients(&batch, &cfg.loss, Some(&mut dropout_rng))?;
            epoch_loss += losses.iter().sum::<f64>();
            let hyper = AdamWHyper::new(lr_at(step, total, cfg), cfg.weight_decay);
            adamw_step(&mut model.parameters_mut(), &grads, &mut state, &hyper)?;
            step += 1;
        }
        trace.push(epoch_loss / data.len() as f64);
    }
    Ok(trace)
}

/// Trains a fresh mean-pooled classifier and packages the checkpoint.
pub fn train(
    train_set: &[TokenSeq],
    cfg: &TrainConfig,
    bcfg: &BackboneConfig,
    codec: &LabelCodec,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if bcfg.num_classes != codec.num_classes() {
        return Err(Error::Shape(format!(
            "backbone has {} classes, codec {}",
            bcfg.num_classes,
            codec.num_classes()
        )));
    }
    let mut model = MeanPoolClassifier::new(bcfg.clone())?;
    let loss_trace = fit(&mut model, train_set, cfg)?;
    let steps = total_steps(train_set.len(), cfg);
    Ok(TrainOutcome {
        checkpoint: ModelCheckpoint::new(model, codec.clone(), steps)?,
        loss_trace,
    })
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = i;
        }
    }
    best
}

/// Predicted class ids with their probability rows.
pub fn predict<B: Backbone + ?Sized>(model: &B, items: &[TokenSeq]) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let rows = model.forward(items)?;
    Ok((rows.iter().map(|r| argmax(r)).collect(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_and_ties() {
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn step_count() {
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 32,
            ..TrainConfig::default()
        };
        assert_eq!(total_steps(65, &cfg), 9);
        assert_eq!(total_steps(64, &cfg), 6);
    }

    #[test]
    fn empty_training_set_fails() {
        let codec = LabelCodec::from_classes(["a", "b"]).unwrap();
        let err = train(&[], &TrainConfig::default(), &BackboneConfig::new(4, 2), &codec).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
    }
}
