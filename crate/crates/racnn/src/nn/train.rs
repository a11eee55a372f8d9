//! Deterministic minibatch training with Adam, plus the evaluation
//! helpers the comparison experiments are built on.

use std::path::PathBuf;

use serde::Serialize;

use super::adam::Adam;
use super::dataset::Dataset;
use super::{accumulate_grads, grads_flat, Graph};
use crate::conv::SparseStats;
use crate::{lit, to_f64, Error, Result, Rng, Scalar, Tensor3};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Threshold used when summarizing alpha statistics each epoch.
    pub tau: f64,
    /// Model file written when training finishes.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 30,
            batch_size: 16,
            seed: 0,
            tau: 0.0,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::InvalidArgument(format!("tau must be in [0, 1), got {}", self.tau)));
        }
        Ok(())
    }
}

/// Alpha summary for one adaptive layer, attached to an epoch record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerAlpha {
    pub layer: usize,
    pub stats: SparseStats,
}

/// One epoch of history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainRecord {
    /// Optimizer steps taken so far.
    pub iteration: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub alpha: Vec<LayerAlpha>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub loss: f64,
    pub accuracy: f64,
}

fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Mean loss and accuracy over a dataset, dense forward.
pub fn evaluate<T: Scalar>(g: &Graph<T>, ds: &Dataset<T>) -> Result<EvalMetrics> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty dataset".into()));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for (x, &label) in ds.images.iter().zip(&ds.labels) {
        let logits = g.forward(x)?;
        let (loss, _) = super::softmax_xent(&logits, label)?;
        loss_sum += to_f64(loss);
        if argmax(&logits) == label {
            correct += 1;
        }
    }
    Ok(EvalMetrics { loss: loss_sum / ds.len() as f64, accuracy: correct as f64 / ds.len() as f64 })
}

/// Mean loss and accuracy with adaptive layers on the sparse path, plus
/// pooled per-layer alpha statistics.
pub fn evaluate_sparse<T: Scalar>(
    g: &Graph<T>,
    ds: &Dataset<T>,
    tau: f64,
) -> Result<(EvalMetrics, Vec<LayerAlpha>)> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty dataset".into()));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut pooled: Vec<LayerAlpha> = Vec::new();
    for (x, &label) in ds.images.iter().zip(&ds.labels) {
        let (logits, stats) = g.forward_sparse(x, tau)?;
        let (loss, _) = super::softmax_xent(&logits, label)?;
        loss_sum += to_f64(loss);
        if argmax(&logits) == label {
            correct += 1;
        }
        merge_layer_stats(&mut pooled, &stats);
    }
    Ok((
        EvalMetrics {
            loss: loss_sum / ds.len() as f64,
            accuracy: correct as f64 / ds.len() as f64,
        },
        pooled,
    ))
}

/// Pooled per-layer alpha statistics over a set of images.
pub fn alpha_stats<T: Scalar>(
    g: &Graph<T>,
    images: &[Tensor3<T>],
    tau: f64,
) -> Result<Vec<LayerAlpha>> {
    let mut pooled: Vec<LayerAlpha> = Vec::new();
    for x in images {
        let (_, stats) = g.forward_sparse(x, tau)?;
        merge_layer_stats(&mut pooled, &stats);
    }
    Ok(pooled)
}

fn merge_layer_stats(pooled: &mut Vec<LayerAlpha>, stats: &[(usize, SparseStats)]) {
    for (layer, s) in stats {
        match pooled.iter_mut().find(|e| e.layer == *layer) {
            Some(entry) => entry.stats.merge(s),
            None => pooled.push(LayerAlpha { layer: *layer, stats: s.clone() }),
        }
    }
}

/// Trains in place. Sample order is reshuffled each epoch from the config
/// seed, gradients are averaged over each minibatch in index order, and
/// one history record is appended per epoch, so a rerun with the same
/// seed reproduces the history bit for bit.
pub fn train<T: Scalar>(
    g: &mut Graph<T>,
    train_set: &Dataset<T>,
    val_set: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<Vec<TrainRecord>> {
    cfg.validate()?;
    g.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument("training needs non-empty splits".into()));
    }
    let mut opt: Adam<T> = Adam::new(g.flat_len(), cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon)?;
    let mut rng = Rng::new(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut iteration = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = g.zero_grads();
            let inv: T = lit(1.0 / batch.len() as f64);
            for &i in batch {
                let (_, caches) = g.forward_cached(&train_set.images[i])?;
                let (_, grads) = g.backward(&caches, train_set.labels[i])?;
                accumulate_grads(&mut acc, &grads, inv)?;
            }
            let mut params = g.params_flat();
            opt.step(&mut params, &grads_flat(&acc))?;
            g.set_params_flat(&params)?;
            iteration += 1;
        }
        let train_m = evaluate(g, train_set)?;
        let val_m = evaluate(g, val_set)?;
        let alpha =
            if g.has_adaptive() { alpha_stats(g, &val_set.images, cfg.tau)? } else { Vec::new() };
        history.push(TrainRecord {
            iteration,
            epoch,
            train_loss: train_m.loss,
            train_acc: train_m.accuracy,
            val_loss: val_m.loss,
            val_acc: val_m.accuracy,
            alpha,
        });
    }
    if let Some(path) = &cfg.checkpoint {
        crate::io::save_model(g, path)?;
    }
    Ok(history)
}
