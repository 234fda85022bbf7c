use rand::seq::SliceRandom;

use super::adam::AdamState;
use super::loss::{check_label_rows, cross_entropy};
use super::network::{Mode, NetworkParams};
use super::stream_rng;
use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Number of mini-batch updates to run.
    pub budget: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl TrainConfig {
    pub fn new(budget: usize, batch_size: usize, learning_rate: f64) -> Self {
        Self { budget, batch_size, learning_rate }
    }

    /// Budget covering `epochs` passes over `samples` points, counting a
    /// short final batch as a step.
    pub fn epochs(epochs: usize, samples: usize, batch_size: usize, learning_rate: f64) -> Self {
        let per_epoch = samples.div_ceil(batch_size.max(1)).max(1);
        Self::new(epochs * per_epoch, batch_size, learning_rate)
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("training budget must be at least one batch"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config("learning rate must be finite and non-negative"));
        }
        Ok(())
    }
}

/// One backprop + Adam update. Returns the batch loss before the update.
///
/// The dropout mask is a function of `seed` and the optimizer's step counter.
pub fn train_step<T: Scalar>(
    params: &mut NetworkParams<T>,
    adam: &mut AdamState<T>,
    batch: &Matrix<T>,
    labels: &Matrix<T>,
    seed: u64,
) -> Result<T> {
    if batch.rows() != labels.rows() {
        return Err(Error::input(format!("{} samples but {} label rows", batch.rows(), labels.rows())));
    }
    let cache = params.forward_stream(batch, Mode::Train, seed, adam.step_count())?;
    let loss = cross_entropy(cache.probabilities(), labels)?;
    let grads = params.backward(&cache, labels)?;
    adam.apply(params, &grads);
    Ok(loss)
}

/// Runs exactly `cfg.budget` shuffled mini-batch steps on `(features, targets)`
/// with a fresh Adam state. Each epoch is a new permutation drawn from `seed`;
/// the last batch of an epoch may be short. Returns the per-step losses.
pub fn train_on<T: Scalar>(
    params: &mut NetworkParams<T>,
    features: &Matrix<T>,
    targets: &Matrix<T>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<T>> {
    cfg.validate()?;
    let n = features.rows();
    if n == 0 {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    if targets.rows() != n || targets.cols() != params.class_count() {
        return Err(Error::input(format!(
            "targets {}x{} for {} samples and {} classes",
            targets.rows(),
            targets.cols(),
            n,
            params.class_count()
        )));
    }
    check_label_rows(targets)?;
    let mut adam = AdamState::new(params, T::lit(cfg.learning_rate));
    let mut rng = stream_rng(seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut losses = Vec::with_capacity(cfg.budget);
    for _ in 0..cfg.budget {
        if cursor >= n {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(n);
        let idx = &order[cursor..end];
        cursor = end;
        let batch = features.select_rows(idx)?;
        let labels = targets.select_rows(idx)?;
        losses.push(train_step(params, &mut adam, &batch, &labels, seed)?);
    }
    Ok(losses)
}

/// [`train_on`] with one-hot targets from a labeled sample set.
pub fn train<T: Scalar>(
    params: &mut NetworkParams<T>,
    data: &SampleSet<T>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<T>> {
    let labels = data.labels().ok_or_else(|| Error::input(format!("dataset '{}' has no labels", data.name())))?;
    let targets = Matrix::one_hot(labels, params.class_count())?;
    train_on(params, data.features(), &targets, cfg, seed)
}
