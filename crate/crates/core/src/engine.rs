//! Iterative source-free adaptation.
//!
//! Starting from a released source classifier, each stage asks the current
//! labeler which still-unlabeled target points it is confident about,
//! freezes its labels for them, and trains a new classifier on everything
//! labeled so far. The last trained classifier is the adapted one.
//!
//! The engine only ever sees target *features*; true labels are never
//! passed in, and the source dataset is not part of any signature here
//! except [`train_source`].

use serde::{Deserialize, Serialize};

use crate::criteria::{select, CriterionSpec, Selection, Stage};
use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{init_network, train, train_on, NetworkParams, NetworkSpec, TrainConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// One-hot of the labeler's argmax.
    Hard,
    /// The labeler's full probability row.
    Soft,
}

/// Per-stage training length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageBudget {
    /// Passes over the stage's labeled set.
    Epochs(usize),
    /// Fixed number of mini-batch updates.
    Iterations(usize),
}

impl StageBudget {
    pub fn to_train_config(self, samples: usize, batch_size: usize, learning_rate: f64) -> TrainConfig {
        match self {
            StageBudget::Epochs(e) => TrainConfig::epochs(e, samples, batch_size, learning_rate),
            StageBudget::Iterations(n) => TrainConfig::new(n, batch_size, learning_rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationConfig {
    pub criterion: CriterionSpec,
    pub label_mode: LabelMode,
    pub stage_budget: StageBudget,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Last stage index to run; `None` runs until the pool is covered or a
    /// stage selects nothing.
    pub max_stages: Option<usize>,
    /// Stage `i` initializes and shuffles with seed `base_seed + i`.
    pub base_seed: u64,
    /// Start each trainee from the labeler's weights instead of a fresh init.
    pub warm_start: bool,
}

impl AdaptationConfig {
    /// Hard labels, 20 epochs per stage, batch 128, lr 0.001, no stage cap.
    pub fn new(criterion: CriterionSpec) -> Self {
        Self {
            criterion,
            label_mode: LabelMode::Hard,
            stage_budget: StageBudget::Epochs(20),
            batch_size: 128,
            learning_rate: 0.001,
            max_stages: None,
            base_seed: 0,
            warm_start: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.criterion.validate()?;
        if self.max_stages == Some(0) {
            return Err(Error::config("max_stages must be at least 1"));
        }
        if matches!(self.stage_budget, StageBudget::Epochs(0) | StageBudget::Iterations(0)) {
            return Err(Error::config("stage budget must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        Ok(())
    }
}

/// Anything that maps a batch of features to class-probability rows.
pub trait Classifier<T> {
    fn predict(&self, batch: &Matrix<T>) -> Result<Matrix<T>>;
}

impl<T: Scalar> Classifier<T> for NetworkParams<T> {
    fn predict(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        NetworkParams::predict(self, batch)
    }
}

/// Produces the classifier for one stage from its labeled training set.
pub trait StageTrainer<T> {
    type Model: Classifier<T>;

    /// `warm` is the previous labeler when warm-starting; it is handed over
    /// by value so no extra copy stays alive during training.
    fn train(
        &mut self,
        stage: usize,
        features: &Matrix<T>,
        targets: &Matrix<T>,
        warm: Option<Self::Model>,
    ) -> Result<Self::Model>;
}

/// Trains networks with the labeler's architecture.
#[derive(Debug, Clone)]
pub struct NetTrainer {
    pub spec: NetworkSpec,
    pub budget: StageBudget,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub base_seed: u64,
}

impl<T: Scalar> StageTrainer<T> for NetTrainer {
    type Model = NetworkParams<T>;

    fn train(
        &mut self,
        stage: usize,
        features: &Matrix<T>,
        targets: &Matrix<T>,
        warm: Option<NetworkParams<T>>,
    ) -> Result<NetworkParams<T>> {
        let seed = self.base_seed.wrapping_add(stage as u64);
        let mut params = match warm {
            Some(p) => p,
            None => init_network(&self.spec, seed)?,
        };
        let cfg = self.budget.to_train_config(features.rows(), self.batch_size, self.learning_rate);
        train_on(&mut params, features, targets, &cfg, seed)?;
        Ok(params)
    }
}

/// What happened at one stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageLog {
    pub stage: usize,
    pub selected: usize,
    pub coverage: usize,
    pub per_class: Vec<usize>,
}

/// Growing labeled subset of the target pool with frozen pseudo-labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationState<T> {
    class_count: usize,
    order: Vec<usize>,
    labels: Vec<Option<Vec<T>>>,
    provenance: Vec<Option<usize>>,
    stage: usize,
    history: Vec<StageLog>,
}

impl<T: Scalar> AdaptationState<T> {
    fn new(pool_size: usize, class_count: usize) -> Self {
        Self {
            class_count,
            order: Vec::new(),
            labels: vec![None; pool_size],
            provenance: vec![None; pool_size],
            stage: 0,
            history: Vec::new(),
        }
    }

    pub fn pool_size(&self) -> usize {
        self.labels.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn coverage(&self) -> usize {
        self.order.len()
    }

    /// Index of the last stage that ran.
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn history(&self) -> &[StageLog] {
        &self.history
    }

    /// Labeled pool indices in the order they were added.
    pub fn labeled(&self) -> &[usize] {
        &self.order
    }

    pub fn label_of(&self, index: usize) -> Option<&[T]> {
        self.labels.get(index)?.as_deref()
    }

    /// Stage whose labeler assigned this index's label (0 = source classifier).
    pub fn provenance_of(&self, index: usize) -> Option<usize> {
        self.provenance.get(index).copied().flatten()
    }

    pub fn provenance(&self) -> &[Option<usize>] {
        &self.provenance
    }

    /// Pool indices first labeled at `stage`.
    pub fn shell(&self, stage: usize) -> Vec<usize> {
        self.order.iter().copied().filter(|&i| self.provenance[i] == Some(stage)).collect()
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        (0..self.pool_size()).filter(|&i| self.labels[i].is_none()).collect()
    }

    /// Label rows for `indices`, which must all be labeled.
    pub fn label_matrix(&self, indices: &[usize]) -> Result<Matrix<T>> {
        let mut values = Vec::with_capacity(indices.len() * self.class_count);
        for &i in indices {
            let row = self.label_of(i).ok_or_else(|| Error::input(format!("pool index {i} has no pseudo-label")))?;
            values.extend_from_slice(row);
        }
        Matrix::new(indices.len(), self.class_count, values)
    }

    /// Features and pseudo-labels of the current labeled set.
    pub fn training_set(&self, pool: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
        Ok((pool.select_rows(&self.order)?, self.label_matrix(&self.order)?))
    }

    fn record(&mut self, stage: usize, remaining: &[usize], selection: &Selection, probs: &Matrix<T>, mode: LabelMode) {
        for (&local, &class) in selection.indices.iter().zip(&selection.labels) {
            let global = remaining[local];
            debug_assert!(self.labels[global].is_none(), "labels are never rewritten");
            let row = match mode {
                LabelMode::Hard => {
                    let mut r = vec![T::zero(); self.class_count];
                    r[class] = T::one();
                    r
                }
                LabelMode::Soft => probs.row(local).to_vec(),
            };
            self.labels[global] = Some(row);
            self.provenance[global] = Some(stage);
            self.order.push(global);
        }
        self.stage = stage;
        self.history.push(StageLog {
            stage,
            selected: selection.len(),
            coverage: self.order.len(),
            per_class: selection.per_class.clone(),
        });
    }
}

/// Called after each stage's classifier has been trained.
pub struct StageEvent<'a, T, M> {
    pub stage: usize,
    /// Classifier trained on the labeled set after this stage's selection.
    pub trainee: &'a M,
    pub state: &'a AdaptationState<T>,
    pub pool: &'a Matrix<T>,
    pub selection: &'a Selection,
}

pub trait StageObserver<T, M> {
    fn on_stage(&mut self, event: &StageEvent<'_, T, M>) -> Result<()>;
}

/// Observer that ignores every stage.
pub struct NoObserver;

impl<T, M> StageObserver<T, M> for NoObserver {
    fn on_stage(&mut self, _: &StageEvent<'_, T, M>) -> Result<()> {
        Ok(())
    }
}

impl<T, M, F> StageObserver<T, M> for F
where
    F: FnMut(&StageEvent<'_, T, M>) -> Result<()>,
{
    fn on_stage(&mut self, event: &StageEvent<'_, T, M>) -> Result<()> {
        self(event)
    }
}

/// Hard or soft pseudo-labels from a classifier's predictions.
pub fn pseudo_label<T: Scalar, C: Classifier<T> + ?Sized>(
    model: &C,
    subset: &Matrix<T>,
    mode: LabelMode,
) -> Result<Matrix<T>> {
    let probs = model.predict(subset)?;
    Ok(match mode {
        LabelMode::Soft => probs,
        LabelMode::Hard => Matrix::one_hot(&probs.argmax_rows(), probs.cols())?,
    })
}

/// Trains the source classifier. The returned parameters are all that
/// later stages receive from the source side.
pub fn train_source<T: Scalar>(
    spec: &NetworkSpec,
    source: &SampleSet<T>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<NetworkParams<T>> {
    if source.labels().is_none() {
        return Err(Error::input("source data must be labeled"));
    }
    let mut params = init_network(spec, seed)?;
    train(&mut params, source, cfg, seed)?;
    Ok(params)
}

/// Runs the stage loop with an arbitrary classifier type.
///
/// Stage 0 selects from the whole pool with `source`; stage `i > 0` selects
/// from the remaining pool with the classifier trained at stage `i - 1`.
/// After every selection the labeler is dropped (or handed to the trainer
/// when warm-starting) before a new classifier is trained on all labels so
/// far. Stops when the pool is covered, the stage cap is reached, or a
/// later stage selects nothing; returns the last trained classifier.
pub fn run_stages<T, Tr, O>(
    source: Tr::Model,
    pool: &Matrix<T>,
    class_count: usize,
    cfg: &AdaptationConfig,
    trainer: &mut Tr,
    observer: &mut O,
) -> Result<(Tr::Model, AdaptationState<T>)>
where
    T: Scalar,
    Tr: StageTrainer<T>,
    O: StageObserver<T, Tr::Model> + ?Sized,
{
    cfg.validate()?;
    if pool.rows() == 0 {
        return Err(Error::input("target pool is empty"));
    }
    let mut state = AdaptationState::new(pool.rows(), class_count);
    let mut labeler = source;
    let mut stage = 0usize;
    loop {
        let remaining = state.unlabeled();
        let probs = labeler.predict(&pool.select_rows(&remaining)?)?;
        if probs.cols() != class_count {
            return Err(Error::input(format!("labeler emits {} classes, expected {class_count}", probs.cols())));
        }
        let phase = if stage == 0 { Stage::Initial } else { Stage::Subsequent };
        let selection = select(&probs, &cfg.criterion, phase)?;
        if selection.is_empty() {
            if stage == 0 {
                return Err(Error::Adaptation("source classifier produced no confident region".into()));
            }
            return Ok((labeler, state));
        }
        state.record(stage, &remaining, &selection, &probs, cfg.label_mode);
        drop(probs);

        let warm = if cfg.warm_start {
            Some(labeler)
        } else {
            drop(labeler);
            None
        };
        let (x, y) = state.training_set(pool)?;
        let trainee = trainer.train(stage, &x, &y, warm)?;
        observer.on_stage(&StageEvent { stage, trainee: &trainee, state: &state, pool, selection: &selection })?;

        let covered = state.coverage() == pool.rows();
        if covered || cfg.max_stages.is_some_and(|cap| stage >= cap) {
            return Ok((trainee, state));
        }
        labeler = trainee;
        stage += 1;
    }
}

/// Adapts `source` (consumed) to the unlabeled target features.
/// Every stage trains a network with the source architecture.
pub fn sico_adapt<T, O>(
    source: NetworkParams<T>,
    target: &Matrix<T>,
    cfg: &AdaptationConfig,
    observer: &mut O,
) -> Result<(NetworkParams<T>, AdaptationState<T>)>
where
    T: Scalar,
    O: StageObserver<T, NetworkParams<T>> + ?Sized,
{
    if target.cols() != source.input_width() {
        return Err(Error::input(format!(
            "target has {} features, source network expects {}",
            target.cols(),
            source.input_width()
        )));
    }
    let mut trainer = NetTrainer {
        spec: source.spec().clone(),
        budget: cfg.stage_budget,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        base_seed: cfg.base_seed,
    };
    let classes = source.class_count();
    run_stages(source, target, classes, cfg, &mut trainer, observer)
}
