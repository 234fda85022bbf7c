//! Error-propagation diagnostics for an adaptation run.
//!
//! For a classifier `h` evaluated on a labeled subset `D` with pseudo-labels
//! `y'` and true labels `y`:
//!
//! ```text
//! L^  = -(1/|D|) sum_j sum_c y'_jc ln h_c(x_j)      (risk being minimized)
//! L   = -(1/|D|) sum_j ln h_{y_j}(x_j)              (risk w.r.t. true labels)
//! Delta = -sum_{j : y_j != y'_j} (y_j - y'_j) . ln h(x_j)
//! L = L^ + Delta / |D|
//! ```
//!
//! Delta splits into one term per labeling stage, summing over the points
//! whose label that stage's labeler assigned.
//!
//! This is the only module that touches target true labels, and it only
//! reads engine state.

use std::io::Write;

use crate::criteria::entropy_of;
use crate::data::SampleSet;
use crate::engine::{AdaptationState, Classifier, StageEvent, StageObserver};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::confusion;
use crate::nn::cross_entropy;
use crate::scalar::{clamped_ln, Scalar};

/// Risks of one classifier on one labeled subset.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport<T> {
    pub size: usize,
    pub emp_risk: T,
    pub true_risk: T,
    /// Unnormalized accumulated error.
    pub delta: T,
    pub delta_normalized: T,
    pub mismatches: usize,
}

/// Per-stage terms of Delta; `terms[i]` covers the points labeled at stage `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaBreakdown<T> {
    pub terms: Vec<T>,
    pub total: T,
}

pub fn empirical_risk<T: Scalar, C: Classifier<T> + ?Sized>(
    model: &C,
    subset: &Matrix<T>,
    pseudo: &Matrix<T>,
) -> Result<T> {
    if pseudo.rows() != subset.rows() {
        return Err(Error::input(format!("{} pseudo-labels for {} points", pseudo.rows(), subset.rows())));
    }
    cross_entropy(&model.predict(subset)?, pseudo)
}

pub fn delta<T: Scalar, C: Classifier<T> + ?Sized>(
    model: &C,
    subset: &Matrix<T>,
    pseudo: &Matrix<T>,
    truth: &[usize],
) -> Result<RiskReport<T>> {
    if pseudo.rows() != subset.rows() {
        return Err(Error::input(format!("{} pseudo-labels for {} points", pseudo.rows(), subset.rows())));
    }
    delta_from_probs(&model.predict(subset)?, pseudo, truth)
}

/// `-(y_j - y'_j) . ln h(x_j)` for one point; zero when the label rows agree.
fn point_term<T: Scalar>(probs: &[T], pseudo: &[T], truth: usize) -> (T, bool) {
    let mismatch = pseudo.iter().enumerate().any(|(c, &v)| v != if c == truth { T::one() } else { T::zero() });
    if !mismatch {
        return (T::zero(), false);
    }
    let term = probs
        .iter()
        .zip(pseudo)
        .enumerate()
        .map(|(c, (&p, &y))| {
            let truth_c = if c == truth { T::one() } else { T::zero() };
            -(truth_c - y) * clamped_ln(p)
        })
        .sum();
    (term, true)
}

/// Computes both risks directly and Delta from the mismatched points, then
/// checks `L = L^ + Delta / |D|`.
pub fn delta_from_probs<T: Scalar>(probs: &Matrix<T>, pseudo: &Matrix<T>, truth: &[usize]) -> Result<RiskReport<T>> {
    let n = probs.rows();
    if pseudo.rows() != n || truth.len() != n || pseudo.cols() != probs.cols() {
        return Err(Error::input("probabilities, pseudo-labels and true labels must cover the same points"));
    }
    if let Some(&bad) = truth.iter().find(|&&t| t >= probs.cols()) {
        return Err(Error::input(format!("true label {bad} outside class range")));
    }
    let emp_risk = cross_entropy(probs, pseudo)?;
    let size = T::from_usize_lossy(n);
    let true_risk = -probs.iter_rows().zip(truth).map(|(row, &t)| clamped_ln(row[t])).sum::<T>() / size;
    let mut delta = T::zero();
    let mut mismatches = 0;
    for ((p, y), &t) in probs.iter_rows().zip(pseudo.iter_rows()).zip(truth) {
        let (term, mismatch) = point_term(p, y, t);
        if mismatch {
            delta += term;
            mismatches += 1;
        }
    }
    let report = RiskReport { size: n, emp_risk, true_risk, delta, delta_normalized: delta / size, mismatches };
    let gap = (report.true_risk - (report.emp_risk + report.delta_normalized)).abs();
    if gap > T::consistency_tolerance() * T::one().max(report.true_risk.abs()) {
        return Err(Error::Consistency(format!(
            "L = {} but L^ + Delta/|D| = {} (gap {gap})",
            report.true_risk,
            report.emp_risk + report.delta_normalized
        )));
    }
    Ok(report)
}

/// Splits Delta by the stage that labeled each point. `provenance[j]` must
/// be set for every point.
pub fn delta_breakdown_from_probs<T: Scalar>(
    probs: &Matrix<T>,
    pseudo: &Matrix<T>,
    truth: &[usize],
    provenance: &[Option<usize>],
) -> Result<DeltaBreakdown<T>> {
    if provenance.len() != probs.rows() {
        return Err(Error::input("one provenance entry per point required"));
    }
    let stages: Vec<usize> = provenance
        .iter()
        .enumerate()
        .map(|(j, p)| p.ok_or_else(|| Error::input(format!("point {j} has no provenance"))))
        .collect::<Result<_>>()?;
    let report = delta_from_probs(probs, pseudo, truth)?;
    let mut terms = vec![T::zero(); stages.iter().max().map_or(0, |m| m + 1)];
    for (j, &stage) in stages.iter().enumerate() {
        terms[stage] += point_term(probs.row(j), pseudo.row(j), truth[j]).0;
    }
    let sum: T = terms.iter().copied().sum();
    if (sum - report.delta).abs() > T::consistency_tolerance() * T::one().max(report.delta.abs()) {
        return Err(Error::Consistency(format!("stage terms sum to {sum}, Delta is {}", report.delta)));
    }
    Ok(DeltaBreakdown { terms, total: report.delta })
}

/// Delta of `model` over everything labeled in `state`, split per stage.
/// `truth` holds the true label of every pool point.
pub fn delta_breakdown<T: Scalar, C: Classifier<T> + ?Sized>(
    model: &C,
    pool: &Matrix<T>,
    state: &AdaptationState<T>,
    truth: &[usize],
) -> Result<DeltaBreakdown<T>> {
    if truth.len() != pool.rows() {
        return Err(Error::input("true labels must cover the whole pool"));
    }
    let idx = state.labeled();
    let probs = model.predict(&pool.select_rows(idx)?)?;
    let pseudo = state.label_matrix(idx)?;
    let sub_truth: Vec<usize> = idx.iter().map(|&i| truth[i]).collect();
    let prov: Vec<Option<usize>> = idx.iter().map(|&i| state.provenance_of(i)).collect();
    delta_breakdown_from_probs(&probs, &pseudo, &sub_truth, &prov)
}

/// Diagnostics for the classifier trained at one stage, evaluated on the
/// labeled set it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord<T> {
    pub stage: usize,
    pub coverage: usize,
    pub emp_risk: T,
    pub true_risk: Option<T>,
    pub delta: Option<T>,
    pub delta_normalized: Option<T>,
    /// Delta contribution of the points labeled at this stage.
    pub delta_shell: Option<T>,
    /// Mean prediction entropy over the whole target pool.
    pub mean_entropy: T,
    /// Cross-entropy against true labels over the whole target pool.
    pub full_target_loss: Option<T>,
    pub test_acc: Option<f64>,
    pub test_kappa: Option<f64>,
    pub source_test_acc: Option<f64>,
}

/// Stage observer that fills [`StageRecord`]s. All label-dependent fields
/// stay `None` when the corresponding labels are not supplied.
#[derive(Debug, Clone, Default)]
pub struct DiagnosticsRecorder<T> {
    pool_truth: Option<Vec<usize>>,
    target_test: Option<(Matrix<T>, Vec<usize>)>,
    source_test: Option<(Matrix<T>, Vec<usize>)>,
    records: Vec<StageRecord<T>>,
}

fn labeled_parts<T: Scalar>(set: &SampleSet<T>) -> Option<(Matrix<T>, Vec<usize>)> {
    set.labels().map(|l| (set.features().clone(), l.to_vec()))
}

impl<T: Scalar> DiagnosticsRecorder<T> {
    pub fn new() -> Self {
        Self { pool_truth: None, target_test: None, source_test: None, records: Vec::new() }
    }

    pub fn with_pool_truth(mut self, truth: Option<Vec<usize>>) -> Self {
        self.pool_truth = truth;
        self
    }

    pub fn with_target_test(mut self, test: Option<&SampleSet<T>>) -> Self {
        self.target_test = test.and_then(labeled_parts);
        self
    }

    pub fn with_source_test(mut self, test: Option<&SampleSet<T>>) -> Self {
        self.source_test = test.and_then(labeled_parts);
        self
    }

    pub fn records(&self) -> &[StageRecord<T>] {
        &self.records
    }

    pub fn into_records(self) -> Vec<StageRecord<T>> {
        self.records
    }

    fn evaluate<M: Classifier<T>>(&self, event: &StageEvent<'_, T, M>) -> Result<StageRecord<T>> {
        let state = event.state;
        let idx = state.labeled();
        let probs = event.trainee.predict(&event.pool.select_rows(idx)?)?;
        let pseudo = state.label_matrix(idx)?;
        let emp_risk = cross_entropy(&probs, &pseudo)?;
        let all_probs = event.trainee.predict(event.pool)?;
        let (_, mean_entropy) = entropy_of(&all_probs);

        let mut record = StageRecord {
            stage: event.stage,
            coverage: state.coverage(),
            emp_risk,
            true_risk: None,
            delta: None,
            delta_normalized: None,
            delta_shell: None,
            mean_entropy,
            full_target_loss: None,
            test_acc: None,
            test_kappa: None,
            source_test_acc: None,
        };
        if let Some(truth) = &self.pool_truth {
            if truth.len() != event.pool.rows() {
                return Err(Error::input("pool truth length differs from pool size"));
            }
            let sub_truth: Vec<usize> = idx.iter().map(|&i| truth[i]).collect();
            let prov: Vec<Option<usize>> = idx.iter().map(|&i| state.provenance_of(i)).collect();
            let report = delta_from_probs(&probs, &pseudo, &sub_truth)?;
            let breakdown = delta_breakdown_from_probs(&probs, &pseudo, &sub_truth, &prov)?;
            record.true_risk = Some(report.true_risk);
            record.delta = Some(report.delta);
            record.delta_normalized = Some(report.delta_normalized);
            record.delta_shell = breakdown.terms.get(event.stage).copied().or(Some(T::zero()));
            record.full_target_loss = Some(cross_entropy(&all_probs, &Matrix::one_hot(truth, all_probs.cols())?)?);
        }
        if let Some((x, y)) = &self.target_test {
            let pred = event.trainee.predict(x)?.argmax_rows();
            let counts = confusion(y, &pred, state.class_count())?;
            record.test_acc = counts.accuracy().ok();
            record.test_kappa = counts.kappa().ok();
        }
        if let Some((x, y)) = &self.source_test {
            let pred = event.trainee.predict(x)?.argmax_rows();
            record.source_test_acc = confusion(y, &pred, state.class_count())?.accuracy().ok();
        }
        Ok(record)
    }
}

impl<T: Scalar, M: Classifier<T>> StageObserver<T, M> for DiagnosticsRecorder<T> {
    fn on_stage(&mut self, event: &StageEvent<'_, T, M>) -> Result<()> {
        let record = self.evaluate(event)?;
        self.records.push(record);
        Ok(())
    }
}

pub const STAGE_CSV_HEADER: &str =
    "stage,coverage,emp_risk,true_risk,delta,delta_shell,mean_entropy,test_acc,test_kappa";
pub const STAGE_EXTRA_CSV_HEADER: &str = "stage,coverage,delta_normalized,full_target_loss,source_test_acc";

fn cell<V: Scalar>(v: Option<V>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.as_f64().to_string())
}

/// Writes one row per stage under [`STAGE_CSV_HEADER`]; unavailable values are `NA`.
pub fn write_stage_csv<T: Scalar>(records: &[StageRecord<T>], mut out: impl Write) -> Result<()> {
    writeln!(out, "{STAGE_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.stage,
            r.coverage,
            cell(Some(r.emp_risk)),
            cell(r.true_risk),
            cell(r.delta),
            cell(r.delta_shell),
            cell(Some(r.mean_entropy)),
            cell(r.test_acc),
            cell(r.test_kappa)
        )?;
    }
    Ok(())
}

/// Companion table with the normalized Delta, full-pool loss and source accuracy.
pub fn write_stage_extra_csv<T: Scalar>(records: &[StageRecord<T>], mut out: impl Write) -> Result<()> {
    writeln!(out, "{STAGE_EXTRA_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.stage,
            r.coverage,
            cell(r.delta_normalized),
            cell(r.full_target_loss),
            cell(r.source_test_acc)
        )?;
    }
    Ok(())
}
