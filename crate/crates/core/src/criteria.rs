//! Belief criteria: which pool points a classifier is confident enough
//! about to pseudo-label.
//!
//! Candidates for class `c` are the pool points whose argmax is `c`, ranked
//! by their probability for `c` (higher first, lower pool index on ties).
//! A point is therefore never pseudo-labeled with a class other than its
//! argmax.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{argmax, Matrix};
use crate::scalar::{clamped_ln, Scalar};

const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum CriterionSpec {
    /// The `m` most confident candidates per class; `m_initial` for the
    /// source classifier, `m_subsequent` afterwards.
    TopM { m_initial: usize, m_subsequent: usize },
    /// The top `ceil(p * n_c)` of the `n_c` candidates of each class.
    TopPercent { p: f64 },
    /// Every point whose largest probability exceeds `t`.
    Threshold { t: f64 },
}

impl CriterionSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CriterionSpec::TopM { m_initial, m_subsequent } if m_initial == 0 || m_subsequent == 0 => {
                Err(Error::config("m must be at least 1"))
            }
            CriterionSpec::TopPercent { p } if !(p > 0.0 && p <= 1.0) => {
                Err(Error::config(format!("percentage {p} outside (0, 1]")))
            }
            CriterionSpec::Threshold { t } if !(t > 0.0 && t < 1.0) => {
                Err(Error::config(format!("threshold {t} outside (0, 1)")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Selection made with the source classifier.
    Initial,
    Subsequent,
}

/// Chosen pool indices (ascending) with their pseudo-labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
    pub per_class: Vec<usize>,
}

impl Selection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Applies `criterion` to a pool's class probabilities.
pub fn select<T: Scalar>(pool: &Matrix<T>, criterion: &CriterionSpec, stage: Stage) -> Result<Selection> {
    criterion.validate()?;
    let classes = pool.cols();
    for (r, row) in pool.iter_rows().enumerate() {
        let sum: T = row.iter().copied().sum();
        if (sum - T::one()).abs() > T::lit(ROW_SUM_TOLERANCE) || row.iter().any(|&p| p < T::zero()) {
            return Err(Error::input(format!("pool row {r} is not a probability vector")));
        }
    }
    let winners: Vec<usize> = pool.iter_rows().map(argmax).collect();
    let confidence: Vec<T> = pool.iter_rows().zip(&winners).map(|(row, &c)| row[c]).collect();
    if let CriterionSpec::Threshold { t } = *criterion {
        let t = T::lit(t);
        let mut sel = Selection { per_class: vec![0; classes], ..Default::default() };
        for (i, (&c, &p)) in winners.iter().zip(&confidence).enumerate() {
            if p > t {
                sel.indices.push(i);
                sel.labels.push(c);
                sel.per_class[c] += 1;
            }
        }
        return Ok(sel);
    }
    select_ranked(&winners, &confidence, classes, criterion, stage)
}

/// Rank-based selection from per-point predicted class and confidence score.
/// Only the ordering of scores within a class matters.
pub fn select_ranked<T: Scalar>(
    classes_of: &[usize],
    scores: &[T],
    class_count: usize,
    criterion: &CriterionSpec,
    stage: Stage,
) -> Result<Selection> {
    criterion.validate()?;
    if classes_of.len() != scores.len() {
        return Err(Error::input("one score per candidate required"));
    }
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &c) in classes_of.iter().enumerate() {
        if c >= class_count {
            return Err(Error::input(format!("class {c} outside [0, {class_count})")));
        }
        buckets[c].push(i);
    }
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let mut per_class = vec![0; class_count];
    for (c, bucket) in buckets.iter_mut().enumerate() {
        let take = match *criterion {
            CriterionSpec::TopM { m_initial, m_subsequent } => match stage {
                Stage::Initial => m_initial,
                Stage::Subsequent => m_subsequent,
            },
            // Guard against p * n landing a hair above an integer.
            CriterionSpec::TopPercent { p } => (p * bucket.len() as f64 - 1e-9).ceil() as usize,
            CriterionSpec::Threshold { .. } => {
                return Err(Error::input("threshold selection is not rank-based"));
            }
        }
        .min(bucket.len());
        bucket.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        chosen.extend(bucket[..take].iter().map(|&i| (i, c)));
        per_class[c] = take;
    }
    chosen.sort_unstable();
    let (indices, labels) = chosen.into_iter().unzip();
    Ok(Selection { indices, labels, per_class })
}

/// Per-row entropy `-sum_c p ln p` (same log clamp as the loss) and its mean.
pub fn entropy_of<T: Scalar>(probabilities: &Matrix<T>) -> (Vec<T>, T) {
    let per_row: Vec<T> = probabilities
        .iter_rows()
        .map(|row| row.iter().map(|&p| if p > T::zero() { -p * clamped_ln(p) } else { T::zero() }).sum())
        .collect();
    let mean = if per_row.is_empty() {
        T::zero()
    } else {
        per_row.iter().copied().sum::<T>() / T::from_usize_lossy(per_row.len())
    };
    (per_row, mean)
}
