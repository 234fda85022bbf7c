//! Classification metrics over confusion counts.

use crate::error::{Error, Result};

/// `C x C` tally with rows = true class, columns = predicted class.
/// For binary tasks class 1 is the positive (apneic) class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    class_count: usize,
    counts: Vec<u64>,
}

impl ConfusionCounts {
    pub fn from_counts(class_count: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != class_count * class_count || class_count == 0 {
            return Err(Error::input("confusion counts must be a square tally"));
        }
        Ok(Self { class_count, counts })
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    #[inline]
    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.class_count + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.class_count).map(|c| self.get(c, c)).sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        (0..self.class_count).map(|r| (0..self.class_count).map(|c| self.get(r, c)).sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.class_count).map(|c| (0..self.class_count).map(|r| self.get(r, c)).sum()).collect()
    }

    pub fn accuracy(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(Error::Undefined("accuracy of zero samples".into()));
        }
        Ok(self.trace() as f64 / n as f64)
    }

    /// Cohen's kappa `(p_o - p_e) / (1 - p_e)`.
    pub fn kappa(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(Error::Undefined("kappa of zero samples".into()));
        }
        // Work in integer units of 1/N^2 so the degenerate p_e = 1 case is exact.
        let chance: u128 =
            self.row_totals().iter().zip(self.col_totals()).map(|(&r, c)| u128::from(r) * u128::from(c)).sum();
        let n2 = u128::from(n) * u128::from(n);
        if chance == n2 {
            return Err(Error::Undefined("kappa with chance agreement 1".into()));
        }
        let observed = u128::from(self.trace()) * u128::from(n);
        Ok((observed as f64 - chance as f64) / (n2 - chance) as f64)
    }

    /// `(TP / (TP + FN), TN / (TN + FP))` for a binary tally.
    pub fn sensitivity_specificity(&self) -> Result<(f64, f64)> {
        if self.class_count != 2 {
            return Err(Error::input("sensitivity/specificity need binary counts"));
        }
        let (tn, fp, fn_, tp) = (self.get(0, 0), self.get(0, 1), self.get(1, 0), self.get(1, 1));
        if tp + fn_ == 0 {
            return Err(Error::Undefined("no positive samples".into()));
        }
        if tn + fp == 0 {
            return Err(Error::Undefined("no negative samples".into()));
        }
        Ok((tp as f64 / (tp + fn_) as f64, tn as f64 / (tn + fp) as f64))
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], class_count: usize) -> Result<ConfusionCounts> {
    if truth.len() != predicted.len() {
        return Err(Error::input(format!("{} labels vs {} predictions", truth.len(), predicted.len())));
    }
    let mut counts = vec![0u64; class_count * class_count];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= class_count || p >= class_count {
            return Err(Error::input(format!("class ({t}, {p}) outside [0, {class_count})")));
        }
        counts[t * class_count + p] += 1;
    }
    ConfusionCounts::from_counts(class_count, counts)
}

pub fn kappa(counts: &ConfusionCounts) -> Result<f64> {
    counts.kappa()
}

pub fn sensitivity_specificity(counts: &ConfusionCounts) -> Result<(f64, f64)> {
    counts.sensitivity_specificity()
}
