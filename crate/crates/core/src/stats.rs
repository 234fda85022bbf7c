//! Repetition statistics: mean, standard error, one-tailed paired t-test.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Upper-tail Student-t critical values for df = 1..=30.
const T_CRIT_05: [f64; 30] = [
    6.314, 2.920, 2.353, 2.132, 2.015, 1.943, 1.895, 1.860, 1.833, 1.812, 1.796, 1.782, 1.771, 1.761, 1.753, 1.746,
    1.740, 1.734, 1.729, 1.725, 1.721, 1.717, 1.714, 1.711, 1.708, 1.706, 1.703, 1.701, 1.699, 1.697,
];
const T_CRIT_025: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
    2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];
// 2.718 at df 11 is a table entry, not e.
#[allow(clippy::approx_constant)]
const T_CRIT_01: [f64; 30] = [
    31.821, 6.965, 4.541, 3.747, 3.365, 3.143, 2.998, 2.896, 2.821, 2.764, 2.718, 2.681, 2.650, 2.624, 2.602, 2.583,
    2.567, 2.552, 2.539, 2.528, 2.518, 2.508, 2.500, 2.492, 2.485, 2.479, 2.473, 2.467, 2.462, 2.457,
];

/// One-tailed critical value for `alpha` in {0.05, 0.025, 0.01}. Degrees of
/// freedom above 30 use the df = 30 entry, which is slightly conservative.
pub fn t_critical(alpha: f64, df: usize) -> Result<f64> {
    let table = if alpha == 0.05 {
        &T_CRIT_05
    } else if alpha == 0.025 {
        &T_CRIT_025
    } else if alpha == 0.01 {
        &T_CRIT_01
    } else {
        return Err(Error::input(format!("no critical values tabulated for alpha = {alpha}")));
    };
    if df == 0 {
        return Err(Error::input("t-test needs at least one degree of freedom"));
    }
    Ok(table[df.min(30) - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<T> {
    pub values: Vec<T>,
    pub mean: T,
    /// `s / sqrt(n)` with the n-1 sample deviation; `None` for a single value.
    pub std_error: Option<T>,
}

pub fn summarize<T: Scalar>(values: &[T]) -> Result<RunSummary<T>> {
    if values.is_empty() {
        return Err(Error::input("cannot summarize zero repetitions"));
    }
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let std_error = (values.len() > 1).then(|| {
        let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one());
        (var / n).sqrt()
    });
    Ok(RunSummary { values: values.to_vec(), mean, std_error })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedTTest<T> {
    pub mean_diff: T,
    pub t: T,
    pub df: usize,
    pub critical: f64,
    pub significant: bool,
}

/// Tests `mean(a - b) > 0` with `t = mean(d) / (s_d / sqrt(n))`.
///
/// When every difference is identical the statistic is infinite (or zero);
/// the decision is then `mean(d) > 0`.
pub fn paired_t_one_tailed<T: Scalar>(a: &[T], b: &[T], alpha: f64) -> Result<PairedTTest<T>> {
    if a.len() != b.len() {
        return Err(Error::input(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::input("paired t-test needs at least two pairs"));
    }
    let df = a.len() - 1;
    let critical = t_critical(alpha, df)?;
    let diffs: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let n = T::from_usize_lossy(diffs.len());
    let mean_diff = diffs.iter().copied().sum::<T>() / n;
    let var = diffs.iter().map(|&d| (d - mean_diff) * (d - mean_diff)).sum::<T>() / (n - T::one());
    let (t, significant) = if var == T::zero() {
        let t = if mean_diff > T::zero() {
            T::infinity()
        } else if mean_diff < T::zero() {
            T::neg_infinity()
        } else {
            T::zero()
        };
        (t, mean_diff > T::zero())
    } else {
        let t = mean_diff / (var.sqrt() / n.sqrt());
        (t, t.as_f64() > critical)
    };
    Ok(PairedTTest { mean_diff, t, df, critical, significant })
}
