use rand::seq::SliceRandom;

use super::SampleSet;
use crate::error::{Error, Result};
use crate::nn::stream_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Self {
        Self { test_fraction, seed }
    }
}

/// Shuffled train/test partition, stratified by class when labels exist.
///
/// The test partition holds `round(fraction * N)` samples (at least one, at
/// most `N - 1`). Per-class quotas are the floors of `fraction * n_c`, with
/// the remainder handed out by largest fractional part (lower class first on
/// ties), so every class is within one sample of its exact share. Both
/// partitions keep the original sample order.
pub fn split<T: Scalar>(set: &SampleSet<T>, spec: &SplitSpec) -> Result<(SampleSet<T>, SampleSet<T>)> {
    let frac = spec.test_fraction;
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::config(format!("test fraction {frac} outside (0, 1)")));
    }
    let n = set.len();
    if n < 2 {
        return Err(Error::data("need at least two samples to split"));
    }
    let groups: Vec<Vec<usize>> = match set.labels() {
        Some(labels) => {
            let mut g = vec![Vec::new(); set.class_count()];
            labels.iter().enumerate().for_each(|(i, &l)| g[l].push(i));
            if let Some((c, members)) = g.iter().enumerate().find(|(_, m)| m.len() == 1) {
                return Err(Error::data(format!("class {c} has {} sample; stratified split needs 2", members.len())));
            }
            g.retain(|m| !m.is_empty());
            g
        }
        None => vec![(0..n).collect()],
    };
    let total_test = ((frac * n as f64).round() as usize).clamp(1, n - 1);
    let exact: Vec<f64> = groups.iter().map(|g| frac * g.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut remaining = total_test.saturating_sub(quota.iter().sum());
    for &g in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if quota[g] < groups[g].len() {
            quota[g] += 1;
            remaining -= 1;
        }
    }
    let mut rng = stream_rng(spec.seed, 31);
    let mut test = Vec::with_capacity(total_test);
    let mut train = Vec::with_capacity(n - total_test);
    for (mut members, q) in groups.into_iter().zip(quota) {
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..q]);
        train.extend_from_slice(&members[q..]);
    }
    test.sort_unstable();
    train.sort_unstable();
    Ok((set.subset(&train)?, set.subset(&test)?))
}
