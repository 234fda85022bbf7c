use rand::seq::SliceRandom;

use super::{Layout, SampleSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::stream_rng;
use crate::scalar::Scalar;

/// Maps 0-255 pixel intensities onto 0-1.
pub fn rescale_pixels<T: Scalar>(set: &SampleSet<T>) -> Result<SampleSet<T>> {
    let max = T::lit(255.0);
    if let Some(v) = set.features().values().iter().find(|&&v| v < T::zero() || v > max) {
        return Err(Error::input(format!("pixel value {v} outside [0, 255]")));
    }
    let values = set.features().values().iter().map(|&v| v / max).collect();
    set.with_features(Matrix::from_parts(set.len(), set.features().cols(), values), set.layout())
}

/// ITU-R BT.601 luma weights.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Converts RGB images to luminance and bilinearly resamples square images to
/// `target_side x target_side`.
///
/// Sampling uses pixel centers: output pixel `i` reads source coordinate
/// `(i + 0.5) * in / out - 0.5`, clamped to the image.
pub fn resize_and_gray<T: Scalar>(set: &SampleSet<T>, target_side: usize) -> Result<SampleSet<T>> {
    let layout = set.layout();
    if layout.height != layout.width {
        return Err(Error::input(format!("image {}x{} is not square", layout.height, layout.width)));
    }
    if !matches!(layout.channels, 1 | 3) {
        return Err(Error::input(format!("{} channels; expected 1 or 3", layout.channels)));
    }
    if target_side == 0 {
        return Err(Error::input("target side must be positive"));
    }
    let side = layout.height;
    let plane = side * side;
    let taps = axis_taps(side, target_side);
    let mut values = Vec::with_capacity(set.len() * target_side * target_side);
    let mut gray = vec![T::zero(); plane];
    for row in set.features().iter_rows() {
        if layout.channels == 3 {
            for (p, g) in gray.iter_mut().enumerate() {
                *g = T::lit(LUMA[0]) * row[p] + T::lit(LUMA[1]) * row[plane + p] + T::lit(LUMA[2]) * row[2 * plane + p];
            }
        } else {
            gray.copy_from_slice(row);
        }
        for &(y0, y1, fy) in &taps {
            for &(x0, x1, fx) in &taps {
                let (fy, fx) = (T::lit(fy), T::lit(fx));
                let top = gray[y0 * side + x0] * (T::one() - fx) + gray[y0 * side + x1] * fx;
                let bottom = gray[y1 * side + x0] * (T::one() - fx) + gray[y1 * side + x1] * fx;
                values.push(top * (T::one() - fy) + bottom * fy);
            }
        }
    }
    set.with_features(Matrix::from_parts(set.len(), target_side * target_side, values), Layout::image(1, target_side))
}

/// Neighbor indices and interpolation weight for each output coordinate.
fn axis_taps(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(input - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

/// Per-channel mean and population standard deviation, fitted on one set
/// and applied to any set with the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub std_dev: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(set: &SampleSet<T>) -> Result<Self> {
        let layout = set.layout();
        let span = layout.height * layout.width;
        let count = T::from_usize_lossy(set.len() * span);
        let mut mean = vec![T::zero(); layout.channels];
        let mut std_dev = vec![T::zero(); layout.channels];
        for c in 0..layout.channels {
            let channel = || set.features().iter_rows().flat_map(move |r| r[c * span..(c + 1) * span].iter().copied());
            let m = channel().sum::<T>() / count;
            let var = channel().map(|v| (v - m) * (v - m)).sum::<T>() / count;
            if var <= T::zero() {
                return Err(Error::data(format!("channel {c} of '{}' has zero variance", set.name())));
            }
            mean[c] = m;
            std_dev[c] = var.sqrt();
        }
        Ok(Self { mean, std_dev })
    }

    pub fn apply(&self, set: &SampleSet<T>) -> Result<SampleSet<T>> {
        let layout = set.layout();
        if layout.channels != self.mean.len() {
            return Err(Error::input(format!(
                "standardizer fitted for {} channels, set has {}",
                self.mean.len(),
                layout.channels
            )));
        }
        let span = layout.height * layout.width;
        let mut features = set.features().clone();
        for r in 0..features.rows() {
            for (i, v) in features.row_mut(r).iter_mut().enumerate() {
                let c = i / span;
                *v = (*v - self.mean[c]) / self.std_dev[c];
            }
        }
        set.with_features(features, layout)
    }
}

/// Standardizes both partitions with statistics from `train` only.
pub fn standardize_per_signal<T: Scalar>(
    train: &SampleSet<T>,
    test: &SampleSet<T>,
) -> Result<(SampleSet<T>, SampleSet<T>)> {
    let s = Standardizer::fit(train)?;
    Ok((s.apply(train)?, s.apply(test)?))
}

/// Block mean over consecutive `source_hz` samples.
pub fn downsample_to_1hz<T: Scalar>(signal: &[T], source_hz: usize) -> Result<Vec<T>> {
    if source_hz == 0 {
        return Err(Error::input("source rate must be positive"));
    }
    if !signal.len().is_multiple_of(source_hz) {
        return Err(Error::input(format!("signal length {} not divisible by {source_hz}", signal.len())));
    }
    let n = T::from_usize_lossy(source_hz);
    Ok(signal.chunks(source_hz).map(|block| block.iter().copied().sum::<T>() / n).collect())
}

/// Downsamples every channel of every window in a 1D signal set.
pub fn downsample_set<T: Scalar>(set: &SampleSet<T>, source_hz: usize) -> Result<SampleSet<T>> {
    let layout = set.layout();
    if layout.height != 1 {
        return Err(Error::input("downsampling applies to 1D signals"));
    }
    let mut values = Vec::new();
    for row in set.features().iter_rows() {
        for c in 0..layout.channels {
            values.extend(downsample_to_1hz(&row[c * layout.width..(c + 1) * layout.width], source_hz)?);
        }
    }
    let out = Layout::signal(layout.channels, layout.width / source_hz);
    set.with_features(Matrix::from_parts(set.len(), out.size(), values), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApneaLabel {
    NonApneic = 0,
    Apneic = 1,
}

/// A 60 s window is non-apneic only when both of its 30 s halves are.
pub fn merge_30s_labels(pair: (ApneaLabel, ApneaLabel)) -> ApneaLabel {
    match pair {
        (ApneaLabel::NonApneic, ApneaLabel::NonApneic) => ApneaLabel::NonApneic,
        _ => ApneaLabel::Apneic,
    }
}

/// Random undersampling of every class to the minority-class count.
/// Surviving samples keep their original relative order.
pub fn rebalance<T: Scalar>(set: &SampleSet<T>, seed: u64) -> Result<SampleSet<T>> {
    let labels = set.labels().ok_or_else(|| Error::input(format!("'{}' has no labels to rebalance", set.name())))?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); set.class_count()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let target = by_class.iter().map(Vec::len).min().unwrap_or(0);
    if target == 0 {
        return Err(Error::data(format!("'{}' has a class without samples", set.name())));
    }
    let mut rng = stream_rng(seed, 0);
    let mut keep = Vec::with_capacity(target * by_class.len());
    for mut members in by_class {
        members.shuffle(&mut rng);
        keep.extend_from_slice(&members[..target]);
    }
    keep.sort_unstable();
    set.subset(&keep)
}
