//! Sample sets and everything that produces them: IDX and signal-CSV
//! loaders, preprocessing, synthetic domain-shift generators and splits.

mod idx;
mod preprocess;
mod signal_csv;
mod split;
mod synth;

pub use idx::{load_idx, parse_idx_images, parse_idx_labels, write_idx};
pub use preprocess::{
    downsample_set, downsample_to_1hz, merge_30s_labels, rebalance, rescale_pixels, resize_and_gray,
    standardize_per_signal, ApneaLabel, Standardizer,
};
pub use signal_csv::{read_signal_csv, write_signal_csv};
pub use split::{split, SplitSpec};
pub use synth::{synth_apnea_like, synth_shifted_gaussians, ApneaSynth, Domain, GaussianShift};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Shape;
use crate::scalar::Scalar;

/// Per-sample layout of a feature row: `channels x height x width`,
/// channel-major. 1D signals use `height = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Layout {
    pub const fn flat(width: usize) -> Self {
        Self { channels: 1, height: 1, width }
    }

    pub const fn signal(channels: usize, length: usize) -> Self {
        Self { channels, height: 1, width: length }
    }

    pub const fn image(channels: usize, side: usize) -> Self {
        Self { channels, height: side, width: side }
    }

    pub const fn size(&self) -> usize {
        self.channels * self.height * self.width
    }

    /// Network input shape: channels by flattened spatial extent.
    pub const fn shape(&self) -> Shape {
        Shape { channels: self.channels, length: self.height * self.width }
    }
}

/// Feature rows with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    name: String,
    features: Matrix<T>,
    layout: Layout,
    labels: Option<Vec<usize>>,
    class_count: usize,
}

impl<T: Scalar> SampleSet<T> {
    pub fn new(
        name: impl Into<String>,
        features: Matrix<T>,
        layout: Layout,
        labels: Option<Vec<usize>>,
        class_count: usize,
    ) -> Result<Self> {
        let name = name.into();
        if features.rows() == 0 {
            return Err(Error::data(format!("sample set '{name}' is empty")));
        }
        if features.cols() != layout.size() {
            return Err(Error::input(format!(
                "'{name}': {} feature columns but layout holds {}",
                features.cols(),
                layout.size()
            )));
        }
        if !features.is_all_finite() {
            return Err(Error::data(format!("'{name}': non-finite feature value")));
        }
        if class_count < 1 {
            return Err(Error::input("class count must be positive"));
        }
        if let Some(labels) = &labels {
            if labels.len() != features.rows() {
                return Err(Error::input(format!("'{name}': {} labels for {} samples", labels.len(), features.rows())));
            }
            if let Some(bad) = labels.iter().find(|&&l| l >= class_count) {
                return Err(Error::input(format!("'{name}': label {bad} outside [0, {class_count})")));
            }
        }
        Ok(Self { name, features, layout, labels, class_count })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sample count per class; `None` for unlabeled sets.
    pub fn class_counts(&self) -> Option<Vec<usize>> {
        self.labels.as_ref().map(|labels| {
            let mut counts = vec![0; self.class_count];
            labels.iter().for_each(|&l| counts[l] += 1);
            counts
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same features with labels removed.
    pub fn without_labels(&self) -> Self {
        Self { labels: None, ..self.clone() }
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let features = self.features.select_rows(indices)?;
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Self::new(self.name.clone(), features, self.layout, labels, self.class_count)
    }

    pub(crate) fn with_features(&self, features: Matrix<T>, layout: Layout) -> Result<Self> {
        Self::new(self.name.clone(), features, layout, self.labels.clone(), self.class_count)
    }
}
