use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Layout, SampleSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::stream_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    fn stream(self) -> u64 {
        match self {
            Domain::Source => 11,
            Domain::Target => 12,
        }
    }
}

/// Isotropic Gaussian blobs whose target copy is rotated about the origin
/// (in the first two coordinates) and then translated.
///
/// Class `c` is centered at `radius * (cos(2 pi c / C), sin(2 pi c / C), 0, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianShift {
    pub n_per_class: usize,
    pub class_count: usize,
    /// Target translation; its length sets the feature dimension (at least 2).
    pub shift: Vec<f64>,
    /// Target rotation in radians.
    pub rotation: f64,
    pub noise_sigma: f64,
    pub radius: f64,
}

impl GaussianShift {
    pub fn new(n_per_class: usize, class_count: usize, shift: Vec<f64>, rotation: f64, noise_sigma: f64) -> Self {
        Self { n_per_class, class_count, shift, rotation, noise_sigma, radius: 3.0 }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::config("gaussian shift needs at least two classes"));
        }
        if self.dim() < 2 {
            return Err(Error::config("gaussian shift needs at least two dimensions"));
        }
        if self.n_per_class == 0 || !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::config("gaussian shift needs samples and a non-negative sigma"));
        }
        Ok(())
    }

    fn transform(&self, domain: Domain, point: &mut [f64]) {
        if domain == Domain::Target {
            let (s, c) = self.rotation.sin_cos();
            let (x, y) = (point[0], point[1]);
            point[0] = c * x - s * y;
            point[1] = s * x + c * y;
            point.iter_mut().zip(&self.shift).for_each(|(p, d)| *p += d);
        }
    }

    /// Distribution mean of each class in the given domain.
    pub fn centers(&self, domain: Domain) -> Vec<Vec<f64>> {
        (0..self.class_count)
            .map(|c| {
                let angle = 2.0 * PI * c as f64 / self.class_count as f64;
                let mut p = vec![0.0; self.dim()];
                p[0] = self.radius * angle.cos();
                p[1] = self.radius * angle.sin();
                self.transform(domain, &mut p);
                p
            })
            .collect()
    }

    /// Samples one domain. Each domain draws from its own RNG stream, so the
    /// target can be produced without ever generating the source.
    pub fn generate<T: Scalar>(&self, domain: Domain, seed: u64) -> Result<SampleSet<T>> {
        self.validate()?;
        let mut rng = stream_rng(seed, domain.stream());
        let dim = self.dim();
        let base = GaussianShift { shift: vec![0.0; dim], rotation: 0.0, ..self.clone() }.centers(Domain::Source);
        let mut values = Vec::with_capacity(self.n_per_class * self.class_count * dim);
        let mut labels = Vec::with_capacity(self.n_per_class * self.class_count);
        for _ in 0..self.n_per_class {
            for (c, center) in base.iter().enumerate() {
                let mut p: Vec<f64> = center
                    .iter()
                    .map(|&m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + self.noise_sigma * z
                    })
                    .collect();
                self.transform(domain, &mut p);
                values.extend(p.into_iter().map(T::lit));
                labels.push(c);
            }
        }
        let name = match domain {
            Domain::Source => "gauss-source",
            Domain::Target => "gauss-target",
        };
        SampleSet::new(name, Matrix::new(labels.len(), dim, values)?, Layout::flat(dim), Some(labels), self.class_count)
    }
}

/// Labeled source blobs and the shifted, rotated target copy (labels kept for
/// evaluation only).
pub fn synth_shifted_gaussians<T: Scalar>(
    n_per_class: usize,
    class_count: usize,
    shift: &[f64],
    rotation: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<(SampleSet<T>, SampleSet<T>)> {
    let spec = GaussianShift::new(n_per_class, class_count, shift.to_vec(), rotation, noise_sigma);
    Ok((spec.generate(Domain::Source, seed)?, spec.generate(Domain::Target, seed)?))
}

/// Breathing-like windows sampled at 1 Hz: a sinusoidal carrier with bounded
/// noise. Apneic windows carry one contiguous segment where the carrier is
/// scaled down to at most `suppression` of its amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ApneaSynth {
    pub n_windows: usize,
    pub window_len: usize,
    pub amplitude: f64,
    /// Per-window amplitude is drawn from `amplitude * [1 - jitter, 1 + jitter]`.
    pub amplitude_jitter: f64,
    /// Breathing period range in seconds.
    pub period: (f64, f64),
    /// Uniform noise bound relative to the window amplitude.
    pub noise: f64,
    /// Apneic segment length range in samples (inclusive).
    pub event_len: (usize, usize),
    pub suppression: f64,
    /// Constant offset added to every sample.
    pub baseline: f64,
}

impl ApneaSynth {
    pub fn new(n_windows: usize, window_len: usize) -> Self {
        Self {
            n_windows,
            window_len,
            amplitude: 1.0,
            amplitude_jitter: 0.2,
            period: (3.5, 6.0),
            noise: 0.05,
            event_len: (15, 35),
            suppression: 0.1,
            baseline: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_windows < 2 {
            return Err(Error::config("need at least two windows"));
        }
        let (lo, hi) = self.event_len;
        if lo == 0 || lo > hi || hi > self.window_len {
            return Err(Error::config("apneic segment length range must fit inside the window"));
        }
        if !(self.period.0 > 0.0 && self.period.0 <= self.period.1) {
            return Err(Error::config("invalid breathing period range"));
        }
        Ok(())
    }

    /// Half the windows (rounded down) are apneic; labels are shuffled.
    pub fn generate<T: Scalar>(&self, seed: u64) -> Result<SampleSet<T>> {
        self.validate()?;
        let mut rng = stream_rng(seed, 21);
        let mut labels: Vec<usize> = (0..self.n_windows).map(|i| usize::from(i < self.n_windows / 2)).collect();
        labels.shuffle(&mut rng);
        let mut values = Vec::with_capacity(self.n_windows * self.window_len);
        for &label in &labels {
            let amp = self.amplitude * rng.random_range(1.0 - self.amplitude_jitter..=1.0 + self.amplitude_jitter);
            let period = rng.random_range(self.period.0..=self.period.1);
            let phase = rng.random_range(0.0..2.0 * PI);
            let event = (label == 1).then(|| {
                let len = rng.random_range(self.event_len.0..=self.event_len.1);
                let start = rng.random_range(0..=self.window_len - len);
                let depth = rng.random_range(0.0..=self.suppression);
                (start..start + len, depth)
            });
            for t in 0..self.window_len {
                let mut x = amp * (2.0 * PI * t as f64 / period + phase).sin();
                if let Some((range, depth)) = &event {
                    if range.contains(&t) {
                        x *= depth;
                    }
                }
                x += amp * rng.random_range(-self.noise..=self.noise) + self.baseline;
                values.push(T::lit(x));
            }
        }
        SampleSet::new(
            "apnea-synth",
            Matrix::new(self.n_windows, self.window_len, values)?,
            Layout::signal(1, self.window_len),
            Some(labels),
            2,
        )
    }
}

/// Default-parameter apnea-like windows.
pub fn synth_apnea_like<T: Scalar>(n_windows: usize, window_len: usize, seed: u64) -> Result<SampleSet<T>> {
    ApneaSynth::new(n_windows, window_len).generate(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_means_within_three_standard_errors() {
        let spec = GaussianShift::new(400, 3, vec![2.0, -1.0, 0.5], 0.7, 1.5);
        for domain in [Domain::Source, Domain::Target] {
            let set: SampleSet<f64> = spec.generate(domain, 17).unwrap();
            let centers = spec.centers(domain);
            let labels = set.labels().unwrap();
            for (c, center) in centers.iter().enumerate() {
                for d in 0..spec.dim() {
                    let vals: Vec<f64> =
                        set.features().iter_rows().zip(labels).filter(|(_, &l)| l == c).map(|(r, _)| r[d]).collect();
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    let bound = 3.0 * spec.noise_sigma / (vals.len() as f64).sqrt();
                    assert!((mean - center[d]).abs() < bound, "class {c} dim {d}: {mean} vs {}", center[d]);
                }
            }
        }
    }

    #[test]
    fn zero_shift_target_matches_source_distribution() {
        let spec = GaussianShift::new(10, 2, vec![0.0, 0.0], 0.0, 1.0);
        assert_eq!(spec.centers(Domain::Source), spec.centers(Domain::Target));
        let (s, t) = synth_shifted_gaussians::<f64>(10, 2, &[0.0, 0.0], 0.0, 1.0, 3).unwrap();
        assert_eq!(s.class_counts(), t.class_counts());
        assert_ne!(s.features(), t.features(), "domains use independent noise");
    }

    #[test]
    fn rejects_single_class() {
        assert!(synth_shifted_gaussians::<f64>(10, 1, &[0.0, 0.0], 0.0, 1.0, 3).is_err());
    }

    #[test]
    fn apnea_labels_balanced_and_deterministic() {
        let a: SampleSet<f64> = synth_apnea_like(100, 60, 5).unwrap();
        assert_eq!(a.class_counts().unwrap(), vec![50, 50]);
        assert_eq!(a, synth_apnea_like(100, 60, 5).unwrap());
        assert_ne!(a, synth_apnea_like(100, 60, 6).unwrap());
        assert_eq!(a.layout(), Layout::signal(1, 60));
    }

    #[test]
    fn apneic_windows_have_suppressed_runs() {
        let set: SampleSet<f64> = synth_apnea_like(200, 60, 8).unwrap();
        for (row, &label) in set.features().iter_rows().zip(set.labels().unwrap()) {
            let peak = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut run = 0;
            let mut longest = 0;
            for v in row {
                run = if v.abs() < 0.25 * peak { run + 1 } else { 0 };
                longest = longest.max(run);
            }
            if label == 1 {
                assert!(longest >= 10, "apneic window with longest quiet run {longest}");
            } else {
                assert!(longest < 10, "normal window with quiet run {longest}");
            }
        }
    }
}
