//! Experiment configuration (TOML). The schema is documented in `docs/config.md`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sico::criteria::CriterionSpec;
use sico::engine::LabelMode;
use sico::nn::presets::PRESET_NAMES;

use crate::error::{CliError, CliResult};

/// Built-in experiment configurations, selectable with `--preset`.
pub const BUILTIN_PRESETS: [(&str, &str); 3] = [
    ("gauss-shift", include_str!("../presets/gauss-shift.toml")),
    ("apnea-synth", include_str!("../presets/apnea-synth.toml")),
    ("digits-small", include_str!("../presets/digits-small.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub source: DatasetConfig,
    pub target: DatasetConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    pub training: TrainingSection,
    pub criterion: CriterionSpec,
    #[serde(default)]
    pub adaptation: AdaptationSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Kappa,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Kappa => "kappa",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    /// Network preset shared by the source and every stage classifier.
    pub preset: String,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Defaults to `runs/<name>`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Metric used for the paired comparison and the report table.
    #[serde(default = "accuracy")]
    pub metric: Metric,
}

fn one() -> usize {
    1
}

fn accuracy() -> Metric {
    Metric::Accuracy
}

fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainName {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Gaussian blobs; `domain = "target"` applies the rotation and shift.
    Gaussians {
        domain: DomainName,
        n_per_class: usize,
        #[serde(default = "two")]
        class_count: usize,
        shift: Vec<f64>,
        #[serde(default)]
        rotation_deg: f64,
        #[serde(default = "unit")]
        noise_sigma: f64,
        #[serde(default = "three")]
        radius: f64,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
    /// Synthetic breathing-like windows with apneic suppressions.
    Apnea {
        n_windows: usize,
        #[serde(default = "sixty")]
        window_len: usize,
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default = "default_noise")]
        noise: f64,
        #[serde(default)]
        baseline: f64,
        #[serde(default = "default_period")]
        period: [f64; 2],
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
    /// IDX image/label pair. Relative paths resolve against `SICO_DATA_ROOT`
    /// when set, otherwise against the config file's directory.
    Idx {
        images: PathBuf,
        labels: PathBuf,
        /// Keep only the first `limit` samples.
        #[serde(default)]
        limit: Option<usize>,
        #[serde(default)]
        class_count: Option<usize>,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
    /// Signal CSV (`window_id,channel,t0..,[label]`).
    Csv {
        path: PathBuf,
        #[serde(default)]
        class_count: Option<usize>,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
}

fn two() -> usize {
    2
}

fn sixty() -> usize {
    60
}

fn unit() -> f64 {
    1.0
}

fn three() -> f64 {
    3.0
}

fn default_noise() -> f64 {
    0.05
}

fn default_period() -> [f64; 2] {
    [3.5, 6.0]
}

impl DatasetConfig {
    pub fn test_fraction(&self) -> f64 {
        match *self {
            DatasetConfig::Gaussians { test_fraction, .. }
            | DatasetConfig::Apnea { test_fraction, .. }
            | DatasetConfig::Idx { test_fraction, .. }
            | DatasetConfig::Csv { test_fraction, .. } => test_fraction,
        }
    }
}

/// Applied identically to source and target, in field order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Block-mean downsampling from this rate to 1 Hz.
    #[serde(default)]
    pub downsample_hz: Option<usize>,
    /// Square side for bilinear resizing (colour images become gray).
    #[serde(default)]
    pub resize: Option<usize>,
    /// Divide pixel values by 255.
    #[serde(default)]
    pub rescale: bool,
    /// Undersample to equal class counts before splitting.
    #[serde(default)]
    pub rebalance: bool,
    /// Per-channel standardization with training-partition statistics.
    #[serde(default)]
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
}

fn default_batch() -> usize {
    128
}

fn default_lr() -> f64 {
    0.001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationSection {
    #[serde(default = "hard")]
    pub label_mode: LabelMode,
    #[serde(default)]
    pub stage_epochs: Option<usize>,
    #[serde(default)]
    pub stage_iterations: Option<usize>,
    /// Defaults to the source training batch size.
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Defaults to the source training learning rate.
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub max_stages: Option<usize>,
    #[serde(default)]
    pub warm_start: bool,
    /// Stage seeds start at the repetition seed plus this offset.
    #[serde(default = "default_seed_offset")]
    pub seed_offset: u64,
}

fn hard() -> LabelMode {
    LabelMode::Hard
}

fn default_seed_offset() -> u64 {
    100
}

impl Default for AdaptationSection {
    fn default() -> Self {
        Self {
            label_mode: LabelMode::Hard,
            stage_epochs: None,
            stage_iterations: None,
            batch_size: None,
            learning_rate: None,
            max_stages: None,
            warm_start: false,
            seed_offset: default_seed_offset(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(CliError::config)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let e = &self.experiment;
        if !PRESET_NAMES.contains(&e.preset.as_str()) {
            return Err(CliError::Config(format!(
                "unknown network preset '{}' (known: {})",
                e.preset,
                PRESET_NAMES.join(", ")
            )));
        }
        if e.repetitions == 0 {
            return Err(CliError::config("repetitions must be at least 1"));
        }
        if e.name.is_empty() || e.name.contains(['/', '\\', ',']) {
            return Err(CliError::config("experiment name must be non-empty without '/', '\\' or ','"));
        }
        for (which, ds) in [("source", &self.source), ("target", &self.target)] {
            let f = ds.test_fraction();
            if !(f > 0.0 && f < 1.0) {
                return Err(CliError::Config(format!("{which}.test_fraction {f} outside (0, 1)")));
            }
        }
        if self.training.epochs.is_some() && self.training.iterations.is_some() {
            return Err(CliError::config("training: set epochs or iterations, not both"));
        }
        if self.adaptation.stage_epochs.is_some() && self.adaptation.stage_iterations.is_some() {
            return Err(CliError::config("adaptation: set stage_epochs or stage_iterations, not both"));
        }
        self.criterion.validate().map_err(CliError::config)?;
        self.adaptation_config(0).validate().map_err(CliError::config)?;
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.experiment.output_dir.clone().unwrap_or_else(|| Path::new("runs").join(&self.experiment.name))
    }

    /// Seed of repetition `r`.
    pub fn repetition_seed(&self, r: usize) -> u64 {
        self.experiment.base_seed.wrapping_add(1000 * r as u64)
    }

    pub fn source_train_config(&self, samples: usize) -> sico::nn::TrainConfig {
        let t = &self.training;
        match t.iterations {
            Some(n) => sico::nn::TrainConfig::new(n, t.batch_size, t.learning_rate),
            None => sico::nn::TrainConfig::epochs(t.epochs.unwrap_or(20), samples, t.batch_size, t.learning_rate),
        }
    }

    pub fn adaptation_config(&self, repetition_seed: u64) -> sico::engine::AdaptationConfig {
        let a = &self.adaptation;
        let mut cfg = sico::engine::AdaptationConfig::new(self.criterion);
        cfg.label_mode = a.label_mode;
        cfg.stage_budget = match a.stage_iterations {
            Some(n) => sico::engine::StageBudget::Iterations(n),
            None => sico::engine::StageBudget::Epochs(a.stage_epochs.unwrap_or(20)),
        };
        cfg.batch_size = a.batch_size.unwrap_or(self.training.batch_size);
        cfg.learning_rate = a.learning_rate.unwrap_or(self.training.learning_rate);
        cfg.max_stages = a.max_stages;
        cfg.warm_start = a.warm_start;
        cfg.base_seed = repetition_seed.wrapping_add(a.seed_offset);
        cfg
    }
}

/// A parsed configuration together with where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Hex SHA-256 of the configuration text.
    pub digest: String,
    /// Base for relative dataset paths when `SICO_DATA_ROOT` is unset.
    pub base_dir: PathBuf,
}

pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl LoadedConfig {
    pub fn from_text(text: &str, base_dir: PathBuf) -> CliResult<Self> {
        Ok(Self { config: ExperimentConfig::parse(text)?, digest: digest(text), base_dir })
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_text(&text, base)
    }

    pub fn builtin(name: &str) -> CliResult<Self> {
        let (_, text) = BUILTIN_PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| CliError::Config(format!("unknown preset '{name}'")))?;
        Self::from_text(text, PathBuf::from("."))
    }
}
