//! Turns dataset configs into preprocessed train/test partitions.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use sico::data::{
    downsample_set, load_idx, read_signal_csv, rebalance, rescale_pixels, resize_and_gray, split,
    standardize_per_signal, ApneaSynth, Domain, GaussianShift, SampleSet, SplitSpec,
};

use crate::config::{DatasetConfig, DomainName, PreprocessConfig};
use crate::error::{CliError, CliResult};

pub const DATA_ROOT_ENV: &str = "SICO_DATA_ROOT";

#[derive(Debug, Clone)]
pub struct Partitions {
    pub train: SampleSet<f64>,
    pub test: SampleSet<f64>,
}

/// Relative paths resolve against `$SICO_DATA_ROOT` if set, else `base_dir`.
pub fn resolve(path: &Path, base_dir: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(path),
        _ => base_dir.join(path),
    }
}

/// Reads or generates the raw dataset. Synthetic generators draw from `seed`.
pub fn load(ds: &DatasetConfig, name: &str, seed: u64, base_dir: &Path) -> CliResult<SampleSet<f64>> {
    let set = match ds {
        DatasetConfig::Gaussians {
            domain, n_per_class, class_count, shift, rotation_deg, noise_sigma, radius, ..
        } => {
            let mut g =
                GaussianShift::new(*n_per_class, *class_count, shift.clone(), rotation_deg.to_radians(), *noise_sigma);
            g.radius = *radius;
            let domain = match domain {
                DomainName::Source => Domain::Source,
                DomainName::Target => Domain::Target,
            };
            g.generate(domain, seed).map_err(CliError::config)?
        }
        DatasetConfig::Apnea { n_windows, window_len, amplitude, noise, baseline, period, .. } => {
            let mut a = ApneaSynth::new(*n_windows, *window_len);
            a.amplitude = *amplitude;
            a.noise = *noise;
            a.baseline = *baseline;
            a.period = (period[0], period[1]);
            a.generate(seed).map_err(CliError::config)?
        }
        DatasetConfig::Idx { images, labels, limit, class_count, .. } => {
            let (images, labels) = (resolve(images, base_dir), resolve(labels, base_dir));
            let mut set = load_idx::<f64>(&images, &labels)
                .map_err(|e| CliError::Data(format!("{} / {}: {e}", images.display(), labels.display())))?;
            if let Some(limit) = *limit {
                let keep: Vec<usize> = (0..limit.min(set.len())).collect();
                set = set.subset(&keep)?;
            }
            if let Some(c) = *class_count {
                set = SampleSet::new(
                    set.name(),
                    set.features().clone(),
                    set.layout(),
                    set.labels().map(<[usize]>::to_vec),
                    c,
                )?;
            }
            set
        }
        DatasetConfig::Csv { path, class_count, .. } => {
            let path = resolve(path, base_dir);
            let file = File::open(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            read_signal_csv(BufReader::new(file), name, *class_count)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
    };
    Ok(set.with_name(name))
}

/// Preprocesses, splits with `split_seed`, then standardizes with training
/// statistics. Rebalancing uses `seed`.
pub fn prepare(
    ds: &DatasetConfig,
    pre: &PreprocessConfig,
    name: &str,
    seed: u64,
    split_seed: u64,
    base_dir: &Path,
) -> CliResult<Partitions> {
    let mut set = load(ds, name, seed, base_dir)?;
    if let Some(hz) = pre.downsample_hz {
        set = downsample_set(&set, hz)?;
    }
    if let Some(side) = pre.resize {
        set = resize_and_gray(&set, side)?;
    }
    if pre.rescale {
        set = rescale_pixels(&set)?;
    }
    if pre.rebalance {
        set = rebalance(&set, seed)?;
    }
    let (mut train, mut test) = split(&set, &SplitSpec::new(ds.test_fraction(), split_seed))?;
    if pre.standardize {
        (train, test) = standardize_per_signal(&train, &test)?;
    }
    Ok(Partitions { train, test })
}
