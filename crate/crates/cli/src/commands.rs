//! The four CLI verbs. Each returns the path of the manifest it wrote.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;
use sico::data::{write_signal_csv, ApneaSynth, Domain, GaussianShift};
use sico::diagnostics::{write_stage_csv, write_stage_extra_csv, DiagnosticsRecorder};
use sico::engine::sico_adapt;
use sico::nn::{checkpoint, presets, NetworkParams};
use sico::stats::summarize;

use crate::config::{ExperimentConfig, LoadedConfig, Metric};
use crate::datasets::{prepare, Partitions};
use crate::error::{CliError, CliResult};
use crate::manifest::{RepetitionEntry, RunManifest};
use crate::tables::{
    fmt_opt, metric_values, read_results, summarize_results, write_results, write_summary, ResultRow, ALPHA,
    SRC_ON_SOURCE, SRC_ON_TARGET, TG_ON_TARGET,
};

pub const SOURCE_RESULTS: &str = "source_results.csv";
pub const RESULTS: &str = "results.csv";
pub const SUMMARY: &str = "summary.csv";
pub const REPORT: &str = "report.csv";

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn setup(loaded: &LoadedConfig, ov: &Overrides) -> CliResult<(ExperimentConfig, PathBuf)> {
    let mut cfg = loaded.config.clone();
    if let Some(seed) = ov.seed {
        cfg.experiment.base_seed = seed;
    }
    let out = ov.out.clone().unwrap_or_else(|| cfg.output_dir());
    std::fs::create_dir_all(&out).map_err(|e| CliError::Other(format!("{}: {e}", out.display())))?;
    Ok((cfg, out))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn tick(manifest: &mut RunManifest, phase: &str, since: Instant) {
    *manifest.timings_ms.entry(phase.to_string()).or_default() += since.elapsed().as_millis();
}

fn predictions(model: &NetworkParams<f64>, data: &Partitions) -> CliResult<Vec<usize>> {
    Ok(model.predict(data.test.features())?.argmax_rows())
}

fn new_manifest(verb: &str, cfg: &ExperimentConfig, loaded: &LoadedConfig) -> RunManifest {
    let mut m = RunManifest::new(verb, &cfg.experiment.name);
    m.metric = Some(cfg.experiment.metric);
    m.config_digest = Some(loaded.digest.clone());
    m
}

/// Trains one source classifier per repetition and evaluates it on the
/// source test partition.
pub fn train_source(loaded: &LoadedConfig, ov: &Overrides) -> CliResult<PathBuf> {
    let (cfg, out) = setup(loaded, ov)?;
    let name = cfg.experiment.name.clone();
    let mut manifest = new_manifest("train-source", &cfg, loaded);
    let mut rows = Vec::new();
    for r in 0..cfg.experiment.repetitions {
        let seed = cfg.repetition_seed(r);
        let t = Instant::now();
        let src = prepare(&cfg.source, &cfg.preprocess, "source", seed, seed, &loaded.base_dir)?;
        tick(&mut manifest, "load_source", t);
        if src.train.labels().is_none() {
            return Err(CliError::Data("source training data must be labeled".into()));
        }
        let spec = presets::preset(&cfg.experiment.preset, src.train.layout().shape(), src.train.class_count())
            .map_err(CliError::config)?;
        let t = Instant::now();
        let h = sico::engine::train_source(&spec, &src.train, &cfg.source_train_config(src.train.len()), seed)?;
        tick(&mut manifest, "train_source", t);
        let ckpt = format!("h_src_r{r}.ckpt");
        checkpoint::save(&h, out.join(&ckpt)).map_err(CliError::other)?;
        if let Some(truth) = src.test.labels() {
            rows.push(ResultRow::evaluate(&name, r, SRC_ON_SOURCE, truth, &predictions(&h, &src)?, h.class_count())?);
        }
        manifest.repetitions.push(RepetitionEntry {
            repetition: r,
            seed,
            stage_seed_base: None,
            checkpoints: vec![ckpt],
            tables: vec![],
        });
    }
    write_results(&rows, create(&out.join(SOURCE_RESULTS))?)?;
    manifest.tables.push(SOURCE_RESULTS.to_string());
    manifest.write(&out)
}

fn source_checkpoint(source: &Path, r: usize) -> PathBuf {
    if source.is_dir() {
        source.join(format!("h_src_r{r}.ckpt"))
    } else {
        source.to_path_buf()
    }
}

/// Checks that `h` is exactly the configured preset for the target's shape.
fn check_architecture(cfg: &ExperimentConfig, h: &NetworkParams<f64>, target: &Partitions) -> CliResult<()> {
    let shape = target.train.layout().shape();
    let expected = presets::preset(&cfg.experiment.preset, shape, h.class_count()).map_err(|e| {
        CliError::Architecture(format!("preset '{}' cannot take target input {shape:?}: {e}", cfg.experiment.preset))
    })?;
    if &expected != h.spec() {
        return Err(CliError::Architecture(format!(
            "checkpoint network does not match preset '{}' for target input {shape:?}",
            cfg.experiment.preset
        )));
    }
    for set in [&target.train, &target.test] {
        if let Some(&max) = set.labels().and_then(|l| l.iter().max()) {
            if max >= h.class_count() {
                return Err(CliError::Architecture(format!(
                    "target label {max} outside the checkpoint's {} classes",
                    h.class_count()
                )));
            }
        }
    }
    Ok(())
}

/// Adapts the released source classifier(s) to the target, one run per
/// repetition. Never touches the source dataset: `source` is a checkpoint
/// file or a `train-source` output directory.
pub fn adapt(loaded: &LoadedConfig, source: &Path, ov: &Overrides) -> CliResult<PathBuf> {
    let (cfg, out) = setup(loaded, ov)?;
    let name = cfg.experiment.name.clone();
    let mut manifest = new_manifest("adapt", &cfg, loaded);
    let released = if source.is_dir() && source.join(SOURCE_RESULTS).is_file() {
        read_results(File::open(source.join(SOURCE_RESULTS)).map_err(CliError::data)?)?
    } else {
        Vec::new()
    };
    let mut rows = Vec::new();
    for r in 0..cfg.experiment.repetitions {
        let seed = cfg.repetition_seed(r);
        let ckpt_path = source_checkpoint(source, r);
        let h_src: NetworkParams<f64> =
            checkpoint::load(&ckpt_path).map_err(|e| CliError::Data(format!("{}: {e}", ckpt_path.display())))?;
        let t = Instant::now();
        let target = prepare(&cfg.target, &cfg.preprocess, "target", seed.wrapping_add(1), seed, &loaded.base_dir)?;
        tick(&mut manifest, "load_target", t);
        check_architecture(&cfg, &h_src, &target)?;

        rows.extend(
            released
                .iter()
                .filter(|row| row.repetition == r && row.split == SRC_ON_SOURCE)
                .map(|row| ResultRow { experiment: name.clone(), ..row.clone() }),
        );
        let classes = h_src.class_count();
        if let Some(truth) = target.test.labels() {
            rows.push(ResultRow::evaluate(&name, r, SRC_ON_TARGET, truth, &predictions(&h_src, &target)?, classes)?);
        }

        let acfg = cfg.adaptation_config(seed);
        let mut recorder = DiagnosticsRecorder::new()
            .with_pool_truth(target.train.labels().map(<[usize]>::to_vec))
            .with_target_test(Some(&target.test));
        let t = Instant::now();
        let (h_tg, _state) = sico_adapt(h_src, target.train.features(), &acfg, &mut recorder)?;
        tick(&mut manifest, "adapt", t);

        let ckpt = format!("h_tg_r{r}.ckpt");
        checkpoint::save(&h_tg, out.join(&ckpt)).map_err(CliError::other)?;
        let curves = format!("stage_curves_r{r}.csv");
        let extras = format!("stage_extras_r{r}.csv");
        write_stage_csv(recorder.records(), create(&out.join(&curves))?).map_err(CliError::other)?;
        write_stage_extra_csv(recorder.records(), create(&out.join(&extras))?).map_err(CliError::other)?;
        if let Some(truth) = target.test.labels() {
            rows.push(ResultRow::evaluate(&name, r, TG_ON_TARGET, truth, &predictions(&h_tg, &target)?, classes)?);
        }
        manifest.repetitions.push(RepetitionEntry {
            repetition: r,
            seed,
            stage_seed_base: Some(acfg.base_seed),
            checkpoints: vec![ckpt],
            tables: vec![curves, extras],
        });
    }
    write_results(&rows, create(&out.join(RESULTS))?)?;
    write_summary(&summarize_results(&name, &rows)?, create(&out.join(SUMMARY))?)?;
    manifest.tables.extend([RESULTS.to_string(), SUMMARY.to_string()]);
    manifest.write(&out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Gaussians,
    Apnea,
}

/// Parameters for `synth`; also readable from a `[synth]` config table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub kind: SynthKind,
    /// Samples per domain (gaussians) or windows (apnea).
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "two")]
    pub classes: usize,
    #[serde(default = "default_shift")]
    pub shift: Vec<f64>,
    #[serde(default)]
    pub rotation_deg: f64,
    #[serde(default = "unit")]
    pub noise_sigma: f64,
    #[serde(default = "sixty")]
    pub window_len: usize,
}

fn two() -> usize {
    2
}

fn unit() -> f64 {
    1.0
}

fn sixty() -> usize {
    60
}

fn default_shift() -> Vec<f64> {
    vec![0.0, 0.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthFile {
    synth: toml::Table,
}

/// Reads the `[synth]` table of a config file as a base for flag overrides.
pub fn synth_table(path: &Path) -> CliResult<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: SynthFile = toml::from_str(&text).map_err(CliError::config)?;
    Ok(file.synth)
}

/// Writes synthetic datasets as signal CSVs: `source.csv` and `target.csv`
/// for gaussians, `apnea.csv` for apnea.
pub fn synth(params: &SynthParams, out: &Path) -> CliResult<PathBuf> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Other(format!("{}: {e}", out.display())))?;
    let mut manifest = RunManifest::new("synth", &format!("synth-{:?}", params.kind).to_lowercase());
    let t = Instant::now();
    match params.kind {
        SynthKind::Gaussians => {
            if params.classes < 2 || !params.n.is_multiple_of(params.classes) {
                return Err(CliError::Config(format!(
                    "n = {} must be a multiple of classes = {}",
                    params.n, params.classes
                )));
            }
            let g = GaussianShift::new(
                params.n / params.classes,
                params.classes,
                params.shift.clone(),
                params.rotation_deg.to_radians(),
                params.noise_sigma,
            );
            for (domain, file) in [(Domain::Source, "source.csv"), (Domain::Target, "target.csv")] {
                let set = g.generate::<f64>(domain, params.seed).map_err(CliError::config)?;
                write_signal_csv(&set, create(&out.join(file))?).map_err(CliError::other)?;
                manifest.tables.push(file.to_string());
            }
        }
        SynthKind::Apnea => {
            let set =
                ApneaSynth::new(params.n, params.window_len).generate::<f64>(params.seed).map_err(CliError::config)?;
            write_signal_csv(&set, create(&out.join("apnea.csv"))?).map_err(CliError::other)?;
            manifest.tables.push("apnea.csv".to_string());
        }
    }
    tick(&mut manifest, "generate", t);
    manifest.repetitions.push(RepetitionEntry {
        repetition: 0,
        seed: params.seed,
        stage_seed_base: None,
        checkpoints: vec![],
        tables: vec![],
    });
    manifest.write(out)
}

pub const REPORT_HEADER: [&str; 13] = [
    "experiment",
    "metric",
    "n",
    "h_src_source_mean",
    "h_src_source_se",
    "h_src_target_mean",
    "h_src_target_se",
    "h_tg_target_mean",
    "h_tg_target_se",
    "mean_diff",
    "t",
    "df",
    "significant",
];

/// One row per `adapt` manifest comparing h_src and h_tg on the manifest's
/// primary metric. All manifests must agree on that metric.
pub fn report(manifests: &[PathBuf], out: &Path) -> CliResult<PathBuf> {
    if manifests.is_empty() {
        return Err(CliError::config("report needs at least one manifest"));
    }
    let mut loaded = Vec::new();
    for path in manifests {
        let m = RunManifest::read(path)?;
        if m.verb != "adapt" {
            return Err(CliError::Data(format!("{} is a '{}' manifest, expected 'adapt'", path.display(), m.verb)));
        }
        let metric = m.metric.ok_or_else(|| CliError::Data(format!("{} names no metric", path.display())))?;
        loaded.push((path.parent().map(Path::to_path_buf).unwrap_or_default(), m, metric));
    }
    let metric: Metric = loaded[0].2;
    if let Some((_, m, other)) = loaded.iter().find(|(_, _, x)| *x != metric) {
        return Err(CliError::MetricConflict(format!(
            "'{}' reports {} but '{}' reports {}",
            loaded[0].1.experiment,
            metric.name(),
            m.experiment,
            other.name()
        )));
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::Other(format!("{}: {e}", out.display())))?;
    let mut w = csv::Writer::from_writer(create(&out.join(REPORT))?);
    w.write_record(REPORT_HEADER).map_err(CliError::other)?;
    for (dir, m, _) in &loaded {
        let results = m
            .tables
            .iter()
            .find(|t| t.as_str() == RESULTS)
            .ok_or_else(|| CliError::Data(format!("manifest for '{}' lists no {RESULTS}", m.experiment)))?;
        let rows = read_results(File::open(dir.join(results)).map_err(CliError::data)?)?;
        let stats = |split: &str| -> CliResult<(Option<f64>, Option<f64>, usize)> {
            match metric_values(&rows, split, metric.name()) {
                Some(v) => {
                    let s = summarize(&v).map_err(CliError::other)?;
                    Ok((Some(s.mean), s.std_error, v.len()))
                }
                None => Ok((None, None, 0)),
            }
        };
        let (src_src, src_src_se, _) = stats(SRC_ON_SOURCE)?;
        let (src_tg, src_tg_se, _) = stats(SRC_ON_TARGET)?;
        let (tg_tg, tg_tg_se, n) = stats(TG_ON_TARGET)?;
        let test = match (
            metric_values(&rows, TG_ON_TARGET, metric.name()),
            metric_values(&rows, SRC_ON_TARGET, metric.name()),
        ) {
            (Some(a), Some(b)) if a.len() == b.len() && a.len() >= 2 => {
                Some(sico::stats::paired_t_one_tailed(&a, &b, ALPHA).map_err(CliError::other)?)
            }
            _ => None,
        };
        w.write_record([
            m.experiment.clone(),
            metric.name().to_string(),
            n.to_string(),
            fmt_opt(src_src),
            fmt_opt(src_src_se),
            fmt_opt(src_tg),
            fmt_opt(src_tg_se),
            fmt_opt(tg_tg),
            fmt_opt(tg_tg_se),
            fmt_opt(test.as_ref().map(|t| t.mean_diff)),
            fmt_opt(test.as_ref().map(|t| t.t)),
            test.as_ref().map_or_else(|| "NA".into(), |t| t.df.to_string()),
            test.as_ref().map_or_else(|| "NA".into(), |t| t.significant.to_string()),
        ])
        .map_err(CliError::other)?;
    }
    w.flush().map_err(CliError::other)?;
    drop(w);
    let mut manifest =
        RunManifest::new("report", &loaded.iter().map(|(_, m, _)| m.experiment.as_str()).collect::<Vec<_>>().join("+"));
    manifest.metric = Some(metric);
    manifest.tables.push(REPORT.to_string());
    manifest.write(out)
}
