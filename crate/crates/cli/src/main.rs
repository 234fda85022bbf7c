use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sico_cli::commands::{self, Overrides, SynthKind, SynthParams};
use sico_cli::config::LoadedConfig;
use sico_cli::{CliError, CliResult};

/// Step-wise source-free domain adaptation experiments.
///
/// Exit codes: 0 success, 1 usage or config, 2 data, 3 architecture mismatch,
/// 4 metric conflict, 5 other failure. On success stdout holds only the
/// manifest path.
#[derive(Parser)]
#[command(name = "sico", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in config: gauss-shift, apnea-synth or digits-small.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> CliResult<(LoadedConfig, Overrides)> {
        let loaded = match (&self.config, &self.preset) {
            (Some(path), _) => LoadedConfig::from_file(path)?,
            (None, Some(name)) => LoadedConfig::builtin(name)?,
            (None, None) => return Err(CliError::config("--config or --preset is required")),
        };
        Ok((loaded, Overrides { out: self.out.clone(), seed: self.seed }))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train and release one source classifier per repetition.
    TrainSource(ConfigArgs),
    /// Adapt released source classifiers to the unlabeled target data.
    Adapt {
        #[command(flatten)]
        config: ConfigArgs,
        /// Checkpoint file, or a train-source output directory.
        #[arg(long)]
        source: PathBuf,
    },
    /// Write synthetic datasets as signal CSV files.
    Synth {
        /// TOML file whose [synth] table supplies defaults for the flags below.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: Option<SynthKind>,
        /// Samples per domain (gaussians) or windows (apnea).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        classes: Option<usize>,
        /// Target shift, comma-separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        shift: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        rotation_deg: Option<f64>,
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        window_len: Option<usize>,
    },
    /// Aggregate adapt manifests into one comparison table.
    Report {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long, default_value = "runs/report")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<PathBuf> {
    match cli.command {
        Command::TrainSource(args) => {
            let (loaded, ov) = args.load()?;
            commands::train_source(&loaded, &ov)
        }
        Command::Adapt { config, source } => {
            let (loaded, ov) = config.load()?;
            commands::adapt(&loaded, &source, &ov)
        }
        Command::Synth { config, kind, n, seed, out, classes, shift, rotation_deg, noise_sigma, window_len } => {
            let mut table = match &config {
                Some(path) => commands::synth_table(path)?,
                None => toml::Table::new(),
            };
            let mut set = |key: &str, value: Option<toml::Value>| {
                if let Some(v) = value {
                    table.insert(key.to_string(), v);
                }
            };
            set("kind", kind.map(|k| toml::Value::from(format!("{k:?}").to_lowercase())));
            set("n", n.map(|v| toml::Value::from(v as i64)));
            set("seed", seed.map(|v| toml::Value::from(v as i64)));
            set("classes", classes.map(|v| toml::Value::from(v as i64)));
            set("shift", shift.map(toml::Value::from));
            set("rotation_deg", rotation_deg.map(toml::Value::from));
            set("noise_sigma", noise_sigma.map(toml::Value::from));
            set("window_len", window_len.map(|v| toml::Value::from(v as i64)));
            let params: SynthParams = table.try_into().map_err(CliError::config)?;
            commands::synth(&params, &out)
        }
        Command::Report { manifests, out } => commands::report(&manifests, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sico: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
