use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Metric;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionEntry {
    pub repetition: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_seed_base: Option<u64>,
    pub checkpoints: Vec<String>,
    pub tables: Vec<String>,
}

/// Index of one verb's outputs. File paths are relative to the manifest's
/// directory. Timings are the only non-reproducible content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub verb: String,
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    pub repetitions: Vec<RepetitionEntry>,
    /// Tables covering all repetitions.
    pub tables: Vec<String>,
    /// Wall-clock milliseconds per phase.
    pub timings_ms: BTreeMap<String, u128>,
}

impl RunManifest {
    pub fn new(verb: &str, experiment: &str) -> Self {
        Self {
            verb: verb.to_string(),
            experiment: experiment.to_string(),
            metric: None,
            config_digest: None,
            repetitions: Vec::new(),
            tables: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn file_name(verb: &str) -> String {
        format!("{verb}.manifest.json")
    }

    /// Every file the manifest lists, relative to its directory.
    pub fn files(&self) -> impl Iterator<Item = &String> {
        self.repetitions.iter().flat_map(|r| r.checkpoints.iter().chain(&r.tables)).chain(&self.tables)
    }

    /// Writes `<dir>/<verb>.manifest.json` after checking every listed file exists.
    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        if let Some(missing) = self.files().find(|f| !dir.join(f).is_file()) {
            return Err(CliError::Other(format!("manifest lists missing file {missing}")));
        }
        let path = dir.join(Self::file_name(&self.verb));
        let mut text = serde_json::to_string_pretty(self).map_err(CliError::other)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}
