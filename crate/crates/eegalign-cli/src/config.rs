//! Strict JSON configuration for experiment runs.
//!
//! Unknown keys anywhere in the file are errors, so a typo cannot silently
//! fall back to a default and change an experiment. Every run writes the
//! fully resolved configuration, defaults included, to `run.json` next to
//! its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use eegalign::data::{SynthConfig, TaskKind};
use eegalign::harness::{OnlineConfig, PipelineSpec};
use serde::{Deserialize, Serialize};

/// On-disk configuration file. Sections are optional; each subcommand
/// demands the ones it needs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    /// Where trials come from: an archive on disk or the synthesizer.
    pub dataset: Option<DatasetSource>,
    /// Alignment strategy and model chain.
    pub pipeline: Option<PipelineSpec>,
    /// Schedule for `eval-online`.
    pub online: Option<OnlineConfig>,
    /// Steps for `preprocess`.
    pub preprocess: Option<PreprocessConfig>,
    /// Base seed for cross-validation shuffles and online pool draws.
    pub seed: Option<u64>,
}

impl ConfigFile {
    /// Parses a configuration file, rejecting unknown keys.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("config: cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("config: {}: {e}", path.display()))
    }
}

/// Exactly one of `path` (an existing archive directory) or `synth` must be
/// set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSource {
    pub path: Option<PathBuf>,
    pub synth: Option<SynthSource>,
}

/// Synthesizer settings: the paradigm plus generator parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSource {
    pub task: TaskKind,
    pub params: SynthConfig,
}

fn default_filter_order() -> usize {
    50
}

/// Trial-level preprocessing, applied in order: band-pass filter, re-epoch,
/// downsample. Omitted steps are skipped.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Pass band in Hz for a windowed-sinc filter with half-amplitude edges.
    pub band: Option<(f64, f64)>,
    /// Filter length minus one; even so the group delay is a whole number of
    /// samples.
    pub filter_order: usize,
    /// Window in seconds relative to each stored trial's start.
    pub epoch_window: Option<(f64, f64)>,
    /// Keep every n-th sample, starting from the first.
    pub downsample: Option<usize>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            band: None,
            filter_order: default_filter_order(),
            epoch_window: None,
            downsample: None,
        }
    }
}

/// Fully resolved run description echoed to `run.json`. Fields that do not
/// apply to the command are `null` so the file always has the same shape.
#[derive(Debug, Serialize)]
pub struct ResolvedRun {
    pub command: String,
    pub out: PathBuf,
    pub seed: u64,
    /// Requested worker threads; 0 means one per core.
    pub threads: usize,
    pub dataset: Option<DatasetSource>,
    pub pipeline: Option<PipelineSpec>,
    pub online: Option<OnlineConfig>,
    pub preprocess: Option<PreprocessConfig>,
    /// Score CSVs consumed by `report`.
    pub report_inputs: Vec<PathBuf>,
}

impl ResolvedRun {
    /// Writes the resolved configuration next to the run's artifacts.
    pub fn write(&self, out_dir: &Path) -> Result<(), String> {
        let path = out_dir.join("run.json");
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| format!("run.json: serialization failed: {e}"))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| format!("run.json: cannot write {}: {e}", path.display()))
    }
}
