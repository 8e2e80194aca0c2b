//! JSON run configuration for the CLI commands. Every field has a default so
//! minimal config files stay minimal.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Extractor, WaveletSpec};
use crate::pipeline::{Alignment, FilterSpec};
use crate::xbar::DeviceModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub seed: u64,
    pub n_units: usize,
    pub duration_s: f64,
    pub firing_rate_hz: f64,
    pub refractory_ms: f64,
    pub snr_levels: Vec<f64>,
    pub bank_size: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            seed: 0,
            n_units: 3,
            duration_s: 60.0,
            firing_rate_hz: 20.0,
            refractory_ms: 2.0,
            snr_levels: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            bank_size: 16,
        }
    }
}

impl GenerateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snr_levels.is_empty() {
            return Err(Error::config("snr_levels must not be empty"));
        }
        if self.snr_levels.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::config("snr levels must be > 0"));
        }
        if self.n_units < 1 || self.n_units > self.bank_size {
            return Err(Error::config("need 1 <= n_units <= bank_size"));
        }
        Ok(())
    }

    /// Evenly spread template ids shared by every generated SNR level.
    pub fn template_ids(&self) -> Vec<u32> {
        (0..self.n_units)
            .map(|i| (i * self.bank_size / self.n_units) as u32)
            .collect()
    }
}

/// Shared pipeline settings for `run` and `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSettings {
    pub filter: FilterSpec,
    /// Detector threshold factor over the robust noise std.
    pub detector_k: f64,
    pub lockout_ms: f64,
    /// Low threshold factor used to harvest ROC candidates.
    pub roc_harvest_k: f64,
    pub window_ms: f64,
    pub pre_ms: f64,
    pub wavelet: WaveletSpec,
    /// Selected feature dimension (2 or 3).
    pub n_features: usize,
    pub device: DeviceModel,
    /// Hardware calibration parameter file; enables the hw section for
    /// crossbar runs.
    pub hw_calibration: Option<PathBuf>,
    /// Cut snippets at ground-truth event times instead of detections, so the
    /// classification score is independent of the detector.
    pub oracle_detection: bool,
    /// Detection matching tolerance.
    pub tolerance_ms: f64,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            filter: FilterSpec::default(),
            detector_k: 4.0,
            lockout_ms: 1.0,
            roc_harvest_k: 1.0,
            window_ms: 2.0,
            pre_ms: 0.5,
            wavelet: WaveletSpec::default(),
            n_features: 3,
            device: DeviceModel::default(),
            hw_calibration: None,
            oracle_detection: false,
            tolerance_ms: 0.5,
        }
    }
}

impl PipelineSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.detector_k > 0.0) || !(self.roc_harvest_k > 0.0) {
            return Err(Error::config("detector thresholds must be > 0"));
        }
        if self.n_features != 2 && self.n_features != 3 {
            return Err(Error::config("n_features must be 2 or 3"));
        }
        if !(self.tolerance_ms > 0.0) {
            return Err(Error::config("tolerance_ms must be > 0"));
        }
        self.device.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_extractor")]
    pub extractor: Extractor,
    #[serde(default = "default_alignment")]
    pub alignment: Alignment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pipeline: PipelineSettings,
}

impl RunConfig {
    pub fn new(dataset: PathBuf) -> Self {
        RunConfig {
            dataset,
            extractor: default_extractor(),
            alignment: default_alignment(),
            seed: 0,
            pipeline: PipelineSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub datasets_root: PathBuf,
    #[serde(default = "default_snr_levels")]
    pub snr_levels: Vec<f64>,
    #[serde(default = "default_extractors")]
    pub extractors: Vec<Extractor>,
    #[serde(default = "default_alignments")]
    pub alignments: Vec<Alignment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sweep_pipeline")]
    pub pipeline: PipelineSettings,
}

fn default_extractor() -> Extractor {
    Extractor::DwtXbar
}

fn default_alignment() -> Alignment {
    Alignment::Peak
}

fn default_snr_levels() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0, 16.0]
}

fn default_extractors() -> Vec<Extractor> {
    vec![Extractor::DwtXbar, Extractor::IntFilter]
}

fn default_alignments() -> Vec<Alignment> {
    vec![Alignment::None, Alignment::Peak]
}

/// Sweeps default to oracle detection so the classification criterion is
/// scored on ground-truth spikes, independent of detector tuning.
fn default_sweep_pipeline() -> PipelineSettings {
    PipelineSettings {
        oracle_detection: true,
        ..PipelineSettings::default()
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snr_levels.is_empty() || self.extractors.is_empty() || self.alignments.is_empty() {
            return Err(Error::config(
                "snr_levels, extractors and alignments must all be nonempty",
            ));
        }
        self.pipeline.validate()
    }
}

/// Directory name for one SNR level ("snr_4", "snr_0p5").
pub fn snr_dir_name(level: f64) -> String {
    if level == level.trunc() {
        format!("snr_{}", level as i64)
    } else {
        format!("snr_{}", level.to_string().replace('.', "p"))
    }
}

pub fn load_json_config<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| Error::parse(path, e.to_string()))
}
