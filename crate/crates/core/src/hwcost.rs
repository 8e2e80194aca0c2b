//! Parametric hardware cost roll-up. The model is declaredly calibration,
//! not prediction: per-stage overheads and tile/peripheral costs come from a
//! JSON parameter file, and the roll-up combines them with crossbar telemetry
//! into per-channel power, energy, area and latency. Energy is power ×
//! latency by construction and that identity is enforced on every report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xbar::XbarTelemetry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageCost {
    pub power_w: f64,
    pub latency_s: f64,
    pub area_m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HwParams {
    pub tile_read_power_w: f64,
    pub tile_area_m2: f64,
    pub periph_power_w: f64,
    pub periph_area_m2: f64,
    pub vmm_latency_s: f64,
    /// Fraction of time the tile array draws read power.
    pub tile_duty_cycle: f64,
    /// Fixed overheads per pipeline stage (keys: filtering, detection,
    /// extraction, classification, reporting).
    pub stage_overheads: BTreeMap<String, StageCost>,
}

impl HwParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            self.tile_read_power_w,
            self.tile_area_m2,
            self.periph_power_w,
            self.periph_area_m2,
            self.vmm_latency_s,
            self.tile_duty_cycle,
        ];
        if scalars.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("hardware parameters must be finite and >= 0"));
        }
        if self.tile_duty_cycle > 1.0 {
            return Err(Error::invalid("tile_duty_cycle must be <= 1"));
        }
        for (stage, cost) in &self.stage_overheads {
            if [cost.power_w, cost.latency_s, cost.area_m2]
                .iter()
                .any(|v| !v.is_finite() || *v < 0.0)
            {
                return Err(Error::invalid(format!("stage '{stage}' has a negative cost")));
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<HwParams> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let params: HwParams =
            serde_json::from_str(&raw).map_err(|e| Error::parse(path, e.to_string()))?;
        params.validate()?;
        Ok(params)
    }
}

/// Per-channel cost report in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HwReport {
    pub power_w_per_ch: f64,
    pub energy_j_per_ch: f64,
    pub area_m2_per_ch: f64,
    pub latency_s_per_ch: f64,
}

impl HwReport {
    /// Energy must equal power × latency within 0.1%.
    pub fn check_identity(&self) -> Result<()> {
        let product = self.power_w_per_ch * self.latency_s_per_ch;
        let err = (self.energy_j_per_ch - product).abs();
        if err > 1e-3 * product.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::Consistency(format!(
                "energy {} != power x latency {}",
                self.energy_j_per_ch, product
            )));
        }
        Ok(())
    }
}

/// Emitted form with explicit unit suffixes (area in mm² per channel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HwReportJson {
    pub power_mw_per_ch: f64,
    pub energy_mj_per_ch: f64,
    pub area_mm2_per_ch: f64,
    pub latency_ms_per_ch: f64,
}

impl From<&HwReport> for HwReportJson {
    fn from(r: &HwReport) -> Self {
        HwReportJson {
            power_mw_per_ch: r.power_w_per_ch * 1e3,
            energy_mj_per_ch: r.energy_j_per_ch * 1e3,
            area_mm2_per_ch: r.area_m2_per_ch * 1e6,
            latency_ms_per_ch: r.latency_s_per_ch * 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Workload {
    pub n_spikes: usize,
    pub n_channels: usize,
}

/// Rolls telemetry and parameters into a per-channel report.
pub fn estimate(params: &HwParams, telemetry: &XbarTelemetry, workload: &Workload) -> Result<HwReport> {
    params.validate()?;
    if workload.n_channels < 1 {
        return Err(Error::invalid("n_channels must be >= 1"));
    }
    let ch = workload.n_channels as f64;
    let stage_power: f64 = params.stage_overheads.values().map(|s| s.power_w).sum();
    let stage_latency: f64 = params.stage_overheads.values().map(|s| s.latency_s).sum();
    let stage_area: f64 = params.stage_overheads.values().map(|s| s.area_m2).sum();

    let tiles = telemetry.mapped_tiles as f64;
    let vmm_time = telemetry.vmm_count as f64 * params.vmm_latency_s;

    let power = (params.tile_duty_cycle * params.tile_read_power_w * tiles
        + params.periph_power_w
        + stage_power)
        / ch;
    let latency = (stage_latency + vmm_time) / ch;
    let area = (params.tile_area_m2 * tiles + params.periph_area_m2 + stage_area) / ch;
    let report = HwReport {
        power_w_per_ch: power,
        energy_j_per_ch: power * latency,
        area_m2_per_ch: area,
        latency_s_per_ch: latency,
    };
    report.check_identity()?;
    Ok(report)
}

/// A report where individual criteria may be unreported (serialized as null).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PartialHwReport {
    pub power_w_per_ch: Option<f64>,
    pub energy_j_per_ch: Option<f64>,
    pub area_m2_per_ch: Option<f64>,
    pub latency_s_per_ch: Option<f64>,
}

impl From<&HwReport> for PartialHwReport {
    fn from(r: &HwReport) -> Self {
        PartialHwReport {
            power_w_per_ch: Some(r.power_w_per_ch),
            energy_j_per_ch: Some(r.energy_j_per_ch),
            area_m2_per_ch: Some(r.area_m2_per_ch),
            latency_s_per_ch: Some(r.latency_s_per_ch),
        }
    }
}

impl PartialHwReport {
    pub fn from_file(path: &Path) -> Result<PartialHwReport> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// One elementwise ratio; `ratio == None` carries the reason (mirrors the
/// "not reported" marker in published comparisons).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareEntry {
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

fn ratio_of(a: Option<f64>, b: Option<f64>) -> CompareEntry {
    match (a, b) {
        (Some(x), Some(y)) if y != 0.0 => CompareEntry {
            ratio: Some(x / y),
            reason: None,
        },
        (Some(_), Some(_)) => CompareEntry {
            ratio: None,
            reason: Some("division by zero".into()),
        },
        _ => CompareEntry {
            ratio: None,
            reason: Some("not reported".into()),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub power: CompareEntry,
    pub energy: CompareEntry,
    pub area: CompareEntry,
    pub latency: CompareEntry,
}

/// Elementwise a/b with absent fields propagating as absent ratios.
pub fn compare(a: &PartialHwReport, b: &PartialHwReport) -> CompareReport {
    CompareReport {
        power: ratio_of(a.power_w_per_ch, b.power_w_per_ch),
        energy: ratio_of(a.energy_j_per_ch, b.energy_j_per_ch),
        area: ratio_of(a.area_m2_per_ch, b.area_m2_per_ch),
        latency: ratio_of(a.latency_s_per_ch, b.latency_s_per_ch),
    }
}
