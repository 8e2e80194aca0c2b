//! Run and sweep report schemas plus the text renderer. The serde structs
//! (all `deny_unknown_fields`) are the published schema: a report validates
//! iff it parses strictly and passes `validate()`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hwcost::HwReportJson;
use crate::run::config::RunConfig;
use crate::xbar::XbarTelemetry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: String,
    pub fs_hz: f64,
    pub duration_s: f64,
    pub n_events: usize,
    pub n_units: usize,
    pub snr_target: f64,
    pub snr_measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub threshold_used: f64,
    pub n_detections: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub false_neg: usize,
    pub detection_accuracy: f64,
    /// Absent when no ROC candidates could be harvested.
    pub detection_auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterIcv {
    pub cluster: usize,
    pub n: usize,
    pub icv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationSection {
    /// Spikes actually scored (matched detections, or all ground-truth events
    /// under oracle detection), after edge drops.
    pub n_spikes_scored: usize,
    pub dropped_snippets: usize,
    pub k: usize,
    pub selected_indices: Vec<usize>,
    pub classification_accuracy: f64,
    pub aggregate_icv: f64,
    pub per_cluster: Vec<ClusterIcv>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub config: RunConfig,
    pub dataset: DatasetSection,
    pub detection: DetectionSection,
    pub classification: ClassificationSection,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub xbar: Option<XbarTelemetry>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hw: Option<HwReportJson>,
}

impl RunReport {
    /// Strict schema check: parse + cross-field invariants.
    pub fn from_json_str(raw: &str) -> Result<RunReport> {
        let report: RunReport = serde_json::from_str(raw)
            .map_err(|e| Error::config(format!("run report schema mismatch: {e}")))?;
        report.validate()?;
        Ok(report)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64, name: &str| {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Consistency(format!("{name} = {v} outside [0, 1]")));
            }
            Ok(())
        };
        unit(self.detection.detection_accuracy, "detection_accuracy")?;
        if let Some(a) = self.detection.detection_auroc {
            unit(a, "detection_auroc")?;
        }
        unit(
            self.classification.classification_accuracy,
            "classification_accuracy",
        )?;
        if self.classification.aggregate_icv < 0.0 {
            return Err(Error::Consistency("aggregate_icv is negative".into()));
        }
        if let Some(hw) = &self.hw {
            let product = hw.power_mw_per_ch * hw.latency_ms_per_ch * 1e-3; // mW·ms -> mJ
            if (hw.energy_mj_per_ch - product).abs() > 1e-3 * product.abs().max(1e-300) {
                return Err(Error::Consistency(
                    "hw energy does not equal power x latency".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRow {
    pub snr: f64,
    pub extractor: String,
    pub alignment: String,
    pub detection_accuracy: Option<f64>,
    pub detection_auroc: Option<f64>,
    pub classification_accuracy: Option<f64>,
    pub aggregate_icv: Option<f64>,
    /// Gap marker: set when this cell could not be computed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepReport {
    /// One row per (snr × extractor × alignment) cell, in config order.
    pub rows: Vec<SweepRow>,
    /// Pearson correlation between aggregate ICV and classification accuracy
    /// pooled over all complete rows.
    pub pcc_icv_accuracy: Option<f64>,
    /// The same correlation restricted to each extractor's rows.
    pub pcc_per_extractor: BTreeMap<String, Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hw: Option<HwReportJson>,
}

impl SweepReport {
    pub fn from_json_str(raw: &str) -> Result<SweepReport> {
        let report: SweepReport = serde_json::from_str(raw)
            .map_err(|e| Error::config(format!("sweep report schema mismatch: {e}")))?;
        if let Some(p) = report.pcc_icv_accuracy {
            if !(-1.0..=1.0).contains(&p) {
                return Err(Error::Consistency(format!("pcc {p} outside [-1, 1]")));
            }
        }
        Ok(report)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn fmt_opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map_or_else(|| "N/R".to_string(), f)
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

/// Renders the eight evaluation criteria of a single run as a text table.
pub fn render_run_report(report: &RunReport) -> String {
    let hw = report.hw.as_ref();
    let mut out = String::new();
    out.push_str(&format!(
        "Run report: {} | extractor {} | alignment {}\n",
        report.dataset.path, report.config.extractor, report.config.alignment
    ));
    out.push_str(&format!(
        "Dataset: snr_target {} | snr_measured {:.4} | {} events, {} units\n",
        report.dataset.snr_target,
        report.dataset.snr_measured,
        report.dataset.n_events,
        report.dataset.n_units
    ));
    let rows: Vec<(String, String)> = vec![
        (
            "(1) Detection Accuracy (%)".into(),
            pct(report.detection.detection_accuracy),
        ),
        (
            "(2) Detection AUROC".into(),
            fmt_opt(report.detection.detection_auroc, |v| format!("{v:.4}")),
        ),
        (
            "(3) Feature Extraction and Classification Accuracy (%)".into(),
            pct(report.classification.classification_accuracy),
        ),
        (
            "(4) ICV".into(),
            format!("{:.6}", report.classification.aggregate_icv),
        ),
        (
            "(5) Power (mW/Ch)".into(),
            fmt_opt(hw.map(|h| h.power_mw_per_ch), |v| format!("{v:.2}")),
        ),
        (
            "(6) Energy (mJ/Ch)".into(),
            fmt_opt(hw.map(|h| h.energy_mj_per_ch), |v| format!("{v:.2}")),
        ),
        (
            "(7) Area (mm^2/Ch)".into(),
            fmt_opt(hw.map(|h| h.area_mm2_per_ch), |v| format!("{v:.2}")),
        ),
        (
            "(8) Latency (ms/Ch)".into(),
            fmt_opt(hw.map(|h| h.latency_ms_per_ch), |v| format!("{v:.2}")),
        ),
    ];
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    out.push_str(&format!("{:<width$}  Value\n", "Criterion"));
    for (name, value) in rows {
        out.push_str(&format!("{name:<width$}  {value}\n"));
    }
    out
}

/// Renders a sweep report: one line per cell plus the correlation summary.
pub fn render_sweep_report(report: &SweepReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>6}  {:>10}  {:>9}  {:>8}  {:>8}  {:>8}  {:>12}\n",
        "snr", "extractor", "alignment", "det_acc", "auroc", "cls_acc", "icv"
    ));
    for row in &report.rows {
        if let Some(err) = &row.error {
            out.push_str(&format!(
                "{:>6}  {:>10}  {:>9}  gap: {err}\n",
                row.snr, row.extractor, row.alignment
            ));
            continue;
        }
        out.push_str(&format!(
            "{:>6}  {:>10}  {:>9}  {:>8}  {:>8}  {:>8}  {:>12}\n",
            row.snr,
            row.extractor,
            row.alignment,
            fmt_opt(row.detection_accuracy, pct),
            fmt_opt(row.detection_auroc, |v| format!("{v:.4}")),
            fmt_opt(row.classification_accuracy, pct),
            fmt_opt(row.aggregate_icv, |v| format!("{v:.6}")),
        ));
    }
    out.push_str(&format!(
        "\npcc(icv, accuracy) pooled: {}\n",
        fmt_opt(report.pcc_icv_accuracy, |v| format!("{v:.4}"))
    ));
    for (extractor, p) in &report.pcc_per_extractor {
        out.push_str(&format!(
            "pcc(icv, accuracy) {extractor}: {}\n",
            fmt_opt(*p, |v| format!("{v:.4}"))
        ));
    }
    if let Some(hw) = &report.hw {
        out.push_str(&format!(
            "hw: power {:.2} mW/Ch | energy {:.2} mJ/Ch | area {:.2} mm^2/Ch | latency {:.2} ms/Ch\n",
            hw.power_mw_per_ch, hw.energy_mj_per_ch, hw.area_mm2_per_ch, hw.latency_ms_per_ch
        ));
    } else {
        out.push_str("hw: N/R\n");
    }
    out
}

/// Renders either report kind from raw JSON; errors name the offending field.
pub fn render_report_json(raw: &str) -> Result<String> {
    let value: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| Error::config(format!("invalid JSON: {e}")))?;
    if value.get("rows").is_some() {
        Ok(render_sweep_report(&SweepReport::from_json_str(raw)?))
    } else {
        Ok(render_run_report(&RunReport::from_json_str(raw)?))
    }
}
