//! End-to-end experiment orchestration behind the CLI subcommands:
//! dataset generation, single pipeline runs, full factorial sweeps, and
//! report rendering. Everything is a pure function of (config, seed); sweep
//! cells run in parallel with per-cell seed streams and deterministic merge
//! order, so identical configs produce byte-identical artifacts.

pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::datagen::{
    make_template_bank, read_dataset, synthesize, write_dataset, DatasetConfig, GroundTruth,
    Recording, TemplateBank,
};
use crate::error::{Error, Result};
use crate::features::{
    build_dwt_matrices, dwt, integer_filter_features, kmeans, select_features, Extractor,
    FeatureMatrix,
};
use crate::hwcost::{estimate, HwParams, HwReportJson, Workload};
use crate::mat::Mat;
use crate::metrics::{
    auroc, classification_accuracy, detection_accuracy, icv, match_detections, pcc,
};
use crate::pipeline::{align, bandpass, detect, extract_snippets, Alignment, DetectionResult};
use crate::rng::{mix2, TAG_VMM};
use crate::xbar::{dwt_on_crossbar, program, XbarTelemetry};

pub use config::{
    load_json_config, snr_dir_name, GenerateConfig, PipelineSettings, RunConfig, SweepConfig,
};
pub use report::{
    render_report_json, render_run_report, render_sweep_report, ClassificationSection, ClusterIcv,
    DatasetSection, DetectionSection, RunReport, SweepReport, SweepRow,
};

fn in_stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ (Error::Config(_) | Error::Parse { .. } | Error::Stage { .. }) => e,
        other => Error::Stage {
            stage: name,
            message: other.to_string(),
        },
    })
}

/// Generates one dataset directory per SNR level under `out`, sharing the
/// template bank, spike trains and noise realization across levels.
pub fn cmd_generate(cfg: &GenerateConfig, out: &Path, force: bool) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    if out.exists() {
        let non_empty = std::fs::read_dir(out)
            .map_err(|e| Error::io(out, e))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(Error::config(format!(
                "output directory {} is not empty (pass --force to overwrite)",
                out.display()
            )));
        }
    }
    let bank = make_template_bank(cfg.bank_size, cfg.seed)?;
    let template_ids = cfg.template_ids();
    let mut dirs = Vec::new();
    for &snr in &cfg.snr_levels {
        let dataset_cfg = DatasetConfig {
            seed: cfg.seed,
            n_units: cfg.n_units,
            duration_s: cfg.duration_s,
            firing_rate_hz: cfg.firing_rate_hz,
            refractory_ms: cfg.refractory_ms,
            snr,
            fs_synth_hz: crate::datagen::FS_SYNTH_HZ,
            fs_out_hz: crate::datagen::FS_SYNTH_HZ / crate::datagen::DECIM as u32,
            template_ids: template_ids.clone(),
        };
        let (recording, gt) = synthesize(&dataset_cfg, &bank)?;
        let dir = out.join(snr_dir_name(snr));
        write_dataset(&dir, &recording, &gt)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

/// Loaded inputs for one pipeline run.
pub struct RunInputs<'a> {
    pub recording: &'a Recording,
    pub gt: &'a GroundTruth,
    pub bank: &'a TemplateBank,
    pub dataset_label: String,
}

/// Executes stages (a)-(e) on a dataset directory.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.pipeline.validate()?;
    let (recording, gt) = in_stage("load", read_dataset(&cfg.dataset))?;
    let meta = recording
        .meta
        .as_ref()
        .ok_or_else(|| Error::config("dataset has no metadata"))?;
    let bank = in_stage("load", meta.bank())?;
    let inputs = RunInputs {
        recording: &recording,
        gt: &gt,
        bank: &bank,
        dataset_label: cfg.dataset.display().to_string(),
    };
    run_on_loaded(&inputs, cfg, None)
}

/// Pipeline run on already-loaded data. `detection_override` substitutes the
/// detector output (used to study detector-independence of later stages).
pub fn run_on_loaded(
    inputs: &RunInputs,
    cfg: &RunConfig,
    detection_override: Option<DetectionResult>,
) -> Result<RunReport> {
    let settings = &cfg.pipeline;
    settings.validate()?;
    let recording = inputs.recording;
    let gt = inputs.gt;
    let meta = recording.meta.as_ref();

    // (a) bandpass
    let filtered = in_stage("filter", bandpass(recording, &settings.filter))?;

    // (b) detection + criteria (1) and (2)
    let detection = match detection_override {
        Some(d) => d,
        None => in_stage(
            "detect",
            detect(&filtered, settings.detector_k, settings.lockout_ms),
        )?,
    };
    let match_report = in_stage(
        "detect",
        match_detections(gt, &detection, settings.tolerance_ms, filtered.fs_hz),
    )?;
    let det_accuracy = in_stage("detect", detection_accuracy(&match_report))?;
    let det_auroc = in_stage("roc", harvest_auroc(&filtered, gt, settings))?;

    // (c) snippets for classification: matched detections, or every
    // ground-truth event under oracle detection.
    let (times, truth): (Vec<usize>, Vec<u32>) = if settings.oracle_detection {
        (
            gt.events.iter().map(|e| e.t).collect(),
            gt.events.iter().map(|e| e.unit).collect(),
        )
    } else {
        (
            match_report
                .pairs
                .iter()
                .map(|&(_, d)| detection.times[d])
                .collect(),
            match_report
                .pairs
                .iter()
                .map(|&(g, _)| gt.events[g].unit)
                .collect(),
        )
    };
    let set = in_stage(
        "extract",
        extract_snippets(&filtered, &times, settings.window_ms, settings.pre_ms),
    )?;
    let set = align(&set, &filtered, cfg.alignment);
    let truth_kept: Vec<u32> = set.kept.iter().map(|&i| truth[i]).collect();
    if set.is_empty() {
        return Err(Error::Stage {
            stage: "extract",
            message: "no snippets survived extraction".into(),
        });
    }

    // (d) feature extraction
    let (features, telemetry) = in_stage("features", extract_feature_matrix(&set, cfg))?;

    // (e) clustering + criteria (3) and (4)
    let k = gt.unit_ids().len();
    let labels = in_stage("cluster", kmeans(&features, k, cfg.seed))?;
    let cls_accuracy = in_stage(
        "score",
        classification_accuracy(&labels.labels, &truth_kept),
    )?;
    let stats = in_stage("score", icv(&set.snippets, &labels.labels, k))?;

    let hw = match (&settings.hw_calibration, &telemetry) {
        (Some(path), Some(telemetry)) => {
            let params = in_stage("hw", HwParams::from_file(path))?;
            let report = in_stage(
                "hw",
                estimate(
                    &params,
                    telemetry,
                    &Workload {
                        n_spikes: set.len(),
                        n_channels: 1,
                    },
                ),
            )?;
            Some(HwReportJson::from(&report))
        }
        _ => None,
    };

    let report = RunReport {
        config: cfg.clone(),
        dataset: DatasetSection {
            path: inputs.dataset_label.clone(),
            fs_hz: recording.fs_hz,
            duration_s: meta.map_or(recording.len() as f64 / recording.fs_hz, |m| m.duration_s),
            n_events: gt.len(),
            n_units: k,
            snr_target: meta.map_or(f64::NAN, |m| m.snr_target),
            snr_measured: meta.map_or(f64::NAN, |m| m.snr_measured),
        },
        detection: DetectionSection {
            threshold_used: detection.threshold_used,
            n_detections: detection.len(),
            tp: match_report.tp,
            fp: match_report.fp,
            false_neg: match_report.false_neg,
            detection_accuracy: det_accuracy,
            detection_auroc: det_auroc,
        },
        classification: ClassificationSection {
            n_spikes_scored: set.len(),
            dropped_snippets: set.dropped,
            k,
            selected_indices: features.selected_indices.clone(),
            classification_accuracy: cls_accuracy,
            aggregate_icv: stats.aggregate_icv,
            per_cluster: stats
                .per_cluster
                .iter()
                .map(|c| ClusterIcv {
                    cluster: c.cluster,
                    n: c.n,
                    icv: c.icv,
                })
                .collect(),
        },
        xbar: telemetry,
        hw,
    };
    report.validate()?;
    Ok(report)
}

/// Detection ROC: positives are harvested candidates matched to ground
/// truth; negatives are candidates at least 2 ms away from every event.
fn harvest_auroc(
    filtered: &Recording,
    gt: &GroundTruth,
    settings: &PipelineSettings,
) -> Result<Option<f64>> {
    let candidates = detect(filtered, settings.roc_harvest_k, settings.lockout_ms)?;
    let matches = match_detections(gt, &candidates, settings.tolerance_ms, filtered.fs_hz)?;
    let matched: std::collections::HashSet<usize> =
        matches.pairs.iter().map(|&(_, d)| d).collect();
    let pos: Vec<f64> = matches
        .pairs
        .iter()
        .map(|&(_, d)| candidates.scores[d])
        .collect();

    let guard = (2.0 * filtered.fs_hz / 1000.0).round() as i64;
    let gt_times: Vec<i64> = gt.events.iter().map(|e| e.t as i64).collect();
    let far_from_events = |t: i64| {
        let i = gt_times.partition_point(|&g| g < t);
        let mut nearest = i64::MAX;
        if i < gt_times.len() {
            nearest = nearest.min((gt_times[i] - t).abs());
        }
        if i > 0 {
            nearest = nearest.min((t - gt_times[i - 1]).abs());
        }
        nearest >= guard
    };
    let neg: Vec<f64> = candidates
        .times
        .iter()
        .enumerate()
        .filter(|&(d, &t)| !matched.contains(&d) && far_from_events(t as i64))
        .map(|(d, _)| candidates.scores[d])
        .collect();

    if pos.is_empty() || neg.is_empty() {
        return Ok(None);
    }
    auroc(&pos, &neg).map(Some)
}

/// Runs the configured extractor over the snippet rows. Crossbar runs also
/// return accumulated telemetry.
fn extract_feature_matrix(
    set: &crate::pipeline::SnippetSet,
    cfg: &RunConfig,
) -> Result<(FeatureMatrix, Option<XbarTelemetry>)> {
    let settings = &cfg.pipeline;
    let snippets = &set.snippets;
    match cfg.extractor {
        Extractor::DwtRef => {
            let rows: Result<Vec<Vec<f64>>> = (0..snippets.rows())
                .map(|r| dwt(snippets.row(r), &settings.wavelet))
                .collect();
            let coeffs = Mat::from_rows(rows?)?;
            let features = select_features(&coeffs, settings.n_features, Extractor::DwtRef)?;
            Ok((features, None))
        }
        Extractor::DwtXbar => {
            let mats = build_dwt_matrices(&settings.wavelet, snippets.cols())?;
            let state = program(mats.levels(), &settings.device, cfg.seed)?;
            let mut telemetry = XbarTelemetry::default();
            let mut rows = Vec::with_capacity(snippets.rows());
            for r in 0..snippets.rows() {
                let (coeffs, t) =
                    dwt_on_crossbar(snippets.row(r), &state, mix2(cfg.seed, TAG_VMM, r as u64))?;
                telemetry.merge(&t);
                rows.push(coeffs);
            }
            let coeffs = Mat::from_rows(rows)?;
            let features = select_features(&coeffs, settings.n_features, Extractor::DwtXbar)?;
            Ok((features, Some(telemetry)))
        }
        Extractor::IntFilter => Ok((integer_filter_features(set)?, None)),
    }
}

/// One sweep cell result.
struct CellOutcome {
    row: SweepRow,
    hw: Option<HwReportJson>,
}

fn run_cell(
    cfg: &SweepConfig,
    snr: f64,
    extractor: Extractor,
    alignment: Alignment,
) -> CellOutcome {
    let dataset = cfg.datasets_root.join(snr_dir_name(snr));
    let mut row = SweepRow {
        snr,
        extractor: extractor.to_string(),
        alignment: alignment.to_string(),
        detection_accuracy: None,
        detection_auroc: None,
        classification_accuracy: None,
        aggregate_icv: None,
        error: None,
    };
    if !dataset.is_dir() {
        row.error = Some(format!("dataset not found: {}", dataset.display()));
        return CellOutcome { row, hw: None };
    }
    let run_cfg = RunConfig {
        dataset,
        extractor,
        alignment,
        seed: cfg.seed,
        pipeline: cfg.pipeline.clone(),
    };
    match cmd_run(&run_cfg) {
        Ok(report) => {
            row.detection_accuracy = Some(report.detection.detection_accuracy);
            row.detection_auroc = report.detection.detection_auroc;
            row.classification_accuracy = Some(report.classification.classification_accuracy);
            row.aggregate_icv = Some(report.classification.aggregate_icv);
            CellOutcome {
                row,
                hw: report.hw,
            }
        }
        Err(e) => {
            row.error = Some(e.to_string());
            CellOutcome { row, hw: None }
        }
    }
}

/// Full factorial sweep over (snr × extractor × alignment). Writes
/// `sweep_report.json`, `sweep.csv` and the three plot-data files into `out`.
pub fn cmd_sweep(cfg: &SweepConfig, out: &Path) -> Result<SweepReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut cells = Vec::new();
    for &snr in &cfg.snr_levels {
        for &extractor in &cfg.extractors {
            for &alignment in &cfg.alignments {
                cells.push((snr, extractor, alignment));
            }
        }
    }
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(snr, extractor, alignment)| run_cell(cfg, snr, extractor, alignment))
        .collect();

    let rows: Vec<SweepRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    let hw = outcomes.iter().find_map(|o| o.hw);

    let paired = |rows: &[&SweepRow]| -> Option<f64> {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| Some((r.aggregate_icv?, r.classification_accuracy?)))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        pcc(&x, &y).ok()
    };
    let pcc_icv_accuracy = paired(&rows.iter().collect::<Vec<_>>());
    let mut pcc_per_extractor = BTreeMap::new();
    for extractor in &cfg.extractors {
        let subset: Vec<&SweepRow> = rows
            .iter()
            .filter(|r| r.extractor == extractor.to_string())
            .collect();
        pcc_per_extractor.insert(extractor.to_string(), paired(&subset));
    }

    let report = SweepReport {
        rows,
        pcc_icv_accuracy,
        pcc_per_extractor,
        hw,
    };

    std::fs::write(out.join("sweep_report.json"), report.to_json_pretty())
        .map_err(|e| Error::io(out.join("sweep_report.json"), e))?;
    write_sweep_csv(&report, &out.join("sweep.csv"))?;
    write_plot_data(cfg, &report, out)?;
    Ok(report)
}

fn write_sweep_csv(report: &SweepReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::config(e.to_string()))?;
    w.write_record([
        "snr",
        "extractor",
        "alignment",
        "detection_accuracy",
        "detection_auroc",
        "classification_accuracy",
        "aggregate_icv",
        "error",
    ])
    .map_err(|e| Error::config(e.to_string()))?;
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    for r in &report.rows {
        w.write_record([
            format!("{}", r.snr),
            r.extractor.clone(),
            r.alignment.clone(),
            fmt(r.detection_accuracy),
            fmt(r.detection_auroc),
            fmt(r.classification_accuracy),
            fmt(r.aggregate_icv),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| Error::config(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(serde::Serialize)]
struct PlotSeries {
    label: String,
    x: Vec<f64>,
    y: Vec<f64>,
}

#[derive(serde::Serialize)]
struct PlotData {
    title: String,
    xlabel: String,
    ylabel: String,
    series: Vec<PlotSeries>,
}

/// Plot-data files mirroring the three result panels: alignment impact on
/// accuracy, ICV vs SNR, and accuracy vs SNR.
fn write_plot_data(cfg: &SweepConfig, report: &SweepReport, out: &Path) -> Result<()> {
    let series_for = |extractor: &str, alignment: &str, field: fn(&SweepRow) -> Option<f64>| {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for row in &report.rows {
            if row.extractor == extractor && row.alignment == alignment {
                if let Some(v) = field(row) {
                    x.push(row.snr);
                    y.push(v);
                }
            }
        }
        (x, y)
    };
    let accuracy = |r: &SweepRow| r.classification_accuracy;
    let icv_field = |r: &SweepRow| r.aggregate_icv;

    let mut fig3a = PlotData {
        title: "Alignment impact on classification accuracy".into(),
        xlabel: "snr".into(),
        ylabel: "classification_accuracy".into(),
        series: vec![],
    };
    for extractor in &cfg.extractors {
        for alignment in &cfg.alignments {
            let (x, y) = series_for(&extractor.to_string(), &alignment.to_string(), accuracy);
            fig3a.series.push(PlotSeries {
                label: format!("{extractor}/{alignment}"),
                x,
                y,
            });
        }
    }

    // Panels (b) and (c) use the aligned pipeline when it was swept.
    let panel_alignment = if cfg.alignments.contains(&Alignment::Peak) {
        Alignment::Peak
    } else {
        cfg.alignments[0]
    };
    let mut fig3b = PlotData {
        title: "Intra-cluster variance vs SNR".into(),
        xlabel: "snr".into(),
        ylabel: "aggregate_icv".into(),
        series: vec![],
    };
    let mut fig3c = PlotData {
        title: "Classification accuracy vs SNR".into(),
        xlabel: "snr".into(),
        ylabel: "classification_accuracy".into(),
        series: vec![],
    };
    for extractor in &cfg.extractors {
        let (x, y) = series_for(
            &extractor.to_string(),
            &panel_alignment.to_string(),
            icv_field,
        );
        fig3b.series.push(PlotSeries {
            label: extractor.to_string(),
            x,
            y,
        });
        let (x, y) = series_for(
            &extractor.to_string(),
            &panel_alignment.to_string(),
            accuracy,
        );
        fig3c.series.push(PlotSeries {
            label: extractor.to_string(),
            x,
            y,
        });
    }

    for (name, data) in [("fig3a.json", &fig3a), ("fig3b.json", &fig3b), ("fig3c.json", &fig3c)] {
        let path = out.join(name);
        let raw = serde_json::to_string_pretty(data).map_err(|e| Error::config(e.to_string()))?;
        std::fs::write(&path, raw).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
