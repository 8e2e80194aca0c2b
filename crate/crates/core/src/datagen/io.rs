//! Dataset container: a directory holding
//!
//! * `recording.f32le` — raw little-endian f32 samples,
//! * `meta.json`       — [`DatasetMeta`],
//! * `gt.json`         — array of `{"t": <sample>, "unit": <id>}`.
//!
//! The round trip is bit-exact for samples and events.

use std::fs;
use std::path::Path;

use super::synth::{DatasetMeta, GroundTruth, GtEvent, Recording};
use crate::error::{Error, Result};

pub const RECORDING_FILE: &str = "recording.f32le";
pub const META_FILE: &str = "meta.json";
pub const GT_FILE: &str = "gt.json";

pub fn write_dataset(dir: &Path, recording: &Recording, gt: &GroundTruth) -> Result<()> {
    let meta = recording
        .meta
        .as_ref()
        .ok_or_else(|| Error::invalid("recording has no dataset metadata to persist"))?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut bytes = Vec::with_capacity(recording.len() * 4);
    for &s in &recording.samples {
        bytes.extend_from_slice(&(s as f32).to_le_bytes());
    }
    let rec_path = dir.join(RECORDING_FILE);
    fs::write(&rec_path, bytes).map_err(|e| Error::io(&rec_path, e))?;

    let meta_path = dir.join(META_FILE);
    let meta_json = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::parse(&meta_path, e.to_string()))?;
    fs::write(&meta_path, meta_json).map_err(|e| Error::io(&meta_path, e))?;

    let gt_path = dir.join(GT_FILE);
    let gt_json = serde_json::to_string_pretty(&gt.events)
        .map_err(|e| Error::parse(&gt_path, e.to_string()))?;
    fs::write(&gt_path, gt_json).map_err(|e| Error::io(&gt_path, e))?;
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<(Recording, GroundTruth)> {
    let meta_path = dir.join(META_FILE);
    let meta_raw = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: DatasetMeta =
        serde_json::from_str(&meta_raw).map_err(|e| Error::parse(&meta_path, e.to_string()))?;

    let rec_path = dir.join(RECORDING_FILE);
    let bytes = fs::read(&rec_path).map_err(|e| Error::io(&rec_path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::parse(
            &rec_path,
            format!("file length {} is not a multiple of 4", bytes.len()),
        ));
    }
    let samples: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();

    let expected = (meta.duration_s * meta.fs_hz).round() as usize;
    if samples.len() != expected {
        return Err(Error::Consistency(format!(
            "recording has {} samples but meta.json implies {expected}",
            samples.len()
        )));
    }

    let gt_path = dir.join(GT_FILE);
    let gt_raw = fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    let events: Vec<GtEvent> =
        serde_json::from_str(&gt_raw).map_err(|e| Error::parse(&gt_path, e.to_string()))?;
    if !events.windows(2).all(|w| w[0].t <= w[1].t) {
        return Err(Error::Consistency("gt.json events are not sorted by t".into()));
    }

    Ok((
        Recording {
            samples,
            fs_hz: meta.fs_hz,
            meta: Some(meta),
        },
        GroundTruth { events },
    ))
}
