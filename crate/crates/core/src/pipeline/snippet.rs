//! Snippet extraction and peak alignment. Rows are zero-padded up to a
//! multiple of 32 samples so five dyadic DWT levels divide evenly; the
//! alignment anchor sits at round(0.3 · padded length).

use serde::{Deserialize, Serialize};

use crate::datagen::{argmax_abs, Recording};
use crate::error::{Error, Result};
use crate::mat::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    None,
    Peak,
}

impl std::fmt::Display for Alignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Alignment::None => write!(f, "none"),
            Alignment::Peak => write!(f, "peak"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnippetSet {
    pub window_ms: f64,
    pub fs_hz: f64,
    /// n_spikes × padded length; columns `window_len..` are zero padding.
    pub snippets: Mat,
    /// Un-padded window length in samples.
    pub window_len: usize,
    /// Anchor index that peak alignment forces argmax|row| onto.
    pub anchor: usize,
    /// Source time (detection peak or ground-truth event) per surviving row.
    pub times: Vec<usize>,
    /// Cut start sample per surviving row.
    pub starts: Vec<usize>,
    /// Index into the original `times` argument per surviving row.
    pub kept: Vec<usize>,
    pub alignment: Alignment,
    /// Rows dropped because their window left the recording.
    pub dropped: usize,
}

impl SnippetSet {
    pub fn len(&self) -> usize {
        self.snippets.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    pub fn padded_len(&self) -> usize {
        self.snippets.cols()
    }
}

fn padded_len(window_len: usize) -> usize {
    window_len.div_ceil(32) * 32
}

fn anchor_for(padded: usize, window_len: usize) -> usize {
    ((0.3 * padded as f64).round() as usize).min(window_len.saturating_sub(1))
}

/// Cuts `[t - pre, t - pre + window)` around each time; out-of-bounds windows
/// are dropped and counted.
pub fn extract_snippets(
    filtered: &Recording,
    times: &[usize],
    window_ms: f64,
    pre_ms: f64,
) -> Result<SnippetSet> {
    if !(1.0..=3.0).contains(&window_ms) {
        return Err(Error::invalid("window_ms must be within [1, 3] ms"));
    }
    if !(pre_ms >= 0.0 && pre_ms < window_ms) {
        return Err(Error::invalid("pre_ms must satisfy 0 <= pre_ms < window_ms"));
    }
    let window_len = (window_ms * filtered.fs_hz / 1000.0).round() as usize;
    let pre = (pre_ms * filtered.fs_hz / 1000.0).round() as usize;
    let padded = padded_len(window_len);
    let n = filtered.len();

    let mut rows = Vec::new();
    let mut kept = Vec::new();
    let mut starts = Vec::new();
    let mut kept_times = Vec::new();
    let mut dropped = 0usize;
    for (i, &t) in times.iter().enumerate() {
        if t < pre || t - pre + window_len > n {
            dropped += 1;
            continue;
        }
        let start = t - pre;
        let mut row = vec![0.0; padded];
        row[..window_len].copy_from_slice(&filtered.samples[start..start + window_len]);
        rows.push(row);
        kept.push(i);
        starts.push(start);
        kept_times.push(t);
    }

    Ok(SnippetSet {
        window_ms,
        fs_hz: filtered.fs_hz,
        snippets: Mat::from_rows(rows)?,
        window_len,
        anchor: anchor_for(padded, window_len),
        times: kept_times,
        starts,
        kept,
        alignment: Alignment::None,
        dropped,
    })
}

/// Re-cuts each row from the filtered signal so its absolute peak lands on
/// the anchor index (`Alignment::Peak`), or returns the set unchanged
/// (`Alignment::None`). Rows whose re-cut window leaves the recording are
/// dropped and counted.
pub fn align(set: &SnippetSet, filtered: &Recording, mode: Alignment) -> SnippetSet {
    if mode == Alignment::None {
        return set.clone();
    }
    let n = filtered.len();
    let window_len = set.window_len;
    let padded = set.padded_len();
    let anchor = set.anchor;

    let mut rows = Vec::new();
    let mut kept = Vec::new();
    let mut starts = Vec::new();
    let mut times = Vec::new();
    let mut dropped = set.dropped;

    'rows: for r in 0..set.len() {
        let mut peak_abs = set.starts[r] + argmax_abs(&set.snippets.row(r)[..window_len]);
        // Each re-cut either lands the peak on the anchor or discovers a
        // strictly larger peak, so this terminates.
        for _ in 0..n {
            let Some(start) = peak_abs.checked_sub(anchor) else {
                dropped += 1;
                continue 'rows;
            };
            if start + window_len > n {
                dropped += 1;
                continue 'rows;
            }
            let window = &filtered.samples[start..start + window_len];
            let local = argmax_abs(window);
            if local == anchor {
                let mut row = vec![0.0; padded];
                row[..window_len].copy_from_slice(window);
                rows.push(row);
                kept.push(set.kept[r]);
                starts.push(start);
                times.push(set.times[r]);
                continue 'rows;
            }
            peak_abs = start + local;
        }
        dropped += 1;
    }

    SnippetSet {
        window_ms: set.window_ms,
        fs_hz: set.fs_hz,
        snippets: Mat::from_rows(rows).expect("aligned rows share a length"),
        window_len,
        anchor,
        times,
        starts,
        kept,
        alignment: Alignment::Peak,
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{make_template_bank, Recording};

    const FS: f64 = 24_000.0;

    fn flat_recording(n: usize) -> Recording {
        Recording::from_samples(vec![0.0; n], FS)
    }

    #[test]
    fn two_ms_window_pads_to_64() {
        let rec = flat_recording(10_000);
        let set = extract_snippets(&rec, &[5000], 2.0, 0.5).unwrap();
        assert_eq!(set.window_len, 48);
        assert_eq!(set.padded_len(), 64);
        assert_eq!(set.anchor, 19); // round(0.3 * 64)
    }

    #[test]
    fn early_detection_is_dropped_and_counted() {
        let rec = flat_recording(10_000);
        let set = extract_snippets(&rec, &[3, 5000], 2.0, 0.5).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.dropped, 1);
        assert_eq!(set.kept, vec![1]);
    }

    #[test]
    fn in_bounds_detections_become_rows() {
        let rec = flat_recording(10_000);
        let times: Vec<usize> = (0..7).map(|i| 1000 + i * 500).collect();
        let set = extract_snippets(&rec, &times, 2.0, 0.5).unwrap();
        assert_eq!(set.len(), 7);
        assert_eq!(set.dropped, 0);
    }

    #[test]
    fn window_bounds_are_validated() {
        let rec = flat_recording(1000);
        assert!(extract_snippets(&rec, &[500], 0.5, 0.1).is_err());
        assert!(extract_snippets(&rec, &[500], 3.5, 0.1).is_err());
        assert!(extract_snippets(&rec, &[500], 2.0, 2.5).is_err());
    }

    fn template_recording() -> (Recording, Vec<usize>) {
        // One template placed at two offsets differing by 3 samples.
        let bank = make_template_bank(1, 7).unwrap();
        let shape: Vec<f64> = bank.templates[0].shape.iter().step_by(4).copied().collect();
        let mut x = vec![0.0; 8000];
        for (i, &s) in shape.iter().enumerate() {
            x[2000 + i] += s;
            x[5003 + i] += s;
        }
        (Recording::from_samples(x, FS), vec![2010, 5010])
    }

    #[test]
    fn align_none_is_identity() {
        let (rec, times) = template_recording();
        let set = extract_snippets(&rec, &times, 2.0, 0.5).unwrap();
        let out = align(&set, &rec, Alignment::None);
        assert_eq!(out, set);
    }

    #[test]
    fn peak_alignment_makes_jittered_copies_identical() {
        let (rec, times) = template_recording();
        let set = extract_snippets(&rec, &times, 2.0, 0.5).unwrap();
        let aligned = align(&set, &rec, Alignment::Peak);
        assert_eq!(aligned.len(), 2);
        for c in 0..aligned.padded_len() {
            let d = (aligned.snippets.get(0, c) - aligned.snippets.get(1, c)).abs();
            assert!(d < 1e-12, "col {c} differs by {d}");
        }
    }

    #[test]
    fn peak_alignment_puts_argmax_on_anchor() {
        let (rec, times) = template_recording();
        let set = extract_snippets(&rec, &times, 2.0, 0.5).unwrap();
        let aligned = align(&set, &rec, Alignment::Peak);
        for r in 0..aligned.len() {
            assert_eq!(argmax_abs(aligned.snippets.row(r)), aligned.anchor);
        }
    }

    #[test]
    fn peak_alignment_is_idempotent() {
        let (rec, times) = template_recording();
        let set = extract_snippets(&rec, &times, 2.0, 0.5).unwrap();
        let once = align(&set, &rec, Alignment::Peak);
        let twice = align(&once, &rec, Alignment::Peak);
        assert_eq!(once, twice);
    }

    #[test]
    fn alignment_out_of_bounds_drops_row() {
        let bank = make_template_bank(1, 7).unwrap();
        let shape: Vec<f64> = bank.templates[0].shape.iter().step_by(4).copied().collect();
        let mut x = vec![0.0; 3000];
        for (i, &s) in shape.iter().enumerate() {
            if 5 + i < x.len() {
                x[5 + i] += s; // peak lands before the anchor offset
            }
        }
        let rec = Recording::from_samples(x, FS);
        let set = extract_snippets(&rec, &[40], 2.0, 0.5).unwrap();
        let aligned = align(&set, &rec, Alignment::Peak);
        assert_eq!(aligned.len() + (aligned.dropped - set.dropped), set.len());
    }
}
