//! Threshold spike detection. The threshold is the robust noise estimate
//! k · median(|x|)/0.6745; candidates are local maxima of |x| above it, and
//! lockout is enforced greedily in descending amplitude order, which makes
//! the accepted set shrink monotonically as k grows.

use crate::datagen::Recording;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Peak positions, strictly increasing, no two within the lockout window.
    pub times: Vec<usize>,
    pub threshold_used: f64,
    /// Peak |amplitude| per detection, aligned with `times`.
    pub scores: Vec<f64>,
}

impl DetectionResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Median of |x| over a copy; robust noise std estimate is median/0.6745.
pub fn robust_noise_std(x: &[f64]) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = mags.len();
    let median = if n % 2 == 1 {
        mags[n / 2]
    } else {
        0.5 * (mags[n / 2 - 1] + mags[n / 2])
    };
    median / 0.6745
}

pub fn detect(filtered: &Recording, k: f64, lockout_ms: f64) -> Result<DetectionResult> {
    if filtered.is_empty() {
        return Err(Error::invalid("empty recording"));
    }
    if !(k > 0.0) {
        return Err(Error::invalid("detection threshold factor k must be > 0"));
    }
    let x = &filtered.samples;
    let threshold = k * robust_noise_std(x);
    let lockout = ((lockout_ms * filtered.fs_hz / 1000.0).round() as usize).max(1);

    // Candidate peaks: first sample of each local maximum plateau of |x|.
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        let m = x[i].abs();
        if m > threshold && m > x[i - 1].abs() && m >= x[i + 1].abs() {
            candidates.push((i, m));
        }
    }

    // Greedy acceptance by descending amplitude (ties: earlier sample wins).
    // Raising k only truncates this candidate list from the bottom, so the
    // accepted set for a higher threshold is a subset of the lower one.
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut accepted: Vec<(usize, f64)> = Vec::new();
    let mut occupied = std::collections::BTreeSet::new();
    for (i, m) in candidates {
        let lo = i.saturating_sub(lockout - 1);
        let hi = i + lockout; // exclusive
        if occupied.range(lo..hi).next().is_none() {
            occupied.insert(i);
            accepted.push((i, m));
        }
    }
    accepted.sort_by_key(|&(i, _)| i);

    Ok(DetectionResult {
        times: accepted.iter().map(|&(i, _)| i).collect(),
        threshold_used: threshold,
        scores: accepted.iter().map(|&(_, m)| m).collect(),
    })
}
