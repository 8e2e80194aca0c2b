//! Integer-filter baseline: three features per spike computed in integer
//! arithmetic on samples quantized to 10 bits over the snippet set's dynamic
//! range — max and min of the first-difference filter [1, -1], and the
//! response of the smoothing-difference filter [1, 2, 0, -2, -1] at the
//! anchor. Outputs are de-quantized back to signal units.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::pipeline::SnippetSet;

use super::select::{Extractor, FeatureMatrix};

/// Signed 10-bit code range.
const QMAX: i64 = 511;

/// Quantization step for a snippet set: full scale over 511 codes.
pub fn quantization_step(set: &SnippetSet) -> f64 {
    let mut max_abs = 0.0f64;
    for r in 0..set.len() {
        for &v in &set.snippets.row(r)[..set.window_len] {
            max_abs = max_abs.max(v.abs());
        }
    }
    if max_abs == 0.0 {
        1.0
    } else {
        max_abs / QMAX as f64
    }
}

fn quantize(x: f64, step: f64) -> i64 {
    ((x / step).round() as i64).clamp(-QMAX - 1, QMAX)
}

pub fn integer_filter_features(set: &SnippetSet) -> Result<FeatureMatrix> {
    let len = set.window_len;
    if len < 8 {
        return Err(Error::invalid("integer filter needs snippets of >= 8 samples"));
    }
    let anchor = set.anchor.clamp(2, len - 3);
    let step = quantization_step(set);

    let mut values = Mat::zeros(set.len(), 3);
    for r in 0..set.len() {
        let y: Vec<i64> = set.snippets.row(r)[..len]
            .iter()
            .map(|&v| quantize(v, step))
            .collect();
        let mut dmax = i64::MIN;
        let mut dmin = i64::MAX;
        for i in 1..len {
            let d = y[i] - y[i - 1];
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        let smoothed = y[anchor - 2] + 2 * y[anchor - 1] - 2 * y[anchor + 1] - y[anchor + 2];
        values.set(r, 0, dmax as f64 * step);
        values.set(r, 1, dmin as f64 * step);
        values.set(r, 2, smoothed as f64 * step);
    }
    Ok(FeatureMatrix {
        values,
        selected_indices: vec![0, 1, 2],
        extractor: Extractor::IntFilter,
    })
}
