//! Feature selection: keep the d coefficient columns with the largest
//! variance across spikes, ties broken toward the lower index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    DwtRef,
    DwtXbar,
    IntFilter,
}

impl std::fmt::Display for Extractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extractor::DwtRef => write!(f, "dwt_ref"),
            Extractor::DwtXbar => write!(f, "dwt_xbar"),
            Extractor::IntFilter => write!(f, "int_filter"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// n_spikes × d.
    pub values: Mat,
    /// Source coefficient index per output column, in selection order.
    pub selected_indices: Vec<usize>,
    pub extractor: Extractor,
}

/// Population variance per column.
pub fn column_variances(m: &Mat) -> Vec<f64> {
    let n = m.rows() as f64;
    (0..m.cols())
        .map(|c| {
            let mean: f64 = (0..m.rows()).map(|r| m.get(r, c)).sum::<f64>() / n;
            (0..m.rows())
                .map(|r| {
                    let d = m.get(r, c) - mean;
                    d * d
                })
                .sum::<f64>()
                / n
        })
        .collect()
}

pub fn select_features(coeffs: &Mat, d: usize, extractor: Extractor) -> Result<FeatureMatrix> {
    if !(d == 2 || d == 3) {
        return Err(Error::invalid("feature dimension d must be 2 or 3"));
    }
    if coeffs.rows() < d {
        return Err(Error::invalid(format!(
            "need at least {d} spikes, got {}",
            coeffs.rows()
        )));
    }
    if coeffs.cols() < d {
        return Err(Error::invalid(format!(
            "need at least {d} coefficients, got {}",
            coeffs.cols()
        )));
    }
    if coeffs.has_nan() {
        return Err(Error::invalid("coefficient matrix contains NaN/Inf"));
    }
    let vars = column_variances(coeffs);
    let mut order: Vec<usize> = (0..coeffs.cols()).collect();
    order.sort_by(|&a, &b| vars[b].partial_cmp(&vars[a]).unwrap().then(a.cmp(&b)));
    let selected: Vec<usize> = order.into_iter().take(d).collect();

    let mut values = Mat::zeros(coeffs.rows(), d);
    for r in 0..coeffs.rows() {
        for (j, &c) in selected.iter().enumerate() {
            values.set(r, j, coeffs.get(r, c));
        }
    }
    Ok(FeatureMatrix {
        values,
        selected_indices: selected,
        extractor,
    })
}
