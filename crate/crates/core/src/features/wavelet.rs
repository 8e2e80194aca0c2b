//! Dyadic DWT over periodized orthonormal filter banks (Haar and the 8-tap
//! Daubechies family), both as a direct filter-bank cascade and as explicit
//! per-level analysis matrices. The matrix form is what gets mapped onto the
//! crossbar; the two paths agree to floating-point precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

const SQRT1_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// db4 scaling filter (4 vanishing moments, 8 taps), sum = sqrt(2).
const DB4_LO: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletFamily {
    Haar,
    Db4,
}

impl WaveletFamily {
    pub fn dec_lo(&self) -> Vec<f64> {
        match self {
            WaveletFamily::Haar => vec![SQRT1_2, SQRT1_2],
            WaveletFamily::Db4 => DB4_LO.to_vec(),
        }
    }

    /// High-pass taps via the alternating flip g[j] = (-1)^j h[K-1-j].
    pub fn dec_hi(&self) -> Vec<f64> {
        let lo = self.dec_lo();
        let k = lo.len();
        (0..k)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * lo[k - 1 - j]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    pub levels: usize,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        WaveletSpec {
            family: WaveletFamily::Haar,
            levels: 5,
        }
    }
}

impl WaveletSpec {
    pub fn validate_len(&self, n: usize) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::invalid("wavelet levels must be >= 1"));
        }
        let div = 1usize << self.levels;
        if n == 0 || n % div != 0 {
            return Err(Error::invalid(format!(
                "snippet length {n} is not divisible by 2^levels = {div}"
            )));
        }
        Ok(())
    }
}

/// Per-level analysis operators. Level ℓ acts on the approximation vector of
/// length n/2^(ℓ-1); its matrix stacks the decimating low-pass rows (first
/// half) over the high-pass rows (second half).
#[derive(Debug, Clone)]
pub struct DwtMatrices {
    pub spec: WaveletSpec,
    pub input_len: usize,
    level_mats: Vec<Mat>,
}

impl DwtMatrices {
    pub fn levels(&self) -> &[Mat] {
        &self.level_mats
    }

    pub fn level(&self, i: usize) -> &Mat {
        &self.level_mats[i]
    }
}

/// Periodized analysis matrix for one level: row r of the low half holds the
/// taps at columns (2r + j) mod m, accumulating on wrap.
fn level_matrix(m: usize, lo: &[f64], hi: &[f64]) -> Mat {
    let half = m / 2;
    let mut mat = Mat::zeros(m, m);
    for r in 0..half {
        for (j, &h) in lo.iter().enumerate() {
            mat.add(r, (2 * r + j) % m, h);
        }
        for (j, &g) in hi.iter().enumerate() {
            mat.add(half + r, (2 * r + j) % m, g);
        }
    }
    mat
}

pub fn build_dwt_matrices(spec: &WaveletSpec, n: usize) -> Result<DwtMatrices> {
    spec.validate_len(n)?;
    let lo = spec.family.dec_lo();
    let hi = spec.family.dec_hi();
    let mut level_mats = Vec::with_capacity(spec.levels);
    let mut m = n;
    for _ in 0..spec.levels {
        level_mats.push(level_matrix(m, &lo, &hi));
        m /= 2;
    }
    Ok(DwtMatrices {
        spec: *spec,
        input_len: n,
        level_mats,
    })
}

/// Direct filter-bank DWT. Returns `[d1, d2, ..., dK, aK]` — the detail
/// coefficients of every level followed by the final approximation.
pub fn dwt(snippet: &[f64], spec: &WaveletSpec) -> Result<Vec<f64>> {
    spec.validate_len(snippet.len())?;
    let lo = spec.family.dec_lo();
    let hi = spec.family.dec_hi();
    let mut approx = snippet.to_vec();
    let mut details: Vec<Vec<f64>> = Vec::with_capacity(spec.levels);
    for _ in 0..spec.levels {
        let m = approx.len();
        let half = m / 2;
        let mut a = vec![0.0; half];
        let mut d = vec![0.0; half];
        for r in 0..half {
            let mut sa = 0.0;
            let mut sd = 0.0;
            for j in 0..lo.len() {
                let x = approx[(2 * r + j) % m];
                sa += lo[j] * x;
                sd += hi[j] * x;
            }
            a[r] = sa;
            d[r] = sd;
        }
        details.push(d);
        approx = a;
    }
    let mut out = Vec::with_capacity(snippet.len());
    for d in &details {
        out.extend_from_slice(d);
    }
    out.extend_from_slice(&approx);
    Ok(out)
}

/// DWT as an explicit cascade of the level matrices; same layout as [`dwt`].
pub fn dwt_via_matrices(snippet: &[f64], mats: &DwtMatrices) -> Result<Vec<f64>> {
    if snippet.len() != mats.input_len {
        return Err(Error::invalid(format!(
            "snippet length {} does not match operator input length {}",
            snippet.len(),
            mats.input_len
        )));
    }
    let mut approx = snippet.to_vec();
    let mut details: Vec<Vec<f64>> = Vec::new();
    for mat in mats.levels() {
        let y = mat.mul_vec(&approx)?;
        let half = y.len() / 2;
        details.push(y[half..].to_vec());
        approx = y[..half].to_vec();
    }
    let mut out = Vec::with_capacity(mats.input_len);
    for d in &details {
        out.extend_from_slice(d);
    }
    out.extend_from_slice(&approx);
    Ok(out)
}

/// Inverse transform through the transposed level matrices, reversed.
pub fn idwt_via_matrices(coeffs: &[f64], mats: &DwtMatrices) -> Result<Vec<f64>> {
    if coeffs.len() != mats.input_len {
        return Err(Error::invalid("coefficient length mismatch"));
    }
    // Split back into per-level details + final approximation.
    let mut cursor = 0usize;
    let mut details = Vec::with_capacity(mats.levels().len());
    let mut m = mats.input_len;
    for _ in mats.levels() {
        details.push(&coeffs[cursor..cursor + m / 2]);
        cursor += m / 2;
        m /= 2;
    }
    let mut approx = coeffs[cursor..].to_vec();
    for (mat, d) in mats.levels().iter().zip(details.iter()).rev() {
        let mut stacked = Vec::with_capacity(approx.len() * 2);
        stacked.extend_from_slice(&approx);
        stacked.extend_from_slice(d);
        approx = mat.transpose_mul_vec(&stacked)?;
    }
    Ok(approx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use rand::Rng;

    fn random_snippet(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_for(seed, 0x0DD);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn assert_orthonormal(m: &Mat) {
        for r1 in 0..m.rows() {
            for r2 in 0..m.rows() {
                let dot: f64 = (0..m.cols()).map(|c| m.get(r1, c) * m.get(r2, c)).sum();
                let expect = if r1 == r2 { 1.0 } else { 0.0 };
                assert!(
                    (dot - expect).abs() < 1e-9,
                    "rows {r1},{r2}: {dot} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn haar_level_one_matrix_matches_hand_construction() {
        let spec = WaveletSpec {
            family: WaveletFamily::Haar,
            levels: 1,
        };
        let mats = build_dwt_matrices(&spec, 4).unwrap();
        let m = mats.level(0);
        let s = SQRT1_2;
        let expect = [
            [s, s, 0.0, 0.0],
            [0.0, 0.0, s, s],
            [s, -s, 0.0, 0.0],
            [0.0, 0.0, s, -s],
        ];
        for (r, row) in expect.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                assert!((m.get(r, c) - v).abs() < 1e-12, "({r},{c})");
            }
        }
    }

    #[test]
    fn level_matrices_are_orthonormal_for_both_families() {
        for family in [WaveletFamily::Haar, WaveletFamily::Db4] {
            let spec = WaveletSpec { family, levels: 5 };
            let mats = build_dwt_matrices(&spec, 64).unwrap();
            for m in mats.levels() {
                assert_orthonormal(m);
            }
        }
    }

    #[test]
    fn db4_level_one_matrix_is_64_by_64() {
        let spec = WaveletSpec {
            family: WaveletFamily::Db4,
            levels: 5,
        };
        let mats = build_dwt_matrices(&spec, 64).unwrap();
        assert_eq!(mats.level(0).rows(), 64);
        assert_eq!(mats.level(0).cols(), 64);
        assert_eq!(mats.level(4).rows(), 4);
    }

    #[test]
    fn divisibility_is_enforced() {
        let spec = WaveletSpec::default();
        assert!(build_dwt_matrices(&spec, 48).is_err());
        assert!(dwt(&vec![0.0; 48], &spec).is_err());
    }

    #[test]
    fn zero_snippet_gives_zero_coefficients() {
        let spec = WaveletSpec::default();
        let coeffs = dwt(&vec![0.0; 64], &spec).unwrap();
        assert!(coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn haar_cascade_on_constant_matches_hand_result() {
        // [1,1,1,1]: level 1 approx [sqrt(2), sqrt(2)], level 2 approx [2].
        let spec = WaveletSpec {
            family: WaveletFamily::Haar,
            levels: 2,
        };
        let coeffs = dwt(&[1.0, 1.0, 1.0, 1.0], &spec).unwrap();
        // Layout: [d1 (2), d2 (1), a2 (1)].
        assert!((coeffs[0]).abs() < 1e-12);
        assert!((coeffs[1]).abs() < 1e-12);
        assert!((coeffs[2]).abs() < 1e-12);
        assert!((coeffs[3] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn energy_is_conserved() {
        for family in [WaveletFamily::Haar, WaveletFamily::Db4] {
            let spec = WaveletSpec { family, levels: 5 };
            for seed in 0..20 {
                let x = random_snippet(64, seed);
                let c = dwt(&x, &spec).unwrap();
                let ex: f64 = x.iter().map(|v| v * v).sum();
                let ec: f64 = c.iter().map(|v| v * v).sum();
                assert!((ex - ec).abs() < 1e-9, "{family:?}: {ex} vs {ec}");
            }
        }
    }

    #[test]
    fn filter_bank_equals_matrix_cascade() {
        for family in [WaveletFamily::Haar, WaveletFamily::Db4] {
            let spec = WaveletSpec { family, levels: 5 };
            let mats = build_dwt_matrices(&spec, 64).unwrap();
            for seed in 0..20 {
                let x = random_snippet(64, 100 + seed);
                let a = dwt(&x, &spec).unwrap();
                let b = dwt_via_matrices(&x, &mats).unwrap();
                for (i, (u, v)) in a.iter().zip(&b).enumerate() {
                    assert!((u - v).abs() < 1e-9, "{family:?} coeff {i}");
                }
            }
        }
    }

    #[test]
    fn transposed_cascade_reconstructs_the_input() {
        for family in [WaveletFamily::Haar, WaveletFamily::Db4] {
            let spec = WaveletSpec { family, levels: 5 };
            let mats = build_dwt_matrices(&spec, 64).unwrap();
            for seed in 0..20 {
                let x = random_snippet(64, 500 + seed);
                let c = dwt_via_matrices(&x, &mats).unwrap();
                let back = idwt_via_matrices(&c, &mats).unwrap();
                for (i, (u, v)) in x.iter().zip(&back).enumerate() {
                    assert!((u - v).abs() < 1e-9, "{family:?} sample {i}");
                }
            }
        }
    }
}
