//! Parametric spike templates: each waveform is the difference of two gamma
//! kernels (fast depolarization lobe minus a slower afterhyperpolarization
//! lobe) with randomized rise/decay/AHP parameters, peak-normalized.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{rng_for2, TAG_BANK};

/// Synthesis sampling rate for templates and event placement.
pub const FS_SYNTH_HZ: u32 = 96_000;

/// Generation rejects a candidate whose best-lag correlation with any
/// already-accepted template exceeds this.
const MAX_GEN_CORRELATION: f64 = 0.995;

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub id: u32,
    /// Amplitude samples at [`FS_SYNTH_HZ`], normalized to unit peak |·|.
    pub shape: Vec<f64>,
    pub duration_ms: f64,
}

impl Template {
    /// Sample offset of the absolute peak.
    pub fn peak_offset(&self) -> usize {
        argmax_abs(&self.shape)
    }

    /// Sign of the waveform at its absolute peak (+1.0 or -1.0).
    pub fn peak_sign(&self) -> f64 {
        self.shape[self.peak_offset()].signum()
    }
}

/// A seeded template bank; regenerable bit-identically from `(size, seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBank {
    pub seed: u64,
    pub templates: Vec<Template>,
}

impl TemplateBank {
    pub fn get(&self, id: u32) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Longest template length in samples at the synthesis rate.
    pub fn max_len(&self) -> usize {
        self.templates.iter().map(|t| t.shape.len()).max().unwrap_or(0)
    }
}

/// Generates `n` distinct peak-normalized templates, deterministic for a
/// fixed seed.
pub fn make_template_bank(n: usize, seed: u64) -> Result<TemplateBank> {
    if n < 1 {
        return Err(Error::invalid("template bank size must be >= 1"));
    }
    let mut templates: Vec<Template> = Vec::with_capacity(n);
    let mut attempt = 0u64;
    while templates.len() < n {
        if attempt > 64 * n as u64 + 1024 {
            return Err(Error::invalid(format!(
                "could not generate {n} mutually distinct templates"
            )));
        }
        let candidate = draw_template(templates.len() as u32, seed, attempt);
        attempt += 1;
        let too_close = templates
            .iter()
            .any(|t| max_xcorr(&t.shape, &candidate.shape) > MAX_GEN_CORRELATION);
        if !too_close {
            templates.push(candidate);
        }
    }
    Ok(TemplateBank { seed, templates })
}

fn draw_template(id: u32, seed: u64, attempt: u64) -> Template {
    let mut rng = rng_for2(seed, TAG_BANK, attempt);
    let duration_ms: f64 = rng.gen_range(1.5..3.0);
    let polarity: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };

    // Depolarization lobe: sharp, peaking 0.15-0.45 ms in.
    let k1: f64 = rng.gen_range(2.0..5.0);
    let t1_ms: f64 = rng.gen_range(0.15..0.45);
    // AHP lobe: slower, weaker, opposite sign.
    let k2: f64 = rng.gen_range(1.5..3.0);
    let t2_ms: f64 = rng.gen_range(0.7..1.6);
    let ahp_frac: f64 = rng.gen_range(0.25..0.6);

    let len = (duration_ms * FS_SYNTH_HZ as f64 / 1000.0).round() as usize;
    let mut shape: Vec<f64> = (0..len)
        .map(|i| {
            let t_ms = i as f64 * 1000.0 / FS_SYNTH_HZ as f64;
            polarity * (gamma_lobe(t_ms, k1, t1_ms) - ahp_frac * gamma_lobe(t_ms, k2, t2_ms))
        })
        .collect();

    // Fade the last 10% to zero so the template ends without a step.
    let fade = len / 10;
    for i in 0..fade {
        let w = 0.5 * (1.0 + (std::f64::consts::PI * (i + 1) as f64 / fade as f64).cos());
        shape[len - fade + i] *= w;
    }

    let peak = shape.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    for x in &mut shape {
        *x /= peak;
    }
    Template {
        id,
        shape,
        duration_ms,
    }
}

/// Gamma kernel with unit peak at `t_peak_ms`; zero at t = 0 for k > 1.
fn gamma_lobe(t_ms: f64, k: f64, t_peak_ms: f64) -> f64 {
    if t_ms <= 0.0 {
        return 0.0;
    }
    let r = t_ms / t_peak_ms;
    (r.powf(k - 1.0)) * ((k - 1.0) * (1.0 - r)).exp()
}

/// Maximum over all lags of the normalized cross-correlation of two
/// zero-padded sequences.
pub fn max_xcorr(a: &[f64], b: &[f64]) -> f64 {
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let mut best = f64::NEG_INFINITY;
    for lag in -(b.len() as isize - 1)..(a.len() as isize) {
        let mut dot = 0.0;
        for (j, &bv) in b.iter().enumerate() {
            let i = lag + j as isize;
            if i >= 0 && (i as usize) < a.len() {
                dot += a[i as usize] * bv;
            }
        }
        best = best.max(dot / (na * nb));
    }
    best
}

pub fn argmax_abs(x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in x.iter().enumerate() {
        if v.abs() > best_v {
            best_v = v.abs();
            best = i;
        }
    }
    best
}
