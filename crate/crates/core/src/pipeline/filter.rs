//! Butterworth bandpass filtering as a biquad cascade: a high-pass stack at
//! the low edge followed by a low-pass stack at the high edge, each of the
//! configured order. Causal mode is a single forward pass; non-causal mode is
//! a forward-backward (zero-phase) pass.

use serde::{Deserialize, Serialize};

use crate::datagen::Recording;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub order: usize,
    pub causal: bool,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            lo_hz: 300.0,
            hi_hz: 3000.0,
            order: 4,
            causal: false,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, fs_hz: f64) -> Result<()> {
        if !(self.lo_hz > 0.0 && self.lo_hz < self.hi_hz) {
            return Err(Error::invalid("need 0 < lo_hz < hi_hz"));
        }
        if self.hi_hz >= fs_hz / 2.0 {
            return Err(Error::invalid(format!(
                "hi_hz {} is at or above Nyquist {}",
                self.hi_hz,
                fs_hz / 2.0
            )));
        }
        if !(2..=8).contains(&self.order) {
            return Err(Error::invalid("filter order must be in [2, 8]"));
        }
        Ok(())
    }
}

/// One second-order section, a0 normalized to 1.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// RBJ cookbook low-pass.
    fn lowpass(f0: f64, fs: f64, q: f64) -> Biquad {
        let w0 = 2.0 * std::f64::consts::PI * f0 / fs;
        let alpha = w0.sin() / (2.0 * q);
        let cosw = w0.cos();
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 - cosw) / 2.0 / a0,
            b1: (1.0 - cosw) / a0,
            b2: (1.0 - cosw) / 2.0 / a0,
            a1: -2.0 * cosw / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// RBJ cookbook high-pass.
    fn highpass(f0: f64, fs: f64, q: f64) -> Biquad {
        let w0 = 2.0 * std::f64::consts::PI * f0 / fs;
        let alpha = w0.sin() / (2.0 * q);
        let cosw = w0.cos();
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 + cosw) / 2.0 / a0,
            b1: -(1.0 + cosw) / a0,
            b2: (1.0 + cosw) / 2.0 / a0,
            a1: -2.0 * cosw / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// First-order section from the bilinear transform (for odd orders),
    /// expressed as a degenerate biquad.
    fn first_order(f0: f64, fs: f64, highpass: bool) -> Biquad {
        let k = (std::f64::consts::PI * f0 / fs).tan();
        let a0 = k + 1.0;
        if highpass {
            Biquad {
                b0: 1.0 / a0,
                b1: -1.0 / a0,
                b2: 0.0,
                a1: (k - 1.0) / a0,
                a2: 0.0,
            }
        } else {
            Biquad {
                b0: k / a0,
                b1: k / a0,
                b2: 0.0,
                a1: (k - 1.0) / a0,
                a2: 0.0,
            }
        }
    }

    fn run(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for (i, &xi) in x.iter().enumerate() {
            let yi = self.b0 * xi + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
            x2 = x1;
            x1 = xi;
            y2 = y1;
            y1 = yi;
            y[i] = yi;
        }
        y
    }
}

/// Butterworth pole Q values for a cascade of the given order; odd orders
/// additionally carry one real (first-order) pole. Q = 1/(2 cos ψ) with ψ the
/// pole angle off the negative real axis.
fn butterworth_qs(order: usize) -> (Vec<f64>, bool) {
    let pairs = order / 2;
    let odd = order % 2 == 1;
    let qs = (0..pairs)
        .map(|k| {
            let psi = if odd {
                (k + 1) as f64 * std::f64::consts::PI / order as f64
            } else {
                (2 * k + 1) as f64 * std::f64::consts::PI / (2.0 * order as f64)
            };
            1.0 / (2.0 * psi.cos())
        })
        .collect();
    (qs, odd)
}

/// The designed section cascade; serializable for audit.
#[derive(Debug, Clone, Serialize)]
pub struct Cascade {
    pub fs_hz: f64,
    pub spec: FilterSpec,
    pub sections: Vec<Biquad>,
}

pub fn design_bandpass(spec: &FilterSpec, fs_hz: f64) -> Result<Cascade> {
    spec.validate(fs_hz)?;
    let mut sections = Vec::new();
    let (qs, odd) = butterworth_qs(spec.order);
    for &q in &qs {
        sections.push(Biquad::highpass(spec.lo_hz, fs_hz, q));
    }
    if odd {
        sections.push(Biquad::first_order(spec.lo_hz, fs_hz, true));
    }
    for &q in &qs {
        sections.push(Biquad::lowpass(spec.hi_hz, fs_hz, q));
    }
    if odd {
        sections.push(Biquad::first_order(spec.hi_hz, fs_hz, false));
    }
    Ok(Cascade {
        fs_hz,
        spec: *spec,
        sections,
    })
}

/// Single forward pass through the cascade (causal).
pub fn filter_forward(cascade: &Cascade, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for s in &cascade.sections {
        y = s.run(&y);
    }
    y
}

/// Forward-backward pass (zero phase, non-causal).
pub fn filtfilt(cascade: &Cascade, x: &[f64]) -> Vec<f64> {
    let mut y = filter_forward(cascade, x);
    y.reverse();
    y = filter_forward(cascade, &y);
    y.reverse();
    y
}

/// Bandpass-filters a recording; output length equals input length.
pub fn bandpass(recording: &Recording, spec: &FilterSpec) -> Result<Recording> {
    if recording.is_empty() {
        return Err(Error::invalid("empty recording"));
    }
    let cascade = design_bandpass(spec, recording.fs_hz)?;
    let samples = if spec.causal {
        filter_forward(&cascade, &recording.samples)
    } else {
        filtfilt(&cascade, &recording.samples)
    };
    Ok(Recording {
        samples,
        fs_hz: recording.fs_hz,
        meta: recording.meta.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 24_000.0;

    fn sine(freq: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / FS).sin())
            .collect()
    }

    fn steady_amp(y: &[f64]) -> f64 {
        y[y.len() / 2..].iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    #[test]
    fn dc_is_rejected() {
        let rec = Recording::from_samples(vec![1.0; 24_000], FS);
        let out = bandpass(&rec, &FilterSpec::default()).unwrap();
        let tail = &out.samples[12_000..];
        assert!(tail.iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn in_band_tone_passes_within_1db() {
        let rec = Recording::from_samples(sine(1000.0, 48_000), FS);
        let out = bandpass(&rec, &FilterSpec::default()).unwrap();
        let amp = steady_amp(&out.samples);
        assert!(
            20.0 * amp.log10() > -1.0 && 20.0 * amp.log10() < 1.0,
            "amp {amp}"
        );
    }

    #[test]
    fn mains_tone_attenuated_at_least_20db() {
        let rec = Recording::from_samples(sine(50.0, 48_000), FS);
        let out = bandpass(&rec, &FilterSpec::default()).unwrap();
        let amp = steady_amp(&out.samples);
        assert!(20.0 * amp.log10() <= -20.0, "amp {amp}");
    }

    #[test]
    fn causal_mode_runs_and_preserves_length() {
        let spec = FilterSpec {
            causal: true,
            ..FilterSpec::default()
        };
        let rec = Recording::from_samples(sine(1000.0, 10_000), FS);
        let out = bandpass(&rec, &spec).unwrap();
        assert_eq!(out.len(), rec.len());
        assert!(steady_amp(&out.samples) > 0.5);
    }

    #[test]
    fn cutoff_at_nyquist_is_rejected() {
        let spec = FilterSpec {
            hi_hz: 12_000.0,
            ..FilterSpec::default()
        };
        let rec = Recording::from_samples(vec![0.0; 100], FS);
        assert!(bandpass(&rec, &spec).is_err());
    }

    #[test]
    fn invalid_order_is_rejected() {
        for order in [1usize, 9] {
            let spec = FilterSpec {
                order,
                ..FilterSpec::default()
            };
            assert!(design_bandpass(&spec, FS).is_err());
        }
    }

    #[test]
    fn zero_phase_output_of_symmetric_pulse_is_symmetric() {
        // Symmetric triangular pulse centered in a long buffer.
        let n = 8192;
        let c = n / 2;
        let mut x = vec![0.0; n];
        for k in 0..48i64 {
            let v = 1.0 - (k as f64 / 48.0);
            x[(c as i64 + k) as usize] = v;
            x[(c as i64 - k) as usize] = v;
        }
        let cascade = design_bandpass(&FilterSpec::default(), FS).unwrap();
        let y = filtfilt(&cascade, &x);
        let peak = y.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let mut err = 0.0f64;
        for k in 1..(n / 2 - 1) {
            err = err.max((y[c + k] - y[c - k]).abs());
        }
        assert!(err / peak < 1e-6, "relative asymmetry {}", err / peak);
    }

    #[test]
    fn odd_order_cascade_behaves() {
        let spec = FilterSpec {
            order: 3,
            ..FilterSpec::default()
        };
        let rec = Recording::from_samples(sine(1000.0, 48_000), FS);
        let out = bandpass(&rec, &spec).unwrap();
        assert!((steady_amp(&out.samples) - 1.0).abs() < 0.12);
        let rec_dc = Recording::from_samples(vec![1.0; 24_000], FS);
        let out_dc = bandpass(&rec_dc, &spec).unwrap();
        assert!(out_dc.samples[12_000..].iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn coefficients_export_as_json() {
        let cascade = design_bandpass(&FilterSpec::default(), FS).unwrap();
        let json = serde_json::to_string(&cascade).unwrap();
        assert!(json.contains("sections"));
        assert!(json.contains("b0"));
    }
}
