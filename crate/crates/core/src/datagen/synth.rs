//! Recording synthesis: seeded Poisson spike trains with refractory
//! enforcement at 96 kHz, template placement, structured + white background
//! noise scaled to a target SNR, anti-alias filtering and ×4 decimation.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::decimate::{decimate, design_lowpass, AA_TAPS, DECIM};
use super::template::{Template, TemplateBank, FS_SYNTH_HZ};
use crate::error::{Error, Result};
use crate::rng::{rng_for, rng_for2, TAG_AMPLITUDE, TAG_SUPERPOSITION, TAG_TRAIN, TAG_WHITE};

/// Reported SNR is capped here when the spike-free noise floor is ~zero.
pub const SNR_CAP: f64 = 1e6;

/// Density of the far-field spike-superposition noise process.
const SUPERPOSITION_RATE_HZ: f64 = 2000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    pub n_units: usize,
    pub duration_s: f64,
    /// Mean firing rate per unit, refractory-corrected to stay exact.
    pub firing_rate_hz: f64,
    pub refractory_ms: f64,
    /// Target SNR: mean event peak amplitude over spike-free noise std.
    pub snr: f64,
    pub fs_synth_hz: u32,
    pub fs_out_hz: u32,
    /// One bank template id per unit.
    pub template_ids: Vec<u32>,
}

impl DatasetConfig {
    pub fn new(seed: u64, duration_s: f64, snr: f64, template_ids: Vec<u32>) -> Self {
        DatasetConfig {
            seed,
            n_units: template_ids.len(),
            duration_s,
            firing_rate_hz: 20.0,
            refractory_ms: 2.0,
            snr,
            fs_synth_hz: FS_SYNTH_HZ,
            fs_out_hz: FS_SYNTH_HZ / DECIM as u32,
            template_ids,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units < 1 {
            return Err(Error::invalid("n_units must be >= 1"));
        }
        if self.template_ids.len() != self.n_units {
            return Err(Error::config(format!(
                "expected {} template_ids, got {}",
                self.n_units,
                self.template_ids.len()
            )));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::invalid("duration_s must be > 0"));
        }
        if !(self.firing_rate_hz > 0.0) {
            return Err(Error::invalid("firing_rate_hz must be > 0"));
        }
        if self.refractory_ms < 0.0 {
            return Err(Error::invalid("refractory_ms must be >= 0"));
        }
        if !(self.snr > 0.0) {
            return Err(Error::invalid("snr target must be > 0"));
        }
        if self.fs_out_hz == 0 || self.fs_synth_hz % self.fs_out_hz != 0 {
            return Err(Error::invalid(
                "fs_synth_hz must be an integer multiple of fs_out_hz",
            ));
        }
        if self.fs_synth_hz / self.fs_out_hz != DECIM as u32 {
            return Err(Error::invalid("decimation factor must be 4"));
        }
        if self.duration_s * self.firing_rate_hz * self.n_units as f64 >= 1e7 {
            return Err(Error::invalid(
                "duration_s * firing_rate_hz * n_units must stay below 1e7",
            ));
        }
        if self.firing_rate_hz * self.refractory_ms / 1000.0 >= 1.0 {
            return Err(Error::invalid(
                "refractory period is incompatible with the firing rate",
            ));
        }
        Ok(())
    }

    pub fn n_samples_out(&self) -> usize {
        (self.duration_s * self.fs_out_hz as f64).round() as usize
    }
}

/// Dataset provenance written to `meta.json`. Superset of [`DatasetConfig`]
/// plus the measured SNR and the template-bank parameters needed to
/// regenerate the bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub fs_hz: f64,
    pub duration_s: f64,
    pub snr_target: f64,
    pub snr_measured: f64,
    pub seed: u64,
    pub n_units: usize,
    pub firing_rate_hz: f64,
    pub refractory_ms: f64,
    pub fs_synth_hz: u32,
    pub fs_out_hz: u32,
    pub bank_seed: u64,
    pub bank_size: usize,
    pub template_ids: Vec<u32>,
    pub template_durations_ms: Vec<f64>,
    pub unit_amplitudes: Vec<f64>,
}

impl DatasetMeta {
    pub fn config(&self) -> DatasetConfig {
        DatasetConfig {
            seed: self.seed,
            n_units: self.n_units,
            duration_s: self.duration_s,
            firing_rate_hz: self.firing_rate_hz,
            refractory_ms: self.refractory_ms,
            snr: self.snr_target,
            fs_synth_hz: self.fs_synth_hz,
            fs_out_hz: self.fs_out_hz,
            template_ids: self.template_ids.clone(),
        }
    }

    /// Regenerates the bank this dataset was synthesized from.
    pub fn bank(&self) -> Result<TemplateBank> {
        super::template::make_template_bank(self.bank_size, self.bank_seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    /// Voltage samples at `fs_hz`. Values produced by [`synthesize`] and the
    /// container reader are exactly f32-representable so that the on-disk
    /// round trip is bit-exact.
    pub samples: Vec<f64>,
    pub fs_hz: f64,
    pub meta: Option<DatasetMeta>,
}

impl Recording {
    pub fn from_samples(samples: Vec<f64>, fs_hz: f64) -> Self {
        Recording {
            samples,
            fs_hz,
            meta: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtEvent {
    /// Sample index at the output rate.
    pub t: usize,
    pub unit: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    /// Sorted by `t` ascending.
    pub events: Vec<GtEvent>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.t).collect()
    }

    /// Distinct unit ids, ascending.
    pub fn unit_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.events.iter().map(|e| e.unit).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// An event placed on the synthesis-rate grid.
struct PlacedEvent {
    t_synth: usize,
    unit_index: usize,
    amplitude: f64,
}

/// Synthesizes a ground-truthed recording at the output rate.
pub fn synthesize(config: &DatasetConfig, bank: &TemplateBank) -> Result<(Recording, GroundTruth)> {
    config.validate()?;
    let unit_templates: Vec<&Template> = config
        .template_ids
        .iter()
        .map(|id| {
            bank.get(*id)
                .ok_or_else(|| Error::config(format!("template id {id} not found in bank")))
        })
        .collect::<Result<_>>()?;

    let n_out = config.n_samples_out();
    let n_synth = n_out * DECIM;
    let fs_synth = config.fs_synth_hz as f64;

    // Per-unit amplitude scale; small per-event jitter on top.
    let mut amp_rng = rng_for(config.seed, TAG_AMPLITUDE);
    let unit_amplitudes: Vec<f64> = (0..config.n_units)
        .map(|_| amp_rng.gen_range(0.85..1.2))
        .collect();

    // Spike trains: exponential inter-arrivals on top of an enforced dead
    // time, with the intensity corrected so the asymptotic rate stays at
    // firing_rate_hz. The dead time carries one output-sample margin so the
    // refractory invariant survives decimation rounding.
    let dead_s = config.refractory_ms / 1000.0 + 1.0 / config.fs_out_hz as f64;
    let lambda = config.firing_rate_hz / (1.0 - config.firing_rate_hz * config.refractory_ms / 1000.0);
    let exp = Exp::new(lambda).map_err(|e| Error::invalid(format!("bad rate: {e}")))?;

    let mut events: Vec<PlacedEvent> = Vec::new();
    for unit in 0..config.n_units {
        let mut rng = rng_for2(config.seed, TAG_TRAIN, unit as u64);
        let template_len = unit_templates[unit].shape.len();
        let mut t = exp.sample(&mut rng);
        loop {
            let t_synth = (t * fs_synth).round() as usize;
            if t_synth + template_len > n_synth {
                break;
            }
            let jitter = rng.gen_range(0.97..1.03);
            events.push(PlacedEvent {
                t_synth,
                unit_index: unit,
                amplitude: unit_amplitudes[unit] * jitter,
            });
            t += dead_s + exp.sample(&mut rng);
        }
    }
    events.sort_by_key(|e| e.t_synth);
    if events.is_empty() {
        return Err(Error::invalid(
            "no spikes fit in the recording; increase duration_s",
        ));
    }

    // Clean spike signal at the synthesis rate.
    let mut clean = vec![0.0f64; n_synth];
    for ev in &events {
        let shape = &unit_templates[ev.unit_index].shape;
        for (i, &s) in shape.iter().enumerate() {
            clean[ev.t_synth + i] += ev.amplitude * s;
        }
    }

    // Far-field activity: many low-amplitude, randomly shifted template
    // instances of random polarity.
    let mut sup = vec![0.0f64; n_synth];
    let mut sup_rng = rng_for(config.seed, TAG_SUPERPOSITION);
    let n_instances = (config.duration_s * SUPERPOSITION_RATE_HZ).round() as usize;
    for _ in 0..n_instances {
        let tpl = &bank.templates[sup_rng.gen_range(0..bank.templates.len())];
        let start =
            sup_rng.gen_range(-(tpl.shape.len() as i64)..n_synth as i64);
        let amp = sup_rng.gen_range(0.03..0.25)
            * if sup_rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        for (i, &s) in tpl.shape.iter().enumerate() {
            let idx = start + i as i64;
            if idx >= 0 && (idx as usize) < n_synth {
                sup[idx as usize] += amp * s;
            }
        }
    }

    let mut white = vec![0.0f64; n_synth];
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut white_rng = rng_for(config.seed, TAG_WHITE);
    for w in &mut white {
        *w = normal.sample(&mut white_rng);
    }

    // Decimate the three components separately (the chain is linear).
    let h = design_lowpass(0.4 * config.fs_out_hz as f64, fs_synth, AA_TAPS);
    let clean24 = decimate(&clean, &h);
    let sup24 = decimate(&sup, &h);
    let white24 = decimate(&white, &h);

    let gt = GroundTruth {
        events: events
            .iter()
            .map(|e| GtEvent {
                t: ((e.t_synth as f64) / DECIM as f64).round() as usize,
                unit: config.template_ids[e.unit_index],
            })
            .collect(),
    };

    // Closed-loop noise scaling: measure the clean numerator and the noise
    // floors through the same estimator measure_snr uses, then blend the two
    // noise sources 50/50 in power so that numerator / floor == target.
    let numerator = mean_event_peak(&clean24, &gt, bank)?;
    let mask = spike_free_mask(n_out, &gt, bank, config.fs_out_hz);
    let sigma_sup = masked_std(&sup24, &mask);
    let sigma_white = masked_std(&white24, &mask);
    if sigma_sup <= 0.0 || sigma_white <= 0.0 {
        return Err(Error::Measurement(
            "no spike-free intervals to calibrate noise against".into(),
        ));
    }
    let sigma_target = numerator / config.snr;
    let sup_scale = sigma_target / (2.0f64.sqrt() * sigma_sup);
    let white_scale = sigma_target / (2.0f64.sqrt() * sigma_white);

    let samples: Vec<f64> = (0..n_out)
        .map(|i| {
            let v = clean24[i] + sup_scale * sup24[i] + white_scale * white24[i];
            v as f32 as f64 // container storage is f32; round once here
        })
        .collect();

    let mut recording = Recording {
        samples,
        fs_hz: config.fs_out_hz as f64,
        meta: None,
    };
    let snr_measured = measure_snr(&recording, &gt, bank)?;
    recording.meta = Some(DatasetMeta {
        fs_hz: config.fs_out_hz as f64,
        duration_s: config.duration_s,
        snr_target: config.snr,
        snr_measured,
        seed: config.seed,
        n_units: config.n_units,
        firing_rate_hz: config.firing_rate_hz,
        refractory_ms: config.refractory_ms,
        fs_synth_hz: config.fs_synth_hz,
        fs_out_hz: config.fs_out_hz,
        bank_seed: bank.seed,
        bank_size: bank.templates.len(),
        template_ids: config.template_ids.clone(),
        template_durations_ms: unit_templates.iter().map(|t| t.duration_ms).collect(),
        unit_amplitudes,
    });
    Ok((recording, gt))
}

/// Measured SNR: mean sign-corrected recording value at each event's template
/// peak sample, divided by the noise std over spike-free intervals. Capped at
/// [`SNR_CAP`] when the floor is ~zero.
pub fn measure_snr(recording: &Recording, gt: &GroundTruth, bank: &TemplateBank) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::invalid("ground truth is empty"));
    }
    let numerator = mean_event_peak(&recording.samples, gt, bank)?;
    let fs_out = recording.fs_hz.round() as u32;
    let mask = spike_free_mask(recording.len(), gt, bank, fs_out);
    let n_free = mask.iter().filter(|&&b| b).count();
    if n_free < 2 {
        return Err(Error::Measurement("no spike-free intervals".into()));
    }
    let sigma = masked_std(&recording.samples, &mask);
    if sigma <= 0.0 || numerator / sigma > SNR_CAP {
        return Ok(SNR_CAP);
    }
    Ok(numerator / sigma)
}

/// Mean over events of the sign-corrected signal value at the template peak
/// position, mapped to the output rate.
fn mean_event_peak(samples: &[f64], gt: &GroundTruth, bank: &TemplateBank) -> Result<f64> {
    let mut acc = 0.0;
    let mut n = 0usize;
    for ev in &gt.events {
        let tpl = bank
            .get(ev.unit)
            .ok_or_else(|| Error::config(format!("template id {} not found in bank", ev.unit)))?;
        let peak_off = (tpl.peak_offset() as f64 / DECIM as f64).round() as usize;
        let idx = ev.t + peak_off;
        if idx < samples.len() {
            acc += tpl.peak_sign() * samples[idx];
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Measurement("no events inside the recording".into()));
    }
    Ok(acc / n as f64)
}

/// True where the recording is farther than a guard band from every event.
pub fn spike_free_mask(
    len: usize,
    gt: &GroundTruth,
    bank: &TemplateBank,
    fs_out_hz: u32,
) -> Vec<bool> {
    let span = (bank.max_len() + DECIM - 1) / DECIM;
    let pre_guard = fs_out_hz as usize / 1000; // 1 ms
    let post_guard = 2 * fs_out_hz as usize / 1000; // 2 ms
    let mut mask = vec![true; len];
    for ev in &gt.events {
        let lo = ev.t.saturating_sub(pre_guard);
        let hi = (ev.t + span + post_guard).min(len);
        for m in &mut mask[lo..hi] {
            *m = false;
        }
    }
    mask
}

fn masked_std(x: &[f64], mask: &[bool]) -> f64 {
    let vals: Vec<f64> = x
        .iter()
        .zip(mask)
        .filter_map(|(&v, &keep)| keep.then_some(v))
        .collect();
    if vals.len() < 2 {
        return 0.0;
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::template::make_template_bank;

    fn small_config(snr: f64, seed: u64) -> (DatasetConfig, TemplateBank) {
        let bank = make_template_bank(8, 7).unwrap();
        (DatasetConfig::new(seed, 10.0, snr, vec![0, 3, 5]), bank)
    }

    #[test]
    fn synthesis_is_deterministic() {
        let (cfg, bank) = small_config(4.0, 42);
        let (r1, g1) = synthesize(&cfg, &bank).unwrap();
        let (r2, g2) = synthesize(&cfg, &bank).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn sample_count_matches_duration() {
        let (cfg, bank) = small_config(8.0, 1);
        let (rec, _) = synthesize(&cfg, &bank).unwrap();
        assert_eq!(rec.len(), (10.0 * 24_000.0) as usize);
    }

    #[test]
    fn sixty_seconds_at_24khz_is_1_440_000_samples() {
        let cfg = DatasetConfig::new(0, 60.0, 4.0, vec![0]);
        assert_eq!(cfg.n_samples_out(), 1_440_000);
    }

    #[test]
    fn poisson_event_count_within_statistical_bound() {
        // 60 s, 3 units, 20 Hz: mean 3600, bound +-4*sqrt(3600) = +-240.
        let bank = make_template_bank(8, 7).unwrap();
        let cfg = DatasetConfig::new(11, 60.0, 8.0, vec![0, 1, 2]);
        let (_, gt) = synthesize(&cfg, &bank).unwrap();
        let n = gt.len() as f64;
        assert!((n - 3600.0).abs() <= 240.0, "event count {n}");
    }

    #[test]
    fn refractory_period_is_respected_per_unit() {
        let (cfg, bank) = small_config(4.0, 9);
        let (rec, gt) = synthesize(&cfg, &bank).unwrap();
        let fs = rec.fs_hz;
        for unit in gt.unit_ids() {
            let times: Vec<usize> = gt
                .events
                .iter()
                .filter(|e| e.unit == unit)
                .map(|e| e.t)
                .collect();
            for w in times.windows(2) {
                let isi_ms = (w[1] - w[0]) as f64 * 1000.0 / fs;
                assert!(
                    isi_ms >= cfg.refractory_ms,
                    "unit {unit}: ISI {isi_ms} ms < {} ms",
                    cfg.refractory_ms
                );
            }
        }
    }

    #[test]
    fn ground_truth_is_sorted_and_resolvable() {
        let (cfg, bank) = small_config(4.0, 3);
        let (_, gt) = synthesize(&cfg, &bank).unwrap();
        assert!(gt.events.windows(2).all(|w| w[0].t <= w[1].t));
        assert!(gt.events.iter().all(|e| bank.get(e.unit).is_some()));
    }

    #[test]
    fn samples_are_finite_and_f32_representable() {
        let (cfg, bank) = small_config(2.0, 5);
        let (rec, _) = synthesize(&cfg, &bank).unwrap();
        for &s in &rec.samples {
            assert!(s.is_finite());
            assert_eq!(s, s as f32 as f64);
        }
    }

    #[test]
    fn unresolvable_template_id_is_a_config_error() {
        let bank = make_template_bank(2, 7).unwrap();
        let cfg = DatasetConfig::new(0, 5.0, 4.0, vec![0, 99]);
        let err = synthesize(&cfg, &bank).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn non_positive_snr_is_rejected() {
        let bank = make_template_bank(2, 7).unwrap();
        let cfg = DatasetConfig::new(0, 5.0, 0.0, vec![0]);
        assert!(synthesize(&cfg, &bank).is_err());
    }

    #[test]
    fn measured_snr_tracks_target_within_5_percent() {
        let bank = make_template_bank(8, 7).unwrap();
        for &snr in &[1.0, 2.0, 4.0, 8.0, 16.0] {
            let cfg = DatasetConfig::new(21, 30.0, snr, vec![0, 3, 5]);
            let (rec, gt) = synthesize(&cfg, &bank).unwrap();
            let measured = measure_snr(&rec, &gt, &bank).unwrap();
            assert!(
                (measured - snr).abs() / snr < 0.05,
                "target {snr}, measured {measured}"
            );
        }
    }

    #[test]
    fn doubling_noise_halves_measured_snr() {
        // Synthesize at two targets differing x2 with the same seed: the spike
        // placements are identical, only the noise scale changes.
        let bank = make_template_bank(8, 7).unwrap();
        let cfg_hi = DatasetConfig::new(33, 20.0, 8.0, vec![0, 2]);
        let mut cfg_lo = cfg_hi.clone();
        cfg_lo.snr = 4.0;
        let (rec_hi, gt) = synthesize(&cfg_hi, &bank).unwrap();
        let (rec_lo, _) = synthesize(&cfg_lo, &bank).unwrap();
        let m_hi = measure_snr(&rec_hi, &gt, &bank).unwrap();
        let m_lo = measure_snr(&rec_lo, &gt, &bank).unwrap();
        assert!((m_hi / m_lo - 2.0).abs() < 0.1, "ratio {}", m_hi / m_lo);
    }

    #[test]
    fn snr_is_invariant_to_global_scaling() {
        let (cfg, bank) = small_config(4.0, 13);
        let (mut rec, gt) = synthesize(&cfg, &bank).unwrap();
        let before = measure_snr(&rec, &gt, &bank).unwrap();
        for s in &mut rec.samples {
            *s *= 10.0;
        }
        let after = measure_snr(&rec, &gt, &bank).unwrap();
        assert!((before - after).abs() / before < 1e-9);
    }

    #[test]
    fn zero_noise_recording_reports_capped_snr() {
        // Hand-build a noise-free recording: one template placed twice.
        let bank = make_template_bank(1, 7).unwrap();
        let tpl = &bank.templates[0];
        let n = 24_000;
        let mut samples = vec![0.0f64; n * DECIM];
        let t0 = 4000 * DECIM;
        let t1 = 12_000 * DECIM;
        for (i, &s) in tpl.shape.iter().enumerate() {
            samples[t0 + i] += s;
            samples[t1 + i] += s;
        }
        let h = design_lowpass(9600.0, 96_000.0, AA_TAPS);
        let rec = Recording::from_samples(decimate(&samples, &h), 24_000.0);
        let gt = GroundTruth {
            events: vec![
                GtEvent { t: 4000, unit: 0 },
                GtEvent { t: 12_000, unit: 0 },
            ],
        };
        let snr = measure_snr(&rec, &gt, &bank).unwrap();
        assert_eq!(snr, SNR_CAP);
    }

    #[test]
    fn dense_events_leave_no_spike_free_interval() {
        let bank = make_template_bank(1, 7).unwrap();
        let rec = Recording::from_samples(vec![0.0; 200], 24_000.0);
        let gt = GroundTruth {
            events: (0..20).map(|i| GtEvent { t: i * 10, unit: 0 }).collect(),
        };
        let err = measure_snr(&rec, &gt, &bank).unwrap_err();
        assert!(matches!(err, Error::Measurement(_)), "{err}");
    }

    #[test]
    fn empty_ground_truth_is_rejected() {
        let bank = make_template_bank(1, 7).unwrap();
        let rec = Recording::from_samples(vec![0.0; 100], 24_000.0);
        assert!(measure_snr(&rec, &GroundTruth::default(), &bank).is_err());
    }
}
