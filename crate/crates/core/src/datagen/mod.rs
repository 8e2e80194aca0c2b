//! Ground-truthed synthetic extracellular recordings.
//!
//! Spike trains are Poisson processes with an enforced refractory period,
//! rendered at 96 kHz from a seeded bank of parametric templates, mixed with
//! background noise (a dense sum of low-amplitude shifted template instances
//! blended 50/50 in power with a white Gaussian floor), scaled to a target
//! SNR, anti-alias filtered and decimated ×4 to 24 kHz.

mod decimate;
mod io;
mod synth;
mod template;

pub use decimate::{decimate, design_lowpass, AA_TAPS, DECIM};
pub use io::{read_dataset, write_dataset, GT_FILE, META_FILE, RECORDING_FILE};
pub use synth::{
    measure_snr, spike_free_mask, synthesize, DatasetConfig, DatasetMeta, GroundTruth, GtEvent,
    Recording, SNR_CAP,
};
pub use template::{
    argmax_abs, make_template_bank, max_xcorr, Template, TemplateBank, FS_SYNTH_HZ,
};
