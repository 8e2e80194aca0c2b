//! Spike-sorting evaluation toolkit.
//!
//! The crate covers the full loop needed to benchmark a spike sorter against
//! known ground truth:
//!
//! * [`datagen`] — synthesizes extracellular recordings from a parametric
//!   template bank at 96 kHz, mixes in structured + white background noise at
//!   a controlled SNR, decimates to 24 kHz, and reads/writes the on-disk
//!   dataset container.
//! * [`pipeline`] — bandpass filtering, threshold spike detection, snippet
//!   extraction and peak alignment.
//! * [`features`] — 5-level DWT feature extraction (filter-bank reference
//!   path and its matrix formulation), an integer-filter baseline, variance
//!   feature selection, and seeded k-means clustering.
//! * [`xbar`] — a simulated RRAM crossbar (64 tiles of 8×8 devices) that
//!   executes the DWT level operators as differential vector–matrix
//!   multiplies with configurable nonidealities.
//! * [`metrics`] — detection matching/accuracy, AUROC, permutation-optimal
//!   classification accuracy, intra-cluster variance, and Pearson
//!   correlation.
//! * [`hwcost`] — a parametric power/energy/area/latency roll-up driven by
//!   crossbar telemetry and a JSON calibration file.
//! * [`run`] — end-to-end orchestration: `generate`, `run`, `sweep`, and
//!   `report`, with deterministic JSON/CSV emission.
//!
//! Everything is a pure function of its inputs and an explicit seed; there is
//! no ambient RNG state anywhere in the crate.

pub mod datagen;
pub mod error;
pub mod features;
pub mod hwcost;
pub mod mat;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod run;
pub mod xbar;

pub use error::{Error, Result};
pub use mat::Mat;
