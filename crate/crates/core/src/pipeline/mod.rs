//! Front half of the sorting pipeline: bandpass filtering, threshold
//! detection, snippet extraction and alignment.

mod detect;
mod filter;
mod snippet;

pub use detect::{detect, robust_noise_std, DetectionResult};
pub use filter::{bandpass, design_bandpass, filter_forward, filtfilt, Biquad, Cascade, FilterSpec};
pub use snippet::{align, extract_snippets, Alignment, SnippetSet};
