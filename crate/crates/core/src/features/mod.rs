//! Feature extraction and clustering: the 5-level DWT (filter bank + matrix
//! formulation), variance-based feature selection, the integer-filter
//! baseline, and seeded k-means.

mod intfilter;
mod kmeans;
mod select;
mod wavelet;

pub use intfilter::{integer_filter_features, quantization_step};
pub use kmeans::{kmeans, kmeans_from_init, ClusterLabels};
pub use select::{column_variances, select_features, Extractor, FeatureMatrix};
pub use wavelet::{
    build_dwt_matrices, dwt, dwt_via_matrices, idwt_via_matrices, DwtMatrices, WaveletFamily,
    WaveletSpec,
};
