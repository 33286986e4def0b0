//! Prototype discovery: per-class Gaussian mixtures over concept vectors,
//! assignment of new predictions, and delta-based explanations.

pub mod analysis;
pub mod assign;
pub mod delta;
pub mod gmm;
pub mod kmeans;
pub mod store;

pub use analysis::{class_similarity_matrix, outlier_clusters, ClassVector, OutlierClusters};
pub use assign::{assign_prototype, euclidean, mahalanobis, nearest_component, AssignRule, PrototypeRef};
pub use delta::{explain_delta, DeltaExplanation, Usage, DEFAULT_SIMILAR_BAND};
pub use gmm::{
    fit_gmm, percentile, CovarianceKind, FitInfo, FitOptions, PrototypeComponent, PrototypeModel,
    DEFAULT_PROTOTYPES, DEFAULT_REG,
};
pub use kmeans::{kmeans, KMeans};
pub use store::PrototypeStore;

use crate::error::Result;

/// Class log-likelihood of `v` under `model`.
pub fn log_likelihood_class(model: &PrototypeModel, v: &[f64]) -> Result<f64> {
    model.log_likelihood(v)
}
