//! Evaluation metrics for prototype models and their reports.

pub mod auc;
pub mod hungarian;
mod metrics;
mod report;

pub use auc::outlier_auc;
pub use hungarian::{hungarian, Assignment};
pub use metrics::*;
pub use report::{config_hash, standard_error, EvalConfig, EvalReport, LayerScore};
