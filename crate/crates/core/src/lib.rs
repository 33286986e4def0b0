//! Prototypical concept-based explanations for small feedforward networks.
//!
//! The crate covers the whole path from a network and its inputs to
//! validated predictions:
//!
//! * [`net`]: deterministic inference with re-entry at any layer and exact
//!   gradients,
//! * [`attribution`]: per-concept relevance (LRP, Input x Gradient,
//!   GuidedBackprop) and activation pooling, plus concept-conditional heatmaps,
//! * [`prototype`]: per-class Gaussian mixtures over concept vectors, sample
//!   assignment and delta explanations,
//! * [`eval`]: faithfulness, stability, sparseness, coverage and outlier
//!   detection metrics,
//! * [`ood`]: out-of-distribution scorers,
//! * [`synth`]: seeded synthetic data with known ground truth.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops mirror the math in the numeric kernels
#![allow(clippy::needless_range_loop)]

pub mod attribution;
mod backward;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod net;
pub mod ood;
pub mod prototype;
pub mod synth;
pub mod tensor;

pub use backward::{ChannelMask, Rule};
pub use error::{PcxError, Result};
pub use net::{ActivationTrace, Layer, Network};
pub use tensor::Tensor;
