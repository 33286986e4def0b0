//! Test oracles that share no numerical code with `pcx-core`: a float64
//! reference forward pass, brute-force assignment and AUC, quadrature, and
//! generators for random networks. `criteria` bundles the acceptance checks.

pub mod brute;
pub mod criteria;
pub mod nets;
pub mod quad;
pub mod reference;
