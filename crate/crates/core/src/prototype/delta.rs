//! Difference between a sample's concept vector and a prototype, with the
//! covariance-aware split of the squared Mahalanobis distance into
//! per-concept (intra) and concept-pair (inter) contributions.

use serde::{Deserialize, Serialize};

use super::gmm::PrototypeComponent;
use crate::error::{PcxError, Result};
use crate::linalg::inverse_from_cholesky;

/// Default band (in normalized relevance units) inside which a deviation
/// counts as similar usage.
pub const DEFAULT_SIMILAR_BAND: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Usage {
    Overused,
    Underused,
    Similar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaExplanation {
    /// `v - mu`
    pub delta: Vec<f64>,
    pub usage: Vec<Usage>,
    pub similar_band: f64,
    /// `delta_i (Sigma^{-1})_ii delta_i`
    pub intra: Vec<f64>,
    /// Row-major `m x m`; entry `(i, j)` is `delta_i (Sigma^{-1})_ij delta_j`
    /// for `i != j`, zero on the diagonal.
    pub inter: Vec<f64>,
    /// `delta^T Sigma^{-1} delta`
    pub total: f64,
}

impl DeltaExplanation {
    pub fn intra_sum(&self) -> f64 {
        self.intra.iter().sum()
    }

    pub fn inter_sum(&self) -> f64 {
        self.inter.iter().sum()
    }

    /// Concept indices ordered by descending `|delta|`, lowest index first on ties.
    pub fn ranked_concepts(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.delta.len()).collect();
        idx.sort_by(|&a, &b| self.delta[b].abs().total_cmp(&self.delta[a].abs()).then(a.cmp(&b)));
        idx
    }
}

pub fn explain_delta(component: &PrototypeComponent, v: &[f64], similar_band: f64) -> Result<DeltaExplanation> {
    let m = component.dim();
    if v.len() != m {
        return Err(PcxError::Shape(format!("vector has {} entries, prototype has {m}", v.len())));
    }
    if !(similar_band >= 0.0) {
        return Err(PcxError::InvalidArgument("similar band must be >= 0".into()));
    }
    let delta: Vec<f64> = v.iter().zip(component.mean()).map(|(a, b)| a - b).collect();
    let usage = delta
        .iter()
        .map(|&d| {
            if d > similar_band {
                Usage::Overused
            } else if d < -similar_band {
                Usage::Underused
            } else {
                Usage::Similar
            }
        })
        .collect();
    let inv = inverse_from_cholesky(component.cholesky(), m);
    let intra = (0..m).map(|i| delta[i] * inv[i * m + i] * delta[i]).collect();
    let mut inter = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                inter[i * m + j] = delta[i] * inv[i * m + j] * delta[j];
            }
        }
    }
    Ok(DeltaExplanation {
        total: component.mahalanobis_sq(v),
        delta,
        usage,
        similar_band,
        intra,
        inter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_mean_everything_is_similar() {
        let c = PrototypeComponent::isotropic(1.0, vec![0.2, 0.3], 0.01).unwrap();
        let d = explain_delta(&c, &[0.2, 0.3], DEFAULT_SIMILAR_BAND).unwrap();
        assert_eq!(d.usage, vec![Usage::Similar; 2]);
        assert_eq!(d.total, 0.0);
    }

    #[test]
    fn diagonal_covariance_has_no_inter_terms() {
        let c = PrototypeComponent::new(1.0, vec![0.0; 3], vec![2.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 4.0])
            .unwrap();
        let v = [1.0, -0.5, 0.1];
        let d = explain_delta(&c, &v, 0.2).unwrap();
        assert!(d.inter.iter().all(|&x| x == 0.0));
        let expect = 1.0 / 2.0 + 0.25 / 0.5 + 0.01 / 4.0;
        assert!((d.total - expect).abs() < 1e-12);
        assert!((d.intra_sum() - expect).abs() < 1e-12);
        assert_eq!(d.usage, vec![Usage::Overused, Usage::Underused, Usage::Similar]);
        assert_eq!(d.ranked_concepts(), vec![0, 1, 2]);
    }

    #[test]
    fn correlated_pair_matches_closed_form_inverse() {
        // Sigma = [[1, .5], [.5, 1]] => Sigma^{-1} = (1 / .75) [[1, -.5], [-.5, 1]]
        let c = PrototypeComponent::new(1.0, vec![0.0, 0.0], vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let d = explain_delta(&c, &[1.0, 2.0], 0.0).unwrap();
        let s = 1.0 / 0.75;
        assert!((d.intra[0] - s).abs() < 1e-12);
        assert!((d.intra[1] - 4.0 * s).abs() < 1e-12);
        assert!((d.inter[1] - (-0.5 * s * 2.0)).abs() < 1e-12);
        assert!((d.inter[2] - d.inter[1]).abs() < 1e-15);
        let total = s * (1.0 + 4.0 - 2.0);
        assert!((d.total - total).abs() < 1e-12);
        assert!((d.intra_sum() + d.inter_sum() - total).abs() < 1e-12);
    }
}
