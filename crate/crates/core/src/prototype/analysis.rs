use serde::{Deserialize, Serialize};

use super::gmm::{percentile, PrototypeModel};
use super::kmeans::kmeans;
use crate::error::{PcxError, Result};
use crate::linalg::cosine;

/// Which vector represents a class in the similarity matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassVector {
    /// Weighted mean of all components.
    MixtureMean,
    Component(usize),
}

/// Cosine similarity between class prototypes, rows ordered as `models`.
pub fn class_similarity_matrix(models: &[PrototypeModel], which: ClassVector) -> Result<Vec<Vec<f64>>> {
    if models.is_empty() {
        return Err(PcxError::InvalidArgument("no models".into()));
    }
    let vectors = models
        .iter()
        .map(|m| match which {
            ClassVector::MixtureMean => Ok(m.mixture_mean()),
            ClassVector::Component(i) => m
                .components
                .get(i)
                .map(|c| c.mean().to_vec())
                .ok_or(PcxError::IndexOutOfRange {
                    what: "component",
                    index: i,
                    limit: m.components.len(),
                }),
        })
        .collect::<Result<Vec<_>>>()?;
    let n = vectors.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let c = if i == j {
                if vectors[i].iter().all(|&x| x == 0.0) {
                    None
                } else {
                    Some(1.0)
                }
            } else {
                cosine(&vectors[i], &vectors[j])
            };
            let c = c.ok_or_else(|| {
                let bad = if vectors[i].iter().all(|&x| x == 0.0) { i } else { j };
                PcxError::Degenerate(format!("class {} prototype has zero norm", models[bad].class_id))
            })?;
            out[i][j] = c;
            out[j][i] = c;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierClusters {
    /// Log-likelihood below which a sample is flagged.
    pub threshold: f64,
    /// Flagged sample indices in ascending order.
    pub outliers: Vec<usize>,
    /// k-means groups of the flagged samples (empty when ungrouped).
    pub clusters: Vec<Vec<usize>>,
    /// Set when fewer than `k` samples were flagged and no grouping happened.
    pub ungrouped: bool,
}

/// Flags points whose class log-likelihood falls below the `pct` percentile
/// of the points' own log-likelihoods, then groups them with k-means.
pub fn outlier_clusters(
    points: &[Vec<f64>],
    model: &PrototypeModel,
    pct: f64,
    k: usize,
    seed: u64,
) -> Result<OutlierClusters> {
    if !(0.0..100.0).contains(&pct) {
        return Err(PcxError::InvalidArgument(format!("percentile {pct} outside [0, 100)")));
    }
    if points.is_empty() {
        return Err(PcxError::InvalidArgument("no points".into()));
    }
    let scores = points
        .iter()
        .map(|p| model.log_likelihood(p))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = percentile(&sorted, pct);
    let outliers: Vec<usize> = (0..points.len()).filter(|&i| scores[i] < threshold).collect();
    let flagged: Vec<Vec<f64>> = outliers.iter().map(|&i| points[i].clone()).collect();
    let grouped = if k >= 1 && outliers.len() >= k {
        kmeans(&flagged, k, seed).ok()
    } else {
        None
    };
    Ok(match grouped {
        Some(km) => {
            let mut clusters = vec![Vec::new(); k];
            for (pos, &label) in km.labels.iter().enumerate() {
                clusters[label].push(outliers[pos]);
            }
            OutlierClusters {
                threshold,
                outliers,
                clusters,
                ungrouped: false,
            }
        }
        None => OutlierClusters {
            threshold,
            outliers,
            clusters: Vec::new(),
            ungrouped: true,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototype::gmm::PrototypeComponent;

    fn single(class_id: usize, mean: Vec<f64>) -> PrototypeModel {
        PrototypeModel::from_components(class_id, vec![PrototypeComponent::isotropic(1.0, mean, 1.0).unwrap()])
            .unwrap()
    }

    #[test]
    fn similarity_examples() {
        let models = vec![single(0, vec![1.0, 0.0]), single(1, vec![1.0, 1.0]), single(2, vec![0.0, 3.0]), single(3, vec![2.0, 0.0])];
        let s = class_similarity_matrix(&models, ClassVector::Component(0)).unwrap();
        assert!((s[0][1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(s[0][2], 0.0);
        assert!((s[0][3] - 1.0).abs() < 1e-15);
        for (i, row) in s.iter().enumerate() {
            assert_eq!(row[i], 1.0);
            for j in 0..row.len() {
                assert_eq!(s[i][j], s[j][i]);
            }
        }
        let zero = vec![single(0, vec![0.0, 0.0]), single(1, vec![1.0, 0.0])];
        assert!(class_similarity_matrix(&zero, ClassVector::MixtureMean).is_err());
    }

    #[test]
    fn zero_percentile_flags_nothing() {
        let m = single(0, vec![0.0]);
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.1]).collect();
        let r = outlier_clusters(&pts, &m, 0.0, 2, 0).unwrap();
        assert!(r.outliers.is_empty());
        assert!(r.ungrouped);
        assert!(outlier_clusters(&pts, &m, 100.0, 2, 0).is_err());
    }
}
