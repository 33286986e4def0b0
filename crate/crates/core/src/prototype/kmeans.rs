//! Seeded k-means++ with Lloyd iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PcxError, Result};
use crate::linalg::sq_dist;

pub const MAX_ITER: usize = 300;
pub const SHIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub iterations: usize,
    pub inertia: f64,
}

fn distinct_count(points: &[Vec<f64>], cap: usize) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !seen.contains(&p) {
            seen.push(p);
            if seen.len() >= cap {
                break;
            }
        }
    }
    seen.len()
}

/// Index of the nearest centroid; the lowest index wins ties.
pub fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn mean_of(points: &[Vec<f64>], members: impl Iterator<Item = usize>, dim: usize) -> Option<Vec<f64>> {
    let mut sum = vec![0.0f64; dim];
    let mut count = 0usize;
    for i in members {
        for (s, x) in sum.iter_mut().zip(&points[i]) {
            *s += x;
        }
        count += 1;
    }
    (count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect())
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    if target < d {
                        chosen = Some(i);
                        break;
                    }
                    target -= d;
                }
            }
            // rounding can leave target past the last positive weight
            chosen.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive mass"))
        } else {
            rng.random_range(0..n)
        };
        let c = points[next].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Clusters `points` into `k` groups, deterministic for a given seed.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(PcxError::InvalidArgument("k must be >= 1".into()));
    }
    if points.len() < k {
        return Err(PcxError::InvalidArgument(format!(
            "k-means needs at least k = {k} points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(PcxError::Shape("points have differing dimensions".into()));
    }
    if distinct_count(points, k) < k {
        return Err(PcxError::InvalidArgument(format!(
            "fewer than k = {k} distinct points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = if k == 1 {
        vec![mean_of(points, 0..points.len(), dim).expect("non-empty")]
    } else {
        plus_plus_init(points, k, &mut rng)
    };
    let mut labels = vec![0usize; points.len()];
    let mut iterations = 0;
    for it in 0..MAX_ITER {
        iterations = it + 1;
        for (l, p) in labels.iter_mut().zip(points) {
            *l = nearest(&centroids, p).0;
        }
        let mut shift = 0.0f64;
        let mut updated = centroids.clone();
        for (c, slot) in updated.iter_mut().enumerate() {
            let members = labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i);
            if let Some(m) = mean_of(points, members, dim) {
                *slot = m;
            }
        }
        // empty clusters take the point farthest from its own centroid
        for c in 0..k {
            if labels.contains(&c) {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| !updated.iter().any(|u| *u == points[i]))
                .max_by(|&a, &b| {
                    sq_dist(&points[a], &updated[labels[a]])
                        .total_cmp(&sq_dist(&points[b], &updated[labels[b]]))
                        .then(b.cmp(&a))
                });
            if let Some(i) = far {
                updated[c] = points[i].clone();
                labels[i] = c;
            }
        }
        for (a, b) in centroids.iter().zip(&updated) {
            shift = shift.max(sq_dist(a, b).sqrt());
        }
        centroids = updated;
        if shift < SHIFT_TOL {
            break;
        }
    }
    for (l, p) in labels.iter_mut().zip(points) {
        *l = nearest(&centroids, p).0;
    }
    let inertia = labels
        .iter()
        .zip(points)
        .map(|(&l, p)| sq_dist(&centroids[l], p))
        .sum();
    Ok(KMeans {
        centroids,
        labels,
        iterations,
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut pts = Vec::new();
        for _ in 0..50 {
            pts.push(vec![noise.sample(&mut rng)]);
            pts.push(vec![10.0 + noise.sample(&mut rng)]);
        }
        let km = kmeans(&pts, 2, 7).unwrap();
        let mut c: Vec<f64> = km.centroids.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert!(c[0].abs() < 0.05 && (c[1] - 10.0).abs() < 0.05, "{c:?}");
    }

    #[test]
    fn single_cluster_is_global_mean() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.25]];
        let km = kmeans(&pts, 1, 0).unwrap();
        let mean = vec![(1.0 + 3.0 + 0.5) / 3.0, (2.0 - 1.0 + 0.25) / 3.0];
        assert_eq!(km.centroids[0], mean);
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let km = kmeans(&pts, 6, 11).unwrap();
        assert_eq!(km.inertia, 0.0);
    }

    #[test]
    fn deterministic_and_validated() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64).cos()]).collect();
        assert_eq!(kmeans(&pts, 4, 5).unwrap(), kmeans(&pts, 4, 5).unwrap());
        assert!(kmeans(&pts[..2], 3, 0).is_err());
        let same = vec![vec![1.0]; 5];
        assert!(kmeans(&same, 2, 0).is_err());
    }
}
