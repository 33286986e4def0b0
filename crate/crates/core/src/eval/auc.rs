//! Rank-statistic ROC AUC (Mann-Whitney U with mid-ranks).

use crate::error::{PcxError, Result};

/// Probability that a random in-distribution score exceeds a random
/// out-of-distribution score, ties counted one half. Higher scores mean
/// "more in-distribution".
pub fn outlier_auc(in_scores: &[f64], out_scores: &[f64]) -> Result<f64> {
    if in_scores.is_empty() || out_scores.is_empty() {
        return Err(PcxError::InvalidArgument("AUC needs non-empty score lists".into()));
    }
    if in_scores.iter().chain(out_scores).any(|s| s.is_nan()) {
        return Err(PcxError::Numerical("NaN score".into()));
    }
    let mut all: Vec<(f64, bool)> = in_scores
        .iter()
        .map(|&s| (s, true))
        .chain(out_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // twice the rank sum of the in-scores, using mid-ranks for ties; integral
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share the mid-rank (i + j + 2) / 2
        let twice_mid = (i + j + 2) as u128;
        let hits = all[i..=j].iter().filter(|(_, is_in)| *is_in).count() as u128;
        twice_rank_sum += twice_mid * hits;
        i = j + 1;
    }
    let (n_in, n_out) = (in_scores.len() as u128, out_scores.len() as u128);
    let twice_u = twice_rank_sum - n_in * (n_in + 1);
    let twice_total = 2 * n_in * n_out;
    // evaluating the smaller side directly makes auc(a, b) + auc(b, a) == 1 exactly
    Ok(if 2 * twice_u <= twice_total {
        twice_u as f64 / twice_total as f64
    } else {
        1.0 - (twice_total - twice_u) as f64 / twice_total as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(outlier_auc(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(outlier_auc(&[1.0; 4], &[1.0; 3]).unwrap(), 0.5);
        assert_eq!(outlier_auc(&[0.9, 0.8], &[0.85, 0.1]).unwrap(), 0.75);
        assert!(outlier_auc(&[], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn complementary(a in proptest::collection::vec(-5i32..5, 1..30),
                         b in proptest::collection::vec(-5i32..5, 1..30)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            prop_assert_eq!(outlier_auc(&a, &b).unwrap() + outlier_auc(&b, &a).unwrap(), 1.0);
        }

        #[test]
        fn monotone_invariant(a in proptest::collection::vec(-3.0f64..3.0, 1..30),
                              b in proptest::collection::vec(-3.0f64..3.0, 1..30)) {
            let f = |x: &f64| (2.0 * x).exp() + 7.0;
            let fa: Vec<f64> = a.iter().map(f).collect();
            let fb: Vec<f64> = b.iter().map(f).collect();
            prop_assert_eq!(outlier_auc(&a, &b).unwrap(), outlier_auc(&fa, &fb).unwrap());
        }
    }
}
