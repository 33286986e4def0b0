/// Minimum total cost over all row-to-column injections, by enumeration.
pub fn assignment_minimum(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let m = cost.first().map_or(0, Vec::len);
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; m], 0.0, &mut best);
    if cost.is_empty() {
        0.0
    } else {
        best
    }
}

/// Fraction of (in, out) pairs with in > out, ties counting one half.
pub fn pair_auc(in_scores: &[f64], out_scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    for a in in_scores {
        for b in out_scores {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    wins / (in_scores.len() * out_scores.len()) as f64
}
