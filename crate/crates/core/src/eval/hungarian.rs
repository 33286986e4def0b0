//! Shortest-augmenting-path Hungarian algorithm, O(n^2 m) for an `n x m`
//! cost matrix with `n <= m`.

use crate::error::{PcxError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `columns[row]` is the column assigned to `row`.
    pub columns: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost assignment of every row to a distinct column.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Assignment> {
    let n = cost.len();
    if n == 0 {
        return Ok(Assignment {
            columns: Vec::new(),
            cost: 0.0,
        });
    }
    let m = cost[0].len();
    if cost.iter().any(|r| r.len() != m) {
        return Err(PcxError::Shape("ragged cost matrix".into()));
    }
    if n > m {
        return Err(PcxError::InvalidArgument(format!("{n} rows cannot be matched into {m} columns")));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(PcxError::Numerical("non-finite cost".into()));
    }
    // 1-based potentials; column 0 is the virtual source
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut columns = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            columns[owner[j] - 1] = j - 1;
        }
    }
    let total = columns.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(Assignment {
        columns,
        cost: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_known_case() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost).unwrap();
        assert_eq!(a.cost, 5.0);
        assert_eq!(a.columns, vec![1, 0, 2]);
    }

    #[test]
    fn rectangular_and_errors() {
        let a = hungarian(&[vec![3.0, 1.0, 2.0]]).unwrap();
        assert_eq!(a.columns, vec![1]);
        assert!(hungarian(&[vec![1.0], vec![2.0]]).is_err());
        assert!(hungarian(&[vec![f64::NAN]]).is_err());
        assert!(hungarian(&[]).unwrap().columns.is_empty());
    }
}
