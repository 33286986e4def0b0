/// Composite Simpson weights for `n` (odd) equally spaced nodes.
fn simpson_weights(n: usize) -> Vec<f64> {
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd node count");
    (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        })
        .collect()
}

/// Integral of `f` over `[a, b]` with composite Simpson on `n` nodes.
pub fn simpson_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / (n - 1) as f64;
    let w = simpson_weights(n);
    (0..n).map(|i| w[i] * f(a + i as f64 * h)).sum::<f64>() * h / 3.0
}

/// Tensor-product Simpson over `[a0, b0] x [a1, b1]`.
pub fn simpson_2d(f: impl Fn(f64, f64) -> f64, (a0, b0): (f64, f64), (a1, b1): (f64, f64), n: usize) -> f64 {
    let (h0, h1) = ((b0 - a0) / (n - 1) as f64, (b1 - a1) / (n - 1) as f64);
    let w = simpson_weights(n);
    let mut total = 0.0;
    for i in 0..n {
        let x = a0 + i as f64 * h0;
        let mut row = 0.0;
        for (j, wj) in w.iter().enumerate() {
            row += wj * f(x, a1 + j as f64 * h1);
        }
        total += w[i] * row;
    }
    total * h0 * h1 / 9.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        assert!((simpson_1d(|x| x * x * x, 0.0, 2.0, 11) - 4.0).abs() < 1e-12);
        assert!((simpson_2d(|x, y| x * y, (0.0, 1.0), (0.0, 2.0), 5) - 1.0).abs() < 1e-12);
    }
}
