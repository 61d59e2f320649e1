//! Polynomial extrapolation to zero.

/// Evaluates at `x = 0` the interpolating polynomial through `(xs[i], ys[i])`
/// using Neville's scheme.
pub fn neville_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "abscissae and values must pair up");
    assert!(!xs.is_empty(), "need at least one point");
    let mut p = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}

/// Extrapolates to zero with all points and with the points nearest zero
/// minus one; returns `(value, |difference|)` as a value and error estimate.
pub fn extrapolate_with_error(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let full = neville_at_zero(xs, ys);
    if xs.len() < 2 {
        return (full, f64::INFINITY);
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].abs().total_cmp(&xs[b].abs()));
    let keep = &order[..xs.len() - 1];
    let sx: Vec<f64> = keep.iter().map(|&i| xs[i]).collect();
    let sy: Vec<f64> = keep.iter().map(|&i| ys[i]).collect();
    let reduced = neville_at_zero(&sx, &sy);
    (full, (full - reduced).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_polynomial_intercepts() {
        let xs = [0.1, 0.2, 0.3, 0.4];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 3.0 * x + x * x * x).collect();
        assert!((neville_at_zero(&xs, &ys) - 2.0).abs() < 1e-12);
    }
}
