//! Gauss–Legendre quadrature: fixed rules, adaptive bisection, and the
//! panel layouts used for heat-time integrals on `(0, ∞)`.

use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// A Gauss–Legendre rule on `[−1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, then Newton.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]` with this rule.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Maps the rule onto `[a, b]`, returning `(points, weights)`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, w * half))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 10- and 21-point rules for the adaptive integrator.
pub fn rules() -> &'static (GaussLegendre, GaussLegendre) {
    static RULES: OnceLock<(GaussLegendre, GaussLegendre)> = OnceLock::new();
    RULES.get_or_init(|| (GaussLegendre::new(10), GaussLegendre::new(21)))
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

/// Adaptive bisection with a 10/21-point Gauss–Legendre pair per panel.
///
/// Converges when the estimated absolute error is below
/// `max(abs_tol, rel_tol·|value|)`. `what` names the integral in the error
/// returned on non-convergence.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    what: &str,
) -> Result<Quadrature> {
    let (low, high) = rules();
    let mut stack = vec![(a, b, 0usize)];
    let mut value = 0.0;
    let mut error = 0.0;
    let total = (b - a).abs().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    while let Some((lo, hi, depth)) = stack.pop() {
        let coarse = low.integrate(f, lo, hi);
        let fine = high.integrate(f, lo, hi);
        let est = (fine - coarse).abs();
        let share = (hi - lo).abs() / total;
        if est <= (abs_tol * share.max(1e-6)).max(rel_tol * fine.abs()) || depth >= 48 {
            if depth >= 48 {
                worst = worst.max(est);
            }
            value += fine;
            error += est;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    if worst > abs_tol.max(rel_tol * value.abs()) {
        return Err(Error::QuadratureNonConvergence { what: what.to_string(), estimate: worst });
    }
    Ok(Quadrature { value, error })
}

/// Integrates `f` over `[a, ∞)` assuming eventual monotone decay.
///
/// Panels double in length starting from `initial`; integration stops once
/// `tail_bound(t)` (an upper bound on `∫_t^∞ |f|`) falls below `abs_tol`.
pub fn adaptive_to_infinity<F, B>(
    f: &F,
    a: f64,
    initial: f64,
    tail_bound: B,
    abs_tol: f64,
    rel_tol: f64,
    what: &str,
) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let mut lo = a;
    let mut width = initial;
    let mut total = Quadrature { value: 0.0, error: 0.0 };
    for _ in 0..200 {
        let hi = lo + width;
        let part = adaptive(f, lo, hi, abs_tol * 0.1, rel_tol, what)?;
        total.value += part.value;
        total.error += part.error;
        lo = hi;
        width *= 2.0;
        let tail = tail_bound(lo);
        if tail < abs_tol {
            total.error += tail;
            return Ok(total);
        }
    }
    Err(Error::QuadratureNonConvergence { what: what.to_string(), estimate: tail_bound(lo) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_are_exact_for_polynomials() {
        let rule = GaussLegendre::new(10);
        let v = rule.integrate(|x| x.powi(19) + x.powi(18), -1.0, 1.0);
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let q = adaptive(&|x: f64| (-(x * 100.0).powi(2)).exp(), -1.0, 1.0, 1e-14, 1e-13, "peak")
            .unwrap();
        assert!((q.value - PI.sqrt() / 100.0).abs() < 1e-13);
    }

    #[test]
    fn semi_infinite_integral() {
        let q = adaptive_to_infinity(
            &|t: f64| (-t).exp(),
            0.0,
            1.0,
            |t| (-t).exp(),
            1e-14,
            1e-13,
            "exp",
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-13);
    }
}
