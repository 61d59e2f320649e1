//! Bracketed root search on a uniform scan grid.
//!
//! Sign changes between neighbouring grid points are refined by bisection.
//! Between sign changes, local extrema of `|f|` that approach zero are
//! refined by golden-section search: if the refined extremum crosses zero the
//! scan stepped over a close pair of simple roots (both are then bisected);
//! if it only touches zero it is reported as a tangential root, which the
//! caller must classify (on circles this is how doubly degenerate eigenvalues
//! show up).

use crate::error::{Error, Result};

/// How a root was detected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootKind {
    /// The function changes sign across the root.
    Crossing,
    /// The function touches zero without changing sign.
    Tangential,
}

/// A located root.
#[derive(Clone, Copy, Debug)]
pub struct Root {
    pub x: f64,
    pub kind: RootKind,
}

/// Bisection of a sign change on `[lo, hi]` down to `tol` in `x`.
pub fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::RootBracketFailure {
            lo,
            hi,
            detail: format!("no sign change (f(lo) = {flo:e}, f(hi) = {fhi:e})"),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if !fm.is_finite() {
            return Err(Error::RootBracketFailure {
                lo,
                hi,
                detail: "non-finite function value during bisection".into(),
            });
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section minimisation of `g` on `[lo, hi]`.
pub fn golden_min<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if g1 < g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - r * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + r * (hi - lo);
            g2 = g(x2);
        }
    }
    if g1 < g2 {
        (x1, g1)
    } else {
        (x2, g2)
    }
}

/// Finds all roots of `f` in `[lo, hi]` seen by a scan of step `step`.
///
/// `touch_rel` is the relative size (against the neighbouring grid values)
/// below which a refined extremum counts as touching zero.
pub fn find_roots<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    step: f64,
    tol: f64,
    touch_rel: f64,
) -> Result<Vec<Root>> {
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let h = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    if let Some(i) = fs.iter().position(|v| !v.is_finite()) {
        return Err(Error::RootBracketFailure {
            lo: xs[i],
            hi: xs[i],
            detail: "non-finite characteristic function on the scan grid".into(),
        });
    }
    let mut roots = Vec::new();
    for i in 0..n {
        let (a, b) = (xs[i], xs[i + 1]);
        let (fa, fb) = (fs[i], fs[i + 1]);
        if fa == 0.0 {
            roots.push(Root { x: a, kind: RootKind::Crossing });
            continue;
        }
        if fb != 0.0 && fa.signum() != fb.signum() {
            roots.push(Root { x: bisect(f, a, b, tol)?, kind: RootKind::Crossing });
        }
    }
    if fs[n] == 0.0 {
        roots.push(Root { x: xs[n], kind: RootKind::Crossing });
    }
    // Interior extrema of |f| with both neighbours on the same side of zero.
    for i in 1..n {
        let (fl, fm, fr) = (fs[i - 1], fs[i], fs[i + 1]);
        let same = fl.signum() == fm.signum() && fm.signum() == fr.signum() && fm != 0.0;
        if !same || fm.abs() > fl.abs() || fm.abs() > fr.abs() {
            continue;
        }
        let sign = fm.signum();
        let (xm, gm) = golden_min(&|x| sign * f(x), xs[i - 1], xs[i + 1], tol);
        let scale = fl.abs().max(fr.abs());
        if gm < 0.0 {
            // A close pair of crossings hidden between grid points.
            roots.push(Root { x: bisect(f, xs[i - 1], xm, tol)?, kind: RootKind::Crossing });
            roots.push(Root { x: bisect(f, xm, xs[i + 1], tol)?, kind: RootKind::Crossing });
        } else if gm <= touch_rel * scale {
            roots.push(Root { x: xm, kind: RootKind::Tangential });
        }
    }
    roots.sort_by(|a, b| a.x.total_cmp(&b.x));
    // A crossing found exactly on a grid point can be reported twice.
    roots.dedup_by(|a, b| (a.x - b.x).abs() <= 2.0 * tol && a.kind == b.kind);
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_and_close_roots() {
        let f = |x: f64| (x - 0.3) * (x - 0.30001) * (x + 2.0);
        let roots = find_roots(&f, -3.0, 3.0, 0.1, 1e-13, 1e-9).unwrap();
        assert_eq!(roots.len(), 3);
        assert!((roots[0].x + 2.0).abs() < 1e-12);
        assert!((roots[1].x - 0.3).abs() < 1e-12);
        assert!((roots[2].x - 0.30001).abs() < 1e-12);
    }

    #[test]
    fn reports_tangential_roots() {
        let f = |x: f64| -(x - 1.234).powi(2);
        let roots = find_roots(&f, 0.0, 3.0, 0.1, 1e-13, 1e-9).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].kind, RootKind::Tangential);
        assert!((roots[0].x - 1.234).abs() < 1e-6);
    }
}
