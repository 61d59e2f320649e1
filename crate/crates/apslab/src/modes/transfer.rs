//! Transfer-matrix solver for a single block.
//!
//! On a constant-mass piece the system `(g, h)' = K(μ)·(g, h)` has the exact
//! propagator `exp(ℓK)`, evaluated in closed form because `K` is traceless.
//! Smooth walls are integrated with the fourth-order two-point Magnus
//! scheme on uniform slabs, so piecewise-constant profiles are exact and
//! smoothed walls converge at fourth order in the slab width.
//!
//! Eigenvalues are the roots of a real characteristic function:
//! `n_R · T(μ) · v_L` on intervals (`v_L` spans the allowed left boundary
//! values, `n_R` is the right constraint row) and `tr T(μ) − 2` on circles,
//! where a doubly degenerate eigenvalue shows up as a tangential root with
//! `T(μ) = I`.

use super::{adjoint_condition, closed_form, EndCondition, Eigenvalue, Geometry, KernelVector, ModeBlock};
use crate::error::{Error, Result};
use crate::model::{Numerics, PieceKind};
use crate::numerics::roots::{self, RootKind};
use crate::numerics::{apply2, expm_traceless, mul2, Mat2, IDENTITY2};

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug)]
enum Segment {
    /// Constant signed mass over a length.
    Flat { len: f64, mass: f64 },
    /// One Magnus slab of width `h` with the signed mass at its two Gauss
    /// nodes.
    Magnus { h: f64, m1: f64, m2: f64 },
}

/// Precomputed segment decomposition of a block.
#[derive(Clone, Debug)]
pub struct TransferPlan {
    lambda: f64,
    start: f64,
    segments: Vec<Segment>,
    max_mass: f64,
}

fn coefficient(lambda: f64, mass: f64, mu: f64) -> Mat2 {
    [[-lambda, mass + mu], [mass - mu, lambda]]
}

impl TransferPlan {
    /// Decomposes the block's mass profile into flat pieces and Magnus slabs.
    pub fn new(block: &ModeBlock, wall_slabs: usize) -> Self {
        let c = block.chirality as f64;
        let mut segments = Vec::new();
        let mut max_mass: f64 = 0.0;
        for piece in block.field.pieces() {
            match piece.kind {
                PieceKind::Flat(v) => {
                    segments.push(Segment::Flat { len: piece.b - piece.a, mass: c * v });
                    max_mass = max_mass.max(v.abs());
                }
                PieceKind::Smooth => {
                    let h = (piece.b - piece.a) / wall_slabs as f64;
                    for i in 0..wall_slabs {
                        let x = piece.a + h * i as f64;
                        let m1 = c * block.field.at(x + h * (0.5 - SQRT3 / 6.0));
                        let m2 = c * block.field.at(x + h * (0.5 + SQRT3 / 6.0));
                        max_mass = max_mass.max(m1.abs()).max(m2.abs());
                        segments.push(Segment::Magnus { h, m1, m2 });
                    }
                }
            }
        }
        Self { lambda: block.lambda, start: block.geometry.start(), segments, max_mass }
    }

    /// Largest `|M|` over the profile.
    pub fn max_mass(&self) -> f64 {
        self.max_mass
    }

    fn segment_propagator(&self, segment: &Segment, mu: f64) -> Mat2 {
        match *segment {
            Segment::Flat { len, mass } => expm_traceless(&coefficient(self.lambda, mass, mu), len),
            Segment::Magnus { h, m1, m2 } => {
                let k1 = coefficient(self.lambda, m1, mu);
                let k2 = coefficient(self.lambda, m2, mu);
                let (a, b) = (mul2(&k2, &k1), mul2(&k1, &k2));
                let w = SQRT3 * h * h / 12.0;
                let mut omega = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        omega[i][j] = 0.5 * h * (k1[i][j] + k2[i][j]) + w * (a[i][j] - b[i][j]);
                    }
                }
                expm_traceless(&omega, 1.0)
            }
        }
    }

    /// Propagator from the left end (or period start) across the whole block.
    pub fn total(&self, mu: f64) -> Mat2 {
        self.total_with_condition(mu).0
    }

    /// Propagator together with the product of the segment norms. The
    /// product bounds the size of every intermediate product, so rounding
    /// errors in `T` are of order `ε` times it; walls whose growth and decay
    /// cancel have `‖T‖` far below this bound.
    pub fn total_with_condition(&self, mu: f64) -> (Mat2, f64) {
        self.segments.iter().fold((IDENTITY2, 1.0), |(acc, kappa), s| {
            let e = self.segment_propagator(s, mu);
            (mul2(&e, &acc), kappa * spectral_norm(&e))
        })
    }

    /// Samples `(u, g, h)` of the solution with initial value `v0`, at
    /// resolution about `dx` on constant pieces and slab resolution on walls.
    pub fn samples(&self, mu: f64, v0: [f64; 2], dx: f64) -> Vec<(f64, [f64; 2])> {
        let mut u = self.start;
        let mut v = v0;
        let mut out = vec![(u, v)];
        for seg in &self.segments {
            match *seg {
                Segment::Flat { len, mass } => {
                    let n = (len / dx).ceil().max(1.0) as usize;
                    let step = expm_traceless(&coefficient(self.lambda, mass, mu), len / n as f64);
                    for i in 1..=n {
                        v = apply2(&step, v);
                        out.push((u + len * i as f64 / n as f64, v));
                    }
                    u += len;
                }
                Segment::Magnus { h, .. } => {
                    v = apply2(&self.segment_propagator(seg, mu), v);
                    u += h;
                    out.push((u, v));
                }
            }
        }
        out
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn single_row(end: &Option<EndCondition>, block: usize, which: &str) -> Result<[f64; 2]> {
    match end {
        Some(e) if e.rows.len() == 1 => Ok(e.rows[0]),
        _ => Err(Error::InvalidShape(format!(
            "block {block}: the {which} end must carry exactly one constraint for a self-adjoint spectrum"
        ))),
    }
}

/// The real characteristic function whose roots are the eigenvalues.
fn characteristic<'a>(block: &ModeBlock, plan: &'a TransferPlan) -> Result<Box<dyn Fn(f64) -> f64 + Sync + 'a>> {
    match block.geometry {
        Geometry::Interval { .. } => {
            let n_l = single_row(&block.left, block.id, "left")?;
            let n_r = single_row(&block.right, block.id, "right")?;
            let v_l = [-n_l[1], n_l[0]];
            Ok(Box::new(move |mu| dot(n_r, apply2(&plan.total(mu), v_l))))
        }
        Geometry::Circle { .. } => Ok(Box::new(move |mu| {
            let t = plan.total(mu);
            t[0][0] + t[1][1] - 2.0
        })),
    }
}

fn frobenius(t: &Mat2) -> f64 {
    t.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Spectral norm of a unimodular 2×2 matrix: `σ² + σ⁻² = ‖T‖_F²`.
fn spectral_norm(t: &Mat2) -> f64 {
    let f2 = t.iter().flatten().map(|x| x * x).sum::<f64>();
    (0.5 * (f2 + (f2 * f2 - 4.0).max(0.0).sqrt())).sqrt().max(1.0)
}

/// Distance of the monodromy from the identity, relative to its rounding
/// scale.
fn distance_from_identity(t: &Mat2, kappa: f64) -> f64 {
    frobenius(&[[t[0][0] - 1.0, t[0][1]], [t[1][0], t[1][1] - 1.0]]) / kappa.max(1.0)
}

/// Scan step for the root search: resolves the oscillation scale of the
/// characteristic function and the mass scale.
pub fn scan_step(length: f64, max_mass: f64) -> f64 {
    let base = std::f64::consts::PI / (4.0 * length);
    if max_mass > 0.0 {
        base.min(1.0 / (4.0 * max_mass))
    } else {
        base
    }
}

const ROOT_TOLERANCE: f64 = 1e-12;

/// Refines a doubly degenerate circle eigenvalue: at such a point `T = I`,
/// so an off-diagonal entry of `T` changes sign there.
fn refine_double(plan: &TransferPlan, guess: f64, radius: f64) -> f64 {
    for entry in [(0usize, 1usize), (1, 0)] {
        let f = |mu: f64| plan.total(mu)[entry.0][entry.1];
        let (lo, hi) = (guess - radius, guess + radius);
        if f(lo).signum() != f(hi).signum() {
            if let Ok(x) = roots::bisect(&f, lo, hi, ROOT_TOLERANCE) {
                return x;
            }
        }
    }
    guess
}

/// Roots of the characteristic function in `[lo, hi]` with multiplicities.
fn roots_in(block: &ModeBlock, plan: &TransferPlan, lo: f64, hi: f64, step: f64) -> Result<Vec<(f64, usize)>> {
    let f = characteristic(block, plan)?;
    let found = roots::find_roots(&f, lo, hi, step, ROOT_TOLERANCE, 1e-9)?;
    match block.geometry {
        Geometry::Interval { .. } => {
            if let Some(r) = found.iter().find(|r| r.kind == RootKind::Tangential) {
                return Err(Error::RootBracketFailure {
                    lo: r.x - step,
                    hi: r.x + step,
                    detail: format!("block {}: tangential root on an interval, where eigenvalues are simple", block.id),
                });
            }
            Ok(found.into_iter().map(|r| (r.x, 1)).collect())
        }
        Geometry::Circle { .. } => {
            // A doubly degenerate eigenvalue (monodromy equal to the identity)
            // appears as a tangential root, a root on a grid point, or a pair
            // of crossings split by rounding; all three are refined to the
            // point where the monodromy is closest to the identity.
            let mut out: Vec<(f64, usize)> = Vec::new();
            for r in found {
                let (t, kappa) = plan.total_with_condition(r.x);
                let near_identity = distance_from_identity(&t, kappa) < 1e-2;
                let candidate = if near_identity { refine_double(plan, r.x, 0.5 * step) } else { r.x };
                let double = near_identity && {
                    let (t, kappa) = plan.total_with_condition(candidate);
                    distance_from_identity(&t, kappa) < DOUBLE_ROOT_TOLERANCE
                };
                if r.kind == RootKind::Tangential && !double {
                    return Err(Error::RootBracketFailure {
                        lo: r.x - step,
                        hi: r.x + step,
                        detail: format!("block {}: tangential root where the monodromy is not the identity", block.id),
                    });
                }
                if double {
                    // Rounding can split one degenerate eigenvalue into a
                    // pair of nearby roots; merge them when the monodromy
                    // stays at the identity in between.
                    if let Some(last) = out.last_mut() {
                        let mid = 0.5 * (last.0 + candidate);
                        let (t, kappa) = plan.total_with_condition(mid);
                        if last.1 == 2 && distance_from_identity(&t, kappa) < DOUBLE_ROOT_TOLERANCE {
                            last.0 = mid;
                            continue;
                        }
                    }
                    out.push((candidate, 2));
                } else {
                    out.push((r.x, 1));
                }
            }
            out.sort_by(|a, b| a.0.total_cmp(&b.0));
            Ok(out)
        }
    }
}

/// Distance of the monodromy from the identity, relative to the rounding
/// scale, below which a root is classified as doubly degenerate. It allows
/// for the residual location error of the refined root.
const DOUBLE_ROOT_TOLERANCE: f64 = 1e-9;

/// All eigenvalues `|μ| ≤ Λ` of a block: closed form where available,
/// otherwise bracketed root search on the characteristic function.
pub fn solve(block: &ModeBlock, numerics: &Numerics) -> Result<Vec<Eigenvalue>> {
    let cutoff = numerics.spectral_cutoff;
    let list = match closed_form(block, cutoff) {
        Some(list) => list,
        None => root_search(block, numerics)?,
    };
    Ok(list
        .into_iter()
        .map(|(mu, multiplicity)| Eigenvalue {
            mu,
            multiplicity,
            block_id: block.id,
            block_lambda: block.lambda,
            chirality: None,
        })
        .collect())
}

/// Root-search spectrum of a block, bypassing closed forms.
pub fn root_search(block: &ModeBlock, numerics: &Numerics) -> Result<Vec<(f64, usize)>> {
    let plan = TransferPlan::new(block, numerics.eta.wall_slabs);
    let step = scan_step(block.geometry.length(), plan.max_mass());
    let cutoff = numerics.spectral_cutoff;
    roots_in(block, &plan, -cutoff, cutoff, step)
}

/// Rounding floor of a quantity computed from a propagator with condition
/// `kappa`: values below it are numerically zero.
fn rounding_floor(kappa: f64) -> f64 {
    ZERO_FLOOR_FACTOR * f64::EPSILON * kappa.max(1.0)
}

/// Multiple of `ε·κ` below which a `μ = 0` quantity counts as an exact zero.
/// Values within a factor of [`AMBIGUITY_BAND`] above it are reported as
/// ill-conditioned rather than silently classified.
const ZERO_FLOOR_FACTOR: f64 = 1e4;
const AMBIGUITY_BAND: f64 = 1e2;

fn classify(value: f64, floor: f64) -> Result<bool> {
    let v = value.abs();
    if v > floor && v < AMBIGUITY_BAND * floor {
        return Err(Error::IllConditioned { sigma: v, tolerance: floor });
    }
    Ok(v <= floor)
}

fn row_norm(r: [f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

/// Initial values at the left end of the solutions at `μ = 0` that satisfy
/// both end conditions (a basis of the kernel's initial data).
fn interval_null_space(left: &EndCondition, right: &EndCondition, t: &Mat2, kappa: f64) -> Result<Vec<[f64; 2]>> {
    let left_space = null_space_of_rows(&left.rows);
    if left_space.is_empty() {
        return Ok(Vec::new());
    }
    let floor = rounding_floor(kappa);
    let mut out = Vec::new();
    match (left_space.len(), right.rows.len()) {
        (_, 0) => out = left_space,
        (1, _) => {
            let v = left_space[0];
            let tv = apply2(t, v);
            let mut zero = true;
            for n in &right.rows {
                zero &= classify(dot(*n, tv) / row_norm(*n), floor)?;
            }
            if zero {
                out.push(v);
            }
        }
        (_, 1) => {
            // Free left end: the kernel is the preimage under T of the
            // right constraint's complement.
            let n = right.rows[0];
            let row = [dot(n, [t[0][0], t[1][0]]), dot(n, [t[0][1], t[1][1]])];
            out.push([-row[1], row[0]]);
            let scale = row_norm(row);
            out[0] = [out[0][0] / scale, out[0][1] / scale];
        }
        _ => {}
    }
    Ok(out)
}

/// Orthonormal basis of the common null space of a few rows in the plane.
fn null_space_of_rows(rows: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let nonzero: Vec<[f64; 2]> = rows.iter().copied().filter(|r| row_norm(*r) > 0.0).collect();
    match nonzero.len() {
        0 => vec![[1.0, 0.0], [0.0, 1.0]],
        _ => {
            let r = nonzero[0];
            let n = row_norm(r);
            let v = [-r[1] / n, r[0] / n];
            let independent = nonzero[1..].iter().any(|s| dot(*s, v).abs() > 1e-12 * row_norm(*s));
            if independent {
                Vec::new()
            } else {
                vec![v]
            }
        }
    }
}

/// Initial values of the periodic solutions at `μ = 0`.
fn circle_null_space(t: &Mat2, kappa: f64) -> Result<Vec<[f64; 2]>> {
    let floor = rounding_floor(kappa);
    let d = [[t[0][0] - 1.0, t[0][1]], [t[1][0], t[1][1] - 1.0]];
    if classify(frobenius(&d), floor)? {
        return Ok(vec![[1.0, 0.0], [0.0, 1.0]]);
    }
    // det(T − I) = 2 − tr T because det T = 1.
    if !classify(2.0 - t[0][0] - t[1][1], floor)? {
        return Ok(Vec::new());
    }
    let row = if row_norm(d[0]) >= row_norm(d[1]) { d[0] } else { d[1] };
    let n = row_norm(row);
    Ok(vec![[-row[1] / n, row[0] / n]])
}

/// Kernel initial data of a block at `μ = 0`.
fn kernel_initial_data(block: &ModeBlock, t: &Mat2, kappa: f64) -> Result<Vec<[f64; 2]>> {
    match block.geometry {
        Geometry::Circle { .. } => circle_null_space(t, kappa),
        Geometry::Interval { .. } => {
            let empty = EndCondition { rows: Vec::new() };
            let left = block.left.as_ref().unwrap_or(&empty);
            let right = block.right.as_ref().unwrap_or(&empty);
            interval_null_space(left, right, t, kappa)
        }
    }
}

/// `(dim ker, dim coker)` of a block at `μ = 0`.
pub fn fredholm_dims(block: &ModeBlock, numerics: &Numerics) -> Result<(usize, usize)> {
    let plan = TransferPlan::new(block, numerics.eta.wall_slabs);
    let (t, kappa) = plan.total_with_condition(0.0);
    let ker = kernel_initial_data(block, &t, kappa)?.len();
    match block.geometry {
        Geometry::Circle { .. } => Ok((ker, ker)),
        Geometry::Interval { .. } => {
            let empty = EndCondition { rows: Vec::new() };
            let left = adjoint_condition(block.left.as_ref().unwrap_or(&empty));
            let right = adjoint_condition(block.right.as_ref().unwrap_or(&empty));
            Ok((ker, interval_null_space(&left, &right, &t, kappa)?.len()))
        }
    }
}

/// Simpson-type composite inner products of sampled profiles.
fn inner(samples_a: &[(f64, [f64; 2])], samples_b: &[(f64, [f64; 2])], weight: [f64; 2]) -> f64 {
    let mut total = 0.0;
    for w in 0..samples_a.len() - 1 {
        let (u0, a0) = samples_a[w];
        let (u1, a1) = samples_a[w + 1];
        let b0 = samples_b[w].1;
        let b1 = samples_b[w + 1].1;
        let f0 = weight[0] * a0[0] * b0[0] + weight[1] * a0[1] * b0[1];
        let f1 = weight[0] * a1[0] * b1[0] + weight[1] * a1[1] * b1[1];
        total += 0.5 * (u1 - u0) * (f0 + f1);
    }
    total
}

/// Zero modes of a block, decided by a rounding-aware null-space test at
/// `μ = 0`, with a local root scan guarding against eigenvalues just above the kernel
/// tolerance.
pub fn zero_modes(block: &ModeBlock, numerics: &Numerics) -> Result<Vec<KernelVector>> {
    let plan = TransferPlan::new(block, numerics.eta.wall_slabs);
    let tol = numerics.kernel_tolerance;
    // Ambiguity guard: any eigenvalue with tol ≤ |μ| < 10·tol. Sign changes
    // below the rounding floor of the characteristic function are ignored;
    // exact zero modes are decided by the null-space test that follows.
    if let Ok(f) = characteristic(block, &plan) {
        let floor = rounding_floor(plan.total_with_condition(0.0).1);
        let n = 160;
        let h = 40.0 * tol / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| -20.0 * tol + h * i as f64).collect();
        let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        for i in 0..n {
            let (fa, fb) = (fs[i], fs[i + 1]);
            if fa.signum() == fb.signum() || fa.abs().max(fb.abs()) < floor {
                continue;
            }
            let mu = roots::bisect(&f, xs[i], xs[i + 1], 1e-3 * tol)?;
            if mu.abs() >= tol && mu.abs() < 10.0 * tol {
                return Err(Error::AmbiguousKernel { mu, tolerance: tol });
            }
        }
    }
    let (t, kappa) = plan.total_with_condition(0.0);
    let initial = kernel_initial_data(block, &t, kappa)?;
    if initial.is_empty() {
        return Ok(Vec::new());
    }
    let dx = block.geometry.length() / 4000.0;
    let mut profiles: Vec<Vec<(f64, [f64; 2])>> = initial.iter().map(|v| plan.samples(0.0, *v, dx)).collect();
    // L²-orthonormalize so the chirality trace is basis independent.
    let mut ortho: Vec<Vec<(f64, [f64; 2])>> = Vec::new();
    for mut p in profiles.drain(..) {
        for q in &ortho {
            let c = inner(q, &p, [1.0, 1.0]);
            for (x, y) in p.iter_mut().zip(q) {
                x.1[0] -= c * y.1[0];
                x.1[1] -= c * y.1[1];
            }
        }
        let n = inner(&p, &p, [1.0, 1.0]).sqrt();
        if n > 1e-12 {
            for x in &mut p {
                x.1[0] /= n;
                x.1[1] /= n;
            }
            ortho.push(p);
        }
    }
    let c = block.chirality as f64;
    Ok(ortho
        .into_iter()
        .map(|p| {
            let chirality = c * inner(&p, &p, [1.0, -1.0]);
            let stride = (p.len() / 32).max(1);
            let samples = p.iter().step_by(stride).map(|(u, v)| (*u, v[0], v[1])).collect();
            KernelVector { block_id: block.id, block_lambda: block.lambda, chirality, samples }
        })
        .collect())
}
