//! Closed-form heat kernels on infinite and half-infinite cylinders and the
//! traced quantities built from them.
//!
//! On a product cylinder the squared massive operator separates as
//! `−∂_u² + D_Y² + m²`, so in the eigenbasis of `D_Y` every kernel is
//! diagonal with one-dimensional entries: a free Gaussian on the full line,
//! and Dirichlet, Neumann or Robin image kernels on a half line. The
//! boundary condition decides which: sections in the range of `P_>` and the
//! `V_+` kernel direction are Dirichlet, their `γ`-images are Robin (with
//! rate equal to the eigenvalue) and Neumann respectively.
//!
//! Products `e^{a}·erfc(z)` are evaluated through [`exp_erfc`] so that large
//! exponents never overflow.

use crate::boundary::{BoundaryEigendata, CMatrix, ProjectionLabel, C64};
use crate::error::{Error, Result};
use crate::numerics::quad::{self, Quadrature};
use crate::numerics::special::{exp_erfc, gamma};
use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

pub use crate::numerics::special::erfc;

/// Which cylinder kernel to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum KernelVariant {
    /// Full cylinder `u ∈ ℝ`.
    Infinite,
    /// Half cylinder `u ≥ 0` with the `Π_{V+}` condition at `u = 0`.
    HalfPlus,
    /// Half cylinder `u ≤ 0`, the mirror image of [`HalfPlus`](Self::HalfPlus).
    HalfMinus,
}

/// A heat kernel `e^{−t(D − mΓ_S)²}` on a cylinder.
#[derive(Clone, Copy, Debug)]
pub struct CylinderKernelSpec<'a> {
    pub variant: KernelVariant,
    pub eigendata: &'a BoundaryEigendata,
    pub mass: f64,
    pub time: f64,
}

/// Role of a boundary basis section in the half-cylinder kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Role {
    /// Eigensection with positive eigenvalue: Dirichlet.
    Positive(f64),
    /// `γ`-image of a positive eigensection, eigenvalue `−λ`: Robin with
    /// rate `λ`.
    Negative(f64),
    /// `V_+` kernel direction: Dirichlet.
    KernelPlus,
    /// `γ`-image of `V_+`: Neumann.
    KernelMinus,
}

fn roles(eig: &BoundaryEigendata) -> Vec<Role> {
    eig.basis
        .iter()
        .map(|s| {
            let lambda = eig.lambda_of(*s);
            if lambda > 0.0 {
                Role::Positive(lambda)
            } else if lambda < 0.0 {
                Role::Negative(-lambda)
            } else if eig.kernel_basis.first() == Some(s) {
                Role::KernelPlus
            } else {
                Role::KernelMinus
            }
        })
        .collect()
}

fn role_lambda(role: Role) -> f64 {
    match role {
        Role::Positive(l) | Role::Negative(l) => l,
        Role::KernelPlus | Role::KernelMinus => 0.0,
    }
}

/// The line heat kernel `e^{−x²/4t}/√(4πt)` and its `x`-derivative.
fn line(x: f64, t: f64) -> (f64, f64) {
    let g = (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
    (g, -x / (2.0 * t) * g)
}

/// One-dimensional half-line kernel for `u, v ≥ 0` (without the `e^{−m²t}`
/// factor) and its `u`-derivative.
fn half_line(role: Role, u: f64, v: f64, t: f64) -> (f64, f64) {
    let (direct, d_direct) = line(u - v, t);
    let (image, d_image) = line(u + v, t);
    let lambda = role_lambda(role);
    let decay = (-lambda * lambda * t).exp();
    match role {
        Role::Positive(_) | Role::KernelPlus => (decay * (direct - image), decay * (d_direct - d_image)),
        Role::KernelMinus => (decay * (direct + image), decay * (d_direct + d_image)),
        Role::Negative(l) => {
            let s = u + v;
            let z = s / (2.0 * t.sqrt()) + l * t.sqrt();
            let robin = exp_erfc(l * s, z);
            let value = decay * (direct + image) - l * robin;
            // d/du of −l·e^{ls}·erfc(z) = −l²·e^{ls}erfc(z) + l·e^{ls − z²}/√(πt).
            let slope = decay * (d_direct + d_image) - l * l * robin + l * (l * s - z * z).exp() / (PI * t).sqrt();
            (value, slope)
        }
    }
}

impl CylinderKernelSpec<'_> {
    fn check(&self, u: f64) -> Result<()> {
        let ok = match self.variant {
            KernelVariant::Infinite => u.is_finite(),
            KernelVariant::HalfPlus => u >= 0.0,
            KernelVariant::HalfMinus => u <= 0.0,
        };
        if !self.time.is_finite() || self.time <= 0.0 {
            return Err(Error::DomainViolation(format!("heat kernel time must be positive, got {}", self.time)));
        }
        if ok {
            Ok(())
        } else {
            Err(Error::DomainViolation(format!("u = {u} lies outside the {:?} cylinder", self.variant)))
        }
    }

    /// Diagonal kernel entries at `(u, v)` and their `u`-derivatives.
    fn entries(&self, u: f64, v: f64) -> Result<Vec<(f64, f64)>> {
        self.check(u)?;
        self.check(v)?;
        let t = self.time;
        let mass = (-self.mass * self.mass * t).exp();
        Ok(roles(self.eigendata)
            .into_iter()
            .map(|role| {
                let (k, dk) = match self.variant {
                    KernelVariant::Infinite => {
                        let l = role_lambda(role);
                        let (g, dg) = line(u - v, t);
                        let decay = (-l * l * t).exp();
                        (decay * g, decay * dg)
                    }
                    KernelVariant::HalfPlus => half_line(role, u, v, t),
                    KernelVariant::HalfMinus => {
                        let (k, dk) = half_line(role, -u, -v, t);
                        (k, -dk)
                    }
                };
                (mass * k, mass * dk)
            })
            .collect())
    }
}

/// Kernel at `(u, v)` as a matrix over the truncated boundary basis. It is
/// diagonal because every basis section is an eigensection of `D_Y`.
pub fn kernel_eval(spec: &CylinderKernelSpec, u: f64, v: f64) -> Result<DMatrix<f64>> {
    let entries = spec.entries(u, v)?;
    Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(entries.len(), entries.iter().map(|e| e.0))))
}

/// `u`-derivative of [`kernel_eval`].
pub fn kernel_derivative(spec: &CylinderKernelSpec, u: f64, v: f64) -> Result<DMatrix<f64>> {
    let entries = spec.entries(u, v)?;
    Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(entries.len(), entries.iter().map(|e| e.1))))
}

/// `Γ_S`-trace over the boundary of the diagonal kernel, summed directly
/// from [`kernel_eval`].
pub fn gamma_trace_direct(spec: &CylinderKernelSpec, u: f64) -> Result<f64> {
    let k = kernel_eval(spec, u, u)?;
    Ok(spec
        .eigendata
        .basis
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let chirality = if s.component == 1 { 1.0 } else { -1.0 };
            chirality * k[(i, i)]
        })
        .sum())
}

/// Chirality weights `⟨Γ_S φ_λ, φ_λ⟩` of the positive eigensections.
pub fn positive_weights(eig: &BoundaryEigendata) -> Vec<(f64, f64)> {
    eig.entries.iter().filter(|e| e.lambda > 0.0).map(|e| (e.lambda, e.chirality as f64)).collect()
}

/// Closed-form `Γ_S`-trace over the boundary of a half-cylinder kernel at
/// height `u`: the Gaussian image and Robin terms of each positive
/// eigensection weighted by its chirality, plus `−2n_+` times the Gaussian
/// image of the kernel directions. On the infinite cylinder the trace is 0.
pub fn gamma_trace_half(spec: &CylinderKernelSpec, u: f64) -> Result<f64> {
    spec.check(u)?;
    let t = spec.time;
    let x = match spec.variant {
        KernelVariant::Infinite => return Ok(0.0),
        KernelVariant::HalfPlus => u,
        KernelVariant::HalfMinus => -u,
    };
    let mass = (-spec.mass * spec.mass * t).exp();
    let image = (-x * x / t).exp() / (4.0 * PI * t).sqrt();
    let sum: f64 = positive_weights(spec.eigendata)
        .iter()
        .map(|&(l, w)| w * (-2.0 * (-l * l * t).exp() * image + l * exp_erfc(2.0 * l * x, x / t.sqrt() + l * t.sqrt())))
        .sum();
    Ok(mass * (sum - 2.0 * image * spec.eigendata.n_plus as f64))
}

/// Bound on the heat-trace contribution of the discarded boundary
/// eigenvalues, `Σ_{λ > Λ_K} e^{−λ²t}` over both chiralities.
pub fn truncation_bound(eig: &BoundaryEigendata, t: f64) -> f64 {
    let k = eig.scale * (eig.cutoff as f64 + 0.5);
    2.0 * (-k * k * t).exp() / (1.0 - (-(2.0 * k + eig.scale) * eig.scale * t).exp())
}

/// Residuals of a kernel's boundary conditions and heat equation.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelResiduals {
    /// `max ‖Π_{V+} K(0, v)‖` over the sampled `v`.
    pub dirichlet: f64,
    /// `max ‖Π_{V−}(∂_u ± D_Y ± mγΓ_S)K(0, v)‖` over the sampled `v`.
    pub derivative: f64,
    /// `max |(∂_t − ∂_u² + λ² + m²)K|` over the interior grid, by finite
    /// differences.
    pub heat_equation: f64,
}

/// Boundary-condition residuals at `u = 0` for sampled `v`.
///
/// `HalfPlus` is checked against `Π_{V+}K = 0` and
/// `Π_{V−}(∂_u + D_Y + mγΓ_S)K = 0`; `HalfMinus` against the mirrored
/// condition with `∂_u − D_Y − mγΓ_S`.
pub fn boundary_residuals(spec: &CylinderKernelSpec, samples: &[f64]) -> Result<(f64, f64)> {
    let eig = spec.eigendata;
    let sign = match spec.variant {
        KernelVariant::Infinite => return Ok((0.0, 0.0)),
        KernelVariant::HalfPlus => 1.0,
        KernelVariant::HalfMinus => -1.0,
    };
    let pi_plus = eig.projection(&ProjectionLabel::PiVPlus)?.matrix;
    let pi_minus = eig.projection(&ProjectionLabel::PiVMinus)?.matrix;
    let first_order = eig.dirac() + eig.gamma() * eig.gamma_s() * C64::from(spec.mass);
    let complex = |m: DMatrix<f64>| -> CMatrix { m.map(C64::from) };
    let (mut dirichlet, mut derivative) = (0.0f64, 0.0f64);
    for &v in samples {
        let v = sign * v.abs();
        let k = complex(kernel_eval(spec, 0.0, v)?);
        let dk = complex(kernel_derivative(spec, 0.0, v)?);
        dirichlet = dirichlet.max((&pi_plus * &k).norm());
        let robin = dk + (&first_order * &k) * C64::from(sign);
        derivative = derivative.max((&pi_minus * robin).norm());
    }
    Ok((dirichlet, derivative))
}

/// Heat-equation residual of every diagonal entry on an interior grid,
/// using fourth-order central differences in `t` and `u`.
pub fn heat_equation_residual(spec: &CylinderKernelSpec, u_grid: &[f64], v_grid: &[f64]) -> Result<f64> {
    let h = 2e-3;
    let dt = 1e-3 * spec.time;
    let eig = spec.eigendata;
    let lambdas: Vec<f64> = roles(eig).into_iter().map(role_lambda).collect();
    let at = |t: f64, u: f64, v: f64| -> Result<Vec<f64>> {
        Ok(CylinderKernelSpec { time: t, ..*spec }.entries(u, v)?.into_iter().map(|e| e.0).collect())
    };
    let mut worst = 0.0f64;
    for &u in u_grid {
        for &v in v_grid {
            let t = spec.time;
            let k0 = at(t, u, v)?;
            let (up1, up2, um1, um2) = (at(t, u + h, v)?, at(t, u + 2.0 * h, v)?, at(t, u - h, v)?, at(t, u - 2.0 * h, v)?);
            let (tp1, tp2, tm1, tm2) = (at(t + dt, u, v)?, at(t + 2.0 * dt, u, v)?, at(t - dt, u, v)?, at(t - 2.0 * dt, u, v)?);
            for i in 0..k0.len() {
                let d_t = (-tp2[i] + 8.0 * tp1[i] - 8.0 * tm1[i] + tm2[i]) / (12.0 * dt);
                let d_uu = (-up2[i] + 16.0 * up1[i] - 30.0 * k0[i] + 16.0 * um1[i] - um2[i]) / (12.0 * h * h);
                let rate = lambdas[i] * lambdas[i] + spec.mass * spec.mass;
                worst = worst.max((d_t - d_uu + rate * k0[i]).abs());
            }
        }
    }
    Ok(worst)
}

/// All residuals of a kernel on default sample sets.
pub fn residuals(spec: &CylinderKernelSpec) -> Result<KernelResiduals> {
    let samples: Vec<f64> = (0..12).map(|i| 0.05 + 0.25 * i as f64).collect();
    let (dirichlet, derivative) = boundary_residuals(spec, &samples)?;
    let sign = if spec.variant == KernelVariant::HalfMinus { -1.0 } else { 1.0 };
    let grid: Vec<f64> = (0..6).map(|i| sign * (0.3 + 0.4 * i as f64)).collect();
    let heat_equation = heat_equation_residual(spec, &grid, &grid)?;
    Ok(KernelResiduals { dirichlet, derivative, heat_equation })
}

/// The smooth step `ρ(a, b)`: 0 below `a`, 1 above `b`, built from
/// `e^{−1/x}` so that it is smooth with all derivatives vanishing at both
/// ends.
pub fn smooth_step(a: f64, b: f64, x: f64) -> f64 {
    let y = (x - a) / (b - a);
    if y <= 0.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else {
        let q = 1.0 / y - 1.0 / (1.0 - y);
        // e^{−1/y} / (e^{−1/y} + e^{−1/(1−y)}) = 1 / (1 + e^{q}).
        if q > 700.0 {
            0.0
        } else {
            1.0 / (1.0 + q.exp())
        }
    }
}

/// Derivative of [`smooth_step`] in `x`.
pub fn smooth_step_derivative(a: f64, b: f64, x: f64) -> f64 {
    let y = (x - a) / (b - a);
    if y <= 0.0 || y >= 1.0 {
        return 0.0;
    }
    let q = 1.0 / y - 1.0 / (1.0 - y);
    let c = (0.5 * q).cosh();
    if !c.is_finite() {
        return 0.0;
    }
    (1.0 / (y * y) + 1.0 / ((1.0 - y) * (1.0 - y))) / (4.0 * c * c) / (b - a)
}

/// The four cutoff profiles of a neck of half-length `R`, extended evenly
/// to negative `u`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CutoffFunctions {
    pub r: f64,
}

impl CutoffFunctions {
    pub fn new(r: f64) -> Self {
        Self { r }
    }

    fn scaled(&self, u: f64) -> f64 {
        u.abs() / self.r
    }

    /// `φ₁ = 1 − ρ(5/7, 6/7)(|u|/R)`.
    pub fn phi1(&self, u: f64) -> f64 {
        1.0 - smooth_step(5.0 / 7.0, 6.0 / 7.0, self.scaled(u))
    }

    /// `φ₂ = ρ(1/7, 2/7)(|u|/R)`.
    pub fn phi2(&self, u: f64) -> f64 {
        smooth_step(1.0 / 7.0, 2.0 / 7.0, self.scaled(u))
    }

    /// `ψ₂ = ρ(3/7, 4/7)(|u|/R)`.
    pub fn psi2(&self, u: f64) -> f64 {
        smooth_step(3.0 / 7.0, 4.0 / 7.0, self.scaled(u))
    }

    /// `ψ₁ = 1 − ψ₂`.
    pub fn psi1(&self, u: f64) -> f64 {
        1.0 - self.psi2(u)
    }

    /// `ψ₁′(u)` for `u ≥ 0`, supported in `[3R/7, 4R/7]`.
    pub fn psi1_derivative(&self, u: f64) -> f64 {
        -smooth_step_derivative(3.0 / 7.0, 4.0 / 7.0, u / self.r) / self.r
    }

    /// Samples `(u, φ₁, φ₂, ψ₁, ψ₂)` on `n + 1` points of `[−R, R]`.
    pub fn sample(&self, n: usize) -> Vec<[f64; 5]> {
        (0..=n)
            .map(|i| {
                let u = -self.r + 2.0 * self.r * i as f64 / n as f64;
                [u, self.phi1(u), self.phi2(u), self.psi1(u), self.psi2(u)]
            })
            .collect()
    }
}

const QUAD_TOL: f64 = 1e-13;

/// `∫₀^R ψ₁ f du` for integrands concentrated within a few `√t` of the
/// boundary: panels grow geometrically from `√t/4` so the quadrature sees
/// the peak however small `t` is, and the breakpoints of `ψ₁` are panel
/// edges.
fn integrate_psi1<F: Fn(f64) -> f64>(cut: &CutoffFunctions, t: f64, f: F, what: &str) -> Result<Quadrature> {
    let r = cut.r;
    let g = |u: f64| cut.psi1(u) * f(u);
    let (flat_end, support_end) = (3.0 * r / 7.0, 4.0 * r / 7.0);
    let mut edges = vec![0.0];
    let mut e = 0.25 * t.sqrt();
    while e < flat_end {
        edges.push(e);
        e *= 2.0;
    }
    edges.extend([flat_end, support_end]);
    let mut total = Quadrature { value: 0.0, error: 0.0 };
    for w in edges.windows(2) {
        let q = quad::adaptive(&g, w[0], w[1], QUAD_TOL, 1e-12, what)?;
        total.value += q.value;
        total.error += q.error;
    }
    Ok(total)
}

/// `∫ ψ₁′ f du` over the support of `ψ₁′`.
fn integrate_psi1_derivative<F: Fn(f64) -> f64>(cut: &CutoffFunctions, f: F, what: &str) -> Result<Quadrature> {
    let r = cut.r;
    let g = |u: f64| cut.psi1_derivative(u) * f(u);
    quad::adaptive(&g, 3.0 * r / 7.0, 4.0 * r / 7.0, QUAD_TOL, 1e-12, what)
}

/// `a(R) = ∫₀^R ψ₁(u)·2e^{−u²/t}/√(πt) du`, which tends to 1 as `R → ∞`.
pub fn a_term(cut: &CutoffFunctions, t: f64) -> Result<f64> {
    Ok(integrate_psi1(cut, t, |u| 2.0 * (-u * u / t).exp() / (PI * t).sqrt(), "a(R)")?.value)
}

/// `∫₀^R ψ₁(u)·2x·e^{2xu}·erfc(u/√t + x√t) du`.
fn robin_moment(cut: &CutoffFunctions, t: f64, x: f64) -> Result<f64> {
    let st = t.sqrt();
    Ok(integrate_psi1(cut, t, |u| 2.0 * x * exp_erfc(2.0 * x * u, u / st + x * st), "Robin moment")?.value)
}

/// `∫ ψ₁′(u)·e^{2xu}·erfc(u/√t + x√t) du`.
fn boundary_moment(cut: &CutoffFunctions, t: f64, x: f64) -> Result<f64> {
    let st = t.sqrt();
    Ok(integrate_psi1_derivative(cut, |u| exp_erfc(2.0 * x * u, u / st + x * st), "boundary moment")?.value)
}

/// The cut-off integral of the difference of cylinder supertraces, by two
/// routes.
#[derive(Clone, Debug, Serialize)]
pub struct DeltaC {
    /// Quadrature of the explicit `u`-integral (Gaussian image plus Robin
    /// terms).
    pub direct: f64,
    /// The same quantity after integrating the Robin terms by parts.
    pub by_parts: f64,
    /// Largest per-eigenvalue mismatch of the integration-by-parts identity,
    /// before chirality weighting (so it is informative even when the
    /// weighted sums cancel).
    pub identity_residual: f64,
}

/// `∫_{Y×[−R,R]} Δ_c(t; x) dx` by direct quadrature and by parts.
pub fn delta_c_integral(r: f64, m: f64, t: f64, eig: &BoundaryEigendata, cut: &CutoffFunctions) -> Result<DeltaC> {
    if r <= 0.0 || t <= 0.0 {
        return Err(Error::DomainViolation(format!("need R > 0 and t > 0, got R = {r}, t = {t}")));
    }
    let weights = positive_weights(eig);
    let n_plus = eig.n_plus as f64;
    let mass = m * (-m * m * t).exp();
    let a = a_term(cut, t)?;
    let mut direct = 0.0;
    let mut by_parts = 0.0;
    let mut identity_residual = 0.0f64;
    for &(l, w) in &weights {
        let decay = (-l * l * t).exp();
        let robin = robin_moment(cut, t, l)?;
        let lhs = robin - decay * a;
        let boundary = boundary_moment(cut, t, l)?;
        let rhs = -erfc(l * t.sqrt()) - boundary;
        identity_residual = identity_residual.max((lhs - rhs).abs());
        direct += w * lhs;
        by_parts += w * rhs;
    }
    let gaussian = integrate_psi1(cut, t, |u| (-u * u / t).exp() / (4.0 * PI * t).sqrt(), "kernel Gaussian")?.value;
    Ok(DeltaC {
        direct: mass * direct - 4.0 * mass * n_plus * gaussian,
        by_parts: mass * by_parts - mass * n_plus * a,
        identity_residual,
    })
}

/// `Θ(t) = −m e^{−m²t} Σ_{λ>0} erfc(λ√t)⟨Γ_S φ_λ, φ_λ⟩`.
pub fn theta(eig: &BoundaryEigendata, m: f64, t: f64) -> f64 {
    let st = t.sqrt();
    let sum: f64 = positive_weights(eig).iter().map(|&(l, w)| w * erfc(l * st)).sum();
    -m * (-m * m * t).exp() * sum
}

/// `Θ` on a log-spaced grid and the truncated Mellin transform `ξ_R(s)`.
#[derive(Clone, Debug, Serialize)]
pub struct ThetaXi {
    pub t_grid: Vec<f64>,
    pub theta: Vec<f64>,
    /// `(s, ξ_R(s))`.
    pub xi: Vec<(f64, f64)>,
}

/// `(1/Γ((s+1)/2)) ∫₀^{T} t^{(s−1)/2} f(t) dt`, with `t = x²` removing the
/// endpoint singularity.
pub fn mellin_truncated<F: Fn(f64) -> f64>(f: F, s: f64, upper: f64, what: &str) -> Result<Quadrature> {
    let g = |x: f64| if x == 0.0 { 0.0 } else { 2.0 * x.powf(s) * f(x * x) };
    let xmax = upper.sqrt();
    // Geometric panels resolve integrands concentrated near small t.
    let mut edges = vec![0.0];
    let mut e = xmax;
    while e > 1e-4 {
        edges.push(e);
        e *= 0.25;
    }
    edges.sort_by(f64::total_cmp);
    let mut total = Quadrature { value: 0.0, error: 0.0 };
    for w in edges.windows(2) {
        let q = quad::adaptive(&g, w[0], w[1], 1e-14, 1e-12, what)?;
        total.value += q.value;
        total.error += q.error;
    }
    let norm = gamma(0.5 * (s + 1.0));
    Ok(Quadrature { value: total.value / norm, error: total.error / norm })
}

/// Upper limit `R^{2−ε}` of the small-time integrals.
pub fn small_time_limit(r: f64, epsilon: f64) -> f64 {
    r.powf(2.0 - epsilon)
}

/// Samples `Θ` on `points` log-spaced times in `[1e−4, R^{2−ε}]` and
/// evaluates `ξ_R` at each requested `s`.
pub fn theta_and_xi(eig: &BoundaryEigendata, m: f64, r: f64, epsilon: f64, s_samples: &[f64], points: usize) -> Result<ThetaXi> {
    if !(m > 0.0 && r > 0.0 && epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::DomainViolation(format!("need m > 0, R > 0, 0 < ε < 1; got m = {m}, R = {r}, ε = {epsilon}")));
    }
    let upper = small_time_limit(r, epsilon);
    let t_grid = log_grid(1e-4, upper, points);
    let theta_values = t_grid.iter().map(|&t| theta(eig, m, t)).collect();
    let xi = s_samples
        .iter()
        .map(|&s| Ok((s, mellin_truncated(|t| theta(eig, m, t), s, upper, "xi_R")?.value)))
        .collect::<Result<_>>()?;
    Ok(ThetaXi { t_grid, theta: theta_values, xi })
}

/// `n` log-spaced points between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// `G(R, t)` and the quantities its decay is compared against.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GTerm {
    /// `G(R, t)` with the chirality weights.
    pub value: f64,
    /// The same integral with unit weights, `∫|ψ₁′| Σ_λ e^{2λu}erfc(…)`: an
    /// upper bound on `|G|` for any weights of modulus one.
    pub unit_weight: f64,
    /// Shape of the decay bound, `e^{−(3/7)²R²/t} Σ_λ e^{−λ²t}`.
    pub bound_shape: f64,
}

/// `G(R, t) = ∫ ψ₁′(u) Σ_{λ>0} e^{2λu} erfc(u/√t + λ√t) du ⟨Γ_S φ_λ, φ_λ⟩`.
pub fn g_bound(r: f64, t: f64, eig: &BoundaryEigendata) -> Result<GTerm> {
    let cut = CutoffFunctions::new(r);
    let mut value = 0.0;
    let mut unit_weight = 0.0;
    let mut spectral = 0.0;
    for (l, w) in positive_weights(eig) {
        let moment = boundary_moment(&cut, t, l)?;
        value += w * moment;
        unit_weight += moment.abs();
        spectral += (-l * l * t).exp();
    }
    let edge = 3.0 * r / 7.0;
    Ok(GTerm { value, unit_weight, bound_shape: (-edge * edge / t).exp() * spectral })
}

/// The two small-time limits whose sum is the kernel correction of the
/// adiabatic gluing formula.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SmallTimeLimits {
    pub r: f64,
    pub m: f64,
    pub epsilon: f64,
    /// Mellin integral of `m e^{−m²t}` times the unit-weight `G`, at `s = 0`.
    pub g_term: f64,
    /// Mellin integral of `m e^{−m²t} n_+ a(R)` at `s = 0`.
    pub a_term: f64,
    /// The `a`-term at `s = 10⁻³`; it carries the factor `m^{−s}` of the
    /// exact Mellin transform, which only tends to 1 as `s → 0`.
    pub a_term_small_s: f64,
    pub n_plus: usize,
}

/// Evaluates both small-time limits at `(R, m)`.
pub fn small_time_limits(r: f64, m: f64, epsilon: f64, eig: &BoundaryEigendata) -> Result<SmallTimeLimits> {
    let upper = small_time_limit(r, epsilon);
    let cut = CutoffFunctions::new(r);
    let n_plus = eig.n_plus as f64;
    let g = |t: f64| -> f64 {
        if m * m * t > 745.0 {
            return 0.0;
        }
        let gt = g_bound(r, t, eig).map(|g| g.unit_weight).unwrap_or(f64::NAN);
        m * (-m * m * t).exp() * gt
    };
    let a = |t: f64| -> f64 {
        if m * m * t > 745.0 {
            return 0.0;
        }
        m * (-m * m * t).exp() * n_plus * a_term(&cut, t).unwrap_or(f64::NAN)
    };
    let g_term = mellin_truncated(g, 0.0, upper, "G-term")?.value;
    let a_value = mellin_truncated(&a, 0.0, upper, "a-term")?.value;
    let a_small = mellin_truncated(&a, 1e-3, upper, "a-term")?.value;
    if !(g_term.is_finite() && a_value.is_finite() && a_small.is_finite()) {
        return Err(Error::QuadratureNonConvergence { what: "small-time limits".into(), estimate: f64::NAN });
    }
    Ok(SmallTimeLimits { r, m, epsilon, g_term, a_term: a_value, a_term_small_s: a_small, n_plus: eig.n_plus })
}

/// Writes `(t, Θ(t), ∫Δ_c(t))` on a time grid as CSV.
pub fn write_trace_csv<W: Write>(writer: W, eig: &BoundaryEigendata, m: f64, r: f64, t_grid: &[f64]) -> Result<()> {
    let cut = CutoffFunctions::new(r);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "theta", "delta_c_direct", "delta_c_by_parts"])?;
    for &t in t_grid {
        let d = delta_c_integral(r, m, t, eig, &cut)?;
        w.write_record([
            format!("{t:.17e}"),
            format!("{:.17e}", theta(eig, m, t)),
            format!("{:.17e}", d.direct),
            format!("{:.17e}", d.by_parts),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::eigendata;
    use crate::model::BoundaryModel;

    fn eig(flux: f64) -> BoundaryEigendata {
        eigendata(&BoundaryModel::with_flux(flux), 4)
    }

    #[test]
    fn cutoffs_partition_unity_and_support() {
        let cut = CutoffFunctions::new(3.0);
        for row in cut.sample(200) {
            assert!((row[3] + row[4] - 1.0).abs() < 1e-15);
        }
        assert_eq!(cut.psi1_derivative(3.0 * 3.0 / 7.0 - 1e-9), 0.0);
        assert_eq!(cut.psi1_derivative(3.0 * 4.0 / 7.0 + 1e-9), 0.0);
        assert!(cut.psi1_derivative(1.5) < 0.0);
    }

    #[test]
    fn smooth_step_derivative_matches_difference_quotient() {
        for &x in &[0.2, 0.45, 0.5, 0.55, 0.8] {
            let h = 1e-6;
            let fd = (smooth_step(0.0, 1.0, x + h) - smooth_step(0.0, 1.0, x - h)) / (2.0 * h);
            assert!((fd - smooth_step_derivative(0.0, 1.0, x)).abs() < 1e-8);
        }
    }

    #[test]
    fn half_plus_vanishes_on_dirichlet_sections_at_the_boundary() {
        let e = eig(0.0);
        let spec = CylinderKernelSpec { variant: KernelVariant::HalfPlus, eigendata: &e, mass: 1.0, time: 0.5 };
        let k = kernel_eval(&spec, 0.0, 0.0).unwrap();
        for (i, role) in roles(&e).iter().enumerate() {
            if matches!(role, Role::Positive(_) | Role::KernelPlus) {
                assert_eq!(k[(i, i)], 0.0);
            }
        }
    }

    #[test]
    fn wrong_side_is_a_domain_violation() {
        let e = eig(0.0);
        let spec = CylinderKernelSpec { variant: KernelVariant::HalfMinus, eigendata: &e, mass: 1.0, time: 0.5 };
        assert!(matches!(kernel_eval(&spec, 0.5, -0.5), Err(Error::DomainViolation(_))));
    }

    #[test]
    fn closed_form_trace_matches_direct_sum() {
        for flux in [0.0, 0.5, 0.3] {
            let e = eig(flux);
            for variant in [KernelVariant::HalfPlus, KernelVariant::HalfMinus] {
                let spec = CylinderKernelSpec { variant, eigendata: &e, mass: 2.0, time: 0.3 };
                for u in [0.0, 0.2, 0.7, 1.5] {
                    let u = if variant == KernelVariant::HalfMinus { -u } else { u };
                    let a = gamma_trace_half(&spec, u).unwrap();
                    let b = gamma_trace_direct(&spec, u).unwrap();
                    assert!((a - b).abs() < 1e-13 * (1.0 + a.abs()), "{a} vs {b}");
                }
            }
        }
    }
}
