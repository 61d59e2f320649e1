//! Eta-invariant differences, supertraces and gluing defects.
//!
//! Every eta quantity here is a difference of two (or three) spectra, which
//! removes the small-time divergence of the individual heat traces. For one
//! eigenvalue the heat integral `(1/√π)∫_τ^∞ t^{−1/2} μ e^{−tμ²} dt` equals
//! `sign(μ)·erfc(|μ|√τ)`, so the regularized difference
//!
//! `S(√τ) = Σ_A sign(μ) erfc(|μ|√τ) − Σ_B sign(μ) erfc(|μ|√τ)`
//!
//! is available in closed form at every lower time limit `τ`. It is
//! evaluated on a window of `√τ` values where every eigenvalue beyond the
//! spectral cutoff is suppressed below `erfc(resolution)`, and extrapolated
//! polynomially to `√τ = 0`. A direct quadrature of the heat integral at the
//! smallest level cross-checks the closed form.
//!
//! The extrapolation is accurate when the two spectra differ only well below
//! `Λ/(resolution·spread)`, the scale on which `S` is smooth across the
//! window; unmatched eigenvalues nearer the cutoff must pair off between the
//! spectra, as they do for operators that agree away from a compact region.

use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, BulkShape, MassProfile, Scenario, EtaParams};
use crate::modes::{self, Method, Spectrum};
use crate::numerics::extrapolate::extrapolate_with_error;
use crate::numerics::quad;
use crate::numerics::special::erfc;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

/// A regularized eta difference with its error budget.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaResult {
    pub value: f64,
    /// Sum of the extrapolation, truncation and quadrature terms below.
    pub error_estimate: f64,
    pub spectral_cutoff: f64,
    pub mode_cutoff: usize,
    /// `√τ` levels used in the extrapolation.
    pub levels: Vec<f64>,
    /// Difference between the full and the reduced extrapolation.
    pub extrapolation_error: f64,
    /// Bound on the contribution of eigenvalues beyond the cutoff.
    pub tail_bound: f64,
    /// `|quadrature − closed form|` of the heat integral at the first level.
    pub quadrature_check: f64,
}

/// A weighted spectrum entering a signed combination.
struct Signed<'a> {
    weight: f64,
    spectrum: &'a Spectrum,
}

/// `Σ_i w_i Σ_μ sign(μ) erfc(|μ| x)` over the weighted spectra.
fn regularized_sum(parts: &[Signed], x: f64) -> f64 {
    parts
        .iter()
        .map(|p| {
            p.weight
                * p.spectrum
                    .eigenvalues
                    .iter()
                    .map(|e| e.multiplicity as f64 * e.mu.signum() * erfc(e.mu.abs() * x))
                    .sum::<f64>()
        })
        .sum()
}

/// `Σ_i w_i Σ_μ μ e^{−tμ²}`, the heat supertrace density of the combination.
fn heat_density(parts: &[Signed], t: f64) -> f64 {
    parts
        .iter()
        .map(|p| p.weight * p.spectrum.eigenvalues.iter().map(|e| e.multiplicity as f64 * e.mu * (-t * e.mu * e.mu).exp()).sum::<f64>())
        .sum()
}

fn check_kernel_free(spectrum: &Spectrum, tolerance: f64) -> Result<()> {
    match spectrum.eigenvalues.iter().find(|e| e.mu.abs() < tolerance) {
        Some(e) => Err(Error::KernelPresent { mu: e.mu }),
        None => Ok(()),
    }
}

fn check_cutoffs(parts: &[Signed]) -> Result<()> {
    let first = parts[0].spectrum;
    for p in &parts[1..] {
        if p.spectrum.spectral_cutoff != first.spectral_cutoff || p.spectrum.mode_cutoff != first.mode_cutoff {
            return Err(Error::CutoffMismatch(format!(
                "Λ = {} / K = {} against Λ = {} / K = {}",
                first.spectral_cutoff, first.mode_cutoff, p.spectrum.spectral_cutoff, p.spectrum.mode_cutoff
            )));
        }
    }
    Ok(())
}

/// The `√τ` window of the extrapolation.
pub fn levels(params: &EtaParams, spectral_cutoff: f64) -> Vec<f64> {
    let x_min = params.resolution / spectral_cutoff;
    let n = params.levels.max(2);
    (0..n).map(|i| x_min * (1.0 + (params.spread - 1.0) * i as f64 / (n - 1) as f64)).collect()
}

/// Heat integral `(1/√π)∫_{x²}^∞ t^{−1/2} Δ(t) dt` by quadrature: `t = s²`
/// on `[x², 1]` and a doubling-panel tail beyond, stopped by the gap bound.
fn quadrature_at(parts: &[Signed], x: f64, gap: f64, count: f64) -> Result<f64> {
    let below = |s: f64| 2.0 * heat_density(parts, s * s) / PI.sqrt();
    let mut total = 0.0;
    if x < 1.0 {
        // Panels geometric in s resolve the fastest Gaussians near s = x.
        let mut edges = vec![x];
        let mut e = 2.0 * x;
        while e < 1.0 {
            edges.push(e);
            e *= 2.0;
        }
        edges.push(1.0);
        for w in edges.windows(2) {
            total += quad::adaptive(&below, w[0], w[1], 1e-13, 1e-12, "eta heat integral")?.value;
        }
    }
    let start = x.max(1.0);
    let above = |t: f64| heat_density(parts, t) / (PI * t).sqrt();
    let gap = gap.max(1e-3);
    // Each eigenvalue contributes (1/√π)∫_T^∞ |μ|e^{−μ²t}t^{−1/2} dt = erfc(|μ|√T)
    // to the tail, at most erfc(gap·√T).
    let tail = |t: f64| count * erfc(gap * t.sqrt());
    total += quad::adaptive_to_infinity(&above, start * start, 1.0, tail, 1e-12, 1e-12, "eta heat tail")?.value;
    Ok(total)
}

fn combine(parts: &[Signed], params: &EtaParams, kernel_tolerance: f64, check_kernel: bool) -> Result<EtaResult> {
    check_cutoffs(parts)?;
    if check_kernel {
        for p in parts {
            check_kernel_free(p.spectrum, kernel_tolerance)?;
        }
    }
    let spectral_cutoff = parts[0].spectrum.spectral_cutoff;
    let xs = levels(params, spectral_cutoff);
    let ys: Vec<f64> = xs.par_iter().map(|&x| regularized_sum(parts, x)).collect();
    let (value, extrapolation_error) = extrapolate_with_error(&xs, &ys);
    let count: f64 = parts.iter().map(|p| p.weight.abs() * p.spectrum.count() as f64).sum();
    // Every discarded |μ| > Λ contributes at most erfc(Λ·x_min) = erfc(resolution)
    // per eigenvalue; the number beyond Λ is bounded by the number within.
    let tail_bound = count * erfc(params.resolution);
    let gap = parts.iter().map(|p| p.spectrum.min_abs()).fold(f64::INFINITY, f64::min);
    let quadrature_check = if count == 0.0 || parts.iter().all(|p| p.weight == 0.0) {
        0.0
    } else {
        (quadrature_at(parts, xs[0], gap, count)? - ys[0]).abs()
    };
    Ok(EtaResult {
        value,
        error_estimate: extrapolation_error + tail_bound + quadrature_check,
        spectral_cutoff,
        mode_cutoff: parts[0].spectrum.mode_cutoff,
        levels: xs,
        extrapolation_error,
        tail_bound,
        quadrature_check,
    })
}

/// `η(A) − η(B)` for two kernel-free spectra with equal cutoffs.
pub fn eta_difference(a: &Spectrum, b: &Spectrum, params: &EtaParams, kernel_tolerance: f64) -> Result<EtaResult> {
    let parts = [Signed { weight: 1.0, spectrum: a }, Signed { weight: -1.0, spectrum: b }];
    combine(&parts, params, kernel_tolerance, true)
}

/// `η(A) − η(B)` with zero modes (`|μ| < kernel_tolerance`) dropped, i.e.
/// the eta invariants in the convention that ignores the kernel. Returns the
/// result and the number of dropped modes of each spectrum.
pub fn eta_difference_reduced(a: &Spectrum, b: &Spectrum, params: &EtaParams, kernel_tolerance: f64) -> Result<(EtaResult, usize, usize)> {
    let strip = |s: &Spectrum| {
        let mut t = s.clone();
        t.eigenvalues.retain(|e| e.mu.abs() >= kernel_tolerance);
        let dropped = s.count() - t.count();
        (t, dropped)
    };
    let ((a, da), (b, db)) = (strip(a), strip(b));
    Ok((eta_difference(&a, &b, params, kernel_tolerance)?, da, db))
}

/// Supertrace of the heat operator at several times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Supertrace {
    /// The common value rounded to an integer.
    pub index: i64,
    /// `(t, Σ ⟨Γ_S⟩ e^{−tμ²})` per sample.
    pub samples: Vec<(f64, f64)>,
    /// Largest distance of a sample from the rounded value.
    pub deviation: f64,
}

/// Largest supertrace deviation tolerated before the result is rejected as
/// a discretization artifact.
pub const SUPERTRACE_TOLERANCE: f64 = 1e-6;

/// Index as the `t`-independent supertrace `Σ ⟨Γ_S⟩ e^{−tμ²}` over the
/// discretized eigenbasis of a massless scenario.
pub fn mckean_singer(scenario: &Scenario, t_samples: &[f64]) -> Result<Supertrace> {
    if !scenario.mass.is_zero() {
        return Err(Error::InvalidProfile("the supertrace index needs a massless (odd-parity) scenario".into()));
    }
    let blocks = modes::reduce(scenario)?;
    let n = scenario.numerics.grid_points;
    let per_block: Vec<Vec<modes::Eigenvalue>> =
        blocks.par_iter().map(|b| modes::discrete::solve(b, n)).collect::<Result<_>>()?;
    let samples: Vec<(f64, f64)> = t_samples
        .iter()
        .map(|&t| {
            let s = per_block
                .iter()
                .flatten()
                .map(|e| e.chirality.unwrap_or(0.0) * (-t * e.mu * e.mu).exp())
                .sum::<f64>();
            (t, s)
        })
        .collect();
    let index = samples.first().map(|s| s.1.round()).unwrap_or(0.0);
    let deviation = samples.iter().map(|s| (s.1 - index).abs()).fold(0.0, f64::max);
    if deviation > SUPERTRACE_TOLERANCE {
        return Err(Error::NotConstantInT { deviation });
    }
    Ok(Supertrace { index: index as i64, samples, deviation })
}

/// Eta difference of a domain wall against the constant negative mass on
/// the same bulk.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainWallEta {
    pub eta: EtaResult,
    /// Smallest `|μ|` of the wall spectrum.
    pub wall_gap: f64,
    /// Smallest `|μ|` of the constant-mass spectrum.
    pub constant_gap: f64,
}

/// Rejects spectra whose smallest `|μ|` is below the gap threshold.
fn check_gap(spectrum: &Spectrum, threshold: f64) -> Result<()> {
    let gap = spectrum.min_abs();
    if gap < threshold {
        let mu = spectrum.eigenvalues.iter().map(|e| e.mu).min_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(gap);
        return Err(Error::SpectralGapAbsent { mu, threshold });
    }
    Ok(())
}

/// `η(D + mF_TΓ_S) − η(D − mΓ_S)` for a wall scenario and its constant
/// `−m` partner, which must share the bulk and numerics.
pub fn domain_wall_eta_difference(wall: &Scenario, constant: &Scenario) -> Result<DomainWallEta> {
    if wall.bulk != constant.bulk {
        return Err(Error::InvalidShape("wall and constant scenarios must share the bulk".into()));
    }
    if !matches!(constant.mass, MassProfile::Constant { .. }) {
        return Err(Error::InvalidProfile("the reference scenario must carry a constant mass".into()));
    }
    let a = modes::spectrum(wall, Method::Analytic)?;
    let b = modes::spectrum(constant, Method::Analytic)?;
    let n = &wall.numerics;
    check_kernel_free(&a, n.kernel_tolerance)?;
    check_kernel_free(&b, n.kernel_tolerance)?;
    check_gap(&a, n.eta.gap_threshold)?;
    check_gap(&b, n.eta.gap_threshold)?;
    let eta = eta_difference(&a, &b, &n.eta, n.kernel_tolerance)?;
    Ok(DomainWallEta { eta, wall_gap: a.min_abs(), constant_gap: b.min_abs() })
}

/// Gluing defect `η(whole) − η(first piece) − η(second piece)` and its split
/// at `t = R^{2−ε}`.
///
/// The closed neck is cut along two circles. At every cut the piece on the
/// left carries `Π_{V−}` and the piece on the right carries `Π_{V+}`, so each
/// piece has `Π_{V+}` at its left end and `Π_{V−}` at its right end.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GluingDefect {
    pub r: f64,
    pub m: f64,
    pub whole: Spectrum,
    pub first_piece: Spectrum,
    pub second_piece: Spectrum,
    /// Number of circles the neck is cut along.
    pub cuts: usize,
    pub delta: EtaResult,
    /// Contribution of heat times below `R^{2−ε}`.
    pub small_time: f64,
    /// Contribution of heat times above `R^{2−ε}`, in closed form.
    pub large_time: f64,
    /// Measured gap: smallest `|μ|` over the three spectra.
    pub gap: f64,
    /// `C·R^{ε/2}·e^{−c₀²R^{2−ε}}` with `c₀` the measured gap and
    /// `C = Σ e^{−(μ² − c₀²)}` over the three spectra, which bounds
    /// `|δ^L|` for every `R ≥ 1`.
    pub large_time_bound: f64,
}

/// The three scenarios of the gluing experiment: the closed neck of
/// circumference `2R + 2` with constant mass `−m`, and the two halves of
/// length `R + 1` it is cut into. Both halves see `Π_{V+}` where they lie to
/// the right of a cut and `Π_{V−}` where they lie to its left.
pub fn gluing_scenarios(base: &Scenario, m: f64, r: f64) -> [Scenario; 3] {
    let mass = MassProfile::Constant { value: -m };
    let mut whole = base.clone();
    whole.bulk = BulkShape::DoubledCylinder { length: r + 1.0 };
    whole.mass = mass.clone();
    whole.bcs = Vec::new();
    let mut piece = base.clone();
    piece.bulk = BulkShape::FiniteCylinder { length: r + 1.0 };
    piece.mass = mass;
    piece.bcs = vec![BoundaryCondition::PiVPlus, BoundaryCondition::PiVMinus];
    [whole, piece.clone(), piece]
}

/// Computes the gluing defect at `(m, R)` using the boundary model and
/// numerics of `base`.
pub fn gluing_defect(base: &Scenario, m: f64, r: f64) -> Result<GluingDefect> {
    let scenarios = gluing_scenarios(base, m, r);
    let spectra: Vec<Spectrum> = scenarios
        .iter()
        .map(|s| crate::model::validate(s.clone()).and_then(|s| modes::spectrum(&s, Method::Analytic)))
        .collect::<Result<_>>()?;
    let params = &base.numerics.eta;
    for s in &spectra {
        check_gap(s, params.gap_threshold)?;
    }
    let [whole, first_piece, second_piece]: [Spectrum; 3] = spectra.try_into().expect("three spectra");
    let parts = [
        Signed { weight: 1.0, spectrum: &whole },
        Signed { weight: -1.0, spectrum: &first_piece },
        Signed { weight: -1.0, spectrum: &second_piece },
    ];
    let delta = combine(&parts, params, base.numerics.kernel_tolerance, true)?;
    let split = r.powf(2.0 - params.split_epsilon);
    let large_time = regularized_sum(&parts, split.sqrt());
    let gap = parts.iter().map(|p| p.spectrum.min_abs()).fold(f64::INFINITY, f64::min);
    let constant: f64 = parts
        .iter()
        .flat_map(|p| p.spectrum.eigenvalues.iter())
        .map(|e| e.multiplicity as f64 * (-(e.mu * e.mu - gap * gap)).exp())
        .sum();
    let large_time_bound = constant * r.powf(0.5 * params.split_epsilon) * (-gap * gap * split).exp();
    Ok(GluingDefect {
        r,
        m,
        small_time: delta.value - large_time,
        large_time,
        gap,
        large_time_bound,
        delta,
        whole,
        first_piece,
        second_piece,
        cuts: 2,
    })
}

impl GluingDefect {
    /// Writes the combined heat supertrace density `Δ(t)` on a time grid.
    pub fn write_curve_csv<W: Write>(&self, writer: W, t_grid: &[f64]) -> Result<()> {
        let parts = [
            Signed { weight: 1.0, spectrum: &self.whole },
            Signed { weight: -1.0, spectrum: &self.first_piece },
            Signed { weight: -1.0, spectrum: &self.second_piece },
        ];
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "delta_density"])?;
        for &t in t_grid {
            w.write_record([format!("{t:.17e}"), format!("{:.17e}", heat_density(&parts, t))])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Numerics;
    use crate::modes::Eigenvalue;

    fn spectrum(values: &[f64]) -> Spectrum {
        let eigenvalues = values
            .iter()
            .map(|&mu| Eigenvalue { mu, multiplicity: 1, block_id: 0, block_lambda: 0.0, chirality: None })
            .collect();
        Spectrum::assemble(eigenvalues, &Numerics::default(), Method::Analytic)
    }

    #[test]
    fn identical_spectra_give_exact_zero() {
        let a = spectrum(&[-3.0, 1.0, 2.5]);
        let r = eta_difference(&a, &a, &EtaParams::default(), 1e-8).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn single_sign_flip_counts_two() {
        let a = spectrum(&[-3.0, 1.0, 2.5]);
        let b = spectrum(&[-3.0, -1.0, 2.5]);
        let r = eta_difference(&a, &b, &EtaParams::default(), 1e-8).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10, "{r:?}");
        assert!(r.quadrature_check < 1e-8, "{r:?}");
    }

    #[test]
    fn kernel_and_cutoff_errors() {
        let a = spectrum(&[0.0, 1.0]);
        let b = spectrum(&[1.0]);
        assert!(matches!(eta_difference(&a, &b, &EtaParams::default(), 1e-8), Err(Error::KernelPresent { .. })));
        let mut c = spectrum(&[1.0]);
        c.spectral_cutoff = 200.0;
        assert!(matches!(eta_difference(&b, &c, &EtaParams::default(), 1e-8), Err(Error::CutoffMismatch(_))));
    }
}
