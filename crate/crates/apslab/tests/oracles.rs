//! Independent reference values: every expectation here is computed inside
//! the test from elementary formulas, never from the library's own solvers.

use apslab::boundary::{eigendata, virtual_codimension, ProjectionLabel};
use apslab::heat::{a_term, erfc, kernel_eval, CutoffFunctions, CylinderKernelSpec, KernelVariant};
use apslab::model::{validate, MassProfile, Scenario};
use apslab::modes::{self, Method};
use std::f64::consts::PI;

/// Positive roots `k` of `k cos k + λ sin k = 0` below `k_max`, by bisection
/// on a fine grid. Each root lies in `(π/2 + nπ, π + nπ)` for `λ > 0`.
fn mixed_condition_roots(lambda: f64, k_max: f64) -> Vec<f64> {
    let f = |k: f64| k * k.cos() + lambda * k.sin();
    let mut roots = Vec::new();
    let mut n = 0.0;
    while PI / 2.0 + n * PI < k_max {
        let (mut lo, mut hi) = (PI / 2.0 + n * PI, PI + n * PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
        n += 1.0;
    }
    roots
}

fn positive_part(values: &[f64], below: f64) -> Vec<f64> {
    values.iter().copied().filter(|&v| v > 1e-9 && v < below).collect()
}

fn assert_close_lists(got: &[f64], want: &[f64], tol: f64, what: &str) {
    assert_eq!(got.len(), want.len(), "{what}: {got:?} vs {want:?}");
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < tol, "{what}: {g} vs {w}");
    }
}

fn massless_finite_cylinder() -> Scenario {
    validate(Scenario::finite_cylinder(0.0, MassProfile::Constant { value: 0.0 })).unwrap()
}

#[test]
fn kernel_block_is_a_dirichlet_string() {
    let s = massless_finite_cylinder();
    let blocks = modes::reduce(&s).unwrap();
    let spectrum = modes::spectrum(&s, Method::Analytic).unwrap();
    let kernel_block = blocks.iter().find(|b| b.kernel).expect("integral flux has a kernel block");
    let values = spectrum.block(kernel_block.id);
    let cap = 60.0;
    let want: Vec<f64> = (1..).map(|j| PI * j as f64).take_while(|&v| v < cap).collect();
    assert_close_lists(&positive_part(&values, cap), &want, 1e-9, "kernel block");
    // The constant `h` profile is the single zero mode of this block.
    assert_eq!(values.iter().filter(|v| v.abs() < 1e-8).count(), 1);
}

#[test]
fn positive_blocks_follow_the_mixed_condition_law() {
    let s = massless_finite_cylinder();
    let spectrum = modes::spectrum(&s, Method::Analytic).unwrap();
    let cap = 50.0;
    for block in modes::reduce(&s).unwrap().iter().filter(|b| !b.kernel) {
        let values = spectrum.block(block.id);
        let lambda = block.lambda;
        let want: Vec<f64> = mixed_condition_roots(lambda, cap)
            .into_iter()
            .map(|k| (k * k + lambda * lambda).sqrt())
            .filter(|&mu| mu < cap)
            .collect();
        assert_close_lists(&positive_part(&values, cap), &want, 1e-8, &format!("block λ = {lambda}"));
        let negatives: Vec<f64> = values.iter().filter(|&&v| v < 0.0 && v > -cap).map(|v| -v).rev().collect();
        assert_close_lists(&negatives, &want, 1e-8, &format!("block λ = {lambda}, negative half"));
    }
}

#[test]
fn doubled_cylinder_with_constant_mass_is_periodic_free_motion() {
    let (m, length) = (2.5, 1.0);
    let s = validate(Scenario::doubled_cylinder(0.0, length, MassProfile::Constant { value: m })).unwrap();
    let spectrum = modes::spectrum(&s, Method::Analytic).unwrap();
    let cap = 30.0;
    for block in modes::reduce(&s).unwrap() {
        let lambda = block.lambda;
        let mut want: Vec<f64> = (-20i32..=20)
            .map(|j| {
                let p = PI * j as f64 / length;
                (p * p + lambda * lambda + m * m).sqrt()
            })
            .filter(|&mu| mu < cap)
            .collect();
        want.sort_by(f64::total_cmp);
        let got = positive_part(&spectrum.block(block.id), cap);
        assert_close_lists(&got, &want, 1e-8, &format!("doubled block λ = {lambda}"));
    }
}

#[test]
fn erfc_matches_tabulated_values() {
    let table = [
        (0.0, 1.0),
        (0.5, 0.479_500_122_186_953_5),
        (1.0, 0.157_299_207_050_285_1),
        (2.0, 0.004_677_734_981_047_266),
        (-1.0, 1.842_700_792_949_715),
        (5.0, 1.537_459_794_428_035e-12),
    ];
    for (x, want) in table {
        let got = erfc(x);
        assert!(((got - want) / want).abs() < 1e-13, "erfc({x}) = {got}, want {want}");
    }
}

#[test]
fn infinite_kernel_diagonal_is_a_damped_gaussian() {
    let eig = eigendata(&apslab::BoundaryModel::with_flux(0.25), 3);
    let (m, t) = (1.5, 0.3);
    let spec = CylinderKernelSpec { variant: KernelVariant::Infinite, eigendata: &eig, mass: m, time: t };
    let (u, v) = (0.2, -0.4);
    let k = kernel_eval(&spec, u, v).unwrap();
    for (i, &section) in eig.basis.iter().enumerate() {
        let lambda = eig.lambda_of(section);
        let want = (-(u - v) * (u - v) / (4.0 * t) - t * (lambda * lambda + m * m)).exp() / (4.0 * PI * t).sqrt();
        assert!((k[(i, i)] - want).abs() < 1e-13, "section {i}: {} vs {want}", k[(i, i)]);
    }
    let off_diagonal: f64 = (0..k.nrows())
        .flat_map(|i| (0..k.ncols()).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| k[(i, j)].abs())
        .fold(0.0, f64::max);
    assert!(off_diagonal < 1e-15);
}

#[test]
fn a_term_tends_to_one_on_a_long_neck() {
    // Trapezoid rule on the same integrand, written out independently.
    let (r, t) = (8.0, 1.0);
    let cut = CutoffFunctions::new(r);
    let n = 200_000;
    let h = r / n as f64;
    let trapezoid: f64 = (0..=n)
        .map(|i| {
            let u = i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * cut.psi1(u) * 2.0 * (-u * u / t).exp() / (PI * t).sqrt()
        })
        .sum::<f64>()
        * h;
    let got = a_term(&cut, t).unwrap();
    assert!((got - trapezoid).abs() < 1e-9, "{got} vs {trapezoid}");
    assert!((got - 1.0).abs() < 1e-5);
}

#[test]
fn virtual_codimension_counts_the_positive_kernel_half() {
    for (flux, n_plus) in [(0.0, 1), (0.5, 0), (1.0, 1)] {
        let eig = eigendata(&apslab::BoundaryModel::with_flux(flux), 4);
        assert_eq!(eig.n_plus, n_plus);
        let pi = eig.projection(&ProjectionLabel::PiVPlus).unwrap();
        let geq = eig.projection(&ProjectionLabel::NonNegative).unwrap();
        let vc = virtual_codimension(&pi, &geq, 1e-8).unwrap();
        assert_eq!(vc.value, n_plus as i64, "flux {flux}");
        assert_eq!(virtual_codimension(&geq, &pi, 1e-8).unwrap().value, -(n_plus as i64));
    }
}
