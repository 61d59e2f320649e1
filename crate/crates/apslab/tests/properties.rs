//! Property tests for the structural invariants of the crate.

use apslab::boundary::{eigendata, virtual_codimension, ProjectionLabel};
use apslab::eta::eta_difference;
use apslab::heat::{erfc, smooth_step, CutoffFunctions};
use apslab::model::{validate, BoundaryModel, MassProfile, Numerics, Scenario};
use apslab::modes::{match_eigenvalues, spectrum, Eigenvalue, Method, Spectrum};
use proptest::prelude::*;

fn synthetic(values: &[f64]) -> Spectrum {
    let eigenvalues = values
        .iter()
        .map(|&mu| Eigenvalue { mu, multiplicity: 1, block_id: 0, block_lambda: 0.0, chirality: None })
        .collect();
    Spectrum::assemble(eigenvalues, &Numerics::default(), Method::Analytic)
}

fn signed_values(max: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0.5f64..max, any::<bool>()).prop_map(|(v, s)| if s { v } else { -v }), 1..30)
}

fn gapped_values() -> impl Strategy<Value = Vec<f64>> {
    signed_values(40.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn erfc_reflection(x in -6.0f64..6.0) {
        prop_assert!((erfc(x) + erfc(-x) - 2.0).abs() < 1e-14);
        prop_assert!(erfc(x) > 0.0 && erfc(x) <= 2.0);
    }

    #[test]
    fn smooth_step_is_monotone_and_bounded(a in -3.0f64..3.0, w in 0.1f64..3.0, x in -8.0f64..8.0, dx in 0.0f64..0.5) {
        let (s0, s1) = (smooth_step(a, a + w, x), smooth_step(a, a + w, x + dx));
        prop_assert!((0.0..=1.0).contains(&s0));
        prop_assert!(s1 >= s0 - 1e-15);
        prop_assert!((smooth_step(a, a + w, a + 0.5 * w) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cutoffs_partition_and_nest(r in 0.5f64..20.0, s in -1.0f64..1.0) {
        let c = CutoffFunctions::new(r);
        let u = s * r;
        prop_assert!((c.psi1(u) + c.psi2(u) - 1.0).abs() < 1e-15);
        prop_assert!((c.phi1(u) * c.psi1(u) - c.psi1(u)).abs() < 1e-15);
        prop_assert!((c.phi2(u) * c.psi2(u) - c.psi2(u)).abs() < 1e-15);
        prop_assert!((c.psi1(u) - c.psi1(-u)).abs() == 0.0);
    }

    #[test]
    fn eta_difference_is_antisymmetric(a in gapped_values(), b in gapped_values()) {
        let (sa, sb) = (synthetic(&a), synthetic(&b));
        let p = Numerics::default();
        let ab = eta_difference(&sa, &sb, &p.eta, p.kernel_tolerance).unwrap();
        let ba = eta_difference(&sb, &sa, &p.eta, p.kernel_tolerance).unwrap();
        prop_assert!((ab.value + ba.value).abs() < 1e-9);
    }

    #[test]
    fn eta_difference_counts_low_lying_signs(a in signed_values(10.0), b in signed_values(10.0)) {
        let (sa, sb) = (synthetic(&a), synthetic(&b));
        let p = Numerics::default();
        let ab = eta_difference(&sa, &sb, &p.eta, p.kernel_tolerance).unwrap();
        // Far below the cutoff every eigenvalue counts with its full sign.
        let signs = |v: &[f64]| v.iter().map(|x| x.signum()).sum::<f64>();
        let exact = signs(&a) - signs(&b);
        prop_assert!((ab.value - exact).abs() < 1e-4, "{} vs {} (estimate {:.3e})", ab.value, exact, ab.error_estimate);
    }

    #[test]
    fn projections_are_orthogonal(flux in -1.0f64..1.0, k in 1usize..6) {
        let eig = eigendata(&BoundaryModel::with_flux(flux), k);
        for label in [ProjectionLabel::Positive, ProjectionLabel::Negative, ProjectionLabel::Zero, ProjectionLabel::NonNegative, ProjectionLabel::PiVPlus, ProjectionLabel::PiVMinus] {
            let p = eig.projection(&label).unwrap().matrix;
            prop_assert!((&p * &p - &p).norm() < 1e-12);
            prop_assert!((p.adjoint() - &p).norm() < 1e-12);
        }
        let pi = eig.projection(&ProjectionLabel::PiVPlus).unwrap().matrix;
        let g = eig.gamma_s();
        prop_assert!((&pi * &g - &g * &pi).norm() < 1e-12);
    }

    #[test]
    fn virtual_codimension_is_antisymmetric(flux in prop::sample::select(vec![0.0, 0.25, 0.5, 1.0]), k in 1usize..8) {
        let eig = eigendata(&BoundaryModel::with_flux(flux), k);
        let pi = eig.projection(&ProjectionLabel::PiVPlus).unwrap();
        let geq = eig.projection(&ProjectionLabel::NonNegative).unwrap();
        let forward = virtual_codimension(&pi, &geq, 1e-8).unwrap().value;
        let backward = virtual_codimension(&geq, &pi, 1e-8).unwrap().value;
        prop_assert_eq!(forward, -backward);
        prop_assert_eq!(forward, eig.n_plus as i64);
    }

    #[test]
    fn matching_recovers_perturbed_copies(values in gapped_values(), shift in -1e-4f64..1e-4) {
        let moved: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let m = match_eigenvalues(&values, &moved, 1e-3);
        prop_assert!(m.complete());
        prop_assert!(m.max_residual <= shift.abs() + 1e-12);
    }

    #[test]
    fn spectra_are_sorted_with_positive_multiplicities(values in gapped_values()) {
        let s = synthetic(&values);
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0].mu <= w[1].mu));
        prop_assert!(s.eigenvalues.iter().all(|e| e.multiplicity >= 1));
        prop_assert_eq!(s.count(), values.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn massless_spectrum_is_symmetric(flux in 0.0f64..1.0) {
        let mut sc = Scenario::finite_cylinder(flux, MassProfile::Constant { value: 0.0 });
        sc.numerics.spectral_cutoff = 40.0;
        let s = spectrum(&validate(sc).unwrap(), Method::Analytic).unwrap();
        let values = s.values();
        let negated: Vec<f64> = values.iter().rev().map(|v| -v).collect();
        let m = match_eigenvalues(&values, &negated, 1e-8);
        prop_assert!(m.complete(), "{:?} / {:?}", m.unmatched_first, m.unmatched_second);
    }

    #[test]
    fn constant_mass_shifts_the_square(flux in 0.0f64..1.0, c in -4.0f64..4.0) {
        let base = |value| {
            let mut sc = Scenario::finite_cylinder(flux, MassProfile::Constant { value });
            sc.numerics.spectral_cutoff = 30.0;
            spectrum(&validate(sc).unwrap(), Method::Analytic).unwrap()
        };
        let square = |s: &Spectrum| {
            let mut v: Vec<f64> = s.values().iter().map(|m| m * m).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let massless: Vec<f64> = square(&base(0.0)).into_iter().map(|v| v + c * c).collect();
        let massive = square(&base(c));
        // Compare below the cutoff where both lists are complete.
        let n = massive.iter().filter(|&&v| v < 25.0 * 25.0).count();
        for (a, b) in massless.iter().zip(&massive).take(n) {
            prop_assert!((a - b).abs() < 1e-7 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn step_wall_sign_flips_at_the_gluing_loci(m in 0.5f64..20.0, len in 0.5f64..4.0, s in 0.0f64..0.99) {
        let sc = Scenario::doubled_cylinder(0.0, len, MassProfile::StepWall { m });
        let inside = s * len / 2.0;
        let outside = len / 2.0 + (1.0 - s) * len / 2.0 + 1e-9;
        prop_assert_eq!(sc.mass_at(inside), m);
        prop_assert_eq!(sc.mass_at(-inside), m);
        prop_assert_eq!(sc.mass_at(outside.min(len - 1e-9)), -m);
    }
}
