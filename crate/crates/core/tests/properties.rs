//! Randomized invariants.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use sturm_core::csbasis::overlap_matrix;
use sturm_core::greens::{tail_correction, wavenumber, GreensWorkspace, Sheet};
use sturm_core::specfun::log_gamma;
use sturm_core::{BasisParams, PhysicalConstants, PotentialTerm, TermList};

fn terms() -> impl Strategy<Value = TermList> {
    prop::collection::vec((-50.0..50.0f64, -1i32..3, 0.1..4.0f64), 1..4)
        .prop_map(|v| TermList::new(v.into_iter().map(|(a, p, d)| PotentialTerm::new(a, p, d)).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn log_gamma_recurrence(re in -20.0..40.0f64, im in -30.0..30.0f64) {
        prop_assume!(im.abs() > 1e-3 || re > 0.1);
        let z = Complex64::new(re, im);
        let d = log_gamma(z + 1.0).unwrap() - log_gamma(z).unwrap() - z.ln();
        // equal modulo 2πi
        let turns = d.im / (2.0 * std::f64::consts::PI);
        prop_assert!(d.re.abs() < 1e-11 * (1.0 + z.norm().ln().abs() * z.norm()));
        prop_assert!((turns - turns.round()).abs() < 1e-11 * (1.0 + z.norm()));
    }

    #[test]
    fn term_list_algebra_is_pointwise(t in terms(), r in 0.05..8.0f64) {
        let v = t.value(r);
        prop_assert!((t.square().value(r) - v * v).abs() <= 1e-10 * (1.0 + v * v));
        prop_assert!((t.over_r().value(r) - v / r).abs() <= 1e-10 * (1.0 + (v / r).abs()));
        let h = 1e-5 * r;
        let fd = (t.value(r + h) - t.value(r - h)) / (2.0 * h);
        prop_assert!((t.derivative().value(r) - fd).abs() <= 1e-5 * (1.0 + fd.abs()));
    }

    #[test]
    fn basis_is_biorthonormal(b in 0.2..10.0f64, lambda in -0.4..4.0f64, n in 1usize..25) {
        let s = overlap_matrix(lambda, &BasisParams::new(b, n).unwrap()).unwrap();
        let err = (s - DMatrix::<f64>::identity(n, n)).abs().max();
        prop_assert!(err < 1e-10, "{}", err);
    }

    #[test]
    fn physical_wavenumber_decays(re in -50.0..50.0f64, im in -20.0..20.0f64) {
        let k = PhysicalConstants::model();
        let eps = Complex64::new(re, im);
        let p = wavenumber(eps, &k, Sheet::Physical);
        prop_assert!(p.k.im >= 0.0);
        prop_assert!((p.k * p.k * k.hbar * k.hbar / (2.0 * k.m) - eps).norm() < 1e-12 * (1.0 + eps.norm()));
    }

    #[test]
    fn tail_is_finite_off_axis(re in -5.0..20.0f64, im in 0.05..5.0f64, n in 1usize..60, b in 0.5..6.0f64) {
        let k = PhysicalConstants::model();
        let p = wavenumber(Complex64::new(re, im), &k, Sheet::Physical);
        let c = tail_correction(n, 0.5, Complex64::new(20.0, 0.0), &p, b, &k).unwrap();
        prop_assert!(c.re.is_finite() && c.im.is_finite());
    }

    #[test]
    fn hydrogen_ground_state_for_any_basis(b in 0.3..6.0f64, n in 1usize..30) {
        let ws = GreensWorkspace::new(0.0, Complex64::new(-1.0, 0.0), b, n, PhysicalConstants::model()).unwrap();
        let det = |e: f64| {
            let p = wavenumber(Complex64::new(e, 0.0), &ws.constants, Sheet::Physical);
            ws.greens_inverse(&p).unwrap().determinant().re
        };
        prop_assert!(det(-0.5 - 1e-6) * det(-0.5 + 1e-6) < 0.0);
    }
}
