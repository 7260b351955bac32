//! Values printed by `oracles/formula_chain.py`, checked through the public API.

#![allow(clippy::excessive_precision)]

use std::sync::Arc;

use approx::assert_relative_eq;
use levycert::certificates::{tv_coefficients, tv_rate, w1_certificate, w1_formula, OverlapProfile, SigmaG};
use levycert::measure::{example_lower_bound_constant, j_function, overlap_mass, LevyModel};
use levycert::models::{DriftModel, Phi2};

#[test]
fn w1_chain_with_sqrt_sigma() {
    let profile = Arc::new(OverlapProfile::from_fn(0.5, 0.5, |_| 1.0).unwrap());
    let sg = SigmaG::custom(profile, 0.5, "sqrt(s)", f64::sqrt, 2.0).unwrap();
    assert_relative_eq!(sg.g1_total(), 2.0, max_relative = 1e-10);
    let drift = DriftModel::piecewise(1, 0.0, 1.0, 0.5).unwrap();
    let c = w1_certificate(&drift, &sg).unwrap().certificate;
    assert_relative_eq!(c.c2, 0.5, epsilon = 1e-10);
    assert_relative_eq!(c.c1, 0.36787944117144232, epsilon = 1e-10);
    assert_relative_eq!(c.big_c, 1.8591409142295226, epsilon = 1e-9);
    assert_relative_eq!(c.lambda, 0.13447071068499756, epsilon = 1e-10);
    // sqrt(s) exceeds the admissible sigma for J = 1, so the grid check rejects it.
    assert!(!c.verified);

    let exact = w1_formula(1.0, 2.0, 0.0).unwrap();
    assert_eq!(exact.c2, 0.5);
    assert_relative_eq!(exact.lambda, 0.13447071068499756, epsilon = 1e-16);
}

#[test]
fn tv_chain() {
    let (m, c1, c2) = tv_coefficients(0.0, 1.0, 0.25, 2.0);
    assert_eq!((m, c2), (0.5, 0.5));
    let (a, lambda) = tv_rate(0.0, m, c1, 5.0, 0.3);
    assert_relative_eq!(a, 0.016136485282199707, epsilon = 1e-15);
    assert_relative_eq!(lambda, 0.12760695169204726, epsilon = 1e-15);
}

#[test]
fn inverse_square_overlap() {
    let m = LevyModel::isotropic_stable(1, 1.0, 1.0).unwrap();
    assert_relative_eq!(overlap_mass(&m, &[1.0]).unwrap().mass, 4.0, max_relative = 1e-9);
    for (s, j) in [(0.5, 8.0), (1.0, 4.0), (2.0, 2.0)] {
        assert_relative_eq!(j_function(&m, s).unwrap().value, j, max_relative = 1e-9);
    }
}

#[test]
fn half_space_constants() {
    let frozen = [
        (1, 0.5, 0.29885849072268451),
        (1, 1.2, 0.13283503966088839),
        (2, 0.5, 0.46944581945865952),
        (2, 1.2, 0.20865679236897789),
    ];
    for (d, alpha, k) in frozen {
        assert_relative_eq!(example_lower_bound_constant(d, alpha, 1.0), k, max_relative = 1e-14);
    }
}

#[test]
fn quadratic_tail_integral() {
    let p = Phi2::Power { k2: 1.0, theta: 1.0 };
    assert_relative_eq!(p.tail_integral(1.0).unwrap(), 1.0, max_relative = 1e-15);
    assert_relative_eq!(p.tail_integral_numeric(1.0).unwrap(), 1.0, max_relative = 1e-10);
}
