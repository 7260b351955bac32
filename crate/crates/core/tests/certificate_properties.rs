use std::sync::Arc;

use levycert::certificates::{
    build_sigma, build_sigma_with, certify_scenario, strong_ergodic_certificate, verification_grid, verify_condition_c,
    w1_certificate, w1_formula, CertKind, CertifyOptions, OverlapProfile, RateCertificate,
};
use levycert::measure::LevyModel;
use levycert::models::{catalog_scenarios, DriftModel, ScenarioSpec};
use proptest::prelude::*;

fn issued(s: &ScenarioSpec, kind: CertKind) -> RateCertificate {
    let sc = certify_scenario(s, &CertifyOptions::default()).unwrap();
    let (_, r) = sc.results.into_iter().find(|(k, _)| *k == kind).unwrap();
    r.unwrap().certificate
}

proptest! {
    #[test]
    fn w1_rate_bounded_by_c2_and_k2(k2 in 1e-3f64..1e3, g1 in 0.0f64..50.0, g2 in 0.0f64..50.0) {
        let c = w1_formula(k2, g1, g2).unwrap();
        prop_assert!(c.lambda <= c.c2 / 2.0);
        prop_assert!(c.lambda <= k2);
        prop_assert!(c.big_c >= 1.0);
    }

    #[test]
    fn canonical_sigma_certificates_are_bounded(
        l0 in 0.2f64..2.0,
        k1 in 0.0f64..0.5,
        k2 in 0.2f64..3.0,
        beta in 0.5f64..1.8,
    ) {
        let profile = Arc::new(OverlapProfile::from_fn(l0, l0, move |s| 2.0 * s.powf(-beta)).unwrap());
        let sg = build_sigma(profile, l0, 0.5, 1.0).unwrap();
        let drift = DriftModel::piecewise(1, k1, k2, l0).unwrap();
        let c = w1_certificate(&drift, &sg).unwrap().certificate;
        prop_assert!(c.verified);
        prop_assert!(c.lambda <= c.c2 / 2.0 && c.lambda <= k2);
    }
}

#[test]
fn small_l0_converges_to_dissipative_limit() {
    let noise = LevyModel::isotropic_stable(1, 1.2, 1.0).unwrap();
    let mut last = f64::INFINITY;
    for k in 3..=6 {
        let l0 = 10f64.powi(-k);
        let drift = DriftModel::piecewise(1, 0.5, 2.0, l0).unwrap();
        let s = ScenarioSpec::new("small", drift, noise.clone(), vec![1.0], vec![-1.0]).unwrap();
        let c = issued(&s, CertKind::W1);
        let err = (c.big_c - 1.0).abs().max((c.lambda - 2.0).abs());
        assert!(err < last, "k = {k}: error {err} did not shrink from {last}");
        last = err;
    }
    assert!(last < 1e-2, "error at l0 = 1e-6 is {last}");
}

#[test]
fn doubled_rate_fails_when_certificate_is_tight() {
    let s = ScenarioSpec::new(
        "exact",
        DriftModel::linear_dissipative(1, 1.0).unwrap(),
        LevyModel::isotropic_stable(1, 1.2, 1.0).unwrap(),
        vec![1.0],
        vec![0.0],
    )
    .unwrap();
    let sc = certify_scenario(&s, &CertifyOptions::default()).unwrap();
    let (_, r) = sc.results.iter().find(|(k, _)| *k == CertKind::W1).unwrap();
    let cert = r.as_ref().unwrap();
    assert_eq!(cert.certificate.lambda, 1.0);
    let grid = verification_grid(s.drift.profile.l0);
    let sg_profile = Arc::new(OverlapProfile::from_model(&s.noise, sc.kappa, s.drift.profile.l0).unwrap());
    let doubled = verify_condition_c(&cert.test_function, 2.0, &s.drift.profile, &sg_profile, &grid).unwrap();
    assert!(!doubled.passed);
    let exact = verify_condition_c(&cert.test_function, 1.0, &s.drift.profile, &sg_profile, &grid).unwrap();
    assert!(exact.passed);
}

#[test]
fn g_tables_converge_under_refinement() {
    let model = LevyModel::isotropic_stable(1, 1.2, 1.0).unwrap();
    for l0 in [0.5, 1.0, 2.0] {
        let profile = Arc::new(OverlapProfile::from_model(&model, l0, l0).unwrap());
        let coarse = build_sigma_with(profile.clone(), l0, 0.6, 1.0, 2048).unwrap();
        let fine = build_sigma_with(profile, l0, 0.6, 1.0, 4096).unwrap();
        let rel = (coarse.g1_total() - fine.g1_total()).abs() / fine.g1_total();
        assert!(rel < 1e-6, "l0 = {l0}: g1 moved by {rel:e}");
        let phi1 = DriftModel::piecewise(1, 1.0, 1.0, l0).unwrap().profile.phi1;
        let (a, b) = (coarse.g2_table(phi1).unwrap(), fine.g2_table(phi1).unwrap());
        let (a, b) = (a.last().unwrap(), b.last().unwrap());
        assert!((a - b).abs() / b < 1e-6, "l0 = {l0}: g2 moved from {a} to {b}");
    }
}

#[test]
fn strong_test_function_is_bounded_with_nonincreasing_slope() {
    let s = catalog_scenarios().into_iter().find(|s| s.name == "superlinear_truncated").unwrap();
    let sc = certify_scenario(&s, &CertifyOptions::default()).unwrap();
    let l0 = s.drift.profile.l0;
    let profile = Arc::new(OverlapProfile::from_model(&s.noise, sc.kappa, l0).unwrap());
    let sg = build_sigma(profile, l0, 0.75, 1.0).unwrap();
    let cert = strong_ergodic_certificate(&s.drift, &sg, sc.kappa).unwrap();
    let tf = &cert.test_function;
    let sup = tf.sup();
    assert!(sup.is_finite());
    let grid = verification_grid(l0);
    let mut slope = f64::INFINITY;
    for &r in &grid {
        let (v, d) = (tf.value(r), tf.dpsi(r));
        assert!(v <= sup * (1.0 + 1e-12), "value {v} above sup {sup} at r = {r}");
        assert!(d >= 0.0 && d <= slope * (1.0 + 1e-9) + 1e-15, "slope increases at r = {r}");
        slope = d;
    }
}
