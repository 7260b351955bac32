//! Explicit contraction constants for the refined basic coupling, built from
//! the test function `ψ`, plus a grid check of the generator condition C.

mod regularity;
mod sigma;
mod test_function;

pub use regularity::{regularity_bound, regularity_constants, RegularityConstants, RegularityPhi};
pub use sigma::{
    build_sigma, build_sigma_with, canonical_b0, canonical_b2_bound, verification_grid, GFunction, OverlapProfile,
    Sigma, SigmaG, DEFAULT_NODES, SIGMA_SAFETY,
};
pub use test_function::{TestFunction, TestKind};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measure::{kappa0_proxy, LevyModel};
use crate::models::{DriftModel, DriftProfile, Phi1, ScenarioSpec};

/// Certificate families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertKind {
    W1,
    Tv,
    StrongErgodic,
    Regularity,
}

impl CertKind {
    pub fn tag(&self) -> &'static str {
        match self {
            CertKind::W1 => "w1",
            CertKind::Tv => "tv",
            CertKind::StrongErgodic => "strong_ergodic",
            CertKind::Regularity => "regularity",
        }
    }
}

/// Constants of one certificate plus its verification status.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCertificate {
    pub kind: CertKind,
    pub c1: f64,
    pub c2: f64,
    /// Prefactor of the bound.
    pub big_c: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub a: Option<f64>,
    pub j_kappa: Option<f64>,
    pub verified: bool,
    /// Built on a user-declared drift profile.
    pub conditional: bool,
    pub worst_margin: f64,
    pub worst_r: f64,
    pub provenance: String,
}

impl RateCertificate {
    pub fn passed(&self) -> bool {
        self.verified
    }

    pub fn status(&self) -> String {
        let base = if self.verified { "grid-verified" } else { "violated" };
        if self.conditional {
            format!("{base};conditional")
        } else {
            base.to_string()
        }
    }

    pub fn add_note(&mut self, note: &str) {
        self.provenance.push_str("; ");
        self.provenance.push_str(note);
    }
}

/// A certificate with the test function and grid report behind it.
#[derive(Debug, Clone)]
pub struct Certified {
    pub certificate: RateCertificate,
    pub test_function: TestFunction,
    pub report: ConditionReport,
}

/// Closed-form constants of the Wasserstein certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W1Constants {
    pub c1: f64,
    pub c2: f64,
    pub big_c: f64,
    pub lambda: f64,
    /// `g(2l₀) = g₁(2l₀) + (2/c₂)g₂(2l₀)`.
    pub g_total: f64,
}

/// `c₂ = (2K₂) ∧ g₁(2l₀)^{-1}`, `c₁ = e^{-c₂g(2l₀)}`, `C = (1+c₁)/(2c₁)`,
/// `λ = c₂/(1 + e^{c₂g(2l₀)})`.
pub fn w1_formula(k2: f64, g1_total: f64, g2_total: f64) -> Result<W1Constants> {
    if !(k2 > 0.0 && k2.is_finite()) {
        return Err(Error::Contract(format!("K2 = {k2} must be positive")));
    }
    let c2 = if g1_total > 0.0 { (2.0 * k2).min(1.0 / g1_total) } else { 2.0 * k2 };
    let g_total = g1_total + 2.0 / c2 * g2_total;
    let e = (c2 * g_total).exp();
    let c1 = 1.0 / e;
    Ok(W1Constants { c1, c2, big_c: (1.0 + c1) / (2.0 * c1), lambda: c2 / (1.0 + e), g_total })
}

/// `m = (2K₂) ∧ g(2l₀)^{-1}`, `c₂ = 2K₁/κ + m`, `c₁ = e^{-c₂g(2l₀)}`; returns `(m, c₁, c₂)`.
pub fn tv_coefficients(k1: f64, k2: f64, kappa: f64, g_total: f64) -> (f64, f64, f64) {
    let m = if g_total > 0.0 { (2.0 * k2).min(1.0 / g_total) } else { 2.0 * k2 };
    let c2 = 2.0 * k1 / kappa + m;
    (m, (-c2 * g_total).exp(), c2)
}

/// `a = (2/J_κ)(K₁(c₁+1) + c₁/(c₁+1)·m·ψ(κ))`, `λ = c₁/(c₁+1)·m·(1 + a/ψ(κ))^{-1}`.
pub fn tv_rate(k1: f64, m: f64, c1: f64, j_kappa: f64, psi_kappa: f64) -> (f64, f64) {
    let w = c1 / (c1 + 1.0) * m;
    let a = 2.0 / j_kappa * (k1 * (c1 + 1.0) + w * psi_kappa);
    (a, w / (1.0 + a / psi_kappa))
}

/// `½·mass·[f(r + κ∧r) + f(r - κ∧r) - 2f(r)] + f'(r)/r·drift_proj`.
pub fn generator_apply(f: impl Fn(f64) -> f64, f_prime: f64, mass: f64, drift_proj: f64, r: f64, kappa: f64) -> f64 {
    let d = kappa.min(r);
    let jump = f(r + d) + f(r - d) - 2.0 * f(r);
    let jump_term = if jump == 0.0 { 0.0 } else { 0.5 * mass * jump };
    jump_term + f_prime / r * drift_proj
}

/// One grid point of a condition-C check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionPoint {
    pub r: f64,
    /// `1` below `l₀`, `2` at or above it.
    pub regime: u8,
    pub theta: f64,
    /// `-λf(r) - Θ(r)`; negative values violate the condition.
    pub margin: f64,
    pub passed: bool,
}

/// Outcome of [`verify_condition_c`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub points: Vec<ConditionPoint>,
    pub worst_margin: f64,
    pub worst_r: f64,
    pub passed: bool,
}

/// `Θ(r)`: the generator bound entering condition C.
fn theta_at(tf: &TestFunction, profile: &DriftProfile, overlap: &OverlapProfile, r: f64) -> Result<(u8, f64)> {
    if r < profile.l0 {
        let mass = overlap.j_capped(r)?;
        let drift_proj = tf.phi1.eval(r) * r;
        Ok((1, generator_apply(|s| tf.value(s), tf.dpsi(r), mass, drift_proj, r, overlap.kappa())))
    } else {
        Ok((2, -profile.phi2.eval(r) * tf.dpsi(r)))
    }
}

/// Check (i) on `[grid_min, l₀)` and (ii) on `[l₀, grid_max]` at every grid point.
pub fn verify_condition_c(
    tf: &TestFunction,
    lambda: f64,
    profile: &DriftProfile,
    overlap: &OverlapProfile,
    grid: &[f64],
) -> Result<ConditionReport> {
    let mut points = Vec::with_capacity(grid.len());
    let (mut worst_margin, mut worst_r) = (f64::INFINITY, f64::NAN);
    for &r in grid {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument("verification grid must be positive".into()));
        }
        let (regime, theta) = theta_at(tf, profile, overlap, r)?;
        let lf = lambda * tf.value(r);
        let margin = -lf - theta;
        let passed = margin >= -1e-10 * lf.abs().max(1.0);
        if margin < worst_margin {
            worst_margin = margin;
            worst_r = r;
        }
        points.push(ConditionPoint { r, regime, theta, margin, passed });
    }
    let passed = points.iter().all(|p| p.passed);
    Ok(ConditionReport { points, worst_margin, worst_r, passed })
}

fn check_sigma(drift: &DriftModel, sg: &SigmaG) -> Result<()> {
    let l0 = drift.profile.l0;
    if (sg.l0 - l0).abs() > 1e-12 * l0.max(1.0) {
        return Err(Error::Contract(format!("sigma built for l0 = {} but drift declares l0 = {l0}", sg.l0)));
    }
    Ok(())
}

fn finish(mut certificate: RateCertificate, tf: TestFunction, drift: &DriftModel, sg: &SigmaG) -> Result<Certified> {
    let report =
        verify_condition_c(&tf, certificate.lambda, &drift.profile, &sg.profile, &verification_grid(drift.profile.l0))?;
    certificate.verified = report.passed;
    certificate.worst_margin = report.worst_margin;
    certificate.worst_r = report.worst_r;
    certificate.conditional = drift.profile.user_declared;
    if !sg.is_degenerate() {
        certificate.add_note(&sg.sigma.describe());
    }
    if sg.profile.approximate {
        certificate.add_note("J from a direction-grid minimum");
    }
    certificate.add_note("condition C checked on 512 log-spaced points");
    Ok(Certified { certificate, test_function: tf, report })
}

/// Exponential contraction in the `L¹`-Wasserstein distance with
/// `W₁(δ_xP_t, δ_yP_t) ≤ C e^{-λt}|x - y|`.
pub fn w1_certificate(drift: &DriftModel, sg: &SigmaG) -> Result<Certified> {
    check_sigma(drift, sg)?;
    let profile = drift.profile;
    if !profile.phi1.is_concave_vanishing() {
        return Err(Error::Contract("w1 certificate needs a concave Phi1 with Phi1(0) = 0".into()));
    }
    let k2 = profile.phi2.linear_constant(profile.l0);
    let (consts, g) = if sg.is_degenerate() {
        (w1_formula(k2, 0.0, 0.0)?, None)
    } else {
        let g2 = sg.g2_table(profile.phi1)?;
        let consts = w1_formula(k2, sg.g1_total(), *g2.last().expect("nonempty table"))?;
        (consts, Some(sg.g_function(profile.phi1, 2.0 / consts.c2)?))
    };
    let tf = TestFunction::new(TestKind::W1, consts.c1, consts.c2, profile.l0, profile.phi1, g)?;
    let cert = RateCertificate {
        kind: CertKind::W1,
        c1: consts.c1,
        c2: consts.c2,
        big_c: consts.big_c,
        lambda: consts.lambda,
        kappa: sg.profile.kappa(),
        a: None,
        j_kappa: None,
        verified: false,
        conditional: false,
        worst_margin: f64::NAN,
        worst_r: f64::NAN,
        provenance: "W1 contraction from the concave test function with c2=(2K2)^(1/g1(2l0)) and C=(1+c1)/(2c1)"
            .to_string(),
    };
    finish(cert, tf, drift, sg)
}

fn overlap_floor(sg: &SigmaG, kappa: f64, l0: f64) -> Result<f64> {
    if (sg.profile.kappa() - kappa).abs() > 1e-15 * kappa {
        return Err(Error::Contract(format!("overlap profile built for kappa = {}, not {kappa}", sg.profile.kappa())));
    }
    if kappa > l0 {
        return Err(Error::Contract(format!("kappa = {kappa} must not exceed l0 = {l0}")));
    }
    let j_kappa = sg.profile.j_kappa();
    if !(j_kappa > 0.0) {
        return Err(Error::OverlapInsufficient(format!("grid infimum of J on (0, {kappa}] is {j_kappa:e}")));
    }
    Ok(j_kappa)
}

/// Total-variation contraction with
/// `‖δ_xP_t - δ_yP_t‖ ≤ 2e^{-λt}(1 + ψ(|x-y|)/a) ≤ C e^{-λt}(1 + |x-y|)`.
pub fn tv_certificate(drift: &DriftModel, sg: &SigmaG, kappa: f64) -> Result<Certified> {
    check_sigma(drift, sg)?;
    let profile = drift.profile;
    let l0 = profile.l0;
    if sg.is_degenerate() {
        return Err(Error::Contract("tv certificate needs l0 > 0".into()));
    }
    let j_kappa = overlap_floor(sg, kappa, l0)?;
    let k1 = profile.phi1.sup_on(l0);
    let k2 = profile.phi2.linear_constant(l0);
    if !(k2 > 0.0) {
        return Err(Error::Contract("tv certificate needs K2 > 0".into()));
    }
    let g = sg.g_function(Phi1::Zero, 0.0)?;
    let (m, c1, c2) = tv_coefficients(k1, k2, kappa, g.total());
    let tf = TestFunction::new(TestKind::Tv, c1, c2, l0, Phi1::Constant { k1 }, Some(g))?;
    let psi_kappa = tf.psi(kappa);
    let (a, lambda) = tv_rate(k1, m, c1, j_kappa, psi_kappa);
    let tf = tf.with_jump(a);
    let cert = RateCertificate {
        kind: CertKind::Tv,
        c1,
        c2,
        big_c: 2.0 * (1.0f64).max((c1 + 1.0) / a),
        lambda,
        kappa,
        a: Some(a),
        j_kappa: Some(j_kappa),
        verified: false,
        conditional: false,
        worst_margin: f64::NAN,
        worst_r: f64::NAN,
        provenance: "total-variation contraction with test function a*1(r>0)+psi and c2=2K1/kappa+(2K2)^(1/g(2l0)); J_kappa is a grid infimum".to_string(),
    };
    finish(cert, tf, drift, sg)
}

/// Uniform total-variation contraction `‖δ_xP_t - δ_yP_t‖ ≤ c e^{-λt}` under a
/// superlinear `Φ₂`; `λ` is the grid infimum of `-Θ(r)/(a + ψ(r))`.
pub fn strong_ergodic_certificate(drift: &DriftModel, sg: &SigmaG, kappa: f64) -> Result<Certified> {
    check_sigma(drift, sg)?;
    let profile = drift.profile;
    let l0 = profile.l0;
    if sg.is_degenerate() {
        return Err(Error::Contract("strong ergodic certificate needs l0 > 0".into()));
    }
    profile.phi2.tail_integral(2.0 * l0)?;
    let j_kappa = overlap_floor(sg, kappa, l0)?;
    let k1 = profile.phi1.sup_on(l0);
    let k2 = profile.phi2.linear_constant(l0);
    if !(k2 > 0.0) {
        return Err(Error::Contract("strong ergodic certificate needs Phi2 > 0 on [l0, inf)".into()));
    }
    let c2 = 2.0 * (k2 + k1 / kappa);
    let g = sg.g_function(Phi1::Zero, 0.0)?;
    let c1 = (-c2 * g.total()).exp();
    let tf = TestFunction::new(TestKind::StrongErgodic, c1, c2, l0, Phi1::Constant { k1 }, Some(g))?
        .with_phi2_tail(profile.phi2)?;
    let a = 2.0 / j_kappa * (k1 * (c1 + 1.0) + 2.0 * k2 * c1 / (c1 + 1.0) * tf.psi(kappa));
    let tf = tf.with_jump(a);

    let grid = verification_grid(l0);
    let sup = tf.sup();
    let mut lambda = tf.dpsi_2l0() * profile.phi2.eval(2.0 * l0) / (a + sup);
    let mut arg = f64::INFINITY;
    for &r in &grid {
        let (_, theta) = theta_at(&tf, &profile, &sg.profile, r)?;
        let ratio = -theta / tf.value(r);
        if ratio < lambda {
            lambda = ratio;
            arg = r;
        }
    }
    if !(lambda > 0.0) {
        return Err(Error::ConditionViolated { r: arg, margin: lambda });
    }
    let cert = RateCertificate {
        kind: CertKind::StrongErgodic,
        c1,
        c2,
        big_c: 2.0 * (1.0 + sup / a),
        lambda,
        kappa,
        a: Some(a),
        j_kappa: Some(j_kappa),
        verified: false,
        conditional: false,
        worst_margin: f64::NAN,
        worst_r: f64::NAN,
        provenance: format!(
            "uniform total-variation contraction with bounded Phi2 tail; c2=2(K2+K1/kappa) with K2={k2:.6e}; lambda is a numeric grid infimum"
        ),
    };
    finish(cert, tf, drift, sg)
}

/// Regularity constants packaged as a certificate row: `c1 = A_ε`, `c2 = B_ε`, `κ = ε`.
pub fn regularity_certificate(rc: &RegularityConstants) -> RateCertificate {
    RateCertificate {
        kind: CertKind::Regularity,
        c1: rc.a_eps,
        c2: rc.b_eps,
        big_c: 2.0 / rc.phi.value(rc.eps),
        lambda: f64::NAN,
        kappa: rc.eps,
        a: None,
        j_kappa: None,
        verified: true,
        conditional: false,
        worst_margin: f64::NAN,
        worst_r: f64::NAN,
        provenance: format!(
            "semigroup regularity with phi={} on (0, eps]; A_eps and B_eps are grid extrema",
            rc.phi.tag()
        ),
    }
}

/// Knobs for [`certify_scenario`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    /// Coupling threshold; defaults to `l₀ ∧ κ₀-proxy`.
    pub kappa: Option<f64>,
    /// Exponent `α` of the canonical σ; defaults to half the stability index (capped at 1).
    pub sigma_alpha: Option<f64>,
    pub sigma_theta: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { kappa: None, sigma_alpha: None, sigma_theta: 1.0 }
    }
}

/// Every certificate a scenario admits, each either issued or rejected.
#[derive(Debug)]
pub struct ScenarioCertificates {
    pub kappa: f64,
    pub kappa_from_proxy: bool,
    pub results: Vec<(CertKind, Result<Certified>)>,
}

/// `l₀` when the overlap reaches that far, the `κ₀` proxy otherwise; the flag
/// marks the proxy case.
pub fn default_kappa(noise: &LevyModel, l0: f64) -> Result<(f64, bool)> {
    let proxy = kappa0_proxy(noise)?.value;
    if l0 > 0.0 && l0 <= proxy {
        Ok((l0, false))
    } else {
        Ok((proxy, true))
    }
}

/// Issue the w1, tv and strong-ergodic certificates that the drift profile supports.
pub fn certify_scenario(scenario: &ScenarioSpec, opts: &CertifyOptions) -> Result<ScenarioCertificates> {
    let drift = &scenario.drift;
    let noise = &scenario.noise;
    let l0 = drift.profile.l0;
    if !l0.is_finite() {
        return Err(Error::Unsupported(format!("drift '{}' declares no contraction profile", drift.tag())));
    }
    let (kappa, kappa_from_proxy) = match opts.kappa {
        Some(k) => (k, false),
        None => default_kappa(noise, l0)?,
    };
    let profile = Arc::new(OverlapProfile::from_model(noise, kappa, l0)?);
    let mut results = Vec::new();
    let tag = |mut c: Certified| {
        if kappa_from_proxy {
            c.certificate.add_note("kappa from the kappa0 proxy");
        }
        c
    };
    if l0 == 0.0 {
        let sg = SigmaG::degenerate(profile);
        results.push((CertKind::W1, w1_certificate(drift, &sg).map(tag)));
        return Ok(ScenarioCertificates { kappa, kappa_from_proxy, results });
    }
    let alpha = opts.sigma_alpha.unwrap_or_else(|| 0.5 * noise.alpha().unwrap_or(1.0).min(1.0));
    let sg = match build_sigma(profile, l0, alpha, opts.sigma_theta) {
        Ok(sg) => sg,
        Err(e) => {
            for kind in [CertKind::W1, CertKind::Tv, CertKind::StrongErgodic] {
                results.push((kind, Err(e.clone())));
            }
            return Ok(ScenarioCertificates { kappa, kappa_from_proxy, results });
        }
    };
    if drift.profile.phi1.is_concave_vanishing() {
        results.push((CertKind::W1, w1_certificate(drift, &sg).map(tag)));
    }
    results.push((CertKind::Tv, tv_certificate(drift, &sg, kappa).map(tag)));
    if drift.profile.phi2.tail_integral(2.0 * l0).is_ok() {
        results.push((CertKind::StrongErgodic, strong_ergodic_certificate(drift, &sg, kappa).map(tag)));
    }
    Ok(ScenarioCertificates { kappa, kappa_from_proxy, results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn w1_formula_oracle() {
        let c = w1_formula(1.0, 2.0, 0.0).unwrap();
        assert_eq!(c.c2, 0.5);
        assert!((c.c1 - 0.36787944117144232).abs() < 1e-15);
        assert!((c.big_c - 1.8591409142295226).abs() < 1e-14);
        assert!((c.lambda - 0.13447071068499756).abs() < 1e-15);
    }

    #[test]
    fn degenerate_limit() {
        let c = w1_formula(3.0, 0.0, 0.0).unwrap();
        assert_eq!((c.big_c, c.lambda), (1.0, 3.0));
    }

    #[test]
    fn tv_formula_oracle() {
        let (m, c1, c2) = tv_coefficients(0.0, 1.0, 0.25, 2.0);
        assert_eq!((m, c2), (0.5, 0.5));
        let (a, lambda) = tv_rate(0.0, m, c1, 5.0, 0.3);
        assert!((a - 0.016136485282199707).abs() < 1e-15);
        assert!((lambda - 0.12760695169204726).abs() < 1e-15);
        let (a_inf, l_inf) = tv_rate(0.0, m, c1, f64::INFINITY, 0.3);
        assert_eq!(a_inf, 0.0);
        assert!((l_inf - 0.13447071068499756).abs() < 1e-15);
    }

    #[test]
    fn generator_linear_function() {
        let f = |r: f64| r;
        assert_eq!(generator_apply(f, 1.0, 7.0, -3.0, 2.0, 1.0), -1.5);
        assert_eq!(generator_apply(f, 1.0, 7.0, 0.0, 0.5, 1.0), 0.0);
    }

    #[test]
    fn sqrt_sigma_chain() {
        let profile = Arc::new(OverlapProfile::from_fn(0.5, 0.5, |_| 1.0).unwrap());
        let sg = SigmaG::custom(profile, 0.5, "sqrt(s)", f64::sqrt, 2.0).unwrap();
        assert!((sg.g1_total() - 2.0).abs() < 1e-10, "{}", sg.g1_total());
    }
}
