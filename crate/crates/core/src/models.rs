//! Drift and noise catalogs, scenarios, and a sampled check of the
//! dissipativity profile `(Φ₁, Φ₂, l₀)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm, sub};
use crate::measure::{Atom, LevyModel};
use crate::quadrature::{integrate_upper_tail, QuadOptions};

/// Short-range expansion bound `Φ₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi1 {
    Zero,
    /// `K₁·r`.
    Linear {
        k1: f64,
    },
    /// `K₁·r^β`, `β ∈ (0, 1]`.
    Power {
        k1: f64,
        beta: f64,
    },
    /// `K₁` (constant on `[0, l₀)`).
    Constant {
        k1: f64,
    },
}

impl Phi1 {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Phi1::Zero => 0.0,
            Phi1::Linear { k1 } => k1 * r,
            Phi1::Power { k1, beta } => k1 * r.powf(beta),
            Phi1::Constant { k1 } => k1,
        }
    }

    /// `Φ₁(s)/s`, the integrand weight of `g₂` against `1/σ`.
    pub fn over_r(&self, r: f64) -> f64 {
        match *self {
            Phi1::Zero => 0.0,
            Phi1::Linear { k1 } => k1,
            Phi1::Power { k1, beta } => k1 * r.powf(beta - 1.0),
            Phi1::Constant { k1 } => k1 / r,
        }
    }

    /// `sup_{0 ≤ r ≤ l₀} Φ₁(r)`.
    pub fn sup_on(&self, l0: f64) -> f64 {
        self.eval(l0)
    }

    /// Concave with `Φ₁(0) = 0` and nondecreasing `Φ₁''`.
    pub fn is_concave_vanishing(&self) -> bool {
        match *self {
            Phi1::Zero | Phi1::Linear { .. } => true,
            Phi1::Power { beta, .. } => beta > 0.0 && beta <= 1.0,
            Phi1::Constant { k1 } => k1 == 0.0,
        }
    }
}

/// Long-range contraction bound `Φ₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi2 {
    /// No contraction declared.
    Absent,
    /// `K₂·r`.
    Linear { k2: f64 },
    /// `K₂·r^{1+θ}`.
    Power { k2: f64, theta: f64 },
}

impl Phi2 {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Phi2::Absent => 0.0,
            Phi2::Linear { k2 } => k2 * r,
            Phi2::Power { k2, theta } => k2 * r.powf(1.0 + theta),
        }
    }

    /// `inf_{r ≥ l₀} Φ₂(r)/r`: the linear constant `K₂` implied on `[l₀, ∞)`.
    pub fn linear_constant(&self, l0: f64) -> f64 {
        match *self {
            Phi2::Absent => 0.0,
            Phi2::Linear { k2 } => k2,
            Phi2::Power { k2, theta } => k2 * l0.powf(theta),
        }
    }

    /// `∫_{from}^∞ ds/Φ₂(s)`.
    pub fn tail_integral(&self, from: f64) -> Result<f64> {
        match *self {
            Phi2::Absent => Err(Error::DivergentTail("no contraction profile declared".into())),
            Phi2::Linear { .. } => {
                Err(Error::DivergentTail("Phi2(r) = K2 r has a logarithmically divergent tail".into()))
            }
            Phi2::Power { k2, theta } => {
                if from <= 0.0 {
                    return Err(Error::DivergentTail("tail integral must start at r > 0".into()));
                }
                Ok(from.powf(-theta) / (k2 * theta))
            }
        }
    }

    /// Same integral by quadrature, as an independent check.
    pub fn tail_integral_numeric(&self, from: f64) -> Result<f64> {
        match *self {
            Phi2::Power { theta, .. } => {
                Ok(integrate_upper_tail(|s| 1.0 / self.eval(s), from, 1.0 + theta, QuadOptions::rel(1e-12))?.value)
            }
            _ => self.tail_integral(from),
        }
    }
}

/// Declared condition `B(Φ₁, Φ₂, l₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftProfile {
    pub phi1: Phi1,
    pub phi2: Phi2,
    pub l0: f64,
    /// The profile came from outside the catalog; certificates built on it
    /// are labelled conditional.
    pub user_declared: bool,
}

impl DriftProfile {
    /// Right-hand side of the condition at distance `r`.
    pub fn bound(&self, r: f64) -> f64 {
        if r < self.l0 {
            self.phi1.eval(r)
        } else {
            -self.phi2.eval(r)
        }
    }
}

type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Drift field kinds.
#[derive(Clone)]
pub enum DriftKind {
    Zero,
    LinearDissipative {
        k2: f64,
    },
    Piecewise {
        k1: f64,
        k2: f64,
        l0: f64,
    },
    GradientSuperlinear {
        theta: f64,
    },
    /// `b(x) = rate·x`.
    Linear {
        rate: f64,
    },
    Custom {
        name: String,
        field: DriftFn,
    },
}

impl fmt::Debug for DriftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftKind::Zero => write!(f, "Zero"),
            DriftKind::LinearDissipative { k2 } => write!(f, "LinearDissipative {{ k2: {k2} }}"),
            DriftKind::Piecewise { k1, k2, l0 } => write!(f, "Piecewise {{ k1: {k1}, k2: {k2}, l0: {l0} }}"),
            DriftKind::GradientSuperlinear { theta } => write!(f, "GradientSuperlinear {{ theta: {theta} }}"),
            DriftKind::Linear { rate } => write!(f, "Linear {{ rate: {rate} }}"),
            DriftKind::Custom { name, .. } => write!(f, "Custom {{ name: {name:?} }}"),
        }
    }
}

/// Drift `b` with its declared dissipativity profile.
#[derive(Debug, Clone)]
pub struct DriftModel {
    pub dim: usize,
    pub kind: DriftKind,
    pub profile: DriftProfile,
}

/// Smoothed radial clamp `φ(r)`: identity below `ρ - w`, constant `ρ` above
/// `ρ + w`, quadratic blend in between.
fn soft_clamp(r: f64, rho: f64, w: f64) -> f64 {
    if r <= rho - w {
        r
    } else if r >= rho + w {
        rho
    } else {
        let u = r - (rho - w);
        r - u * u / (4.0 * w)
    }
}

impl DriftModel {
    pub fn zero(dim: usize) -> Self {
        DriftModel {
            dim,
            kind: DriftKind::Zero,
            profile: DriftProfile { phi1: Phi1::Zero, phi2: Phi2::Absent, l0: f64::INFINITY, user_declared: false },
        }
    }

    pub fn linear_dissipative(dim: usize, k2: f64) -> Result<Self> {
        if !(k2 > 0.0 && k2.is_finite()) {
            return invalid(format!("K2 = {k2} must be positive"));
        }
        Ok(DriftModel {
            dim,
            kind: DriftKind::LinearDissipative { k2 },
            profile: DriftProfile { phi1: Phi1::Zero, phi2: Phi2::Linear { k2 }, l0: 0.0, user_declared: false },
        })
    }

    /// Expanding with rate `K₁` near the origin, contracting with `K₂`
    /// beyond `l₀`: `b(x) = -(2K₂+K₁)x + 2(K₁+K₂)F(x)` where `F` is a
    /// smoothed radial clamp at `l₀/4` over a band of width `l₀/10`.
    pub fn piecewise(dim: usize, k1: f64, k2: f64, l0: f64) -> Result<Self> {
        if !(k2 > 0.0 && k2.is_finite()) {
            return invalid(format!("K2 = {k2} must be positive"));
        }
        if !(k1 >= 0.0 && k1.is_finite()) {
            return invalid(format!("K1 = {k1} must be nonnegative"));
        }
        if !(l0 > 0.0 && l0.is_finite()) {
            return invalid(format!("l0 = {l0} must be positive for the piecewise drift"));
        }
        Ok(DriftModel {
            dim,
            kind: DriftKind::Piecewise { k1, k2, l0 },
            profile: DriftProfile { phi1: Phi1::Linear { k1 }, phi2: Phi2::Linear { k2 }, l0, user_declared: false },
        })
    }

    /// `b = ∇(-|x|^{2+θ}) = -(2+θ)|x|^θ x`, declared with
    /// `Φ₂(r) = (2+θ)2^{-θ} r^{1+θ}` beyond `l₀`.
    pub fn gradient_superlinear(dim: usize, theta: f64, l0: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return invalid(format!("theta = {theta} must be positive"));
        }
        if !(l0 > 0.0 && l0.is_finite()) {
            return invalid(format!("l0 = {l0} must be positive"));
        }
        let k2 = (2.0 + theta) * 2f64.powf(-theta);
        Ok(DriftModel {
            dim,
            kind: DriftKind::GradientSuperlinear { theta },
            profile: DriftProfile { phi1: Phi1::Zero, phi2: Phi2::Power { k2, theta }, l0, user_declared: false },
        })
    }

    /// `b(x) = rate·x` with a caller-supplied profile (used to exercise
    /// the violation path of the verifier).
    pub fn linear(dim: usize, rate: f64, profile: DriftProfile) -> Self {
        DriftModel { dim, kind: DriftKind::Linear { rate }, profile: DriftProfile { user_declared: true, ..profile } }
    }

    pub fn custom(dim: usize, name: &str, field: DriftFn, profile: DriftProfile) -> Self {
        DriftModel {
            dim,
            kind: DriftKind::Custom { name: name.to_string(), field },
            profile: DriftProfile { user_declared: true, ..profile },
        }
    }

    /// Replace the declared profile, keeping the field.
    pub fn with_profile(mut self, profile: DriftProfile) -> Self {
        self.profile = DriftProfile { user_declared: true, ..profile };
        self
    }

    pub fn tag(&self) -> String {
        match &self.kind {
            DriftKind::Zero => "zero".into(),
            DriftKind::LinearDissipative { .. } => "linear_dissipative".into(),
            DriftKind::Piecewise { .. } => "piecewise".into(),
            DriftKind::GradientSuperlinear { .. } => "gradient_superlinear".into(),
            DriftKind::Linear { .. } => "linear".into(),
            DriftKind::Custom { name, .. } => name.clone(),
        }
    }

    /// Write `b(x)` into `out`.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            DriftKind::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            DriftKind::LinearDissipative { k2 } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -k2 * v;
                }
            }
            DriftKind::Linear { rate } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = rate * v;
                }
            }
            DriftKind::Piecewise { k1, k2, l0 } => {
                let r = norm(x);
                let scale = if r > 0.0 { soft_clamp(r, l0 / 4.0, l0 / 20.0) / r } else { 1.0 };
                let a = -(2.0 * k2 + k1);
                let b = 2.0 * (k1 + k2) * scale;
                for (o, v) in out.iter_mut().zip(x) {
                    *o = (a + b) * v;
                }
            }
            DriftKind::GradientSuperlinear { theta } => {
                let r = norm(x);
                let f = -(2.0 + theta) * r.powf(*theta);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = f * v;
                }
            }
            DriftKind::Custom { field, .. } => field(x, out),
        }
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval(x, &mut out);
        out
    }
}

/// Parameters accepted by [`catalog_drift`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftParams {
    pub dim: usize,
    pub k1: f64,
    pub k2: f64,
    pub l0: f64,
    pub theta: f64,
}

impl Default for DriftParams {
    fn default() -> Self {
        Self { dim: 1, k1: 0.0, k2: 1.0, l0: 1.0, theta: 1.0 }
    }
}

/// Build a catalog drift by tag.
pub fn catalog_drift(kind: &str, p: &DriftParams) -> Result<DriftModel> {
    match kind {
        "linear_dissipative" => DriftModel::linear_dissipative(p.dim, p.k2),
        "piecewise" => DriftModel::piecewise(p.dim, p.k1, p.k2, p.l0),
        "gradient_superlinear" => DriftModel::gradient_superlinear(p.dim, p.theta, p.l0),
        "zero" => Ok(DriftModel::zero(p.dim)),
        other => invalid(format!("unknown drift kind `{other}`")),
    }
}

/// Parameters accepted by [`catalog_noise`].
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseParams {
    pub dim: usize,
    pub alpha: f64,
    pub radius: f64,
    pub intensity: f64,
    pub atoms: Vec<Atom>,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { dim: 1, alpha: 1.0, radius: 1.0, intensity: 1.0, atoms: Vec::new() }
    }
}

/// Build a catalog noise law by tag.
pub fn catalog_noise(kind: &str, p: &NoiseParams) -> Result<LevyModel> {
    match kind {
        "isotropic_stable" => LevyModel::isotropic_stable(p.dim, p.alpha, p.intensity),
        "truncated_isotropic_stable" => LevyModel::truncated_isotropic_stable(p.dim, p.alpha, p.radius, p.intensity),
        "half_space_stable" => LevyModel::half_space_stable(p.dim, p.alpha, p.intensity),
        "compound_poisson" => LevyModel::compound_poisson(p.atoms.clone()),
        other => invalid(format!("unknown noise kind `{other}`")),
    }
}

/// A drift, a noise law and an initial pair.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub drift: DriftModel,
    pub noise: LevyModel,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

impl ScenarioSpec {
    pub fn new(name: &str, drift: DriftModel, noise: LevyModel, x0: Vec<f64>, y0: Vec<f64>) -> Result<Self> {
        let d = noise.dim();
        if drift.dim != d || x0.len() != d || y0.len() != d {
            return invalid(format!("scenario `{name}`: dimensions of drift, noise and initial pair disagree"));
        }
        if x0.iter().chain(&y0).any(|v| !v.is_finite()) {
            return invalid(format!("scenario `{name}`: initial pair must be finite"));
        }
        Ok(ScenarioSpec { name: name.to_string(), drift, noise, x0, y0 })
    }

    pub fn dim(&self) -> usize {
        self.noise.dim()
    }

    pub fn initial_distance(&self) -> f64 {
        norm(&sub(&self.x0, &self.y0))
    }
}

/// The six shipped scenarios with density-type noise.
pub fn catalog_scenarios() -> Vec<ScenarioSpec> {
    let build = || -> Result<Vec<ScenarioSpec>> {
        Ok(vec![
            ScenarioSpec::new(
                "dissipative_truncated",
                DriftModel::linear_dissipative(1, 1.0)?,
                LevyModel::truncated_isotropic_stable(1, 1.5, 1.0, 1.0)?,
                vec![0.5],
                vec![-0.5],
            )?,
            ScenarioSpec::new(
                "double_well_stable",
                DriftModel::piecewise(1, 1.0, 1.0, 1.0)?,
                LevyModel::isotropic_stable(1, 1.2, 1.0)?,
                vec![1.0],
                vec![-1.0],
            )?,
            ScenarioSpec::new(
                "double_well_truncated",
                DriftModel::piecewise(1, 0.5, 1.0, 1.0)?,
                LevyModel::truncated_isotropic_stable(1, 1.5, 2.0, 1.0)?,
                vec![1.0],
                vec![-1.0],
            )?,
            ScenarioSpec::new(
                "half_space_piecewise",
                DriftModel::piecewise(1, 0.0, 1.0, 0.5)?,
                LevyModel::half_space_stable(1, 1.2, 1.0)?,
                vec![0.5],
                vec![-0.5],
            )?,
            ScenarioSpec::new(
                "superlinear_truncated",
                DriftModel::gradient_superlinear(1, 1.0, 1.0)?,
                LevyModel::truncated_isotropic_stable(1, 1.5, 1.0, 1.0)?,
                vec![1.0],
                vec![-1.0],
            )?,
            ScenarioSpec::new(
                "planar_double_well",
                DriftModel::piecewise(2, 0.5, 1.0, 1.0)?,
                LevyModel::truncated_isotropic_stable(2, 1.5, 2.0, 1.0)?,
                vec![0.5, 0.0],
                vec![-0.5, 0.0],
            )?,
        ])
    };
    build().expect("catalog scenarios are valid")
}

/// Zero-drift lattice instance with exactly computable overlaps: atoms
/// `{-2: 1/2, -1: 1, 1: 1, 2: 1/2}`, `κ = 1`, initial distance 2.
pub fn lattice_scenario() -> ScenarioSpec {
    let noise = LevyModel::compound_poisson_1d(&[(-2.0, 0.5), (-1.0, 1.0), (1.0, 1.0), (2.0, 0.5)]).unwrap();
    ScenarioSpec::new("lattice_poisson", DriftModel::zero(1), noise, vec![2.0], vec![0.0]).unwrap()
}

/// One pair that breaks the declared condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of [`verify_drift_condition`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriftReport {
    pub checked: usize,
    pub skipped: usize,
    pub violations: Vec<Violation>,
}

impl DriftReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check `⟨b(x)-b(y), x-y⟩/|x-y| ≤ Φ₁(r)·1{r<l₀} - Φ₂(r)·1{r≥l₀}` on `n`
/// pairs drawn from `sampler`.
pub fn verify_drift_condition<S>(drift: &DriftModel, mut sampler: S, n: usize) -> DriftReport
where
    S: FnMut(&mut [f64], &mut [f64]),
{
    let d = drift.dim;
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];
    let mut report = DriftReport::default();
    for _ in 0..n {
        sampler(&mut x, &mut y);
        let diff = sub(&x, &y);
        let r = norm(&diff);
        if r == 0.0 {
            report.skipped += 1;
            continue;
        }
        drift.eval(&x, &mut bx);
        drift.eval(&y, &mut by);
        let lhs = dot(&sub(&bx, &by), &diff) / r;
        let rhs = drift.profile.bound(r);
        let tol = 1e-9 * (1.0 + lhs.abs().max(rhs.abs()));
        report.checked += 1;
        if lhs > rhs + tol {
            report.violations.push(Violation { x: x.clone(), y: y.clone(), lhs, rhs });
        }
    }
    report
}

/// Pairs drawn uniformly from the ball of radius `radius`, with every
/// fourth pair placed at a random short distance to probe the inner region.
pub fn ball_pair_sampler(dim: usize, radius: f64, seed: u64) -> impl FnMut(&mut [f64], &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = 0u64;
    move |x: &mut [f64], y: &mut [f64]| {
        assert_eq!(x.len(), dim, "sampler dimension");
        let draw = |out: &mut [f64], rng: &mut ChaCha8Rng| loop {
            for v in out.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            if norm(out) <= 1.0 {
                break;
            }
        };
        draw(x, &mut rng);
        x.iter_mut().for_each(|v| *v *= radius);
        if count % 4 == 3 {
            draw(y, &mut rng);
            let scale = radius * 10f64.powf(rng.random_range(-4.0..-1.0));
            for (yv, xv) in y.iter_mut().zip(x.iter()) {
                *yv = xv + scale * *yv;
            }
        } else {
            draw(y, &mut rng);
            y.iter_mut().for_each(|v| *v *= radius);
        }
        count += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_dissipative_value_and_profile() {
        let b = DriftModel::linear_dissipative(1, 1.0).unwrap();
        assert_eq!(b.drift(&[2.0]), vec![-2.0]);
        assert_eq!(b.profile.phi2, Phi2::Linear { k2: 1.0 });
        assert_eq!(b.profile.l0, 0.0);
    }

    #[test]
    fn superlinear_value() {
        let b = DriftModel::gradient_superlinear(1, 1.0, 1.0).unwrap();
        assert_relative_eq!(b.drift(&[2.0])[0], -12.0, max_relative = 1e-15);
        assert_relative_eq!(b.drift(&[-2.0])[0], 12.0, max_relative = 1e-15);
        assert_eq!(b.profile.phi2, Phi2::Power { k2: 1.5, theta: 1.0 });
    }

    #[test]
    fn superlinear_constant_is_tight_on_a_grid() {
        // min over x > y of (b(y)-b(x))(x-y)/|x-y|^3 on a 1-D grid equals 1.5.
        let b = DriftModel::gradient_superlinear(1, 1.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| -5.0 + 0.05 * i as f64).collect();
        let mut best = f64::INFINITY;
        for &x in &grid {
            for &y in &grid {
                if x > y + 1e-9 {
                    let v = (b.drift(&[y])[0] - b.drift(&[x])[0]) * (x - y) / (x - y).powi(3);
                    best = best.min(v);
                }
            }
        }
        assert_relative_eq!(best, 1.5, max_relative = 1e-9);
    }

    #[test]
    fn unknown_kind_and_bad_k2() {
        assert!(catalog_drift("double_trouble", &DriftParams::default()).is_err());
        let p = DriftParams { k2: 0.0, ..DriftParams::default() };
        assert!(catalog_drift("linear_dissipative", &p).is_err());
        assert!(catalog_noise("gaussian", &NoiseParams::default()).is_err());
    }

    #[test]
    fn verifier_accepts_linear_and_flags_expanding() {
        let b = DriftModel::linear_dissipative(2, 1.0).unwrap();
        let rep = verify_drift_condition(&b, ball_pair_sampler(2, 100.0, 1), 2000);
        assert!(rep.passed());
        let bad = DriftModel::linear(
            1,
            1.0,
            DriftProfile { phi1: Phi1::Zero, phi2: Phi2::Linear { k2: 1.0 }, l0: 1.0, user_declared: true },
        );
        let rep = verify_drift_condition(&bad, ball_pair_sampler(1, 100.0, 2), 500);
        assert!(!rep.passed());
    }

    #[test]
    fn tail_integrals() {
        let p = Phi2::Power { k2: 1.0, theta: 1.0 };
        assert_relative_eq!(p.tail_integral(1.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(p.tail_integral_numeric(1.0).unwrap(), 1.0, max_relative = 1e-10);
        assert!(Phi2::Linear { k2: 1.0 }.tail_integral(1.0).is_err());
    }

    #[test]
    fn soft_clamp_is_c1() {
        let (rho, w) = (0.25, 0.05);
        let h = 1e-7;
        for r in [rho - w, rho + w] {
            let left = (soft_clamp(r, rho, w) - soft_clamp(r - h, rho, w)) / h;
            let right = (soft_clamp(r + h, rho, w) - soft_clamp(r, rho, w)) / h;
            assert!((left - right).abs() < 1e-5);
        }
    }
}
