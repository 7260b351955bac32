//! Overlap profile `s ↦ J(κ∧s)`, the comparison function `σ`, and tables of
//! `g₁ = ∫ ds/σ` and `g₂ = ∫ Φ₁(s)/(sσ(s)) ds`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::log_grid;
use crate::measure::{j_function, LevyModel};
use crate::models::Phi1;
use crate::quadrature::{gk15, integrate_upper_tail, QuadOptions};

/// Safety factor applied to the largest admissible `b₂`.
pub const SIGMA_SAFETY: f64 = 0.95;
/// Default number of table nodes on `[r₀, 2l₀]`.
pub const DEFAULT_NODES: usize = 2048;

/// Log-spaced grid on which condition C is checked.
pub fn verification_grid(l0: f64) -> Vec<f64> {
    log_grid((1e-6 * l0).max(1e-9), (10.0 * l0).max(10.0), 512)
}

fn sigma_grid(l0: f64) -> Vec<f64> {
    let lo = (1e-6 * l0).max(1e-9).min(l0);
    let mut g = log_grid(lo, 2.0 * l0, 400);
    g.extend(verification_grid(l0).into_iter().filter(|&s| s <= 2.0 * l0));
    g.sort_by(|a, b| a.total_cmp(b));
    g.dedup();
    g
}

type JFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// `J` tabulated at every grid point in `(0, κ]`, with a fallback evaluator.
#[derive(Clone)]
pub struct OverlapProfile {
    kappa: f64,
    table: Vec<(f64, f64)>,
    eval: JFn,
    /// `J` is a direction-grid minimum rather than an exact infimum.
    pub approximate: bool,
}

impl fmt::Debug for OverlapProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OverlapProfile")
            .field("kappa", &self.kappa)
            .field("points", &self.table.len())
            .field("approximate", &self.approximate)
            .finish()
    }
}

impl OverlapProfile {
    /// Tabulate `eval` on the verification and σ grids of `l₀`, restricted to `(0, κ]`.
    pub fn new(kappa: f64, l0: f64, eval: JFn, approximate: bool) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return invalid(format!("kappa = {kappa} must be positive"));
        }
        let mut pts: Vec<f64> = verification_grid(l0);
        if l0 > 0.0 {
            pts.extend(sigma_grid(l0));
        }
        pts.retain(|&s| s <= kappa);
        pts.push(kappa);
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        let values: Vec<Result<f64>> = pts.par_iter().map(|&s| eval(s)).collect();
        let mut table = Vec::with_capacity(pts.len());
        for (s, v) in pts.into_iter().zip(values) {
            let v = v?;
            if v.is_nan() || v < 0.0 {
                return Err(Error::NumericDomain { z: vec![s] });
            }
            table.push((s, v));
        }
        Ok(OverlapProfile { kappa, table, eval, approximate })
    }

    /// Profile of a noise model, using its `J` function.
    pub fn from_model(model: &LevyModel, kappa: f64, l0: f64) -> Result<Self> {
        let approximate = j_function(model, kappa)?.grid_approximation;
        let m = model.clone();
        Self::new(kappa, l0, Arc::new(move |s| j_function(&m, s).map(|j| j.value)), approximate)
    }

    /// Profile of an explicit function `J`.
    pub fn from_fn(kappa: f64, l0: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        Self::new(kappa, l0, Arc::new(move |s| Ok(f(s))), false)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `J(s)`.
    pub fn j(&self, s: f64) -> Result<f64> {
        match self.table.binary_search_by(|(p, _)| p.total_cmp(&s)) {
            Ok(i) => Ok(self.table[i].1),
            Err(_) => (self.eval)(s),
        }
    }

    /// `J(κ ∧ s)`.
    pub fn j_capped(&self, s: f64) -> Result<f64> {
        self.j(s.min(self.kappa))
    }

    /// Grid infimum of `J` over `(0, κ]`.
    pub fn j_kappa(&self) -> f64 {
        self.table.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min)
    }
}

/// The comparison function `σ`.
#[derive(Clone)]
pub enum Sigma {
    /// `b₂ s^{1-α} log^{1+θ}(b₀/s)`.
    Canonical { b0: f64, b2: f64, alpha: f64, theta: f64 },
    /// User-supplied `σ`; `tail_decay` is the power-law decay exponent of
    /// `u ↦ e^{-u}/σ(e^{-u})` (any value ≥ 2 for exponential decay).
    Custom { f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, tail_decay: f64, name: String },
}

impl fmt::Debug for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::Canonical { b0, b2, alpha, theta } => {
                write!(f, "Canonical {{ b0: {b0}, b2: {b2}, alpha: {alpha}, theta: {theta} }}")
            }
            Sigma::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Sigma {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Sigma::Canonical { b0, b2, alpha, theta } => b2 * s.powf(1.0 - alpha) * (b0 / s).ln().powf(1.0 + theta),
            Sigma::Custom { f, .. } => f(s),
        }
    }

    /// `e^{-u}/σ(e^{-u})`, computed in log space for the canonical form.
    fn inverse_in_log(&self, u: f64) -> f64 {
        match self {
            Sigma::Canonical { b0, b2, alpha, theta } => {
                (-alpha * u - b2.ln() - (1.0 + theta) * (b0.ln() + u).ln()).exp()
            }
            Sigma::Custom { f, .. } => {
                let s = (-u).exp();
                s / f(s)
            }
        }
    }

    fn tail_decay(&self) -> f64 {
        match self {
            Sigma::Canonical { alpha, theta, .. } => {
                if *alpha > 0.0 {
                    2.0
                } else {
                    1.0 + theta
                }
            }
            Sigma::Custom { tail_decay, .. } => *tail_decay,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Sigma::Canonical { b0, b2, alpha, theta } => {
                format!("sigma(s)=b2*s^(1-alpha)*log(b0/s)^(1+theta) with b0={b0:.6e} b2={b2:.6e} alpha={alpha} theta={theta}")
            }
            Sigma::Custom { name, .. } => format!("sigma={name}"),
        }
    }
}

/// `σ` with its overlap profile and a `g₁` table on `[r₀, 2l₀]`.
#[derive(Debug, Clone)]
pub struct SigmaG {
    pub sigma: Sigma,
    pub l0: f64,
    pub profile: Arc<OverlapProfile>,
    r0: f64,
    nodes: Arc<Vec<f64>>,
    g1: Arc<Vec<f64>>,
}

/// Largest admissible `b₂` for the canonical σ, before the safety factor.
pub fn canonical_b2_bound(profile: &OverlapProfile, l0: f64, alpha: f64, theta: f64) -> Result<f64> {
    let b0 = canonical_b0(l0, alpha, theta);
    let mut best = f64::INFINITY;
    for s in sigma_grid(l0) {
        let k = s.min(profile.kappa());
        let upper = profile.j_capped(s)? * k * k / (2.0 * s);
        let shape = s.powf(1.0 - alpha) * (b0 / s).ln().powf(1.0 + theta);
        best = best.min(upper / shape);
    }
    Ok(best)
}

/// `b₀ = 2l₀ e^{(1+θ)/(1-α)}`.
pub fn canonical_b0(l0: f64, alpha: f64, theta: f64) -> f64 {
    2.0 * l0 * ((1.0 + theta) / (1.0 - alpha)).exp()
}

/// Canonical σ with `b₂ = 0.95 ×` the grid minimum of the admissible ratio.
pub fn build_sigma(profile: Arc<OverlapProfile>, l0: f64, alpha: f64, theta: f64) -> Result<SigmaG> {
    build_sigma_with(profile, l0, alpha, theta, DEFAULT_NODES)
}

/// As [`build_sigma`] with an explicit table size.
pub fn build_sigma_with(profile: Arc<OverlapProfile>, l0: f64, alpha: f64, theta: f64, nodes: usize) -> Result<SigmaG> {
    if !(0.0..1.0).contains(&alpha) {
        return invalid(format!("alpha = {alpha} must lie in [0, 1) for the canonical sigma"));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return invalid(format!("theta = {theta} must be positive"));
    }
    if !(l0 > 0.0 && l0.is_finite()) {
        return invalid(format!("l0 = {l0} must be positive"));
    }
    let bound = canonical_b2_bound(&profile, l0, alpha, theta)?;
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::OverlapInsufficient(format!(
            "grid minimum of J(kappa^s)(kappa^s)^2/(2s) relative to the sigma shape is {bound:e}"
        )));
    }
    let sigma = Sigma::Canonical { b0: canonical_b0(l0, alpha, theta), b2: SIGMA_SAFETY * bound, alpha, theta };
    SigmaG::tabulate(sigma, l0, profile, nodes)
}

impl SigmaG {
    /// The `l₀ = 0` case: no σ is needed and every `g` vanishes.
    pub fn degenerate(profile: Arc<OverlapProfile>) -> Self {
        SigmaG {
            sigma: Sigma::Custom { f: Arc::new(|_| f64::INFINITY), tail_decay: 2.0, name: "none".into() },
            l0: 0.0,
            profile,
            r0: 0.0,
            nodes: Arc::new(Vec::new()),
            g1: Arc::new(Vec::new()),
        }
    }

    /// A user-supplied σ (not checked against `J`).
    pub fn custom(
        profile: Arc<OverlapProfile>,
        l0: f64,
        name: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tail_decay: f64,
    ) -> Result<Self> {
        if !(l0 > 0.0) {
            return invalid("custom sigma needs l0 > 0");
        }
        let sigma = Sigma::Custom { f: Arc::new(f), tail_decay, name: name.to_string() };
        Self::tabulate(sigma, l0, profile, DEFAULT_NODES)
    }

    fn tabulate(sigma: Sigma, l0: f64, profile: Arc<OverlapProfile>, n: usize) -> Result<Self> {
        if n < 16 {
            return invalid("need at least 16 table nodes");
        }
        let r0 = (2.0 * l0 * 1e-12).min(0.5);
        let nodes = log_grid(r0, 2.0 * l0, n);
        let g1 = cumulative(&sigma, &nodes, &|_| 1.0)?;
        Ok(SigmaG { sigma, l0, profile, r0, nodes: Arc::new(nodes), g1: Arc::new(g1) })
    }

    pub fn is_degenerate(&self) -> bool {
        self.l0 == 0.0
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `g₁(2l₀)`.
    pub fn g1_total(&self) -> f64 {
        self.g1.last().copied().unwrap_or(0.0)
    }

    /// `g₂` at every node, for the given `Φ₁`.
    pub fn g2_table(&self, phi1: Phi1) -> Result<Vec<f64>> {
        if matches!(phi1, Phi1::Zero) {
            return Ok(vec![0.0; self.nodes.len()]);
        }
        if !phi1.is_concave_vanishing() {
            return Err(Error::Contract("g2 needs a concave Phi1 with Phi1(0) = 0".into()));
        }
        cumulative(&self.sigma, &self.nodes, &|s| phi1.over_r(s))
    }

    /// `g = g₁ + w·g₂` as an evaluable function.
    pub fn g_function(&self, phi1: Phi1, w: f64) -> Result<GFunction> {
        let values = if w == 0.0 || matches!(phi1, Phi1::Zero) {
            self.g1.as_ref().clone()
        } else {
            let g2 = self.g2_table(phi1)?;
            self.g1.iter().zip(&g2).map(|(a, b)| a + w * b).collect()
        };
        Ok(GFunction {
            sigma: self.sigma.clone(),
            phi1,
            w,
            r0: self.r0,
            nodes: self.nodes.clone(),
            values: Arc::new(values),
        })
    }
}

/// `∫₀^{r₀} weight(s)/σ(s) ds` through `s = e^{-u}`.
fn head_integral(sigma: &Sigma, weight: &dyn Fn(f64) -> f64, r0: f64) -> Result<f64> {
    let h = |u: f64| {
        let v = sigma.inverse_in_log(u);
        if v == 0.0 {
            0.0
        } else {
            v * weight((-u).exp())
        }
    };
    Ok(integrate_upper_tail(h, (1.0 / r0).ln(), sigma.tail_decay(), QuadOptions::rel(1e-12))?.value)
}

fn cumulative(sigma: &Sigma, nodes: &[f64], weight: &(dyn Fn(f64) -> f64 + Sync)) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = head_integral(sigma, weight, nodes[0])?;
    out.push(acc);
    for w in nodes.windows(2) {
        acc += gk15(|s| weight(s) / sigma.eval(s), w[0], w[1]).value;
        out.push(acc);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::DivergentTail("g integral is not finite on (0, 2l0]".into()));
    }
    Ok(out)
}

/// `g(r) = ∫₀^r (1 + w·Φ₁(s)/s)/σ(s) ds` on `(0, 2l₀]`.
#[derive(Debug, Clone)]
pub struct GFunction {
    sigma: Sigma,
    phi1: Phi1,
    w: f64,
    r0: f64,
    nodes: Arc<Vec<f64>>,
    values: Arc<Vec<f64>>,
}

impl GFunction {
    pub fn derivative(&self, r: f64) -> f64 {
        let weight = if self.w == 0.0 { 1.0 } else { 1.0 + self.w * self.phi1.over_r(r) };
        weight / self.sigma.eval(r)
    }

    /// `g(2l₀)`.
    pub fn total(&self) -> f64 {
        *self.values.last().expect("nonempty table")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Index `k` with `nodes[k] ≤ r < nodes[k+1]`, clamped to the last interval.
    pub(crate) fn locate(&self, r: f64) -> usize {
        let k = self.nodes.partition_point(|&p| p <= r);
        k.saturating_sub(1).min(self.nodes.len() - 2)
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r < self.r0 {
            let w = self.w;
            let phi1 = self.phi1;
            let weight = move |s: f64| if w == 0.0 { 1.0 } else { 1.0 + w * phi1.over_r(s) };
            return head_integral(&self.sigma, &weight, r).unwrap_or(f64::NAN);
        }
        let k = self.locate(r);
        let lo = self.nodes[k];
        if r == lo {
            return self.values[k];
        }
        self.values[k] + gk15(|s| self.derivative(s), lo, r).value
    }
}
