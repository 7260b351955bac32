//! Lévy measures with a density (or a finite atom list), their large-jump
//! samplers, and the overlap quantities that drive the coupling.

mod overlap;

pub use overlap::{
    example_lower_bound, example_lower_bound_constant, j_function, j_function_with, kappa0_proxy, overlap_mass,
    overlap_ratio, overlap_ratio_truncated, shift_identity_residual, JOptions, JValue, Kappa0Proxy, OverlapEvaluation,
};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::{norm, sphere_area};
use crate::quadrature::{integrate, integrate_upper_tail, QuadOptions};

/// One atom of a compound Poisson Lévy measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub position: Vec<f64>,
    pub rate: f64,
}

/// Shape of the Lévy measure.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// `q(z) = c·|z|^{-d-α}`.
    IsotropicStable { alpha: f64 },
    /// `q(z) = c·|z|^{-d-α}·1{|z| ≤ R}`.
    TruncatedIsotropicStable { alpha: f64, radius: f64 },
    /// `q(z) = c·1{0 < z_1 ≤ 1}·|z|^{-d-α}`.
    HalfSpaceStable { alpha: f64 },
    /// Finite sum of point masses.
    CompoundPoisson { atoms: Vec<Atom> },
}

impl NoiseKind {
    pub fn tag(&self) -> &'static str {
        match self {
            NoiseKind::IsotropicStable { .. } => "isotropic_stable",
            NoiseKind::TruncatedIsotropicStable { .. } => "truncated_isotropic_stable",
            NoiseKind::HalfSpaceStable { .. } => "half_space_stable",
            NoiseKind::CompoundPoisson { .. } => "compound_poisson",
        }
    }
}

/// A Lévy measure on `R^d` given by a density or a finite atom list.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    dim: usize,
    intensity: f64,
    kind: NoiseKind,
    /// `∫_1^∞ r^{-1-α} P(0 < θ_1 ≤ 1/r) dr` for the half-space law.
    half_tail: f64,
    /// `∫ θ_1^+ dσ(θ)` over the unit sphere.
    half_first_moment: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return invalid(format!("stability index alpha = {alpha} must lie in (0, 2)"));
    }
    Ok(())
}

fn check_dim_intensity(dim: usize, c: f64) -> Result<()> {
    if dim == 0 {
        return invalid("dimension must be positive");
    }
    if !(c > 0.0 && c.is_finite()) {
        return invalid(format!("intensity constant {c} must be positive and finite"));
    }
    Ok(())
}

/// `P(0 < θ_1 ≤ u)` for `θ` uniform on `S^{d-1}`, `u ∈ [0, 1]`.
fn cap_fraction(d: usize, u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    match d {
        1 => {
            if u >= 1.0 {
                0.5
            } else {
                0.0
            }
        }
        2 => u.asin() / std::f64::consts::PI,
        3 => 0.5 * u,
        _ => {
            let p = (d - 2) as i32;
            let w = |phi: f64| phi.cos().powi(p);
            let half = std::f64::consts::FRAC_PI_2;
            let num = integrate(w, &[0.0, u.asin()], QuadOptions::rel(1e-13)).map(|q| q.value).unwrap_or(0.0);
            let den = integrate(w, &[-half, half], QuadOptions::rel(1e-13)).map(|q| q.value).unwrap_or(1.0);
            num / den
        }
    }
}

impl LevyModel {
    fn build(dim: usize, intensity: f64, kind: NoiseKind) -> Result<Self> {
        let mut m = LevyModel { dim, intensity, kind, half_tail: 0.0, half_first_moment: 0.0 };
        if let NoiseKind::HalfSpaceStable { alpha } = m.kind {
            m.half_first_moment = if dim == 1 { 1.0 } else { sphere_area(dim - 1) / (dim - 1) as f64 };
            if dim >= 2 {
                let f = |r: f64| r.powf(-1.0 - alpha) * cap_fraction(dim, 1.0 / r);
                m.half_tail = integrate_upper_tail(f, 1.0, 1.0 + alpha, QuadOptions::rel(1e-12))?.value;
            }
        }
        Ok(m)
    }

    pub fn isotropic_stable(dim: usize, alpha: f64, intensity: f64) -> Result<Self> {
        check_dim_intensity(dim, intensity)?;
        check_alpha(alpha)?;
        Self::build(dim, intensity, NoiseKind::IsotropicStable { alpha })
    }

    pub fn truncated_isotropic_stable(dim: usize, alpha: f64, radius: f64, intensity: f64) -> Result<Self> {
        check_dim_intensity(dim, intensity)?;
        check_alpha(alpha)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("truncation radius {radius} must be positive and finite"));
        }
        Self::build(dim, intensity, NoiseKind::TruncatedIsotropicStable { alpha, radius })
    }

    pub fn half_space_stable(dim: usize, alpha: f64, intensity: f64) -> Result<Self> {
        check_dim_intensity(dim, intensity)?;
        check_alpha(alpha)?;
        Self::build(dim, intensity, NoiseKind::HalfSpaceStable { alpha })
    }

    pub fn compound_poisson(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return invalid("compound Poisson atom list is empty");
        }
        let dim = atoms[0].position.len();
        if dim == 0 {
            return invalid("atom positions must be non-empty vectors");
        }
        for a in &atoms {
            if a.position.len() != dim {
                return invalid("atom positions have inconsistent dimensions");
            }
            if !(a.rate > 0.0 && a.rate.is_finite()) {
                return invalid(format!("atom rate {} must be positive and finite", a.rate));
            }
            if a.position.iter().all(|&v| v == 0.0) || a.position.iter().any(|v| !v.is_finite()) {
                return invalid("atoms must sit at finite nonzero positions");
            }
        }
        // Merge coinciding atoms so weights are well defined.
        let mut merged: Vec<Atom> = Vec::new();
        for a in atoms {
            if let Some(m) = merged.iter_mut().find(|m| m.position == a.position) {
                m.rate += a.rate;
            } else {
                merged.push(a);
            }
        }
        Self::build(dim, 1.0, NoiseKind::CompoundPoisson { atoms: merged })
    }

    /// One-dimensional compound Poisson law from `(position, rate)` pairs.
    pub fn compound_poisson_1d(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::compound_poisson(atoms.iter().map(|&(p, r)| Atom { position: vec![p], rate: r }).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            NoiseKind::IsotropicStable { alpha }
            | NoiseKind::TruncatedIsotropicStable { alpha, .. }
            | NoiseKind::HalfSpaceStable { alpha } => Some(alpha),
            NoiseKind::CompoundPoisson { .. } => None,
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, NoiseKind::CompoundPoisson { .. })
    }

    /// Rotation invariant laws, for which `J(s)` is a single overlap mass.
    pub fn is_isotropic(&self) -> bool {
        matches!(self.kind, NoiseKind::IsotropicStable { .. } | NoiseKind::TruncatedIsotropicStable { .. })
            || (self.dim == 1 && self.is_symmetric_atoms())
    }

    fn is_symmetric_atoms(&self) -> bool {
        match &self.kind {
            NoiseKind::CompoundPoisson { atoms } => atoms.iter().all(|a| {
                let neg: Vec<f64> = a.position.iter().map(|v| -v).collect();
                atoms.iter().any(|b| b.position == neg && b.rate == a.rate)
            }),
            _ => false,
        }
    }

    fn radial_power(&self, r: f64, alpha: f64) -> f64 {
        let p = self.dim as f64 + alpha;
        if !(1e-8..=1e8).contains(&r) {
            (self.intensity.ln() - p * r.ln()).exp()
        } else {
            self.intensity * r.powf(-p)
        }
    }

    /// Atom weight at `z` (exact match), zero elsewhere.
    fn atom_weight(&self, z: &[f64]) -> f64 {
        match &self.kind {
            NoiseKind::CompoundPoisson { atoms } => {
                let scale = 1.0 + norm(z);
                atoms
                    .iter()
                    .filter(|a| a.position.iter().zip(z).all(|(p, q)| (p - q).abs() <= 1e-12 * scale))
                    .map(|a| a.rate)
                    .sum()
            }
            _ => 0.0,
        }
    }

    /// Jump intensity `q(z)`. For compound Poisson laws this is the atom
    /// weight at `z` (density with respect to counting measure).
    pub fn density(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.dim);
        let r = norm(z);
        if r == 0.0 {
            return if self.is_atomic() { 0.0 } else { f64::INFINITY };
        }
        match self.kind {
            NoiseKind::IsotropicStable { alpha } => self.radial_power(r, alpha),
            NoiseKind::TruncatedIsotropicStable { alpha, radius } => {
                if r <= radius {
                    self.radial_power(r, alpha)
                } else {
                    0.0
                }
            }
            NoiseKind::HalfSpaceStable { alpha } => {
                if z[0] > 0.0 && z[0] <= 1.0 {
                    self.radial_power(r, alpha)
                } else {
                    0.0
                }
            }
            NoiseKind::CompoundPoisson { .. } => self.atom_weight(z),
        }
    }

    /// Radial profile `q(r)` of a rotation invariant density.
    pub(crate) fn radial_density(&self, r: f64) -> f64 {
        match self.kind {
            NoiseKind::IsotropicStable { alpha } => self.radial_power(r, alpha),
            NoiseKind::TruncatedIsotropicStable { alpha, radius } => {
                if r <= radius {
                    self.radial_power(r, alpha)
                } else {
                    0.0
                }
            }
            _ => unreachable!("radial_density on a non-radial law"),
        }
    }

    /// Total rate `ν({|z| > ε})`.
    pub fn large_jump_rate(&self, eps: f64) -> f64 {
        let c = self.intensity;
        let w = sphere_area(self.dim);
        match &self.kind {
            NoiseKind::IsotropicStable { alpha } => c * w * eps.powf(-alpha) / alpha,
            NoiseKind::TruncatedIsotropicStable { alpha, radius } => {
                if eps >= *radius {
                    0.0
                } else {
                    c * w * (eps.powf(-alpha) - radius.powf(-alpha)) / alpha
                }
            }
            NoiseKind::HalfSpaceStable { alpha } => {
                let inner = if eps < 1.0 { (eps.powf(-alpha) - 1.0) / (2.0 * alpha) } else { 0.0 };
                let outer = if eps <= 1.0 {
                    self.half_tail
                } else {
                    let f = |r: f64| r.powf(-1.0 - alpha) * cap_fraction(self.dim, 1.0 / r);
                    if self.dim == 1 {
                        0.0
                    } else {
                        integrate_upper_tail(f, eps, 1.0 + alpha, QuadOptions::rel(1e-12))
                            .map(|q| q.value)
                            .unwrap_or(0.0)
                    }
                };
                c * w * (inner + outer)
            }
            NoiseKind::CompoundPoisson { atoms } => {
                atoms.iter().filter(|a| norm(&a.position) > eps).map(|a| a.rate).sum()
            }
        }
    }

    /// Total mass for finite laws, `+∞` otherwise.
    pub fn total_rate(&self) -> f64 {
        match &self.kind {
            NoiseKind::CompoundPoisson { atoms } => atoms.iter().map(|a| a.rate).sum(),
            NoiseKind::TruncatedIsotropicStable { .. }
            | NoiseKind::IsotropicStable { .. }
            | NoiseKind::HalfSpaceStable { .. } => f64::INFINITY,
        }
    }

    /// `∫_{|z| ≤ ε} |z|² ν(dz)`.
    pub fn small_jump_moment(&self, eps: f64) -> f64 {
        let c = self.intensity;
        let w = sphere_area(self.dim);
        match &self.kind {
            NoiseKind::IsotropicStable { alpha } => c * w * eps.powf(2.0 - alpha) / (2.0 - alpha),
            NoiseKind::TruncatedIsotropicStable { alpha, radius } => {
                c * w * eps.min(*radius).powf(2.0 - alpha) / (2.0 - alpha)
            }
            NoiseKind::HalfSpaceStable { alpha } => {
                let e = eps.min(1.0);
                let mut m = 0.5 * c * w * e.powf(2.0 - alpha) / (2.0 - alpha);
                if eps > 1.0 && self.dim >= 2 {
                    let f = |r: f64| r.powf(1.0 - alpha) * cap_fraction(self.dim, 1.0 / r);
                    m += c * w * integrate(f, &[1.0, eps], QuadOptions::rel(1e-12)).map(|q| q.value).unwrap_or(0.0);
                }
                m
            }
            NoiseKind::CompoundPoisson { atoms } => {
                atoms.iter().filter(|a| norm(&a.position) <= eps).map(|a| a.rate * norm(&a.position).powi(2)).sum()
            }
        }
    }

    /// `ν({|z| ≥ s})`, used for the a-priori overlap bound.
    pub fn tail_mass(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return self.total_rate();
        }
        match &self.kind {
            NoiseKind::CompoundPoisson { atoms } => {
                atoms.iter().filter(|a| norm(&a.position) >= s).map(|a| a.rate).sum()
            }
            _ => self.large_jump_rate(s),
        }
    }

    /// Compensator drift `-∫_{ε < |z| ≤ 1} z ν(dz)` (sign-reversed when `ε > 1`),
    /// added to both marginals by the simulator.
    pub fn compensator(&self, eps: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        match &self.kind {
            NoiseKind::IsotropicStable { .. } | NoiseKind::TruncatedIsotropicStable { .. } => {}
            NoiseKind::HalfSpaceStable { alpha } => {
                if eps > 1.0 {
                    return Err(Error::Unsupported("half-space law requires epsilon <= 1".into()));
                }
                let radial =
                    if (alpha - 1.0).abs() < 1e-12 { -eps.ln() } else { (1.0 - eps.powf(1.0 - alpha)) / (1.0 - alpha) };
                out[0] = -self.intensity * self.half_first_moment * radial;
            }
            NoiseKind::CompoundPoisson { atoms } => {
                for a in atoms {
                    let r = norm(&a.position);
                    let sign = if r > eps && r <= 1.0 {
                        -1.0
                    } else if r > 1.0 && r <= eps {
                        1.0
                    } else {
                        0.0
                    };
                    for (o, p) in out.iter_mut().zip(&a.position) {
                        *o += sign * a.rate * p;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Draw one jump from `ν` restricted to `{|z| > ε}`, normalized.
    /// Compound Poisson laws must be sampled with `ε` below the smallest atom.
    pub fn sample_large_jump<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match &self.kind {
            NoiseKind::IsotropicStable { alpha } => {
                let r = eps * rng.random::<f64>().max(f64::MIN_POSITIVE).powf(-1.0 / alpha);
                uniform_direction(rng, out);
                out.iter_mut().for_each(|v| *v *= r);
            }
            NoiseKind::TruncatedIsotropicStable { alpha, radius } => {
                let a = eps.powf(-alpha);
                let b = radius.powf(-alpha);
                let u: f64 = rng.random();
                let r = (a - u * (a - b)).powf(-1.0 / alpha).min(*radius);
                uniform_direction(rng, out);
                out.iter_mut().for_each(|v| *v *= r);
            }
            NoiseKind::HalfSpaceStable { alpha } => loop {
                let r = eps * rng.random::<f64>().max(f64::MIN_POSITIVE).powf(-1.0 / alpha);
                uniform_direction(rng, out);
                out.iter_mut().for_each(|v| *v *= r);
                if out[0] > 0.0 && out[0] <= 1.0 {
                    break;
                }
            },
            NoiseKind::CompoundPoisson { atoms } => {
                let eligible = || atoms.iter().filter(|a| norm(&a.position) > eps);
                let total: f64 = eligible().map(|a| a.rate).sum();
                let mut u = rng.random::<f64>() * total;
                let mut chosen = None;
                for a in eligible() {
                    chosen = Some(a);
                    if u < a.rate {
                        break;
                    }
                    u -= a.rate;
                }
                let a = chosen.expect("no atoms above epsilon");
                out.copy_from_slice(&a.position);
            }
        }
    }
}

/// Uniform point on the unit sphere `S^{d-1}`.
pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        for v in out.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let n = norm(out);
        if n > 1e-300 {
            out.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn isotropic_density_d1_alpha1() {
        let m = LevyModel::isotropic_stable(1, 1.0, 0.7).unwrap();
        assert_relative_eq!(m.density(&[2.0]), 0.7 / 4.0, max_relative = 1e-15);
        assert_relative_eq!(m.density(&[-0.5]), 0.7 * 4.0, max_relative = 1e-15);
    }

    #[test]
    fn log_space_branch_agrees() {
        let m = LevyModel::isotropic_stable(2, 1.5, 1.0).unwrap();
        let z = [1e-9, 0.0];
        assert_relative_eq!(m.density(&z), 1e-9f64.powf(-3.5), max_relative = 1e-12);
    }

    #[test]
    fn compound_poisson_total_rate() {
        let m = LevyModel::compound_poisson_1d(&[(1.0, 1.0), (-1.0, 1.0)]).unwrap();
        assert_eq!(m.total_rate(), 2.0);
        assert_eq!(m.large_jump_rate(0.0), 2.0);
        assert_eq!(m.density(&[1.0]), 1.0);
        assert_eq!(m.density(&[0.5]), 0.0);
    }

    #[test]
    fn half_space_support() {
        let m = LevyModel::half_space_stable(1, 0.5, 1.0).unwrap();
        assert_eq!(m.density(&[-1.0]), 0.0);
        assert_eq!(m.density(&[1.5]), 0.0);
        assert!(m.density(&[0.5]) > 0.0);
    }

    #[test]
    fn constructor_errors() {
        assert!(LevyModel::isotropic_stable(1, 2.0, 1.0).is_err());
        assert!(LevyModel::isotropic_stable(1, 0.0, 1.0).is_err());
        assert!(LevyModel::compound_poisson(vec![]).is_err());
        assert!(LevyModel::truncated_isotropic_stable(1, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn half_space_rate_matches_direct_integral() {
        let m = LevyModel::half_space_stable(2, 1.2, 1.0).unwrap();
        let eps = 0.1;
        // Direct 2-D polar integral of the density over |z| > eps.
        let inner = |r: f64| {
            let frac = if r <= 1.0 { std::f64::consts::PI } else { 2.0 * ((1.0 / r).asin()) };
            r * r.powf(-3.2) * frac
        };
        let direct = integrate_upper_tail(inner, eps, 2.2, QuadOptions::rel(1e-12)).unwrap().value;
        assert_relative_eq!(m.large_jump_rate(eps), direct, max_relative = 1e-9);
    }

    #[test]
    fn half_space_compensator_sign() {
        let m = LevyModel::half_space_stable(1, 0.5, 1.0).unwrap();
        let c = m.compensator(0.01).unwrap();
        // ∫_{0.01}^1 z·z^{-1.5} dz = 2(1 - 0.1)
        assert_relative_eq!(c[0], -1.8, max_relative = 1e-12);
    }

    #[test]
    fn samples_respect_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = LevyModel::truncated_isotropic_stable(2, 1.5, 2.0, 1.0).unwrap();
        let mut z = [0.0; 2];
        for _ in 0..1000 {
            m.sample_large_jump(0.1, &mut rng, &mut z);
            let r = norm(&z);
            assert!(r > 0.1 && r <= 2.0);
        }
        let h = LevyModel::half_space_stable(3, 0.7, 1.0).unwrap();
        let mut z = [0.0; 3];
        for _ in 0..1000 {
            h.sample_large_jump(0.05, &mut rng, &mut z);
            assert!(z[0] > 0.0 && z[0] <= 1.0 && norm(&z) > 0.05);
        }
    }
}
