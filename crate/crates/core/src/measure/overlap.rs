//! Overlap measure `ν ∧ (δ_x * ν)`, control function `ρ` and `J(s)`.

use super::{LevyModel, NoiseKind};
use crate::error::{Error, Result};
use crate::linalg::{is_zero, log_grid, norm, sphere_area, sub};
use crate::quadrature::{integrate, integrate_half_line, integrate_line, QuadOptions};

const OUTER_TOL: f64 = 1e-10;
const INNER_TOL: f64 = 1e-12;

/// Total mass of `ν ∧ (δ_x * ν)` with its quadrature error.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapEvaluation {
    pub x: Vec<f64>,
    pub mass: f64,
    pub quadrature_error: f64,
}

/// A value of `J(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JValue {
    pub value: f64,
    pub error: f64,
    /// Minimum over a finite direction grid rather than the exact infimum.
    pub grid_approximation: bool,
    /// The overlap mass fell below the floating-point range.
    pub underflow: bool,
}

/// Resolution of the direction grid used for anisotropic laws.
#[derive(Debug, Clone, Copy)]
pub struct JOptions {
    pub directions_per_dim: usize,
}

impl Default for JOptions {
    fn default() -> Self {
        Self { directions_per_dim: 64 }
    }
}

fn checked_density(model: &LevyModel, z: &[f64]) -> Result<f64> {
    let q = model.density(z);
    if q.is_nan() || (q.is_infinite() && !is_zero(z)) {
        return Err(Error::NumericDomain { z: z.to_vec() });
    }
    Ok(q)
}

/// Control function `ρ(x, z) = min(1, q(z - x)/q(z))`, with `ρ(0, ·) = 1`
/// and `ρ = 0` wherever `q(z) = 0`.
pub fn overlap_ratio(model: &LevyModel, x: &[f64], z: &[f64]) -> Result<f64> {
    overlap_ratio_truncated(model, x, z, 0.0)
}

/// Control function of the truncated measure `ν_ε = ν·1{|z| > ε}`.
pub fn overlap_ratio_truncated(model: &LevyModel, x: &[f64], z: &[f64], eps: f64) -> Result<f64> {
    if is_zero(x) {
        return Ok(1.0);
    }
    if is_zero(z) {
        return Err(Error::InvalidArgument("control function needs z != 0".into()));
    }
    if norm(z) <= eps {
        return Ok(0.0);
    }
    let qz = checked_density(model, z)?;
    if qz == 0.0 {
        return Ok(0.0);
    }
    let shifted = sub(z, x);
    if norm(&shifted) <= eps || is_zero(&shifted) {
        return Ok(0.0);
    }
    let qs = checked_density(model, &shifted)?;
    Ok((qs / qz).min(1.0))
}

fn straddle(points: &mut Vec<f64>, span: f64) {
    let lo = points.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = points.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    points.push(lo.min(0.0) - span);
    points.push(hi.max(0.0) + span);
}

/// `∫ min(q(z), q(z - x)) dz`, or the exact atom sum for compound Poisson laws.
pub fn overlap_mass(model: &LevyModel, x: &[f64]) -> Result<OverlapEvaluation> {
    if x.len() != model.dim() {
        return Err(Error::InvalidArgument("displacement has the wrong dimension".into()));
    }
    if is_zero(x) {
        return Err(Error::InvalidArgument("overlap mass needs x != 0".into()));
    }
    let (mass, err) = match model.kind() {
        NoiseKind::CompoundPoisson { atoms } => {
            let mut m = 0.0;
            for a in atoms {
                let shifted = sub(&a.position, x);
                m += a.rate.min(model.density(&shifted));
            }
            (m, 0.0)
        }
        _ if model.dim() == 1 => overlap_1d(model, x[0])?,
        NoiseKind::IsotropicStable { .. } | NoiseKind::TruncatedIsotropicStable { .. } => {
            overlap_radial(model, norm(x))?
        }
        NoiseKind::HalfSpaceStable { .. } if model.dim() == 2 => overlap_planar(model, x)?,
        NoiseKind::HalfSpaceStable { .. } => {
            return Err(Error::Unsupported("half-space overlap is implemented for d <= 2".into()))
        }
    };
    Ok(OverlapEvaluation { x: x.to_vec(), mass: mass.max(0.0), quadrature_error: err })
}

fn overlap_1d(model: &LevyModel, x: f64) -> Result<(f64, f64)> {
    let alpha = model.alpha().expect("density law");
    let mut bad = None;
    let mut f = |z: f64| {
        let a = model.density(&[z]);
        let b = model.density(&[z - x]);
        let v = a.min(b);
        if v.is_nan() && bad.is_none() {
            bad = Some(z);
        }
        v
    };
    let opts = QuadOptions::rel(OUTER_TOL);
    let q = match *model.kind() {
        NoiseKind::IsotropicStable { .. } => {
            let mut b = vec![0.0, 0.5 * x, x];
            straddle(&mut b, x.abs());
            integrate_line(&mut f, &b, 1.0 + alpha, opts)?
        }
        NoiseKind::TruncatedIsotropicStable { radius, .. } => {
            let lo = (-radius).max(x - radius);
            let hi = radius.min(x + radius);
            if lo >= hi {
                return Ok((0.0, 0.0));
            }
            let b: Vec<f64> = [lo, hi, 0.0, 0.5 * x, x].into_iter().filter(|p| *p >= lo && *p <= hi).collect();
            integrate(&mut f, &b, opts)?
        }
        NoiseKind::HalfSpaceStable { .. } => {
            let lo = 0f64.max(x);
            let hi = 1f64.min(1.0 + x);
            if lo >= hi {
                return Ok((0.0, 0.0));
            }
            let b: Vec<f64> = [lo, hi, 0.5 * x].into_iter().filter(|p| *p >= lo && *p <= hi).collect();
            integrate(&mut f, &b, opts)?
        }
        NoiseKind::CompoundPoisson { .. } => unreachable!(),
    };
    if let Some(z) = bad {
        return Err(Error::NumericDomain { z: vec![z] });
    }
    Ok((q.value, q.error))
}

/// Rotation invariant law in `d ≥ 2`: rotate `x` onto `s·e_1` and integrate
/// over `(z_1, ρ)` with `ρ = |(z_2, …, z_d)|`.
fn overlap_radial(model: &LevyModel, s: f64) -> Result<(f64, f64)> {
    let d = model.dim();
    let alpha = model.alpha().expect("density law");
    let shell = sphere_area(d - 1);
    let pw = (d - 2) as i32;
    let radius = match *model.kind() {
        NoiseKind::TruncatedIsotropicStable { radius, .. } => Some(radius),
        _ => None,
    };
    let mut failure: Option<Error> = None;
    let mut outer = |z1: f64| -> f64 {
        let a = z1.abs().max((z1 - s).abs());
        let g = |rho: f64| {
            let r1 = (z1 * z1 + rho * rho).sqrt();
            let r2 = ((z1 - s) * (z1 - s) + rho * rho).sqrt();
            rho.powi(pw) * model.radial_density(r1).min(model.radial_density(r2))
        };
        let res = match radius {
            Some(rr) => {
                if a >= rr {
                    return 0.0;
                }
                let top = (rr * rr - a * a).sqrt();
                integrate(g, &[0.0, top], QuadOptions::rel(INNER_TOL))
            }
            None => integrate_half_line(g, &[0.0, a], 2.0 + alpha, QuadOptions::rel(INNER_TOL)),
        };
        match res {
            Ok(q) => shell * q.value,
            Err(e) => {
                if failure.is_none() {
                    failure = Some(e);
                }
                0.0
            }
        }
    };
    let opts = QuadOptions::rel(OUTER_TOL);
    let q = match radius {
        Some(rr) => {
            let lo = s - rr;
            let hi = rr;
            if lo >= hi {
                return Ok((0.0, 0.0));
            }
            let b: Vec<f64> = [lo, hi, 0.0, 0.5 * s, s].into_iter().filter(|p| *p >= lo && *p <= hi).collect();
            integrate(&mut outer, &b, opts)?
        }
        None => {
            let mut b = vec![0.0, 0.5 * s, s];
            straddle(&mut b, s);
            integrate_line(&mut outer, &b, 1.0 + alpha, opts)?
        }
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((q.value, q.error + INNER_TOL * q.value.abs()))
}

/// Half-space law in `d = 2`: nested quadrature over `z_1` in the common
/// slab and `z_2 ∈ R` split at the bisector of `0` and `x`.
fn overlap_planar(model: &LevyModel, x: &[f64]) -> Result<(f64, f64)> {
    let alpha = model.alpha().expect("density law");
    let (x1, x2) = (x[0], x[1]);
    let lo = 0f64.max(x1);
    let hi = 1f64.min(1.0 + x1);
    if lo >= hi {
        return Ok((0.0, 0.0));
    }
    let sq = x1 * x1 + x2 * x2;
    let mut failure: Option<Error> = None;
    let mut outer = |z1: f64| -> f64 {
        let g = |z2: f64| model.density(&[z1, z2]).min(model.density(&[z1 - x1, z2 - x2]));
        let mut b = vec![0.0, x2];
        if x2 != 0.0 {
            b.push((sq - 2.0 * z1 * x1) / (2.0 * x2));
        }
        straddle(&mut b, 1.0);
        match integrate_line(g, &b, 2.0 + alpha, QuadOptions::rel(INNER_TOL)) {
            Ok(q) => q.value,
            Err(e) => {
                if failure.is_none() {
                    failure = Some(e);
                }
                0.0
            }
        }
    };
    let b: Vec<f64> = [lo, hi, 0.5 * x1, x1, 0.0].into_iter().filter(|p| *p >= lo && *p <= hi).collect();
    let q = integrate(&mut outer, &b, QuadOptions::rel(OUTER_TOL))?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((q.value, q.error + INNER_TOL * q.value.abs()))
}

fn has_unbounded_support(model: &LevyModel) -> bool {
    matches!(model.kind(), NoiseKind::IsotropicStable { .. })
}

/// `J(s) = inf_{|x| = s} ν ∧ (δ_x * ν)(R^d)` with the default direction grid.
pub fn j_function(model: &LevyModel, s: f64) -> Result<JValue> {
    j_function_with(model, s, JOptions::default())
}

/// `J(s)` with an explicit direction grid resolution.
pub fn j_function_with(model: &LevyModel, s: f64, opts: JOptions) -> Result<JValue> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("J(s) needs s > 0, got {s}")));
    }
    let d = model.dim();
    let finish = |value: f64, error: f64, grid: bool| {
        let underflow = has_unbounded_support(model) && !value.is_normal();
        JValue { value: if underflow { 0.0 } else { value }, error, grid_approximation: grid, underflow }
    };
    let mut e1 = vec![0.0; d];
    e1[0] = s;
    if model.is_isotropic() {
        let m = overlap_mass(model, &e1)?;
        return Ok(finish(m.mass, m.quadrature_error, false));
    }
    if d == 1 {
        let a = overlap_mass(model, &[s])?;
        let b = overlap_mass(model, &[-s])?;
        let (m, e) = if a.mass <= b.mass { (a.mass, a.quadrature_error) } else { (b.mass, b.quadrature_error) };
        return Ok(finish(m, e, false));
    }
    if d != 2 {
        return Err(Error::Unsupported("direction grids for J(s) are implemented for d <= 2".into()));
    }
    let n = (opts.directions_per_dim * d).max(4);
    let mut best = f64::INFINITY;
    let mut best_err = 0.0;
    for k in 0..n {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let x = [s * phi.cos(), s * phi.sin()];
        let m = overlap_mass(model, &x)?;
        if m.mass < best {
            best = m.mass;
            best_err = m.quadrature_error;
        }
        if best == 0.0 {
            break;
        }
    }
    Ok(finish(best, best_err, true))
}

/// Residual of the shift identity `min(q(z-x), q(z-2x)) = min(q(z'), q(z'-x))`
/// with `z' = z - x`, maximized over `grid`.
pub fn shift_identity_residual(model: &LevyModel, x: &[f64], grid: &[Vec<f64>]) -> Result<f64> {
    if is_zero(x) {
        return Ok(0.0);
    }
    let two_x: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let mut worst = 0.0f64;
    for z in grid {
        let lhs = model.density(&sub(z, x)).min(model.density(&sub(z, &two_x)));
        let zp = sub(z, x);
        let rhs = model.density(&zp).min(model.density(&sub(&zp, x)));
        if lhs.is_nan() || rhs.is_nan() {
            return Err(Error::NumericDomain { z: z.clone() });
        }
        if lhs == rhs {
            continue;
        }
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// `c ω_d (1 - 3^{-α}) / (2^{d+1+α} α)`: the coefficient of `s^{-α}` in the
/// half-space overlap lower bound, valid for `s ≤ 1/4`.
pub fn example_lower_bound_constant(d: usize, alpha: f64, c: f64) -> f64 {
    c * sphere_area(d) / (2f64.powf(d as f64 + 1.0 + alpha) * alpha) * (1.0 - 3f64.powf(-alpha))
}

/// Certified lower bound on `J(s)` for the half-space law, `0 < s ≤ 1/4`.
pub fn example_lower_bound(d: usize, alpha: f64, c: f64, s: f64) -> Option<f64> {
    if s > 0.0 && s <= 0.25 {
        Some(example_lower_bound_constant(d, alpha, c) * s.powf(-alpha))
    } else {
        None
    }
}

/// Stand-in for `κ_0`: the largest probe-grid `s` with `J(s) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa0Proxy {
    pub value: f64,
    /// `J` is positive on the whole probe grid, so the proxy is the grid edge.
    pub at_grid_edge: bool,
}

pub const PROBE_MIN: f64 = 1e-4;
pub const PROBE_MAX: f64 = 1e4;
pub const PROBE_POINTS: usize = 161;

pub fn kappa0_proxy(model: &LevyModel) -> Result<Kappa0Proxy> {
    let grid = log_grid(PROBE_MIN, PROBE_MAX, PROBE_POINTS);
    for (i, &s) in grid.iter().enumerate().rev() {
        let j = j_function(model, s)?;
        if j.value > 0.0 {
            return Ok(Kappa0Proxy { value: s, at_grid_edge: i == grid.len() - 1 });
        }
    }
    Err(Error::OverlapInsufficient("J(s) vanishes on the whole probe grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inverse_square() -> LevyModel {
        // q(z) = |z|^{-2}: isotropic stable with d = 1, α = 1, c = 1.
        LevyModel::isotropic_stable(1, 1.0, 1.0).unwrap()
    }

    #[test]
    fn ratio_conventions() {
        let m = inverse_square();
        assert_eq!(overlap_ratio(&m, &[0.0], &[3.0]).unwrap(), 1.0);
        assert_relative_eq!(overlap_ratio(&m, &[1.0], &[-1.0]).unwrap(), 0.25, max_relative = 1e-15);
        assert_eq!(overlap_ratio(&m, &[1.0], &[0.5]).unwrap(), 1.0);
        let h = LevyModel::half_space_stable(1, 0.5, 1.0).unwrap();
        assert_eq!(overlap_ratio(&h, &[0.5], &[-0.2]).unwrap(), 0.0);
        assert_eq!(overlap_ratio(&h, &[0.9], &[0.5]).unwrap(), 0.0);
    }

    #[test]
    fn truncated_ratio_vanishes_inside_ball() {
        let m = inverse_square();
        assert_eq!(overlap_ratio_truncated(&m, &[1.0], &[1.05], 0.1).unwrap(), 0.0);
        assert!(overlap_ratio_truncated(&m, &[1.0], &[1.5], 0.1).unwrap() > 0.0);
    }

    #[test]
    fn inverse_square_mass_is_four_over_s() {
        let m = inverse_square();
        for s in [0.5, 1.0, 2.0] {
            let e = overlap_mass(&m, &[s]).unwrap();
            assert_relative_eq!(e.mass, 4.0 / s, max_relative = 1e-9);
            assert_relative_eq!(j_function(&m, s).unwrap().value, 4.0 / s, max_relative = 1e-9);
        }
    }

    #[test]
    fn compound_poisson_overlap() {
        let m = LevyModel::compound_poisson_1d(&[(1.0, 1.0), (-1.0, 1.0)]).unwrap();
        assert_eq!(j_function(&m, 3.0).unwrap().value, 0.0);
        // The atom at +1 lands on the atom at -1 after a shift by 2.
        assert_eq!(j_function(&m, 2.0).unwrap().value, 1.0);
        assert_eq!(j_function(&m, 0.5).unwrap().value, 0.0);
    }

    #[test]
    fn shift_residual_examples() {
        let m = inverse_square();
        assert_eq!(shift_identity_residual(&m, &[1.0], &[vec![3.0]]).unwrap(), 0.0);
        assert_eq!(shift_identity_residual(&m, &[0.0], &[vec![3.0]]).unwrap(), 0.0);
    }

    #[test]
    fn truncated_overlap_vanishes_beyond_twice_radius() {
        let m = LevyModel::truncated_isotropic_stable(1, 1.5, 1.0, 1.0).unwrap();
        assert_eq!(j_function(&m, 2.5).unwrap().value, 0.0);
        assert!(j_function(&m, 1.5).unwrap().value > 0.0);
        let p = kappa0_proxy(&m).unwrap();
        assert!(p.value < 2.0 && p.value > 1.8 && !p.at_grid_edge);
    }

    #[test]
    fn radial_overlap_matches_half_space_formula() {
        // For symmetric decreasing q the overlap is twice the mass of the
        // half space beyond the bisector.
        let m = LevyModel::isotropic_stable(2, 1.5, 1.0).unwrap();
        let s: f64 = 0.7;
        let e = overlap_mass(&m, &[s, 0.0]).unwrap();
        // 2·ν{z_1 > s/2} = 2·(c/α)(s/2)^{-α}·π^{(d-1)/2}Γ((α+1)/2)/Γ((d+α)/2)
        use statrs::function::gamma::gamma;
        let (a, d) = (1.5f64, 2.0f64);
        let expect = 2.0 / a * (s / 2.0).powf(-a) * std::f64::consts::PI.powf((d - 1.0) / 2.0) * gamma((a + 1.0) / 2.0)
            / gamma((d + a) / 2.0);
        assert_relative_eq!(e.mass, expect, max_relative = 1e-8);
    }
}
