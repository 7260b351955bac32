//! Hölder-type regularity of the semigroup from the coupling operator
//! applied to a concave modulus `φ`.

use crate::error::{invalid, Error, Result};
use crate::linalg::log_grid;

/// The four canonical moduli, each parametrised by `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularityPhi {
    /// `r(1 - log^{-θ}(1/r))`.
    LogCorrected { theta: f64 },
    /// `r·log^θ(1/r)`.
    LogAmplified { theta: f64 },
    /// `r^θ`.
    Power { theta: f64 },
    /// `log^{-θ}(1/r)`.
    InverseLog { theta: f64 },
}

impl RegularityPhi {
    pub fn from_tag(tag: &str, theta: f64) -> Result<Self> {
        match tag {
            "log_corrected" => Ok(RegularityPhi::LogCorrected { theta }),
            "log_amplified" => Ok(RegularityPhi::LogAmplified { theta }),
            "power" => Ok(RegularityPhi::Power { theta }),
            "inverse_log" => Ok(RegularityPhi::InverseLog { theta }),
            other => invalid(format!("unknown regularity modulus '{other}'")),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            RegularityPhi::LogCorrected { .. } => "log_corrected",
            RegularityPhi::LogAmplified { .. } => "log_amplified",
            RegularityPhi::Power { .. } => "power",
            RegularityPhi::InverseLog { .. } => "inverse_log",
        }
    }

    /// Largest `ε` for which `φ` is nonnegative on `(0, 2ε]`.
    pub fn eps_max(&self) -> f64 {
        match self {
            RegularityPhi::LogCorrected { .. } => 0.5 / std::f64::consts::E,
            _ => 0.5,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        let l = (1.0 / r).ln();
        match *self {
            RegularityPhi::LogCorrected { theta } => r * (1.0 - l.powf(-theta)),
            RegularityPhi::LogAmplified { theta } => r * l.powf(theta),
            RegularityPhi::Power { theta } => r.powf(theta),
            RegularityPhi::InverseLog { theta } => l.powf(-theta),
        }
    }

    pub fn d1(&self, r: f64) -> f64 {
        let l = (1.0 / r).ln();
        match *self {
            RegularityPhi::LogCorrected { theta } => 1.0 - l.powf(-theta) - theta * l.powf(-theta - 1.0),
            RegularityPhi::LogAmplified { theta } => l.powf(theta) - theta * l.powf(theta - 1.0),
            RegularityPhi::Power { theta } => theta * r.powf(theta - 1.0),
            RegularityPhi::InverseLog { theta } => theta * l.powf(-theta - 1.0) / r,
        }
    }

    pub fn d2(&self, r: f64) -> f64 {
        let l = (1.0 / r).ln();
        match *self {
            RegularityPhi::LogCorrected { theta } => {
                -(theta * l.powf(-theta - 1.0) + theta * (theta + 1.0) * l.powf(-theta - 2.0)) / r
            }
            RegularityPhi::LogAmplified { theta } => {
                (-theta * l.powf(theta - 1.0) + theta * (theta - 1.0) * l.powf(theta - 2.0)) / r
            }
            RegularityPhi::Power { theta } => theta * (theta - 1.0) * r.powf(theta - 2.0),
            RegularityPhi::InverseLog { theta } => {
                theta * ((theta + 1.0) * l.powf(-theta - 2.0) - l.powf(-theta - 1.0)) / (r * r)
            }
        }
    }
}

/// `A_ε(φ)` and `B_ε(φ)` at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityConstants {
    pub phi: RegularityPhi,
    pub eps: f64,
    pub k1: f64,
    pub a_eps: f64,
    pub b_eps: f64,
}

impl RegularityConstants {
    /// `2‖f‖∞ (1/φ(ε) + 1/(t·A_ε))`.
    pub fn gradient_bound(&self, t: f64, f_sup: f64) -> f64 {
        2.0 * f_sup * (1.0 / self.phi.value(self.eps) + 1.0 / (t * self.a_eps))
    }
}

const GRID_POINTS: usize = 256;

/// Grid infimum `A_ε` and supremum-based `B_ε` over `(0, ε]`.
pub fn regularity_constants(
    phi: RegularityPhi,
    k1: f64,
    j: &dyn Fn(f64) -> Result<f64>,
    eps: f64,
) -> Result<RegularityConstants> {
    if !(eps > 0.0 && eps <= phi.eps_max()) {
        return invalid(format!("eps = {eps} outside (0, {}]", phi.eps_max()));
    }
    let mut a_eps = f64::INFINITY;
    let mut sup_b = f64::NEG_INFINITY;
    for r in log_grid(eps * 1e-8, eps, GRID_POINTS) {
        let jr = j(r)?;
        let a = 0.5 * jr * (2.0 * phi.value(r) - phi.value(2.0 * r)) - k1 * phi.d1(r) * r;
        a_eps = a_eps.min(a);
        sup_b = sup_b.max(jr * r * r * phi.d2(2.0 * r));
    }
    if !(a_eps > 0.0) {
        return Err(Error::NoRegularity { eps, a_eps });
    }
    Ok(RegularityConstants { phi, eps, k1, a_eps, b_eps: -sup_b })
}

/// Infimum of the bound over candidate `ε`; candidates with `A_ε ≤ 0` are skipped.
pub fn regularity_bound(
    phi: RegularityPhi,
    k1: f64,
    j: &dyn Fn(f64) -> Result<f64>,
    eps_candidates: &[f64],
    t: f64,
    f_sup: f64,
) -> Result<(f64, RegularityConstants)> {
    let mut best: Option<(f64, RegularityConstants)> = None;
    let mut last_err = None;
    for &eps in eps_candidates {
        match regularity_constants(phi, k1, j, eps) {
            Ok(rc) => {
                let b = rc.gradient_bound(t, f_sup);
                if best.as_ref().map_or(true, |(v, _)| b < *v) {
                    best = Some((b, rc));
                }
            }
            Err(e @ Error::NoRegularity { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::InvalidArgument("no eps candidates".into())))
}
