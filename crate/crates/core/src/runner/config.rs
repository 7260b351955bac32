//! Flat `section.key = value` experiment configs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::certificates::{CertKind, RegularityPhi};
use crate::coupling::{CouplingMode, SmallJumpMode};
use crate::error::{Error, Result};
use crate::measure::Atom;
use crate::models::{catalog_drift, catalog_noise, DriftParams, NoiseParams, Phi2, ScenarioSpec};

/// Parsed key/value pairs, sorted by key.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawConfig {
    pub entries: BTreeMap<String, String>,
}

fn config_err<T>(key: &str, message: impl Into<String>) -> Result<T> {
    Err(Error::Config { key: key.to_string(), message: message.into() })
}

impl RawConfig {
    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return config_err(&format!("line {}", n + 1), "expected `key = value`");
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.split('.').any(|p| p.is_empty()) {
                return config_err(&format!("line {}", n + 1), "malformed key");
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return config_err(key, "duplicate key");
            }
        }
        Ok(RawConfig { entries })
    }

    /// SHA-256 of the canonical sorted form; independent of line order and spacing.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        format!("{:x}", h.finalize())
    }
}

/// Lookup helper that remembers which keys were consumed.
struct Reader<'a> {
    raw: &'a RawConfig,
    used: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn str(&mut self, key: &str) -> Option<&'a str> {
        let v = self.raw.entries.get(key)?;
        self.used.insert(key.to_string());
        Some(v.as_str())
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).or_else(|_| config_err(key, format!("cannot parse `{v}`"))),
        }
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().or_else(|_| config_err(key, format!("cannot parse list item `{s}`"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn positive(&mut self, key: &str) -> Result<Option<f64>> {
        match self.parse::<f64>(key)? {
            Some(v) if !(v > 0.0 && v.is_finite()) => config_err(key, format!("{v} must be positive")),
            other => Ok(other),
        }
    }
}

/// Simulation and fitting settings shared by all scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    /// Defaults per scenario to `l₀ ∧ κ₀-proxy`.
    pub kappa: Option<f64>,
    pub epsilon: f64,
    /// Defaults per scenario to a step with at most 0.1 expected large jumps.
    pub step: Option<f64>,
    pub t_max: f64,
    pub n_paths: usize,
    pub record_interval: f64,
    pub small_jump_mode: SmallJumpMode,
    pub coupling_mode: CouplingMode,
    pub fit_window: Option<(f64, f64)>,
    pub bootstrap_resamples: usize,
}

/// Regularity certificate settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityRequest {
    pub phi: RegularityPhi,
    pub eps: Vec<f64>,
    pub t: f64,
}

/// Which certificates to issue.
#[derive(Debug, Clone, PartialEq)]
pub struct CertRequest {
    pub kinds: Vec<CertKind>,
    pub kappa_sweep: Vec<f64>,
    pub sigma_alpha: Option<f64>,
    pub sigma_theta: f64,
    pub regularity: RegularityRequest,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenarios: Vec<ScenarioSpec>,
    pub sim: SimSettings,
    pub certs: CertRequest,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
    pub hash: String,
}

fn cert_kind(key: &str, tag: &str) -> Result<CertKind> {
    match tag {
        "w1" => Ok(CertKind::W1),
        "tv" => Ok(CertKind::Tv),
        "strong" | "strong_ergodic" => Ok(CertKind::StrongErgodic),
        "regularity" => Ok(CertKind::Regularity),
        other => config_err(key, format!("unknown certificate kind `{other}`")),
    }
}

/// `"p₁ p₂ …: rate"` items separated by commas.
fn parse_atoms(key: &str, text: &str) -> Result<Vec<Atom>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let Some((pos, rate)) = item.split_once(':') else {
                return config_err(key, format!("atom `{item}` is not `position: rate`"));
            };
            let position = pos
                .split_whitespace()
                .map(|c| c.parse::<f64>().or_else(|_| config_err(key, format!("bad coordinate `{c}`"))))
                .collect::<Result<Vec<f64>>>()?;
            let rate = rate.trim().parse::<f64>().or_else(|_| config_err(key, format!("bad rate `{rate}`")))?;
            Ok(Atom { position, rate })
        })
        .collect()
}

fn scenario(r: &mut Reader, name: &str) -> Result<ScenarioSpec> {
    let k = |s: &str| format!("scenario.{name}.{s}");
    let x0: Vec<f64> = r.list(&k("x0"))?.ok_or_else(|| Error::Config { key: k("x0"), message: "missing".into() })?;
    let y0: Vec<f64> = r.list(&k("y0"))?.ok_or_else(|| Error::Config { key: k("y0"), message: "missing".into() })?;
    if x0.len() != y0.len() || x0.is_empty() {
        return config_err(&k("y0"), "x0 and y0 need the same nonzero length");
    }
    let dim = x0.len();

    let dkey = k("drift.kind");
    let dkind = r.str(&dkey).ok_or_else(|| Error::Config { key: dkey.clone(), message: "missing".into() })?;
    let dp = DriftParams {
        dim,
        k1: r.or(&k("drift.k1"), 0.0)?,
        k2: r.or(&k("drift.k2"), 1.0)?,
        l0: r.or(&k("drift.l0"), 1.0)?,
        theta: r.or(&k("drift.theta"), 1.0)?,
    };
    let mut drift = catalog_drift(dkind, &dp).or_else(|e| config_err(&dkey, e.to_string()))?;
    if let Some(declared) = r.positive(&k("drift.declared_k2"))? {
        let mut profile = drift.profile;
        profile.phi2 = match profile.phi2 {
            Phi2::Power { theta, .. } => Phi2::Power { k2: declared, theta },
            _ => Phi2::Linear { k2: declared },
        };
        profile.user_declared = true;
        drift = drift.with_profile(profile);
    }

    let nkey = k("noise.kind");
    let nkind = r.str(&nkey).ok_or_else(|| Error::Config { key: nkey.clone(), message: "missing".into() })?;
    let atoms = match r.str(&k("noise.atoms")) {
        Some(text) => parse_atoms(&k("noise.atoms"), text)?,
        None => Vec::new(),
    };
    let np = NoiseParams {
        dim,
        alpha: r.or(&k("noise.alpha"), 1.0)?,
        radius: r.or(&k("noise.radius"), 1.0)?,
        intensity: r.or(&k("noise.intensity"), 1.0)?,
        atoms,
    };
    let noise = catalog_noise(nkind, &np).or_else(|e| config_err(&nkey, e.to_string()))?;
    ScenarioSpec::new(name, drift, noise, x0, y0).or_else(|e| config_err(&k("x0"), e.to_string()))
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let mut r = Reader { raw, used: BTreeSet::new() };
        let names: BTreeSet<String> = raw
            .entries
            .keys()
            .filter_map(|k| k.strip_prefix("scenario.")?.split('.').next().map(str::to_string))
            .collect();
        if names.is_empty() {
            return config_err("scenario", "no scenario defined");
        }
        let scenarios = names.iter().map(|n| scenario(&mut r, n)).collect::<Result<Vec<_>>>()?;

        let small_jump_mode = match r.str("coupling.small_jumps").unwrap_or("drop") {
            "drop" => SmallJumpMode::Drop,
            "gaussian" => SmallJumpMode::GaussianSubstitute,
            other => return config_err("coupling.small_jumps", format!("unknown mode `{other}`")),
        };
        let coupling_mode = match r.str("coupling.mode").unwrap_or("refined") {
            "refined" => CouplingMode::Refined,
            "synchronous" => CouplingMode::Synchronous,
            other => return config_err("coupling.mode", format!("unknown mode `{other}`")),
        };
        let window = match (r.parse::<f64>("fit.window_lo_model_time")?, r.parse::<f64>("fit.window_hi_model_time")?) {
            (Some(lo), Some(hi)) if lo < hi => Some((lo, hi)),
            (None, None) => None,
            _ => return config_err("fit.window_hi_model_time", "window needs both ends with lo < hi"),
        };
        let sim = SimSettings {
            kappa: r.positive("coupling.kappa")?,
            epsilon: r.positive("coupling.epsilon")?.unwrap_or(1e-2),
            step: r.positive("sim.step_model_time")?,
            t_max: r.positive("sim.t_max_model_time")?.unwrap_or(5.0),
            n_paths: r.or("sim.paths", 1000usize)?,
            record_interval: r.positive("sim.record_interval_model_time")?.unwrap_or(0.05),
            small_jump_mode,
            coupling_mode,
            fit_window: window,
            bootstrap_resamples: r.or("fit.bootstrap_resamples", crate::estimators::BOOTSTRAP_RESAMPLES)?,
        };
        if sim.n_paths == 0 {
            return config_err("sim.paths", "need at least one path");
        }

        let kinds = match r.str("cert.kinds") {
            Some(list) => list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|t| cert_kind("cert.kinds", t))
                .collect::<Result<Vec<_>>>()?,
            None => vec![CertKind::W1, CertKind::Tv, CertKind::StrongErgodic],
        };
        let kappa_sweep: Vec<f64> = r.list("cert.kappa_sweep")?.unwrap_or_default();
        if let Some(bad) = kappa_sweep.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return config_err("cert.kappa_sweep", format!("{bad} must be positive"));
        }
        let phi_tag = r.str("cert.regularity.phi").unwrap_or("log_corrected");
        let phi = RegularityPhi::from_tag(phi_tag, r.or("cert.regularity.theta", 1.0)?)
            .or_else(|e| config_err("cert.regularity.phi", e.to_string()))?;
        let eps = r
            .list("cert.regularity.eps")?
            .unwrap_or_else(|| vec![phi.eps_max(), 0.5 * phi.eps_max(), 0.1 * phi.eps_max()]);
        let certs = CertRequest {
            kinds,
            kappa_sweep,
            sigma_alpha: r.parse("cert.sigma_alpha")?,
            sigma_theta: r.positive("cert.sigma_theta")?.unwrap_or(1.0),
            regularity: RegularityRequest { phi, eps, t: r.positive("cert.regularity.t_model_time")?.unwrap_or(1.0) },
        };

        let master_seed = r.or("run.seed", 0u64)?;
        let output_dir = PathBuf::from(r.str("output.dir").unwrap_or("levycert-out"));
        let emit_plots = r.or("output.emit_plots", true)?;

        if let Some(unknown) = raw.entries.keys().find(|k| !r.used.contains(*k)) {
            return config_err(unknown, "unknown key");
        }
        Ok(ExperimentConfig { scenarios, sim, certs, master_seed, output_dir, emit_plots, hash: raw.hash() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
        scenario.a.drift.kind = linear_dissipative
        scenario.a.noise.kind = truncated_isotropic_stable
        scenario.a.noise.alpha = 1.5
        scenario.a.x0 = 0.5
        scenario.a.y0 = -0.5
    ";

    #[test]
    fn hash_ignores_order_and_spacing() {
        let a = RawConfig::parse("x.y = 1\nz.w=2 # note").unwrap();
        let b = RawConfig::parse("z.w = 2\n\n  x.y=1").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), RawConfig::parse("x.y = 1\nz.w = 3").unwrap().hash());
    }

    #[test]
    fn unknown_drift_names_key() {
        let text = BASIC.replace("linear_dissipative", "wobbly");
        match ExperimentConfig::from_text(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "scenario.a.drift.kind"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{BASIC}\nsim.speed = 3");
        assert!(matches!(ExperimentConfig::from_text(&text), Err(Error::Config { key, .. }) if key == "sim.speed"));
    }

    #[test]
    fn atoms_parse() {
        let atoms = parse_atoms("k", "1: 1, -1:1, 0.5 2: 3").unwrap();
        assert_eq!(atoms[2], Atom { position: vec![0.5, 2.0], rate: 3.0 });
    }

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::from_text(BASIC).unwrap();
        assert_eq!(cfg.scenarios.len(), 1);
        assert_eq!(cfg.sim.n_paths, 1000);
        assert_eq!(cfg.certs.kinds.len(), 3);
    }
}
