//! Experiment orchestration: config in, CSV tables and a manifest out.

mod config;

pub use config::{CertRequest, ExperimentConfig, RawConfig, RegularityRequest, SimSettings};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certificates::{
    certify_scenario, default_kappa, regularity_bound, regularity_certificate, CertKind, CertifyOptions,
    RateCertificate,
};
use crate::coupling::{simulate_ensemble, SimConfig};
use crate::error::{Error, Result};
use crate::estimators::{bootstrap_rate_fit, ctmc_oracle, tv_curve, w1_curve, CurveKind, DistanceCurve, RateFit};
use crate::measure::j_function;
use crate::models::{Phi1, ScenarioSpec};

pub const CURVES_CSV: &str = "curves.csv";
pub const CERTIFICATES_CSV: &str = "certificates.csv";
pub const FITS_CSV: &str = "fits.csv";
pub const VERDICTS_CSV: &str = "verdicts.csv";
pub const ORACLE_CSV: &str = "oracle.csv";
pub const MANIFEST: &str = "manifest.txt";
pub const PLOT_SCRIPT: &str = "plot_curves.py";

/// What a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    /// Certificates only.
    Certify,
    /// Certificates, coupled ensembles, fits and the verdict table.
    Simulate,
    /// Lattice oracle against simulated survival.
    Oracle,
}

impl Verb {
    pub fn tag(&self) -> &'static str {
        match self {
            Verb::Certify => "certify",
            Verb::Simulate => "simulate",
            Verb::Oracle => "oracle",
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub scenario: String,
    pub kind: String,
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertRow {
    pub scenario: String,
    pub kind: String,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    #[serde(rename = "C")]
    pub big_c: Option<f64>,
    pub lambda: Option<f64>,
    pub kappa: Option<f64>,
    pub a: Option<f64>,
    #[serde(rename = "J_kappa")]
    pub j_kappa: Option<f64>,
    pub status: String,
    pub provenance: String,
}

impl CertRow {
    fn issued(scenario: &str, c: &RateCertificate) -> Self {
        CertRow {
            scenario: scenario.to_string(),
            kind: c.kind.tag().to_string(),
            c1: Some(c.c1),
            c2: Some(c.c2),
            big_c: Some(c.big_c),
            lambda: Some(c.lambda),
            kappa: Some(c.kappa),
            a: c.a,
            j_kappa: c.j_kappa,
            status: c.status(),
            provenance: c.provenance.clone(),
        }
    }

    fn rejected(scenario: &str, kind: CertKind, kappa: Option<f64>, reason: &str) -> Self {
        CertRow {
            scenario: scenario.to_string(),
            kind: kind.tag().to_string(),
            c1: None,
            c2: None,
            big_c: None,
            lambda: None,
            kappa,
            a: None,
            j_kappa: None,
            status: "rejected".to_string(),
            provenance: reason.to_string(),
        }
    }

    fn checkable(&self) -> bool {
        self.status.starts_with("grid-verified") && self.lambda.is_some_and(f64::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub scenario: String,
    pub kind: String,
    pub lambda_hat: f64,
    pub c_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub window_lo: f64,
    pub window_hi: f64,
}

impl FitRow {
    fn new(scenario: &str, kind: CurveKind, f: &RateFit) -> Self {
        FitRow {
            scenario: scenario.to_string(),
            kind: kind.tag().to_string(),
            lambda_hat: f.lambda_hat,
            c_hat: f.c_hat,
            ci_lo: f.ci.0,
            ci_hi: f.ci.1,
            window_lo: f.window.0,
            window_hi: f.window.1,
        }
    }
}

/// Outcome of checking one certificate against the simulated curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    BoundHolds,
    BoundViolated,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub scenario: String,
    pub certificate: String,
    pub kappa: Option<f64>,
    pub verdict: Verdict,
    pub lambda_cert: Option<f64>,
    pub lambda_hat: Option<f64>,
    /// `ci_hi - λ_cert`; negative means the fitted rate is certainly slower.
    pub rate_margin: Option<f64>,
    /// `min_t (C e^{-λt}·scale + 3·SE - curve)`.
    pub curve_margin: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub scenario: String,
    pub t: f64,
    pub oracle_survival: f64,
    pub sim_survival: f64,
    pub binomial_se: f64,
    pub deviation_in_se: f64,
    pub truncation_error: f64,
}

/// Provenance of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
    pub verb: String,
    pub workers: usize,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    /// `(file name, sha256)` of every emitted file except the manifest.
    pub files: Vec<(String, String)>,
    pub errors: Vec<String>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("config_hash = {}\n", self.config_hash));
        s.push_str(&format!("code_version = {}\n", self.code_version));
        s.push_str(&format!("master_seed = {}\n", self.master_seed));
        s.push_str(&format!("verb = {}\n", self.verb));
        s.push_str(&format!("workers = {}\n", self.workers));
        s.push_str(&format!("started_unix = {}\n", self.started_unix));
        s.push_str(&format!("elapsed_seconds = {:.3}\n", self.elapsed_seconds));
        for (name, sha) in &self.files {
            s.push_str(&format!("file.{name} = {sha}\n"));
        }
        for (i, e) in self.errors.iter().enumerate() {
            s.push_str(&format!("error.{} = {}\n", i + 1, e.replace('\n', " ")));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = RunManifest::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::ManifestMismatch(format!("malformed manifest line `{line}`")))?;
            let num = |v: &str| v.parse().map_err(|_| Error::ManifestMismatch(format!("bad value for {k}")));
            match k {
                "config_hash" => m.config_hash = v.to_string(),
                "code_version" => m.code_version = v.to_string(),
                "master_seed" => m.master_seed = num(v)?,
                "verb" => m.verb = v.to_string(),
                "workers" => m.workers = num(v)? as usize,
                "started_unix" => m.started_unix = num(v)?,
                "elapsed_seconds" => m.elapsed_seconds = v.parse().unwrap_or(f64::NAN),
                _ if k.starts_with("file.") => m.files.push((k["file.".len()..].to_string(), v.to_string())),
                _ if k.starts_with("error.") => m.errors.push(v.to_string()),
                _ => return Err(Error::ManifestMismatch(format!("unknown manifest key `{k}`"))),
            }
        }
        Ok(m)
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub certificates: Vec<CertRow>,
    pub fits: Vec<FitRow>,
    pub verdicts: Vec<VerdictRow>,
    pub oracle: Vec<OracleRow>,
}

impl RunOutcome {
    /// 0 when nothing is violated, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        let violated = self.verdicts.iter().any(|v| v.verdict == Verdict::BoundViolated)
            || self.oracle.iter().any(|r| r.deviation_in_se > 3.0);
        i32::from(violated)
    }
}

/// Exit code for a verdict table.
pub fn verdict_exit_code(verdicts: &[VerdictRow]) -> i32 {
    i32::from(verdicts.iter().any(|v| v.verdict == Verdict::BoundViolated))
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Write to a temporary sibling and rename into place.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<String> {
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, dir.join(name))?;
    Ok(sha256_hex(bytes))
}

const CURVE_HEADER: &[&str] = &["scenario", "kind", "t", "value", "stderr", "n_paths"];
const CERT_HEADER: &[&str] =
    &["scenario", "kind", "c1", "c2", "C", "lambda", "kappa", "a", "J_kappa", "status", "provenance"];
const FIT_HEADER: &[&str] = &["scenario", "kind", "lambda_hat", "c_hat", "ci_lo", "ci_hi", "window_lo", "window_hi"];
const VERDICT_HEADER: &[&str] = &[
    "scenario",
    "certificate",
    "kappa",
    "verdict",
    "lambda_cert",
    "lambda_hat",
    "rate_margin",
    "curve_margin",
    "detail",
];
const ORACLE_HEADER: &[&str] =
    &["scenario", "t", "oracle_survival", "sim_survival", "binomial_se", "deviation_in_se", "truncation_error"];

/// Per-scenario seed derived from the master seed and the scenario name.
fn scenario_seed(master: u64, name: &str) -> u64 {
    let d = Sha256::digest(name.as_bytes());
    master ^ u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Regularity needs `Φ₁(r) ≤ K₁r`.
fn regularity_k1(phi1: Phi1) -> Option<f64> {
    match phi1 {
        Phi1::Zero => Some(0.0),
        Phi1::Linear { k1 } => Some(k1),
        Phi1::Constant { k1 } | Phi1::Power { k1, .. } if k1 == 0.0 => Some(0.0),
        _ => None,
    }
}

/// Certificate rows for one scenario; failures become `rejected` rows.
pub fn certificate_rows(s: &ScenarioSpec, req: &CertRequest) -> Vec<CertRow> {
    let mut rows = Vec::new();
    let rate_kinds: Vec<CertKind> = req.kinds.iter().copied().filter(|k| *k != CertKind::Regularity).collect();
    if !rate_kinds.is_empty() {
        let sweep: Vec<Option<f64>> =
            if req.kappa_sweep.is_empty() { vec![None] } else { req.kappa_sweep.iter().map(|k| Some(*k)).collect() };
        for kappa in sweep {
            let opts = CertifyOptions { kappa, sigma_alpha: req.sigma_alpha, sigma_theta: req.sigma_theta };
            match certify_scenario(s, &opts) {
                Ok(sc) => {
                    for kind in &rate_kinds {
                        match sc.results.iter().find(|(k, _)| k == kind) {
                            Some((_, Ok(c))) => rows.push(CertRow::issued(&s.name, &c.certificate)),
                            Some((_, Err(e))) => {
                                rows.push(CertRow::rejected(&s.name, *kind, Some(sc.kappa), &e.to_string()))
                            }
                            None => rows.push(CertRow::rejected(
                                &s.name,
                                *kind,
                                Some(sc.kappa),
                                "not applicable to the declared drift profile",
                            )),
                        }
                    }
                }
                Err(e) => {
                    for kind in &rate_kinds {
                        rows.push(CertRow::rejected(&s.name, *kind, kappa, &e.to_string()));
                    }
                }
            }
        }
    }
    if req.kinds.contains(&CertKind::Regularity) {
        let reg = &req.regularity;
        let row = match regularity_k1(s.drift.profile.phi1) {
            None => CertRow::rejected(&s.name, CertKind::Regularity, None, "regularity needs Phi1(r) <= K1*r"),
            Some(k1) => {
                let j = |r: f64| j_function(&s.noise, r).map(|v| v.value);
                match regularity_bound(reg.phi, k1, &j, &reg.eps, reg.t, 1.0) {
                    Ok((_, rc)) => CertRow::issued(&s.name, &regularity_certificate(&rc)),
                    Err(e) => CertRow::rejected(&s.name, CertKind::Regularity, None, &e.to_string()),
                }
            }
        };
        rows.push(row);
    }
    rows
}

/// The simulation settings a scenario runs with.
pub fn sim_config(s: &ScenarioSpec, settings: &SimSettings, master_seed: u64) -> Result<SimConfig> {
    let kappa = match settings.kappa {
        Some(k) => k,
        None => default_kappa(&s.noise, s.drift.profile.l0)?.0,
    };
    let h = settings.step.unwrap_or_else(|| {
        let h = SimConfig::suggested_step(&s.noise, settings.epsilon, 0.01);
        settings.record_interval / (settings.record_interval / h).ceil()
    });
    let mut cfg = SimConfig::new(kappa, settings.epsilon, h, settings.t_max);
    cfg.n_paths = settings.n_paths;
    cfg.master_seed = scenario_seed(master_seed, &s.name);
    cfg.small_jump_mode = settings.small_jump_mode;
    cfg.coupling_mode = settings.coupling_mode;
    cfg.record_every = ((settings.record_interval / h).round() as usize).max(1);
    cfg.validate()?;
    Ok(cfg)
}

fn curve_rows(name: &str, c: &DistanceCurve) -> Vec<CurveRow> {
    (0..c.times.len())
        .map(|k| CurveRow {
            scenario: name.to_string(),
            kind: c.kind.tag().to_string(),
            t: c.times[k],
            value: c.values[k],
            stderr: c.stderr[k],
            n_paths: c.n_paths,
        })
        .collect()
}

struct Simulated {
    curves: Vec<CurveRow>,
    fits: Vec<FitRow>,
    errors: Vec<String>,
}

fn simulate_scenario(s: &ScenarioSpec, cfg: &ExperimentConfig, seed: u64, workers: usize) -> Result<Simulated> {
    let sc = sim_config(s, &cfg.sim, seed)?;
    let ens = simulate_ensemble(s, &sc, workers)?;
    let mut out = Simulated { curves: Vec::new(), fits: Vec::new(), errors: Vec::new() };
    for kind in [CurveKind::W1, CurveKind::Tv] {
        let curve = match kind {
            CurveKind::W1 => w1_curve(&ens)?,
            CurveKind::Tv => tv_curve(&ens)?,
        };
        out.curves.extend(curve_rows(&s.name, &curve));
        match bootstrap_rate_fit(&ens, kind, cfg.sim.fit_window, cfg.sim.bootstrap_resamples, sc.master_seed) {
            Ok(f) => out.fits.push(FitRow::new(&s.name, kind, &f)),
            Err(e) => out.errors.push(format!("{} {} fit: {e}", s.name, kind.tag())),
        }
    }
    Ok(out)
}

fn oracle_scenario(s: &ScenarioSpec, cfg: &ExperimentConfig, seed: u64, workers: usize) -> Result<Vec<OracleRow>> {
    let sc = sim_config(s, &cfg.sim, seed)?;
    let grid = sc.grid();
    let oracle = ctmc_oracle(s, sc.kappa, &grid)?;
    let ens = simulate_ensemble(s, &sc, workers)?;
    let tv = tv_curve(&ens)?;
    let n = ens.n_paths() as f64;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let p = oracle.survival[k];
            let sim = 0.5 * tv.values[k];
            let se = (p * (1.0 - p) / n).sqrt();
            let dev = (sim - p).abs();
            OracleRow {
                scenario: s.name.clone(),
                t,
                oracle_survival: p,
                sim_survival: sim,
                binomial_se: se,
                deviation_in_se: if dev <= 1e-12 {
                    0.0
                } else if se > 0.0 {
                    dev / se
                } else {
                    f64::INFINITY
                },
                truncation_error: oracle.truncation_error,
            }
        })
        .collect())
}

/// Execute `verb` for every scenario in the config and write the outputs.
pub fn run(cfg: &ExperimentConfig, verb: Verb, opts: &RunOptions) -> Result<RunOutcome> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let seed = opts.seed.unwrap_or(cfg.master_seed);
    let out_dir = opts.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&out_dir)?;

    let mut certificates = Vec::new();
    let mut curves = Vec::new();
    let mut fits = Vec::new();
    let mut oracle = Vec::new();
    let mut errors = Vec::new();
    for s in &cfg.scenarios {
        if verb != Verb::Oracle {
            log::info!("certifying {}", s.name);
            let rows = certificate_rows(s, &cfg.certs);
            errors.extend(
                rows.iter()
                    .filter(|r| r.status == "rejected")
                    .map(|r| format!("{} {}: {}", r.scenario, r.kind, r.provenance)),
            );
            certificates.extend(rows);
        }
        match verb {
            Verb::Simulate => {
                log::info!("simulating {}", s.name);
                match simulate_scenario(s, cfg, seed, opts.workers) {
                    Ok(sim) => {
                        curves.extend(sim.curves);
                        fits.extend(sim.fits);
                        errors.extend(sim.errors);
                    }
                    Err(e) => errors.push(format!("{} simulation: {e}", s.name)),
                }
            }
            Verb::Oracle => match oracle_scenario(s, cfg, seed, opts.workers) {
                Ok(rows) => oracle.extend(rows),
                Err(e) => errors.push(format!("{} oracle: {e}", s.name)),
            },
            Verb::Certify => {}
        }
    }
    for e in &errors {
        log::warn!("{e}");
    }

    let mut files = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let sha = write_atomic(&out_dir, name, &bytes)?;
        files.push((name.to_string(), sha));
        Ok(())
    };
    let mut verdicts = Vec::new();
    match verb {
        Verb::Certify => emit(CERTIFICATES_CSV, csv_bytes(&certificates, CERT_HEADER)?)?,
        Verb::Simulate => {
            emit(CERTIFICATES_CSV, csv_bytes(&certificates, CERT_HEADER)?)?;
            emit(CURVES_CSV, csv_bytes(&curves, CURVE_HEADER)?)?;
            emit(FITS_CSV, csv_bytes(&fits, FIT_HEADER)?)?;
            verdicts = compare(&certificates, &fits, &curves);
            emit(VERDICTS_CSV, csv_bytes(&verdicts, VERDICT_HEADER)?)?;
            if cfg.emit_plots {
                emit(PLOT_SCRIPT, PLOT_SOURCE.as_bytes().to_vec())?;
            }
        }
        Verb::Oracle => emit(ORACLE_CSV, csv_bytes(&oracle, ORACLE_HEADER)?)?,
    }
    let manifest = RunManifest {
        config_hash: cfg.hash.clone(),
        code_version: format!("levycert {}", env!("CARGO_PKG_VERSION")),
        master_seed: seed,
        verb: verb.tag().to_string(),
        workers: opts.workers,
        started_unix,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        files,
        errors,
    };
    write_atomic(&out_dir, MANIFEST, manifest.render().as_bytes())?;
    Ok(RunOutcome { out_dir, manifest, certificates, fits, verdicts, oracle })
}

/// Load and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    ExperimentConfig::from_text(&text)
}

/// Check every verified certificate against the simulated curve of its kind.
///
/// Bound shapes: `w1` is `C e^{-λt}|x-y|`, `tv` is `C e^{-λt}(1+|x-y|)`,
/// `strong_ergodic` is `C e^{-λt}`. `|x-y|` is read off the `w1` curve at `t = 0`.
pub fn compare(certs: &[CertRow], fits: &[FitRow], curves: &[CurveRow]) -> Vec<VerdictRow> {
    let mut by_curve: BTreeMap<(&str, &str), Vec<&CurveRow>> = BTreeMap::new();
    for c in curves {
        by_curve.entry((c.scenario.as_str(), c.kind.as_str())).or_default().push(c);
    }
    certs
        .iter()
        .map(|cert| {
            let mut row = VerdictRow {
                scenario: cert.scenario.clone(),
                certificate: cert.kind.clone(),
                kappa: cert.kappa,
                verdict: Verdict::Inconclusive,
                lambda_cert: cert.lambda,
                lambda_hat: None,
                rate_margin: None,
                curve_margin: None,
                detail: String::new(),
            };
            let curve_kind = match cert.kind.as_str() {
                "w1" => "w1",
                "tv" | "strong_ergodic" => "tv",
                _ => {
                    row.detail = "no empirical counterpart".into();
                    return row;
                }
            };
            if !cert.checkable() {
                row.detail = format!("certificate status {}", cert.status);
                return row;
            }
            let Some(curve) = by_curve.get(&(cert.scenario.as_str(), curve_kind)) else {
                row.detail = "no simulated curve".into();
                return row;
            };
            let r0 = by_curve
                .get(&(cert.scenario.as_str(), "w1"))
                .and_then(|w| w.iter().find(|c| c.t == 0.0))
                .map(|c| c.value);
            let Some(r0) = r0 else {
                row.detail = "initial distance unavailable".into();
                return row;
            };
            let (big_c, lambda) = (cert.big_c.unwrap_or(f64::NAN), cert.lambda.unwrap_or(f64::NAN));
            let scale = match cert.kind.as_str() {
                "w1" => r0,
                "tv" => 1.0 + r0,
                _ => 1.0,
            };
            let mut margin = f64::INFINITY;
            let mut worst_t = 0.0;
            for c in curve {
                let bound = big_c * (-lambda * c.t).exp() * scale;
                let m = bound + 3.0 * c.stderr - c.value + 1e-12 * bound.max(1.0);
                if m < margin {
                    margin = m;
                    worst_t = c.t;
                }
            }
            row.curve_margin = Some(margin);
            let fit = fits.iter().find(|f| f.scenario == cert.scenario && f.kind == curve_kind);
            if let Some(f) = fit {
                row.lambda_hat = Some(f.lambda_hat);
                row.rate_margin = Some(f.ci_hi - lambda);
            }
            let rate_violated = row.rate_margin.is_some_and(|m| m < 0.0);
            row.verdict = if margin < 0.0 || rate_violated {
                Verdict::BoundViolated
            } else if fit.is_some() {
                Verdict::BoundHolds
            } else {
                Verdict::Inconclusive
            };
            row.detail = match (margin < 0.0, rate_violated, fit.is_some()) {
                (true, _, _) => format!("curve exceeds bound at t = {worst_t}"),
                (false, true, _) => "fitted rate interval lies below the certified rate".into(),
                (false, false, false) => "curve under bound; no rate fit".into(),
                _ => format!("tightest at t = {worst_t}"),
            };
            row
        })
        .collect()
}

/// Re-run the comparison for an output directory and write `verdicts.csv`.
pub fn compare_dir(dir: &Path) -> Result<Vec<VerdictRow>> {
    let manifest = RunManifest::parse(&fs::read_to_string(dir.join(MANIFEST))?)?;
    for name in [CERTIFICATES_CSV, FITS_CSV, CURVES_CSV] {
        let listed = manifest
            .files
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::ManifestMismatch(format!("{name} is not listed in the manifest")))?;
        let actual = sha256_hex(&fs::read(dir.join(name))?);
        if actual != listed.1 {
            return Err(Error::ManifestMismatch(format!("{name} does not match the manifest checksum")));
        }
    }
    let certs: Vec<CertRow> = read_csv(&dir.join(CERTIFICATES_CSV))?;
    let fits: Vec<FitRow> = read_csv(&dir.join(FITS_CSV))?;
    let curves: Vec<CurveRow> = read_csv(&dir.join(CURVES_CSV))?;
    let verdicts = compare(&certs, &fits, &curves);
    write_atomic(dir, VERDICTS_CSV, &csv_bytes(&verdicts, VERDICT_HEADER)?)?;
    Ok(verdicts)
}

const PLOT_SOURCE: &str = r#"#!/usr/bin/env python3
"""Plot simulated distance curves against certified bounds. Run from the output directory."""
import csv
from collections import defaultdict
import math

import matplotlib.pyplot as plt

curves = defaultdict(list)
with open("curves.csv") as f:
    for r in csv.DictReader(f):
        curves[(r["scenario"], r["kind"])].append((float(r["t"]), float(r["value"]), float(r["stderr"])))

certs = []
with open("certificates.csv") as f:
    for r in csv.DictReader(f):
        if r["status"].startswith("grid-verified") and r["lambda"] not in ("", "NaN"):
            certs.append(r)

for (scenario, kind), pts in sorted(curves.items()):
    t = [p[0] for p in pts]
    v = [p[1] for p in pts]
    s = [p[2] for p in pts]
    r0 = curves[(scenario, "w1")][0][1] if (scenario, "w1") in curves else 1.0
    fig, ax = plt.subplots()
    ax.semilogy(t, v, label=f"simulated {kind}")
    ax.fill_between(t, [max(a - 3 * b, 1e-300) for a, b in zip(v, s)], [a + 3 * b for a, b in zip(v, s)], alpha=0.3)
    for c in certs:
        if c["scenario"] != scenario:
            continue
        scale = {"w1": r0, "tv": 1.0 + r0, "strong_ergodic": 1.0}.get(c["kind"])
        if scale is None or {"w1": "w1"}.get(c["kind"], "tv") != kind:
            continue
        C, lam = float(c["C"]), float(c["lambda"])
        ax.semilogy(t, [C * math.exp(-lam * x) * scale for x in t], "--", label=f"{c['kind']} bound")
    ax.set_xlabel("t")
    ax.set_title(f"{scenario}: {kind}")
    ax.legend()
    fig.savefig(f"{scenario}_{kind}.png", dpi=120)
    plt.close(fig)
"#;

#[cfg(test)]
mod tests {
    use super::*;

    fn cert(kind: &str, c: f64, lambda: f64) -> CertRow {
        CertRow {
            scenario: "s".into(),
            kind: kind.into(),
            c1: Some(1.0),
            c2: Some(1.0),
            big_c: Some(c),
            lambda: Some(lambda),
            kappa: Some(1.0),
            a: None,
            j_kappa: None,
            status: "grid-verified".into(),
            provenance: String::new(),
        }
    }

    fn exact_curve(lambda: f64) -> Vec<CurveRow> {
        (0..=20)
            .map(|k| {
                let t = k as f64 * 0.25;
                CurveRow {
                    scenario: "s".into(),
                    kind: "w1".into(),
                    t,
                    value: (-lambda * t).exp(),
                    stderr: 0.0,
                    n_paths: 1,
                }
            })
            .collect()
    }

    fn fit(lambda: f64) -> FitRow {
        FitRow {
            scenario: "s".into(),
            kind: "w1".into(),
            lambda_hat: lambda,
            c_hat: 1.0,
            ci_lo: lambda,
            ci_hi: lambda,
            window_lo: 0.0,
            window_hi: 5.0,
        }
    }

    #[test]
    fn exact_curve_holds_with_zero_slack() {
        let v = compare(&[cert("w1", 1.0, 1.0)], &[fit(1.0)], &exact_curve(1.0));
        assert_eq!(v[0].verdict, Verdict::BoundHolds);
        assert!(v[0].curve_margin.unwrap().abs() < 1e-11);
        assert_eq!(v[0].rate_margin, Some(0.0));
    }

    #[test]
    fn faster_decay_holds_and_inflated_rate_fails() {
        let v = compare(&[cert("w1", 1.0, 0.5)], &[fit(1.0)], &exact_curve(1.0));
        assert_eq!(v[0].verdict, Verdict::BoundHolds);
        let v = compare(&[cert("w1", 1.0, 5.0)], &[fit(1.0)], &exact_curve(1.0));
        assert_eq!(v[0].verdict, Verdict::BoundViolated);
    }

    #[test]
    fn manifest_round_trip() {
        let m = RunManifest {
            config_hash: "abc".into(),
            code_version: "levycert 0".into(),
            master_seed: 9,
            verb: "simulate".into(),
            workers: 2,
            started_unix: 5,
            elapsed_seconds: 1.5,
            files: vec![("curves.csv".into(), "ff".into())],
            errors: vec!["boom".into()],
        };
        assert_eq!(RunManifest::parse(&m.render()).unwrap(), m);
    }
}
