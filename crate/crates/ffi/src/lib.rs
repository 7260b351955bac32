//! C ABI over `levycert`.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns an
//! [`LcStatus`]; on failure [`lc_last_error`] describes the cause for the
//! calling thread. Strings returned as `char *` are released with
//! [`lc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use levycert::certificates::{certify_scenario, w1_formula, CertKind, CertifyOptions, RateCertificate};
use levycert::coupling::{simulate_ensemble, CouplingMode, SimConfig};
use levycert::estimators::{birth_death_survival, tv_curve, w1_curve, DistanceCurve};
use levycert::models::{catalog_scenarios, ScenarioSpec};
use levycert::runner::ExperimentConfig;
use levycert::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numeric = 4,
    /// The requested certificate cannot be issued for this scenario.
    Rejected = 5,
    Io = 6,
    Panic = 7,
}

/// Certificate families reachable through the C API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcCertKind {
    W1 = 0,
    Tv = 1,
    StrongErgodic = 2,
}

/// Which distance curve to estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcCurveKind {
    /// Mean coupled distance.
    W1 = 0,
    /// Twice the probability of not yet being coupled.
    Tv = 1,
}

/// Numeric content of a certificate; absent values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcCertificateValues {
    pub c1: f64,
    pub c2: f64,
    pub big_c: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub a: f64,
    pub j_kappa: f64,
    pub verified: bool,
    pub conditional: bool,
}

/// Closed-form Wasserstein constants.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcW1Constants {
    pub c1: f64,
    pub c2: f64,
    pub big_c: f64,
    pub lambda: f64,
}

/// Simulation settings; nonpositive `kappa` or `step` select the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcSimSettings {
    pub kappa: f64,
    pub epsilon: f64,
    pub step: f64,
    pub t_max: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub record_every: usize,
    pub synchronous: bool,
    /// 0 uses every core.
    pub workers: usize,
}

/// Opaque scenario handle.
pub struct LcScenario(ScenarioSpec);
/// Opaque certificate handle.
pub struct LcCertificate(RateCertificate);
/// Opaque distance-curve handle.
pub struct LcCurve(DistanceCurve);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LcStatus {
    match e {
        Error::InvalidArgument(_) | Error::Contract(_) | Error::Unsupported(_) => LcStatus::InvalidArgument,
        Error::Config { .. } => LcStatus::Config,
        Error::OverlapInsufficient(_)
        | Error::ConditionViolated { .. }
        | Error::DivergentTail(_)
        | Error::NoRegularity { .. } => LcStatus::Rejected,
        Error::Io(_) | Error::ManifestMismatch(_) => LcStatus::Io,
        _ => LcStatus::Numeric,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (LcStatus, String)>) -> LcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("panic: {msg}"));
            LcStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (LcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LcStatus, String) {
    (LcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (LcStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

fn into_c_string(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn lc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn lc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of shipped catalog scenarios.
#[no_mangle]
pub extern "C" fn lc_catalog_len() -> usize {
    catalog_scenarios().len()
}

/// Create a handle for catalog scenario `index`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_catalog(index: usize, out: *mut *mut LcScenario) -> LcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = catalog_scenarios()
            .into_iter()
            .nth(index)
            .ok_or_else(|| (LcStatus::InvalidArgument, format!("catalog index {index} out of range")))?;
        *out = Box::into_raw(Box::new(LcScenario(s)));
        Ok(())
    })
}

/// Parse a flat config and take its `index`-th scenario (sorted by name).
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_from_config(
    text: *const c_char,
    index: usize,
    out: *mut *mut LcScenario,
) -> LcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if text.is_null() {
            return Err(null("text"));
        }
        let text = CStr::from_ptr(text).to_str().map_err(|e| (LcStatus::InvalidArgument, e.to_string()))?;
        let cfg = ExperimentConfig::from_text(text).map_err(lib_err)?;
        let s = cfg
            .scenarios
            .into_iter()
            .nth(index)
            .ok_or_else(|| (LcStatus::InvalidArgument, format!("config has no scenario {index}")))?;
        *out = Box::into_raw(Box::new(LcScenario(s)));
        Ok(())
    })
}

/// Scenario name; release with [`lc_string_free`]. NULL on a null handle.
///
/// # Safety
/// `s` must be a live scenario handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_name(s: *const LcScenario) -> *mut c_char {
    s.as_ref().map_or(ptr::null_mut(), |s| into_c_string(&s.0.name))
}

/// # Safety
/// `s` must be a scenario handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_free(s: *mut LcScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Issue a certificate; `kappa <= 0` selects the default coupling threshold.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_certify(
    scenario: *const LcScenario,
    kind: LcCertKind,
    kappa: f64,
    out: *mut *mut LcCertificate,
) -> LcStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let want = match kind {
            LcCertKind::W1 => CertKind::W1,
            LcCertKind::Tv => CertKind::Tv,
            LcCertKind::StrongErgodic => CertKind::StrongErgodic,
        };
        let opts = CertifyOptions { kappa: (kappa > 0.0).then_some(kappa), ..CertifyOptions::default() };
        let sc = certify_scenario(&s.0, &opts).map_err(lib_err)?;
        let (_, res) = sc
            .results
            .into_iter()
            .find(|(k, _)| *k == want)
            .ok_or_else(|| (LcStatus::Rejected, format!("{} certificate not applicable", want.tag())))?;
        let c = res.map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LcCertificate(c.certificate)));
        Ok(())
    })
}

/// # Safety
/// `cert` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_certificate_values(cert: *const LcCertificate, out: *mut LcCertificateValues) -> LcStatus {
    guard(|| {
        let c = &deref(cert, "certificate")?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = LcCertificateValues {
            c1: c.c1,
            c2: c.c2,
            big_c: c.big_c,
            lambda: c.lambda,
            kappa: c.kappa,
            a: c.a.unwrap_or(f64::NAN),
            j_kappa: c.j_kappa.unwrap_or(f64::NAN),
            verified: c.verified,
            conditional: c.conditional,
        };
        Ok(())
    })
}

/// Provenance text; release with [`lc_string_free`].
///
/// # Safety
/// `cert` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn lc_certificate_provenance(cert: *const LcCertificate) -> *mut c_char {
    cert.as_ref().map_or(ptr::null_mut(), |c| into_c_string(&c.0.provenance))
}

/// # Safety
/// `cert` must be a certificate handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn lc_certificate_free(cert: *mut LcCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Closed-form Wasserstein constants from `K₂`, `g₁(2l₀)` and `g₂(2l₀)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_w1_formula(k2: f64, g1: f64, g2: f64, out: *mut LcW1Constants) -> LcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = w1_formula(k2, g1, g2).map_err(lib_err)?;
        *out = LcW1Constants { c1: c.c1, c2: c.c2, big_c: c.big_c, lambda: c.lambda };
        Ok(())
    })
}

/// Simulate a coupled ensemble and reduce it to a distance curve.
///
/// # Safety
/// `scenario` and `settings` must be valid and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_simulate_curve(
    scenario: *const LcScenario,
    settings: *const LcSimSettings,
    kind: LcCurveKind,
    out: *mut *mut LcCurve,
) -> LcStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.0;
        let st = *deref(settings, "settings")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let kappa = if st.kappa > 0.0 {
            st.kappa
        } else {
            levycert::certificates::default_kappa(&s.noise, s.drift.profile.l0).map_err(lib_err)?.0
        };
        let h = if st.step > 0.0 { st.step } else { SimConfig::suggested_step(&s.noise, st.epsilon, 0.01) };
        let mut cfg = SimConfig::new(kappa, st.epsilon, h, st.t_max);
        cfg.n_paths = st.n_paths;
        cfg.master_seed = st.seed;
        cfg.record_every = st.record_every.max(1);
        if st.synchronous {
            cfg.coupling_mode = CouplingMode::Synchronous;
        }
        let ens = simulate_ensemble(s, &cfg, st.workers).map_err(lib_err)?;
        let curve = match kind {
            LcCurveKind::W1 => w1_curve(&ens),
            LcCurveKind::Tv => tv_curve(&ens),
        }
        .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LcCurve(curve)));
        Ok(())
    })
}

/// Number of grid points; 0 for a null handle.
///
/// # Safety
/// `curve` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn lc_curve_len(curve: *const LcCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.times.len())
}

/// Read grid point `i`; any output pointer may be NULL.
///
/// # Safety
/// `curve` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn lc_curve_point(
    curve: *const LcCurve,
    i: usize,
    t: *mut f64,
    value: *mut f64,
    stderr: *mut f64,
) -> LcStatus {
    guard(|| {
        let c = &deref(curve, "curve")?.0;
        if i >= c.times.len() {
            return Err((LcStatus::InvalidArgument, format!("index {i} beyond {} points", c.times.len())));
        }
        if let Some(t) = t.as_mut() {
            *t = c.times[i];
        }
        if let Some(v) = value.as_mut() {
            *v = c.values[i];
        }
        if let Some(s) = stderr.as_mut() {
            *s = c.stderr[i];
        }
        Ok(())
    })
}

/// # Safety
/// `curve` must be a curve handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn lc_curve_free(curve: *mut LcCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Survival of the symmetric birth–death chain with total rate `rate`
/// started at level `k0`, evaluated at `n` times into `out`.
///
/// # Safety
/// `times` and `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn lc_birth_death_survival(
    rate: f64,
    k0: usize,
    times: *const f64,
    n: usize,
    out: *mut f64,
) -> LcStatus {
    guard(|| {
        if n == 0 {
            return Ok(());
        }
        if times.is_null() || out.is_null() {
            return Err(null("times or out"));
        }
        let ts = std::slice::from_raw_parts(times, n);
        let s = birth_death_survival(rate, k0, ts).map_err(lib_err)?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&s.survival);
        Ok(())
    })
}
