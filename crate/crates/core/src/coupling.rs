//! Refined basic coupling of two copies of `dX = b(X)dt + dZ`, plus the
//! synchronous baseline and the single-marginal scheme.
//!
//! Each step applies an Euler drift update, then every large jump
//! (`|z| > ε`) drawn from a Poisson count, then the small-jump substitute.
//! On a large jump the second marginal also moves by `+(U)_κ` (toward),
//! `-(U)_κ` (away) or not at all, where `U = X - Y`. Decisions use the
//! control function of the truncated measure `ν·1{|z| > ε}`, so the law of
//! `Y` is exactly that of the single-marginal scheme.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{all_finite, distance, norm};
use crate::measure::{overlap_ratio_truncated, LevyModel};
use crate::models::{DriftModel, ScenarioSpec};

/// Treatment of jumps with `|z| ≤ ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallJumpMode {
    Drop,
    /// Brownian increment with the small-jump covariance, common to both marginals.
    GaussianSubstitute,
}

/// Joint jump rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    Refined,
    /// Both marginals always receive the same jump.
    Synchronous,
}

/// Simulation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub kappa: f64,
    pub epsilon: f64,
    pub h: f64,
    pub t_max: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    pub small_jump_mode: SmallJumpMode,
    pub coupling_mode: CouplingMode,
    /// Steps between recorded grid points.
    pub record_every: usize,
    pub record_events: bool,
}

impl SimConfig {
    pub fn new(kappa: f64, epsilon: f64, h: f64, t_max: f64) -> Self {
        SimConfig {
            kappa,
            epsilon,
            h,
            t_max,
            n_paths: 1,
            master_seed: 0,
            small_jump_mode: SmallJumpMode::Drop,
            coupling_mode: CouplingMode::Refined,
            record_every: 1,
            record_events: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return invalid(format!("kappa = {} must be positive", self.kappa));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return invalid(format!("epsilon = {} must be positive", self.epsilon));
        }
        if !(self.h > 0.0 && self.h <= self.t_max && self.t_max.is_finite()) {
            return invalid(format!("need 0 < h = {} <= t_max = {}", self.h, self.t_max));
        }
        if self.record_every == 0 {
            return invalid("record_every must be at least 1");
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.h - 1e-9).ceil().max(1.0) as usize
    }

    /// Recorded times `k·record_every·h`.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_steps();
        (0..=n / self.record_every).map(|k| (k * self.record_every) as f64 * self.h).collect()
    }

    /// Step so that the expected number of large jumps per step is at most 0.1.
    pub fn suggested_step(noise: &LevyModel, epsilon: f64, cap: f64) -> f64 {
        let eps = if noise.is_atomic() { 0.0 } else { epsilon };
        let rate = noise.large_jump_rate(eps);
        if rate > 0.0 {
            (0.1 / rate).min(cap)
        } else {
            cap
        }
    }
}

/// `(x-y)_κ = (1 ∧ κ/|x-y|)(x-y)`, zero when `x = y`.
pub fn reflect_vector(x: &[f64], y: &[f64], kappa: f64) -> Vec<f64> {
    let mut out: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let r = norm(&out);
    if r > kappa {
        let s = kappa / r;
        out.iter_mut().for_each(|v| *v *= s);
    }
    out
}

/// Outcome of a coupling decision on one large jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// `Y` additionally moves by `+(U)_κ`.
    Toward,
    /// `Y` additionally moves by `-(U)_κ`.
    Away,
    Common,
}

impl Decision {
    pub fn tag(&self) -> &'static str {
        match self {
            Decision::Toward => "toward",
            Decision::Away => "away",
            Decision::Common => "common",
        }
    }
}

/// Partition `[0, 1)` into `[0, ρ₋/2)`, `[ρ₋/2, (ρ₋+ρ₊)/2)` and the rest.
pub fn coupling_jump_decision(u: f64, rho_minus: f64, rho_plus: f64) -> Result<Decision> {
    for (name, v) in [("rho_minus", rho_minus), ("rho_plus", rho_plus)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Contract(format!("{name} = {v} outside [0, 1]")));
        }
    }
    if u < 0.5 * rho_minus {
        Ok(Decision::Toward)
    } else if u < 0.5 * (rho_minus + rho_plus) {
        Ok(Decision::Away)
    } else {
        Ok(Decision::Common)
    }
}

/// One logged large jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub t: f64,
    pub distance_before: f64,
    pub decision: Decision,
    pub jump_norm: f64,
}

/// Current state of the coupled pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub coupling_time: Option<f64>,
}

impl PairState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let coupling_time = if x == y { Some(0.0) } else { None };
        PairState { t: 0.0, x, y, coupling_time }
    }

    pub fn coupled(&self) -> bool {
        self.coupling_time.is_some()
    }

    pub fn distance(&self) -> f64 {
        distance(&self.x, &self.y)
    }
}

/// Per-run constants derived from the scenario and config.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    drift: &'a DriftModel,
    noise: &'a LevyModel,
    cfg: &'a SimConfig,
    eps: f64,
    poisson: Option<Poisson<f64>>,
    compensator: Vec<f64>,
    small_std: f64,
}

impl<'a> StepContext<'a> {
    pub fn new(drift: &'a DriftModel, noise: &'a LevyModel, cfg: &'a SimConfig) -> Result<Self> {
        cfg.validate()?;
        if drift.dim != noise.dim() {
            return invalid("drift and noise dimensions disagree");
        }
        let eps = if noise.is_atomic() { 0.0 } else { cfg.epsilon };
        let rate = noise.large_jump_rate(eps);
        let mean = rate * cfg.h;
        let poisson = if mean > 0.0 {
            Some(Poisson::new(mean).map_err(|e| Error::InvalidArgument(format!("Poisson mean {mean}: {e}")))?)
        } else {
            None
        };
        let compensator = noise.compensator(eps)?;
        let small_std = match cfg.small_jump_mode {
            SmallJumpMode::Drop => 0.0,
            SmallJumpMode::GaussianSubstitute => (noise.small_jump_moment(eps) / noise.dim() as f64 * cfg.h).sqrt(),
        };
        Ok(StepContext { drift, noise, cfg, eps, poisson, compensator, small_std })
    }

    /// Truncation level actually used (zero for atom lists).
    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    fn drift_update(&self, v: &mut [f64], buf: &mut [f64]) {
        self.drift.eval(v, buf);
        let h = self.cfg.h;
        for ((x, b), c) in v.iter_mut().zip(buf.iter()).zip(&self.compensator) {
            *x += h * (b + c);
        }
    }

    fn jump_times<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = match &self.poisson {
            Some(p) => p.sample(rng) as usize,
            None => 0,
        };
        let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * self.cfg.h).collect();
        times.sort_by(|a, b| a.total_cmp(b));
        times
    }

    fn small_jump<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> bool {
        if self.small_std == 0.0 {
            return false;
        }
        for v in out.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *v = self.small_std * g;
        }
        true
    }
}

/// Advance the pair by one step of length `h`.
pub fn step<R: Rng + ?Sized>(
    state: &mut PairState,
    ctx: &StepContext<'_>,
    rng: &mut R,
    mut events: Option<&mut Vec<JumpEvent>>,
) -> Result<()> {
    let d = state.x.len();
    let (last_x, last_y) = (state.x.clone(), state.y.clone());
    let mut buf = vec![0.0; d];
    let mut z = vec![0.0; d];
    let t0 = state.t;

    ctx.drift_update(&mut state.x, &mut buf);
    if state.coupled() {
        state.y.copy_from_slice(&state.x);
    } else {
        ctx.drift_update(&mut state.y, &mut buf);
    }

    for tau in ctx.jump_times(rng) {
        ctx.noise.sample_large_jump(ctx.eps, rng, &mut z);
        let mut decision = Decision::Common;
        let mut shift: Option<Vec<f64>> = None;
        let dist_before = state.distance();
        if !state.coupled() && ctx.cfg.coupling_mode == CouplingMode::Refined {
            let u_k = reflect_vector(&state.x, &state.y, ctx.cfg.kappa);
            let neg: Vec<f64> = u_k.iter().map(|v| -v).collect();
            let rho_minus = overlap_ratio_truncated(ctx.noise, &neg, &z, ctx.eps)?;
            let rho_plus = overlap_ratio_truncated(ctx.noise, &u_k, &z, ctx.eps)?;
            let u: f64 = rng.random();
            decision = coupling_jump_decision(u, rho_minus, rho_plus)?;
            shift = Some(u_k);
        }
        for (x, zi) in state.x.iter_mut().zip(&z) {
            *x += zi;
        }
        if state.coupled() {
            state.y.copy_from_slice(&state.x);
        } else {
            let closes = dist_before <= ctx.cfg.kappa;
            match (decision, shift) {
                (Decision::Toward, Some(_)) if closes => {
                    state.y.copy_from_slice(&state.x);
                    state.coupling_time = Some(t0 + tau);
                }
                (Decision::Toward, Some(u_k)) => {
                    for ((y, zi), ui) in state.y.iter_mut().zip(&z).zip(&u_k) {
                        *y += zi + ui;
                    }
                }
                (Decision::Away, Some(u_k)) => {
                    for ((y, zi), ui) in state.y.iter_mut().zip(&z).zip(&u_k) {
                        *y += zi - ui;
                    }
                }
                _ => {
                    for (y, zi) in state.y.iter_mut().zip(&z) {
                        *y += zi;
                    }
                }
            }
            if !state.coupled() && state.x == state.y {
                state.coupling_time = Some(t0 + tau);
            }
        }
        if let Some(ev) = events.as_deref_mut() {
            ev.push(JumpEvent { t: t0 + tau, distance_before: dist_before, decision, jump_norm: norm(&z) });
        }
    }

    if ctx.small_jump(rng, &mut z) {
        for (x, zi) in state.x.iter_mut().zip(&z) {
            *x += zi;
        }
        if state.coupled() {
            state.y.copy_from_slice(&state.x);
        } else {
            for (y, zi) in state.y.iter_mut().zip(&z) {
                *y += zi;
            }
        }
    }

    state.t = t0 + ctx.cfg.h;
    if !all_finite(&state.x) || !all_finite(&state.y) {
        return Err(Error::BlowUp { t: state.t, x: last_x, y: last_y });
    }
    Ok(())
}

/// Independent RNG stream for one path.
pub fn path_rng(master_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng
}

/// A full trajectory of the pair on the recording grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPath {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Row-major `times.len() × dim`.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub coupling_time: Option<f64>,
    pub events: Vec<JumpEvent>,
}

impl CouplingPath {
    pub fn x_at(&self, k: usize) -> &[f64] {
        &self.x[k * self.dim..(k + 1) * self.dim]
    }

    pub fn y_at(&self, k: usize) -> &[f64] {
        &self.y[k * self.dim..(k + 1) * self.dim]
    }

    pub fn distance_at(&self, k: usize) -> f64 {
        distance(self.x_at(k), self.y_at(k))
    }
}

trait Recorder {
    fn record(&mut self, state: &PairState);
}

struct FullRecorder {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Recorder for FullRecorder {
    fn record(&mut self, s: &PairState) {
        self.x.extend_from_slice(&s.x);
        self.y.extend_from_slice(&s.y);
    }
}

struct DistanceRecorder {
    d: Vec<f64>,
}

impl Recorder for DistanceRecorder {
    fn record(&mut self, s: &PairState) {
        self.d.push(if s.coupled() { 0.0 } else { s.distance() });
    }
}

fn run_pair<Rec: Recorder>(
    scenario: &ScenarioSpec,
    cfg: &SimConfig,
    path_index: u64,
    rec: &mut Rec,
    events: Option<&mut Vec<JumpEvent>>,
) -> Result<Option<f64>> {
    let ctx = StepContext::new(&scenario.drift, &scenario.noise, cfg)?;
    let mut rng = path_rng(cfg.master_seed, path_index);
    let mut state = PairState::new(scenario.x0.clone(), scenario.y0.clone());
    let mut events = events;
    rec.record(&state);
    let n = cfg.n_steps();
    for k in 1..=n {
        step(&mut state, &ctx, &mut rng, events.as_deref_mut())?;
        if k % cfg.record_every == 0 {
            rec.record(&state);
        }
    }
    Ok(state.coupling_time)
}

/// Simulate one coupled path; deterministic in `(master_seed, path_index, cfg)`.
pub fn simulate_coupling(scenario: &ScenarioSpec, cfg: &SimConfig, path_index: u64) -> Result<CouplingPath> {
    let mut rec = FullRecorder { x: Vec::new(), y: Vec::new() };
    let mut events = Vec::new();
    let ev = if cfg.record_events { Some(&mut events) } else { None };
    let coupling_time = run_pair(scenario, cfg, path_index, &mut rec, ev)?;
    Ok(CouplingPath { dim: scenario.dim(), times: cfg.grid(), x: rec.x, y: rec.y, coupling_time, events })
}

/// Distance trajectory and coupling time of one path.
pub fn simulate_distances(
    scenario: &ScenarioSpec,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<(Vec<f64>, Option<f64>)> {
    let mut rec = DistanceRecorder { d: Vec::new() };
    let t = run_pair(scenario, cfg, path_index, &mut rec, None)?;
    Ok((rec.d, t))
}

/// Trajectory of a single marginal on the recording grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalPath {
    pub dim: usize,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
}

impl MarginalPath {
    pub fn at(&self, k: usize) -> &[f64] {
        &self.x[k * self.dim..(k + 1) * self.dim]
    }
}

/// Single-marginal Euler scheme with the same jump machinery.
pub fn simulate_marginal(
    x0: &[f64],
    drift: &DriftModel,
    noise: &LevyModel,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<MarginalPath> {
    let ctx = StepContext::new(drift, noise, cfg)?;
    let mut rng = path_rng(cfg.master_seed, path_index);
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut buf = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut out = x.clone();
    let mut t = 0.0;
    for k in 1..=cfg.n_steps() {
        let last = x.clone();
        ctx.drift_update(&mut x, &mut buf);
        for _ in ctx.jump_times(&mut rng) {
            noise.sample_large_jump(ctx.eps, &mut rng, &mut z);
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += zi;
            }
        }
        if ctx.small_jump(&mut rng, &mut z) {
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += zi;
            }
        }
        t += cfg.h;
        if !all_finite(&x) {
            return Err(Error::BlowUp { t, x: last, y: Vec::new() });
        }
        if k % cfg.record_every == 0 {
            out.extend_from_slice(&x);
        }
    }
    Ok(MarginalPath { dim: d, times: cfg.grid(), x: out })
}

/// Distance matrix and coupling times of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub times: Vec<f64>,
    /// Row-major `n_paths × times.len()`.
    pub distances: Vec<f64>,
    pub coupling_times: Vec<Option<f64>>,
}

impl Ensemble {
    pub fn n_paths(&self) -> usize {
        self.coupling_times.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.times.len();
        &self.distances[i * n..(i + 1) * n]
    }
}

/// Run `f` on a pool of `workers` threads (`0` = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Simulate `cfg.n_paths` paths in parallel; results are ordered by path index.
pub fn simulate_ensemble(scenario: &ScenarioSpec, cfg: &SimConfig, workers: usize) -> Result<Ensemble> {
    cfg.validate()?;
    let results: Vec<Result<(Vec<f64>, Option<f64>)>> = with_workers(workers, || {
        (0..cfg.n_paths as u64).into_par_iter().map(|i| simulate_distances(scenario, cfg, i)).collect()
    })?;
    let times = cfg.grid();
    let mut distances = Vec::with_capacity(times.len() * cfg.n_paths);
    let mut coupling_times = Vec::with_capacity(cfg.n_paths);
    for r in results {
        let (d, t) = r?;
        distances.extend_from_slice(&d);
        coupling_times.push(t);
    }
    Ok(Ensemble { times, distances, coupling_times })
}
