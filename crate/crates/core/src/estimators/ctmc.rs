//! Exact survival `P(T > t)` of the coupling time for compound-Poisson noise
//! with zero drift, where `|U|/κ` is a symmetric birth–death chain absorbed at 0.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::coupling::path_rng;
use crate::error::{invalid, Error, Result};
use crate::measure::{overlap_mass, NoiseKind};
use crate::models::{DriftKind, ScenarioSpec};

/// Truncation error target for the level cap.
pub const TRUNCATION_TOL: f64 = 1e-6;
const MAX_LEVELS: usize = 1 << 20;

/// Oracle survival curve with the truncation error actually achieved.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSurvival {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    /// Upper bound on the probability mass lost through the level cap.
    pub truncation_error: f64,
    pub levels: usize,
    /// Total jump rate of the chain away from 0.
    pub rate: f64,
}

/// Survival of the chain started at level `k0` with up and down rates `rate/2` each.
pub fn birth_death_survival(rate: f64, k0: usize, times: &[f64]) -> Result<OracleSurvival> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return invalid(format!("rate = {rate} must be finite and nonnegative"));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return invalid("oracle times must be finite and nonnegative");
    }
    if k0 == 0 {
        return Ok(OracleSurvival {
            times: times.to_vec(),
            survival: vec![0.0; times.len()],
            truncation_error: 0.0,
            levels: 0,
            rate,
        });
    }
    if rate == 0.0 {
        return Ok(OracleSurvival {
            times: times.to_vec(),
            survival: vec![1.0; times.len()],
            truncation_error: 0.0,
            levels: k0,
            rate,
        });
    }
    let mut levels = (20 * k0).max(20);
    loop {
        let (survival, error) = uniformize(rate, k0, levels, times);
        if error < TRUNCATION_TOL {
            return Ok(OracleSurvival { times: times.to_vec(), survival, truncation_error: error, levels, rate });
        }
        if levels >= MAX_LEVELS {
            return Err(Error::Truncation { error, levels });
        }
        levels *= 2;
    }
}

/// Uniformization on `{0, …, levels}` with 0 and `levels` absorbing.
fn uniformize(rate: f64, k0: usize, levels: usize, times: &[f64]) -> (Vec<f64>, f64) {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let mean = rate * t_max;
    let n_terms = (mean + 12.0 * mean.sqrt() + 40.0).ceil() as usize;
    let mut v = vec![0.0; levels + 1];
    v[k0] = 1.0;
    let mut absorbed = vec![0.0; n_terms + 1];
    let mut escaped = vec![0.0; n_terms + 1];
    for n in 0..=n_terms {
        absorbed[n] = v[0];
        escaped[n] = v[levels];
        let mut next = vec![0.0; levels + 1];
        next[0] = v[0];
        next[levels] = v[levels];
        for k in 1..levels {
            let p = v[k];
            if p != 0.0 {
                next[k - 1] += 0.5 * p;
                next[k + 1] += 0.5 * p;
            }
        }
        v = next;
    }
    let mut err: f64 = 0.0;
    let survival = times
        .iter()
        .map(|&t| {
            let mu = rate * t;
            let (mut hit, mut lost, mut weight_sum) = (0.0, 0.0, 0.0);
            for n in 0..=n_terms {
                let w = if mu == 0.0 {
                    if n == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (-mu + n as f64 * mu.ln() - ln_gamma(n as f64 + 1.0)).exp()
                };
                weight_sum += w;
                hit += w * absorbed[n];
                lost += w * escaped[n];
            }
            err = err.max(lost + (1.0 - weight_sum).max(0.0));
            (1.0 - hit).clamp(0.0, 1.0)
        })
        .collect();
    (survival, err)
}

/// Oracle for a one-dimensional atomic scenario with zero drift and `|x₀ - y₀| ∈ κℕ`.
pub fn ctmc_oracle(scenario: &ScenarioSpec, kappa: f64, times: &[f64]) -> Result<OracleSurvival> {
    if scenario.dim() != 1 || !matches!(scenario.noise.kind(), NoiseKind::CompoundPoisson { .. }) {
        return invalid("the oracle needs one-dimensional compound-Poisson noise");
    }
    if !matches!(scenario.drift.kind, DriftKind::Zero) {
        return invalid("the oracle needs zero drift");
    }
    if !(kappa > 0.0) {
        return invalid("kappa must be positive");
    }
    let d0 = scenario.initial_distance();
    let k0 = (d0 / kappa).round();
    if (d0 - k0 * kappa).abs() > 1e-12 * d0.max(1.0) {
        return invalid(format!("initial distance {d0} is not on the lattice kappa*N with kappa = {kappa}"));
    }
    let mass = overlap_mass(&scenario.noise, &[kappa])?.mass;
    birth_death_survival(mass, k0 as usize, times)
}

/// Direct Monte Carlo of the same chain; returns the empirical survival on `times`.
pub fn simulate_birth_death(rate: f64, k0: usize, times: &[f64], n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    if !(rate > 0.0) {
        return invalid("rate must be positive");
    }
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let exp = Exp::new(rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    const CHUNK: usize = 100_000;
    let n_chunks = n_paths.div_ceil(CHUNK);
    let counts: Vec<Vec<u64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = path_rng(seed, c as u64);
            let mut alive = vec![0u64; times.len()];
            let this = CHUNK.min(n_paths - c * CHUNK);
            for _ in 0..this {
                let mut k = k0;
                let mut t = 0.0;
                let absorbed_at = loop {
                    if k == 0 {
                        break t;
                    }
                    t += exp.sample(&mut rng);
                    if t > t_max {
                        break f64::INFINITY;
                    }
                    if rng.random::<bool>() {
                        k += 1;
                    } else {
                        k -= 1;
                    }
                };
                for (a, &s) in alive.iter_mut().zip(times) {
                    if absorbed_at > s {
                        *a += 1;
                    }
                }
            }
            alive
        })
        .collect();
    let mut total = vec![0u64; times.len()];
    for c in counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    Ok(total.into_iter().map(|c| c as f64 / n_paths as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorbed_start() {
        let s = birth_death_survival(1.0, 0, &[0.0, 1.0, 5.0]).unwrap();
        assert_eq!(s.survival, vec![0.0; 3]);
    }

    #[test]
    fn first_jump_expansion() {
        let m = 1.3;
        let t = 1e-4;
        let s = birth_death_survival(m, 1, &[t]).unwrap();
        assert!((s.survival[0] - (1.0 - 0.5 * m * t)).abs() < 1e-7);
        assert!(s.truncation_error < TRUNCATION_TOL);
    }

    #[test]
    fn matches_monte_carlo() {
        let times = [0.5, 1.0, 2.0, 4.0];
        let exact = birth_death_survival(1.0, 2, &times).unwrap();
        let mc = simulate_birth_death(1.0, 2, &times, 200_000, 11).unwrap();
        for (e, m) in exact.survival.iter().zip(&mc) {
            let se = (e * (1.0 - e) / 200_000.0).sqrt();
            assert!((e - m).abs() < 4.0 * se + 1e-9, "{e} vs {m}");
        }
    }
}
