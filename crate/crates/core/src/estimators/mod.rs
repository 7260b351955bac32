//! Empirical distance curves from coupled ensembles, exponential rate fits,
//! and exact reference values for small lattice instances.

mod ctmc;
mod stats;
mod transport;

pub use ctmc::{birth_death_survival, ctmc_oracle, simulate_birth_death, OracleSurvival, TRUNCATION_TOL};
pub use stats::{ks_two_sample, mean_se, wilson_interval, KsResult};
pub use transport::{empirical_w1, hungarian, PointCloud, W1Estimate, EXACT_ASSIGNMENT_LIMIT};

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::coupling::{path_rng, CouplingPath, Ensemble};
use crate::error::{invalid, Error, Result};

/// Number of bootstrap resamples for rate confidence intervals.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Which distance a curve estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// `E|X_t - Y_t|`, an upper bound for `W₁`.
    W1,
    /// `2·P(T > t)`, an upper bound for the total-variation distance.
    Tv,
}

impl CurveKind {
    pub fn tag(&self) -> &'static str {
        match self {
            CurveKind::W1 => "w1",
            CurveKind::Tv => "tv",
        }
    }
}

/// Pointwise estimates on the recording grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCurve {
    pub kind: CurveKind,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_paths: usize,
    /// Fraction of paths not coupled by the horizon.
    pub censored_fraction: f64,
    /// Wilson 95% intervals (total-variation curves only).
    pub intervals: Option<Vec<(f64, f64)>>,
}

/// Assemble an ensemble from full paths sharing one grid.
pub fn ensemble_from_paths(paths: &[CouplingPath]) -> Result<Ensemble> {
    let first = paths.first().ok_or_else(|| Error::InsufficientData("empty ensemble".into()))?;
    let times = first.times.clone();
    let mut distances = Vec::with_capacity(times.len() * paths.len());
    for p in paths {
        if p.times != times {
            return invalid("paths do not share a time grid");
        }
        distances.extend((0..times.len()).map(|k| p.distance_at(k)));
    }
    Ok(Ensemble { times, distances, coupling_times: paths.iter().map(|p| p.coupling_time).collect() })
}

fn censored(ens: &Ensemble) -> f64 {
    ens.coupling_times.iter().filter(|t| t.is_none()).count() as f64 / ens.n_paths() as f64
}

fn column_means(ens: &Ensemble, rows: &[usize]) -> Vec<f64> {
    let n = ens.times.len();
    let mut acc = vec![0.0; n];
    for &i in rows {
        for (a, d) in acc.iter_mut().zip(ens.row(i)) {
            *a += d;
        }
    }
    acc.iter().map(|a| a / rows.len() as f64).collect()
}

/// Mean coupled distance with its standard error.
pub fn w1_curve(ens: &Ensemble) -> Result<DistanceCurve> {
    let n = ens.n_paths();
    if n == 0 {
        return Err(Error::InsufficientData("empty ensemble".into()));
    }
    let mut values = Vec::with_capacity(ens.times.len());
    let mut stderr = Vec::with_capacity(ens.times.len());
    for k in 0..ens.times.len() {
        let col: Vec<f64> = (0..n).map(|i| ens.row(i)[k]).collect();
        let (m, se) = mean_se(&col);
        values.push(m);
        stderr.push(se);
    }
    Ok(DistanceCurve {
        kind: CurveKind::W1,
        times: ens.times.clone(),
        values,
        stderr,
        n_paths: n,
        censored_fraction: censored(ens),
        intervals: None,
    })
}

fn survivors(ens: &Ensemble, rows: &[usize], t: f64) -> usize {
    rows.iter().filter(|&&i| ens.coupling_times[i].map_or(true, |c| c > t)).count()
}

/// `2·P(T > t)` with binomial standard errors and Wilson intervals.
pub fn tv_curve(ens: &Ensemble) -> Result<DistanceCurve> {
    let n = ens.n_paths();
    if n == 0 {
        return Err(Error::InsufficientData("empty ensemble".into()));
    }
    let rows: Vec<usize> = (0..n).collect();
    let mut values = Vec::new();
    let mut stderr = Vec::new();
    let mut intervals = Vec::new();
    for &t in &ens.times {
        let k = survivors(ens, &rows, t);
        let p = k as f64 / n as f64;
        values.push(2.0 * p);
        stderr.push(2.0 * (p * (1.0 - p) / n as f64).sqrt());
        let (lo, hi) = wilson_interval(k, n, 0.05);
        intervals.push((2.0 * lo, 2.0 * hi));
    }
    Ok(DistanceCurve {
        kind: CurveKind::Tv,
        times: ens.times.clone(),
        values,
        stderr,
        n_paths: n,
        censored_fraction: censored(ens),
        intervals: Some(intervals),
    })
}

/// Log-linear fit `value ≈ ĉ e^{-λ̂t}` on a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub lambda_hat: f64,
    pub c_hat: f64,
    pub window: (f64, f64),
    pub residual_norm: f64,
    pub ci: (f64, f64),
    pub n_points: usize,
    /// The window was cut short at a nonpositive value.
    pub window_shrunk: bool,
}

/// `[first t below half the initial value, last t above 10·max SE]`.
pub fn default_window(curve: &DistanceCurve) -> Result<(f64, f64)> {
    let v0 = *curve.values.first().ok_or_else(|| Error::InsufficientData("empty curve".into()))?;
    if !(v0 > 0.0) {
        return Err(Error::InsufficientData("curve starts at zero".into()));
    }
    let floor = 10.0 * curve.stderr.iter().copied().fold(0.0, f64::max);
    let t1 =
        curve.times.iter().zip(&curve.values).find(|(_, &v)| v < 0.5 * v0).map(|(&t, _)| t).unwrap_or(curve.times[0]);
    let t2 = curve
        .times
        .iter()
        .zip(&curve.values)
        .rev()
        .find(|(_, &v)| v > floor)
        .map(|(&t, _)| t)
        .ok_or_else(|| Error::InsufficientData("curve never rises above its noise floor".into()))?;
    if t1 >= t2 {
        return Err(Error::InsufficientData(format!("empty default window [{t1}, {t2}]")));
    }
    Ok((t1, t2))
}

/// Grid indices inside the window, cut at the first nonpositive value.
fn window_indices(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<(Vec<usize>, bool)> {
    let mut idx = Vec::new();
    let mut shrunk = false;
    for (k, (&t, &v)) in times.iter().zip(values).enumerate() {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v > 0.0) {
            log::warn!("window cut at t = {t}: nonpositive curve value");
            shrunk = true;
            break;
        }
        idx.push(k);
    }
    if idx.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable points in window {window:?}", idx.len())));
    }
    Ok((idx, shrunk))
}

struct Ols {
    slope: f64,
    intercept: f64,
    rss: f64,
    sxx: f64,
}

fn ols(x: &[f64], y: &[f64]) -> Ols {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ols { slope, intercept, rss, sxx }
}

/// Least squares on `log value`; the interval is the 95% Student-t interval of the slope.
pub fn fit_exponential_rate(curve: &DistanceCurve, window: Option<(f64, f64)>) -> Result<RateFit> {
    let window = match window {
        Some(w) => w,
        None => default_window(curve)?,
    };
    let (idx, shrunk) = window_indices(&curve.times, &curve.values, window)?;
    let x: Vec<f64> = idx.iter().map(|&k| curve.times[k]).collect();
    let y: Vec<f64> = idx.iter().map(|&k| curve.values[k].ln()).collect();
    let fit = ols(&x, &y);
    let dof = (idx.len() - 2) as f64;
    let half = if dof > 0.0 && fit.rss > 0.0 {
        let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::InvalidArgument(e.to_string()))?.inverse_cdf(0.975);
        t * (fit.rss / dof / fit.sxx).sqrt()
    } else {
        0.0
    };
    let lambda_hat = -fit.slope;
    Ok(RateFit {
        lambda_hat,
        c_hat: fit.intercept.exp(),
        window: (x[0], *x.last().expect("nonempty")),
        residual_norm: fit.rss.sqrt(),
        ci: (lambda_hat - half, lambda_hat + half),
        n_points: idx.len(),
        window_shrunk: shrunk,
    })
}

/// Fit on the full ensemble with a percentile interval from resampling paths.
pub fn bootstrap_rate_fit(
    ens: &Ensemble,
    kind: CurveKind,
    window: Option<(f64, f64)>,
    resamples: usize,
    seed: u64,
) -> Result<RateFit> {
    let curve = match kind {
        CurveKind::W1 => w1_curve(ens)?,
        CurveKind::Tv => tv_curve(ens)?,
    };
    let mut fit = fit_exponential_rate(&curve, window)?;
    let (idx, _) = window_indices(&curve.times, &curve.values, fit.window)?;
    let n = ens.n_paths();
    let mut rng = path_rng(seed, u64::MAX);
    let mut rates = Vec::with_capacity(resamples);
    let mut rows = vec![0usize; n];
    for _ in 0..resamples {
        rows.iter_mut().for_each(|r| *r = rng.random_range(0..n));
        let values: Vec<f64> = match kind {
            CurveKind::W1 => {
                let means = column_means(ens, &rows);
                idx.iter().map(|&k| means[k]).collect()
            }
            CurveKind::Tv => idx.iter().map(|&k| 2.0 * survivors(ens, &rows, ens.times[k]) as f64 / n as f64).collect(),
        };
        let (x, y): (Vec<f64>, Vec<f64>) =
            idx.iter().zip(&values).filter(|(_, v)| **v > 0.0).map(|(&k, v)| (ens.times[k], v.ln())).unzip();
        if x.len() >= 3 {
            rates.push(-ols(&x, &y).slope);
        }
    }
    if rates.len() < resamples / 2 {
        return Err(Error::InsufficientData(format!("only {} usable bootstrap resamples", rates.len())));
    }
    rates.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| rates[((p * (rates.len() - 1) as f64).round() as usize).min(rates.len() - 1)];
    fit.ci = (q(0.025).min(fit.lambda_hat), q(0.975).max(fit.lambda_hat));
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(c: f64, lambda: f64) -> DistanceCurve {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let values = times.iter().map(|t| c * (-lambda * t).exp()).collect();
        DistanceCurve {
            kind: CurveKind::W1,
            stderr: vec![0.0; times.len()],
            times,
            values,
            n_paths: 1,
            censored_fraction: 0.0,
            intervals: None,
        }
    }

    #[test]
    fn exact_exponential() {
        let fit = fit_exponential_rate(&synthetic(5.0, 0.7), None).unwrap();
        assert!((fit.lambda_hat - 0.7).abs() < 1e-12);
        assert!((fit.c_hat - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_tail_is_excluded() {
        let mut c = synthetic(1.0, 0.3);
        *c.values.last_mut().unwrap() = 0.0;
        let fit = fit_exponential_rate(&c, Some((0.0, 10.0))).unwrap();
        assert!(fit.window_shrunk);
        assert!((fit.lambda_hat - 0.3).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let c = synthetic(1.0, 0.3);
        assert!(matches!(fit_exponential_rate(&c, Some((0.0, 0.15))), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn tv_curve_shape() {
        let ens = Ensemble {
            times: vec![0.0, 1.0, 2.0],
            distances: vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
            coupling_times: vec![Some(0.5), Some(1.5)],
        };
        let c = tv_curve(&ens).unwrap();
        assert_eq!(c.values, vec![2.0, 1.0, 0.0]);
        let w = w1_curve(&ens).unwrap();
        assert_eq!(w.values, vec![1.0, 0.5, 0.0]);
    }
}
