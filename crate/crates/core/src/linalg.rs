//! Small dense-vector helpers on slices.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    if a.len() == 1 {
        return a[0].abs();
    }
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn is_zero(a: &[f64]) -> bool {
    a.iter().all(|&v| v == 0.0)
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// `n` points geometrically spaced on `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1);
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}

/// `n` points equally spaced on `[lo, hi]`, endpoints included.
pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / statrs::function::gamma::gamma(h)
}
