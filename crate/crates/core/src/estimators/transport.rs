//! Empirical `L¹`-Wasserstein distance between weighted point clouds.

use crate::error::{invalid, Error, Result};
use crate::linalg::distance;

/// Above this many equal-weight points per side (d ≥ 2) the entropic solver is used.
pub const EXACT_ASSIGNMENT_LIMIT: usize = 512;
const SINKHORN_ITERATIONS: usize = 500;
const SINKHORN_REL_EPS: f64 = 1e-3;

/// A weighted point cloud in `ℝ^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub points: Vec<f64>,
    /// Normalized to sum 1; `None` means equal weights.
    pub weights: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return invalid("point cloud must be nonempty with a row length dividing its size");
        }
        Ok(PointCloud { dim, points, weights: None })
    }

    pub fn weighted(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut pc = Self::new(dim, points)?;
        if weights.len() != pc.len() || weights.iter().any(|w| !(*w >= 0.0)) {
            return invalid("weights must be nonnegative, one per point");
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return invalid("weights sum to zero");
        }
        pc.weights = Some(weights.into_iter().map(|w| w / total).collect());
        Ok(pc)
    }

    /// One-dimensional cloud from scalars.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.len() as f64,
        }
    }

    fn equal_weights(&self) -> bool {
        self.weights.is_none()
    }
}

/// A `W₁` value, flagged when it comes from the entropic solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W1Estimate {
    pub value: f64,
    pub approximate: bool,
}

/// `W₁` between two clouds: exact in one dimension and for equal-weight
/// clouds of equal size up to [`EXACT_ASSIGNMENT_LIMIT`], entropic otherwise.
pub fn empirical_w1(a: &PointCloud, b: &PointCloud) -> Result<W1Estimate> {
    if a.is_empty() || b.is_empty() {
        return invalid("empty sample set");
    }
    if a.dim != b.dim {
        return invalid("point clouds live in different dimensions");
    }
    if a.dim == 1 {
        return Ok(W1Estimate { value: w1_line(a, b), approximate: false });
    }
    if a.equal_weights() && b.equal_weights() && a.len() == b.len() && a.len() <= EXACT_ASSIGNMENT_LIMIT {
        let n = a.len();
        let cost: Vec<f64> =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| distance(a.point(i), b.point(j))).collect();
        let (total, _) = hungarian(&cost, n);
        return Ok(W1Estimate { value: total / n as f64, approximate: false });
    }
    Ok(W1Estimate { value: sinkhorn_debiased(a, b)?, approximate: true })
}

/// `∫|F_a - F_b|` over the merged support.
fn w1_line(a: &PointCloud, b: &PointCloud) -> f64 {
    let mut events: Vec<(f64, f64)> = (0..a.len())
        .map(|i| (a.points[i], a.weight(i)))
        .chain((0..b.len()).map(|j| (b.points[j], -b.weight(j))))
        .collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for w in events.windows(2) {
        diff += w[0].1;
        total += diff.abs() * (w[1].0 - w[0].0);
    }
    total
}

/// Minimum-cost perfect matching on a square cost matrix; returns the cost
/// and `assignment[row] = column`.
pub fn hungarian(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
    assert_eq!(cost.len(), n * n, "square cost matrix");
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| cost[i * n + assignment[i]]).sum();
    (total, assignment)
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Dual value of log-domain Sinkhorn with ε annealed down to `eps`.
fn sinkhorn_value(a: &PointCloud, b: &PointCloud, eps: f64, eps_start: f64) -> f64 {
    let (n, m) = (a.len(), b.len());
    let cost: Vec<f64> =
        (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| distance(a.point(i), b.point(j))).collect();
    let la: Vec<f64> = (0..n).map(|i| a.weight(i).ln()).collect();
    let lb: Vec<f64> = (0..m).map(|j| b.weight(j).ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut e = eps_start.max(eps);
    let mut remaining = SINKHORN_ITERATIONS;
    loop {
        for i in 0..n {
            f[i] = -e * log_sum_exp((0..m).map(|j| lb[j] + (g[j] - cost[i * m + j]) / e));
        }
        for j in 0..m {
            g[j] = -e * log_sum_exp((0..n).map(|i| la[i] + (f[i] - cost[i * m + j]) / e));
        }
        if e > eps {
            e = (e * 0.9).max(eps);
            continue;
        }
        remaining -= 1;
        if remaining == 0 {
            break;
        }
    }
    (0..n).map(|i| a.weight(i) * f[i]).sum::<f64>() + (0..m).map(|j| b.weight(j) * g[j]).sum::<f64>()
}

fn diameter(a: &PointCloud, b: &PointCloud) -> f64 {
    let mut lo = vec![f64::INFINITY; a.dim];
    let mut hi = vec![f64::NEG_INFINITY; a.dim];
    for pc in [a, b] {
        for i in 0..pc.len() {
            for (k, x) in pc.point(i).iter().enumerate() {
                lo[k] = lo[k].min(*x);
                hi[k] = hi[k].max(*x);
            }
        }
    }
    lo.iter().zip(&hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt()
}

/// Debiased entropic estimate `S(a,b) = OT_ε(a,b) - ½OT_ε(a,a) - ½OT_ε(b,b)`.
fn sinkhorn_debiased(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    let diam = diameter(a, b);
    if diam == 0.0 {
        return Ok(0.0);
    }
    let eps = SINKHORN_REL_EPS * diam;
    let v =
        sinkhorn_value(a, b, eps, diam) - 0.5 * sinkhorn_value(a, a, eps, diam) - 0.5 * sinkhorn_value(b, b, eps, diam);
    if !v.is_finite() {
        return Err(Error::QuadratureNonConvergence { estimate: v, error: f64::NAN });
    }
    Ok(v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_examples() {
        let a = PointCloud::from_scalars(&[0.0, 3.0]).unwrap();
        let b = PointCloud::from_scalars(&[1.0, 2.0]).unwrap();
        assert_eq!(empirical_w1(&a, &b).unwrap().value, 1.0);
        assert_eq!(empirical_w1(&a, &a).unwrap().value, 0.0);
        let d1 = PointCloud::from_scalars(&[-1.5]).unwrap();
        let d2 = PointCloud::from_scalars(&[2.0]).unwrap();
        assert_eq!(empirical_w1(&d1, &d2).unwrap().value, 3.5);
    }

    #[test]
    fn planar_assignment() {
        let a = PointCloud::new(2, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let b = PointCloud::new(2, vec![1.0, 1.0, 0.0, 1.0]).unwrap();
        let w = empirical_w1(&a, &b).unwrap();
        assert!(!w.approximate);
        assert!((w.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hungarian_small() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let (total, asg) = hungarian(&cost, 3);
        assert_eq!(total, 5.0);
        assert_eq!(asg, vec![1, 0, 2]);
    }

    #[test]
    fn entropic_close_to_exact() {
        let a = PointCloud::weighted(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], vec![0.5, 0.25, 0.25]).unwrap();
        let b = PointCloud::weighted(2, vec![2.0, 0.0, 2.0, 1.0], vec![0.5, 0.5]).unwrap();
        let w = empirical_w1(&a, &b).unwrap();
        assert!(w.approximate);
        // a(1,0) → b(2,0), a(0,1) → b(2,1), a(0,0) split evenly.
        let exact = 0.25 * 1.0 + 0.25 * 2.0 + 0.25 * 2.0 + 0.25 * 5f64.sqrt();
        assert!((w.value - exact).abs() < 0.02, "{} vs {exact}", w.value);
    }
}
