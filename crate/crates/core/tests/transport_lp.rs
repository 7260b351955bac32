//! `empirical_w1` against a linear-programming transport oracle.

use levycert::estimators::{empirical_w1, PointCloud};
use levycert::linalg::distance;
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use proptest::prelude::*;

fn lp_w1(a: &PointCloud, b: &PointCloud) -> f64 {
    let (n, m) = (a.len(), b.len());
    let wa = |i: usize| a.weights.as_ref().map_or(1.0 / n as f64, |w| w[i]);
    let wb = |j: usize| b.weights.as_ref().map_or(1.0 / m as f64, |w| w[j]);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let pt = |c: &PointCloud, i: usize| c.points[i * c.dim..(i + 1) * c.dim].to_vec();
    let vars: Vec<Vec<_>> = (0..n)
        .map(|i| (0..m).map(|j| lp.add_var(distance(&pt(a, i), &pt(b, j)), (0.0, f64::INFINITY))).collect())
        .collect();
    for (i, row) in vars.iter().enumerate() {
        lp.add_constraint(row.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, wa(i));
    }
    for j in 0..m {
        lp.add_constraint(vars.iter().map(|row| (row[j], 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, wb(j));
    }
    lp.solve().expect("transport LP is feasible").objective()
}

fn weighted_line() -> impl Strategy<Value = PointCloud> {
    prop::collection::vec((-10i32..10, 1u32..5), 1..=6).prop_map(|v| {
        let (p, w): (Vec<f64>, Vec<f64>) = v.into_iter().map(|(x, w)| (x as f64 * 0.5, w as f64)).unzip();
        PointCloud::weighted(1, p, w).unwrap()
    })
}

proptest! {
    #[test]
    fn line_matches_lp(a in weighted_line(), b in weighted_line()) {
        let est = empirical_w1(&a, &b).unwrap();
        prop_assert!(!est.approximate);
        let lp = lp_w1(&a, &b);
        prop_assert!((est.value - lp).abs() <= 1e-9 * (1.0 + lp), "{} vs {lp}", est.value);
    }

    #[test]
    fn plane_assignment_matches_lp(
        n in 1usize..=6,
        raw in prop::collection::vec(-5.0f64..5.0, 24),
    ) {
        let a = PointCloud::new(2, raw[..2 * n].to_vec()).unwrap();
        let b = PointCloud::new(2, raw[12..12 + 2 * n].to_vec()).unwrap();
        let est = empirical_w1(&a, &b).unwrap();
        prop_assert!(!est.approximate);
        let lp = lp_w1(&a, &b);
        prop_assert!((est.value - lp).abs() <= 1e-9 * (1.0 + lp), "{} vs {lp}", est.value);
    }
}

#[test]
fn identical_clouds_are_at_distance_zero() {
    let a = PointCloud::new(2, vec![0.0, 1.0, 2.0, -1.0, 3.0, 3.0]).unwrap();
    assert_eq!(empirical_w1(&a, &a).unwrap().value, 0.0);
}
