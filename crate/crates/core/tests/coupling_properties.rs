use levycert::coupling::{
    path_rng, simulate_coupling, simulate_ensemble, step, Decision, PairState, SimConfig, StepContext,
};
use levycert::estimators::{empirical_w1, ensemble_from_paths, tv_curve, w1_curve, PointCloud};
use levycert::measure::overlap_mass;
use levycert::models::{catalog_scenarios, lattice_scenario};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn coupled_paths_agree_bit_for_bit() {
    let s = lattice_scenario();
    let mut cfg = SimConfig::new(1.0, 0.01, 0.01, 10.0);
    cfg.record_every = 1;
    let mut seen = 0;
    for i in 0..200 {
        let p = simulate_coupling(&s, &cfg, i).unwrap();
        let Some(tc) = p.coupling_time else { continue };
        seen += 1;
        for (k, &t) in p.times.iter().enumerate().filter(|(_, &t)| t >= tc) {
            assert_eq!(p.x_at(k), p.y_at(k), "path {i} at t = {t}");
        }
    }
    assert!(seen > 100, "only {seen} paths coupled");
}

#[test]
fn zero_drift_distance_moves_only_on_decisions() {
    let s = lattice_scenario();
    let cfg = SimConfig::new(1.0, 0.01, 0.05, 1.0);
    let ctx = StepContext::new(&s.drift, &s.noise, &cfg).unwrap();
    let mut rng = path_rng(3, 0);
    let mut moves = 0;
    for _ in 0..20_000 {
        let mut st = PairState::new(vec![rng.random_range(-3..=3) as f64 + 2.0], vec![0.0]);
        if st.coupled() {
            continue;
        }
        let before = st.distance();
        let mut ev = Vec::new();
        step(&mut st, &ctx, &mut rng, Some(&mut ev)).unwrap();
        let active: Vec<_> = ev.iter().filter(|e| e.decision != Decision::Common).collect();
        match active.len() {
            0 => assert_eq!(st.distance(), before),
            1 => {
                let shift = cfg.kappa.min(before);
                let change = st.distance() - before;
                assert!(change == shift || change == -shift, "distance {before} moved by {change}");
                moves += 1;
            }
            _ => {}
        }
    }
    assert!(moves > 100);
}

#[test]
fn toward_frequency_matches_overlap_prediction() {
    let s = lattice_scenario();
    let cfg = SimConfig::new(1.0, 0.01, 0.2, 1.0);
    let ctx = StepContext::new(&s.drift, &s.noise, &cfg).unwrap();
    let predicted = 0.5 * overlap_mass(&s.noise, &[-1.0]).unwrap().mass / s.noise.total_rate();
    let mut rng = path_rng(9, 0);
    let (mut toward, mut n) = (0u64, 0u64);
    while n < 50_000 {
        let mut st = PairState::new(vec![2.0], vec![0.0]);
        let mut ev = Vec::new();
        step(&mut st, &ctx, &mut rng, Some(&mut ev)).unwrap();
        if let Some(first) = ev.first() {
            n += 1;
            toward += (first.decision == Decision::Toward) as u64;
        }
    }
    let freq = toward as f64 / n as f64;
    let se = (predicted * (1.0 - predicted) / n as f64).sqrt();
    assert!((freq - predicted).abs() <= 3.0 * se, "toward frequency {freq} vs {predicted} (SE {se})");
}

#[test]
fn coupling_bounds_transport_between_its_marginals() {
    for s in catalog_scenarios() {
        let mut cfg = SimConfig::new(1.0, 0.05, 0.01, 2.0);
        cfg.record_every = 20;
        cfg.master_seed = 4;
        let n = if s.dim() == 1 { 400 } else { 150 };
        let paths: Vec<_> = (0..n as u64).map(|i| simulate_coupling(&s, &cfg, i).unwrap()).collect();
        let curve = w1_curve(&ensemble_from_paths(&paths).unwrap()).unwrap();
        for (k, &t) in curve.times.iter().enumerate() {
            let cloud = |f: &dyn Fn(&levycert::coupling::CouplingPath) -> Vec<f64>| {
                PointCloud::new(s.dim(), paths.iter().flat_map(f).collect()).unwrap()
            };
            let xs = cloud(&|p| p.x_at(k).to_vec());
            let ys = cloud(&|p| p.y_at(k).to_vec());
            let w = empirical_w1(&xs, &ys).unwrap();
            assert!(!w.approximate);
            assert!(
                w.value <= curve.values[k] + 3.0 * curve.stderr[k] + 1e-12,
                "{} t = {t}: W1 {} above coupling mean {}",
                s.name,
                w.value,
                curve.values[k]
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tv_curve_is_nonincreasing(seed in any::<u64>(), paths in 1usize..200) {
        let s = lattice_scenario();
        let mut cfg = SimConfig::new(1.0, 0.01, 0.05, 3.0);
        cfg.n_paths = paths;
        cfg.record_every = 2;
        cfg.master_seed = seed;
        let ens = simulate_ensemble(&s, &cfg, 1).unwrap();
        let tv = tv_curve(&ens).unwrap();
        prop_assert!(tv.values.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(tv.values.iter().all(|&v| v >= 0.0) && tv.stderr.iter().all(|&v| v >= 0.0));
        let w1 = w1_curve(&ens).unwrap();
        prop_assert!(w1.values.iter().all(|&v| v >= 0.0));
    }
}
