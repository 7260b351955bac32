//! The uniformization oracle against a direct simulation of the level chain.

use levycert::estimators::{birth_death_survival, ctmc_oracle, simulate_birth_death};
use levycert::linalg::lin_grid;
use levycert::models::lattice_scenario;

#[test]
fn oracle_matches_ten_million_direct_paths() {
    let times = lin_grid(0.0, 10.0, 21);
    let oracle = ctmc_oracle(&lattice_scenario(), 1.0, &times).unwrap();
    let n = 10_000_000;
    let direct = simulate_birth_death(oracle.rate, 2, &times, n, 99).unwrap();
    for (k, &t) in times.iter().enumerate() {
        let p = oracle.survival[k];
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((direct[k] - p).abs() <= 4.0 * se + 1e-12, "t = {t}: direct {} vs oracle {p} (SE {se:e})", direct[k]);
    }
}

#[test]
fn other_starting_levels() {
    let times = lin_grid(0.0, 4.0, 9);
    for k0 in [1usize, 3, 5] {
        let exact = birth_death_survival(1.5, k0, &times).unwrap();
        let direct = simulate_birth_death(1.5, k0, &times, 400_000, k0 as u64).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let p = exact.survival[k];
            let se = (p * (1.0 - p) / 400_000f64).sqrt();
            assert!((direct[k] - p).abs() <= 4.0 * se + 1e-12, "k0 = {k0}, t = {t}");
        }
    }
}
