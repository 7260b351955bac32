use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use levycert::runner::{
    CertRow, RawConfig, VerdictRow, CERTIFICATES_CSV, CURVES_CSV, FITS_CSV, MANIFEST, VERDICTS_CSV,
};
use proptest::prelude::*;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn levycert(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levycert")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn rows<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    csv::Reader::from_path(path).unwrap().deserialize().collect::<Result<_, _>>().unwrap()
}

#[test]
fn certify_dissipative_gives_unit_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("dissipative_exact.cfg");
    let out = levycert(&["certify", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let certs: Vec<CertRow> = rows(&dir.path().join(CERTIFICATES_CSV));
    let w1 = certs.iter().find(|c| c.kind == "w1").unwrap();
    assert_eq!((w1.big_c, w1.lambda), (Some(1.0), Some(1.0)));
    assert!(w1.status.starts_with("grid-verified"));
    assert!(!w1.provenance.is_empty());
    assert!(dir.path().join(MANIFEST).exists());
}

#[test]
fn simulate_is_reproducible_and_compare_agrees() {
    let cfg = config("dissipative_exact.cfg");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = levycert(&["simulate", cfg.to_str().unwrap(), "--workers", "1"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in [CURVES_CSV, CERTIFICATES_CSV, FITS_CSV, VERDICTS_CSV] {
        let (x, y) = (std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
        assert_eq!(x, y, "{name} differs between runs");
    }
    let verdicts: Vec<VerdictRow> = rows(&a.path().join(VERDICTS_CSV));
    let before = std::fs::read(a.path().join(VERDICTS_CSV)).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_levycert")).arg("compare").arg(a.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(a.path().join(VERDICTS_CSV)).unwrap(), before);
    assert!(verdicts.iter().all(|v| format!("{:?}", v.verdict) == "BoundHolds"));
}

#[test]
fn tampered_output_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("dissipative_exact.cfg");
    assert_eq!(levycert(&["simulate", cfg.to_str().unwrap()], dir.path()).status.code(), Some(0));
    let fits = dir.path().join(FITS_CSV);
    let mut text = std::fs::read_to_string(&fits).unwrap();
    text.push_str("dissipative,w1,9,9,9,9,0,1\n");
    std::fs::write(&fits, text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_levycert")).arg("compare").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(FITS_CSV));
}

#[test]
fn misspecified_profile_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("misspecified.cfg");
    let out = levycert(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let verdicts: Vec<VerdictRow> = rows(&dir.path().join(VERDICTS_CSV));
    assert!(verdicts.iter().any(|v| format!("{:?}", v.verdict) == "BoundViolated"));
    let certs: Vec<CertRow> = rows(&dir.path().join(CERTIFICATES_CSV));
    assert!(certs.iter().all(|c| c.status.contains("conditional")));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "scenario.a.drift.kind = spiral\nscenario.a.noise.kind = isotropic_stable\nscenario.a.x0 = 1\nscenario.a.y0 = 0\n").unwrap();
    let out = levycert(&["certify", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario.a.drift.kind"));

    let missing = levycert(&["certify", "/nonexistent/levycert.cfg"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    let usage = levycert(&["frobnicate"], dir.path());
    assert_eq!(usage.status.code(), Some(2));
}

proptest! {
    #[test]
    fn config_hash_ignores_line_order(perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle()) {
        let lines = [
            "run.seed = 5",
            "scenario.a.drift.kind = piecewise",
            "scenario.a.drift.k1 = 1",
            "scenario.a.drift.k2 = 1",
            "scenario.a.drift.l0 = 1",
            "scenario.a.noise.kind = isotropic_stable",
            "scenario.a.noise.alpha = 1.2",
            "sim.paths = 10",
        ];
        let base = RawConfig::parse(&lines.join("\n")).unwrap().hash();
        let shuffled: Vec<&str> = perm.iter().map(|&i| lines[i]).collect();
        prop_assert_eq!(RawConfig::parse(&shuffled.join("\n")).unwrap().hash(), base);
    }
}
