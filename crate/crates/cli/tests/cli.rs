use std::path::Path;
use std::process::{Command, Output};

use sdflow_core::radial::example_profile;

fn sdflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdflow")).args(args).output().expect("running sdflow")
}

fn run(sub: &str, dir: &Path, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{sub}.toml"));
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join(sub);
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    sdflow(&args)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_CONJUGATE: &str = "[conjugate]\np = [1.5, 3.0]\nmu = [1.0]\ndim = [1, 2]\ny_norms = [0.0, 0.5, 2.0]\nfenchel_young_samples = 50\n";

#[test]
fn conjugate_check_passes_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run("conjugate-check", tmp.path(), SMALL_CONJUGATE, &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("conjugate-check/conjugate_check.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);
    assert!(csv.lines().next().unwrap().starts_with("p,mu,dim,y_norm,closed_form"));
    let rep = json(&tmp.path().join("conjugate-check/report.json"));
    assert_eq!(rep["cases"], 12);
}

#[test]
fn corrupted_formula_is_caught() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run("conjugate-check", tmp.path(), SMALL_CONJUGATE, &["--corrupt-formula"]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(json(&tmp.path().join("conjugate-check/report.json"))["passed"], false);
}

#[test]
fn tolerance_override_can_fail_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run("conjugate-check", tmp.path(), SMALL_CONJUGATE, &["--tol", "1e-300"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn empty_sweep_is_not_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[conjugate]\np = []\nfenchel_young_samples = 0\n";
    let res = run("conjugate-check", tmp.path(), cfg, &[]);
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stdout).contains("no cases"));
}

#[test]
fn usage_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("radial", "[radial]\nr0 = 2.0\nr = 1.0\n"),
        ("radial", "[radial]\nr0 = 1.0\nr = 3.0\n"),
        ("evolve", "[evolve]\nunknown_field = 1\n"),
        ("evolve", "[evolve]\ntau = -1.0\n"),
        ("evolve", "[evolve]\nflavor = \"radial\"\ninitial = \"sin\"\n"),
        ("slope-check", "[slope_check]\ntaus = [1e-3, 1e-2]\n"),
        ("conjugate-check", "[conjugate]\ndim = [4]\n"),
        ("conjugate-check", "this is not toml ["),
    ];
    for (sub, cfg) in cases {
        let res = run(sub, tmp.path(), cfg, &[]);
        assert_eq!(res.status.code(), Some(2), "{sub} with {cfg:?}: {}", String::from_utf8_lossy(&res.stderr));
        assert!(!res.stderr.is_empty());
    }
    assert_eq!(sdflow(&["evolve", "--bogus"]).status.code(), Some(2));
    assert_eq!(sdflow(&["evolve", "--tol", "-1", "--out", tmp.path().join("x").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(sdflow(&["radial", "--config", "/nonexistent/config.toml"]).status.code(), Some(2));
}

#[test]
fn low_exponent_radial_flow_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[evolve]\nflavor = \"radial\"\nn = 33\np = 1.2\ninitial = \"values\"\nvalues = [0.0]\n\n[evolve.profile]\ndim = 6\n";
    let res = run("evolve", tmp.path(), cfg, &[]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn zero_time_horizon_writes_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run("evolve", tmp.path(), "[evolve]\nn = 16\nt_max = 0.0\n", &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let ts = std::fs::read_to_string(tmp.path().join("evolve/timeseries.csv")).unwrap();
    assert_eq!(ts.lines().count(), 2);
    let summary = json(&tmp.path().join("evolve/summary.json"));
    assert_eq!(summary["summary"]["steps"], 0);
    assert!(summary["last_step_certificate"].is_null());
}

#[test]
fn evolve_reports_certificate_and_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run("evolve", tmp.path(), "[evolve]\nn = 32\nt_max = 0.05\ntau = 0.01\n", &["--seed", "3"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = json(&tmp.path().join("evolve/summary.json"));
    assert_eq!(summary["summary"]["steps"], 5);
    let cert = &summary["last_step_certificate"];
    assert!(cert["inclusion_residual"].as_f64().unwrap() <= 1e-9);
    assert_eq!(cert["samples"], 40);
    let fp = std::fs::read_to_string(tmp.path().join("evolve/final_profile.csv")).unwrap();
    assert_eq!(fp.lines().count(), 33);
    assert!(fp.lines().nth(1).unwrap().contains('e'));
}

#[test]
fn radial_flow_from_profile_with_slope_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[evolve]\nflavor = \"radial\"\nn = 129\ninitial = \"profile\"\ntau = 1e-3\nt_max = 5e-3\nslope_taus = [1e-2, 5e-3]\n";
    let res = run("evolve", tmp.path(), cfg, &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = json(&tmp.path().join("evolve/summary.json"));
    assert_eq!(summary["slope_check"]["rows"].as_array().unwrap().len(), 2);
    assert!(tmp.path().join("evolve/slope_check.csv").exists());
}

#[test]
fn radial_report_for_sampled_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let profile = example_profile(2, 1.0).unwrap();
    let samples: Vec<String> = (0..=40)
        .map(|i| {
            let s = 1.0 + i as f64 / 40.0;
            format!("[{s:?}, {:?}]", profile.height(s))
        })
        .collect();
    let cfg = format!("[radial]\nprofile = \"samples\"\ndim = 2\nr0 = 1.0\nr = 2.0\nsamples = [{}]\n", samples.join(", "));
    let res = run("radial", tmp.path(), &cfg, &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let rep = json(&tmp.path().join("radial/report.json"));
    assert!((rep["canonical_restriction"]["facet_value"].as_f64().unwrap() - 3.2).abs() < 1e-4);
    assert_eq!(rep["surface_term"]["example_asserts_zero"], false);
    assert_eq!(rep["surface_term"]["discrepancy"], false);
    let table = std::fs::read_to_string(tmp.path().join("radial/restriction.csv")).unwrap();
    assert!(table.starts_with("s,region,field,density"));
}

#[test]
fn violated_assumptions_exit_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    // steep drop at r0: H'(r0) far below -9/r0, so the facet field exceeds 1
    let samples: Vec<String> = (0..=40)
        .map(|i| {
            let s = 1.0 + i as f64 / 40.0;
            let x = s - 1.0;
            let h = 0.5 * (1.0 - x).powi(3) * (1.0 + 3.0 * x);
            format!("[{s:?}, {h:?}]")
        })
        .collect();
    let cfg = format!("[radial]\nprofile = \"samples\"\ndim = 2\nr0 = 1.0\nr = 2.0\nmu = 0.01\nsamples = [{}]\n", samples.join(", "));
    let res = run("radial", tmp.path(), &cfg, &[]);
    let code = res.status.code();
    assert!(code == Some(1) || code == Some(2), "{code:?}: {}", String::from_utf8_lossy(&res.stderr));
    if code == Some(1) {
        let rep = json(&tmp.path().join("radial/report.json"));
        assert_eq!(rep["passed"], false);
        assert!(rep["error"].is_string());
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "seed = 11\n[evolve]\nn = 32\nt_max = 0.2\n";
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        std::fs::create_dir_all(&dir).unwrap();
        assert_eq!(run("evolve", &dir, cfg, &[]).status.code(), Some(0));
    }
    for file in ["timeseries.csv", "final_profile.csv", "summary.json"] {
        let a = std::fs::read(tmp.path().join("a/evolve").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b/evolve").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn seed_changes_sampled_directions() {
    let tmp = tempfile::tempdir().unwrap();
    for seed in ["1", "2"] {
        let dir = tmp.path().join(seed);
        std::fs::create_dir_all(&dir).unwrap();
        assert_eq!(run("conjugate-check", &dir, SMALL_CONJUGATE, &["--seed", seed]).status.code(), Some(0));
    }
    let a = std::fs::read(tmp.path().join("1/conjugate-check/conjugate_check.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("2/conjugate-check/conjugate_check.csv")).unwrap();
    assert_ne!(a, b);
}
