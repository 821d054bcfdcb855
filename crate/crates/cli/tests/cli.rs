//! End-to-end runs of the `absorb-sim` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use absorb_sim::config::ExperimentConfig;
use absorb_sim::presets;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_absorb-sim"));
    c.env_remove("ABSORB_SIM_THREADS");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("process exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL_1D: &str = "\
domain.kind = 1d
domain.a = 0
domain.b = 2
domain.n = 49
time.t_final = 1
boundary.kind = robin
boundary.beta = 1
packet.center = 1
packet.sigma = 0.2
packet.momentum = 5
output.flux = flux.csv
";

#[test]
fn dirichlet_preset_detects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--preset", "dirichlet"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = summary(dir.path());
    assert!(s["total_detection_probability"].as_f64().unwrap().abs() < 1e-12);
    assert!((s["survival_final"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    for row in csv_rows(&dir.path().join("timeseries.csv")) {
        assert!(row[2].abs() < 1e-12 && (row[1] - 1.0).abs() < 1e-10);
    }
}

#[test]
fn identical_inputs_give_identical_bytes_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_1D);
    let mut outputs = Vec::new();
    for threads in ["1", "4", "1"] {
        let out = dir.path().join(format!("out-{}", outputs.len()));
        let o = bin()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("ABSORB_SIM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outputs.push((std::fs::read(out.join("timeseries.csv")).unwrap(), std::fs::read(out.join("flux.csv")).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn csv_uses_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_1D);
    let o = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t_mid,survival,density,cumulative");
    for field in lines.next().unwrap().split(',') {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
}

#[test]
fn echoed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_1D);
    let first = dir.path().join("first");
    let o = bin().args(["simulate", "--seed", "7", "--config"]).arg(&cfg).arg("--out").arg(&first).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let echo = summary(&first)["config"].as_str().unwrap().to_string();
    assert_eq!(ExperimentConfig::parse(&echo).unwrap().echo(), echo);
    assert_eq!(summary(&first)["seed"], 7);

    let cfg2 = dir.path().join("echo.cfg");
    std::fs::write(&cfg2, &echo).unwrap();
    let second = dir.path().join("second");
    let o = bin().args(["simulate", "--config"]).arg(&cfg2).arg("--out").arg(&second).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(summary(&second)["config"].as_str().unwrap(), echo);
    assert_eq!(
        std::fs::read(first.join("timeseries.csv")).unwrap(),
        std::fs::read(second.join("timeseries.csv")).unwrap()
    );
}

#[test]
fn decimation_and_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_1D);
    let full = dir.path().join("full");
    let thin = dir.path().join("thin");
    assert_eq!(code(&bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&full).output().unwrap()), 0);
    let o = bin()
        .args(["simulate", "--decimate", "10", "--normalize-density", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&thin)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (a, b) = (csv_rows(&full.join("timeseries.csv")), csv_rows(&thin.join("timeseries.csv")));
    let n = a.len();
    assert_eq!(b.len(), (n - 1) / 10 + 1 + usize::from((n - 1) % 10 != 0));
    assert_eq!(b.last().unwrap()[0], a.last().unwrap()[0]);
    let total = a.last().unwrap()[3];
    let dt = summary(&full)["dt"].as_f64().unwrap();
    // Normalized density integrates to one over the full-rate series.
    let integral: f64 = a.iter().map(|r| r[2] / total * dt).sum();
    assert!((integral - 1.0).abs() < 1e-12);
    for (i, row) in b.iter().enumerate() {
        let k = if i + 1 == b.len() { n - 1 } else { 10 * i };
        assert!((row[2] - a[k][2] / total).abs() <= 1e-15 * a[k][2].abs().max(1.0));
        assert_eq!(row[1], a[k][1]);
    }
    let flux = csv_rows(&thin.join("flux.csv"));
    assert_eq!(flux.len(), b.len());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL_1D}packet.width = 3\n"));
    let o = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("config:"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), &SMALL_1D.replace("boundary.beta = 1", "boundary.beta = -1"));
    let o = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("extensions:") || stderr(&o).contains("config:"), "{}", stderr(&o));

    let o = bin().args(["simulate"]).arg("--out").arg(dir.path()).env("ABSORB_SIM_THREADS", "0").output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("ABSORB_SIM_THREADS"));
}

#[test]
fn resonant_lambda_is_a_numerical_failure() {
    // Unit spacing, three unknowns: (1, 0, -1) has eigenvalue exactly 3.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "domain.kind=1d\ndomain.a=0\ndomain.b=4\ndomain.n=3\ntime.t_final=1\nboundary.kind=dirichlet\n\
packet.center=2\npacket.sigma=0.5\npacket.momentum=0\n",
    );
    let o = bin().args(["dtn", "--lambda", "3", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("dtn:"), "{}", stderr(&o));
}

#[test]
fn verify_passes_clean_and_fails_with_sign_flip() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--all", "--seed", "3"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);

    let o = run(&["verify", "--all", "--seed", "3", "--inject-sign-flip"], dir.path());
    assert_eq!(code(&o), 1);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&str> = report["suites"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["passed"] == false)
        .map(|s| s["suite"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["green-identity"]);
}

#[test]
fn dtn_on_square_is_hermitian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "domain.kind=2d\ndomain.lx=1\ndomain.ly=1\ndomain.nx=9\ndomain.ny=9\ntime.t_final=0.1\n\
boundary.kind=dirichlet\npacket.center=0.5,0.5\npacket.sigma=0.1\npacket.momentum=0,0\ndtn.lambda=auto\n",
    );
    let o = bin().args(["dtn", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = summary(dir.path());
    assert!(s["dtn"]["hermitian_residual"].as_f64().unwrap() <= 1e-9);
    assert!(s["dtn"]["min_singular_value"].as_f64().unwrap() > 0.0);
    assert!(s["dtn"]["lambda_auto"].as_bool().unwrap());
    let entries = std::fs::read_to_string(dir.path().join("dtn_matrix.csv")).unwrap().lines().count() - 1;
    assert_eq!(entries, 36 * 36);
}

#[test]
fn povm_preset_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["povm", "--preset", "povm-absorber"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let p = &summary(dir.path())["povm"];
    assert!(p["completeness_residual"].as_f64().unwrap() <= 1e-9);
    assert!(p["additivity_residual"].as_f64().unwrap() <= 1e-12);
    for e in p["elements"].as_array().unwrap() {
        assert!(e["min_eigenvalue"].as_f64().unwrap() >= -1e-12, "{e}");
        assert!(e["max_eigenvalue"].as_f64().unwrap() <= 1.0 + 1e-12, "{e}");
    }
    assert!(p["elements"][2]["max_eigenvalue"].as_f64().unwrap() < 1e-2);
}

#[test]
fn preset_horizons_match_regression_fixtures() {
    let fixtures: toml::Table = include_str!("../../core/fixtures/regression.toml").parse().unwrap();
    for (table, preset) in [
        ("packet_hits_detector", "packet-hits-detector"),
        ("full_envelope", "full-envelope"),
        ("both_ends", "both-ends"),
        ("hardy_2d", "hardy-2d"),
        ("povm_absorber", "povm-absorber"),
    ] {
        let cfg = presets::load(preset).unwrap();
        let t = &fixtures[table];
        assert_eq!(cfg.t_final, t["t_final"].as_float().unwrap(), "{preset}");
        let sc = absorb_sim::scenario::build(&cfg).unwrap();
        assert_eq!(sc.n_steps as i64, t["n_steps"].as_integer().unwrap(), "{preset}");
    }
}

#[test]
fn full_envelope_preset_drains_the_packet() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--preset", "full-envelope"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = summary(dir.path());
    assert!(s["survival_final"].as_f64().unwrap() < 1e-3);
    let r = &s["residuals"];
    for key in ["green", "balance", "exit_space"] {
        assert!(r[key].as_f64().unwrap() <= 1e-10, "{key}: {}", r[key]);
    }
}
