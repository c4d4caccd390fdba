use std::path::Path;
use std::process::{Command, Output};

use fenelab::coupled::SeriesRow;
use fenelab::series::write_series;

fn fenelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fenelab")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn small_config(dir: &Path, extra_initial: &str, time: &str) -> String {
    format!(
        r#"
[model]
k = 2.0

[grid]
n = 16
length = 12.0

[basis]
degree_max = 2
quad_order = 6

[time]
{time}

[initial]
seed = 3
amplitude = 0.01
{extra_initial}

[output]
dir = "{}"
"#,
        dir.display()
    )
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&fenelab(&[])), 1);
    assert_eq!(code(&fenelab(&["frobnicate"])), 1);
    assert_eq!(code(&fenelab(&["fit", "--d"])), 1);
    assert_eq!(code(&fenelab(&["--help"])), 0);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&fenelab(&["run", "--config", "/nonexistent/run.toml"])), 2);
    let bad = write_config(tmp.path(), "[model]\nk = 2.0\nviscosity = 1.0\n");
    assert_eq!(code(&fenelab(&["run", "--config", &bad])), 2);
    let big = small_config(tmp.path(), "", "dt = 0.05\nt_end = 0.1").replace("amplitude = 0.01", "amplitude = 0.5");
    let out = fenelab(&["run", "--config", &write_config(tmp.path(), &big)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("allow_large_amplitude"));
    assert_eq!(code(&fenelab(&["fit", "--series", "/nonexistent.csv"])), 2);
    assert_eq!(code(&fenelab(&["linear-modes", "--k=-1"])), 2);
}

#[test]
fn numerical_failures_exit_3() {
    // no mean-zero directions at degree 0
    assert_eq!(code(&fenelab(&["poincare", "--degrees", "0"])), 3);
    // advective CFL bound violated on the first step
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "allow_large_amplitude = true", "dt = 5.0\nt_end = 10.0")
        .replace("amplitude = 0.01", "amplitude = 50.0");
    let out = fenelab(&["run", "--config", &write_config(tmp.path(), &cfg)]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CFL"));
}

#[test]
fn run_writes_outputs_and_restarts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "", "dt = 0.05\nt_end = 1.0\ncheckpoint_every = 10");
    let path = write_config(tmp.path(), &cfg);
    let out = fenelab(&["run", "--config", &path]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let series = std::fs::read_to_string(tmp.path().join("series.csv")).unwrap();
    assert!(series.starts_with("t,u_l2,u_h1,psi_l2,psi_h1x,dissR,lowfreq_Cd3,lowfreq_Cd4,lowfreq_Cd6,lp4\n"));
    assert_eq!(series.lines().count(), 1 + 21);
    let fld = std::fs::read(tmp.path().join("final.fld")).unwrap();
    assert_eq!(&fld[..8], b"FENEFLD1");
    assert_eq!(fld.len(), 8 + 4 + 8 + 16 * 16 * 2 * 16);
    let bas = std::fs::read(tmp.path().join("basis.fbas")).unwrap();
    assert_eq!(&bas[..8], b"FENEBAS1");
    let ckp = tmp.path().join("step00000010.ckp");
    assert_eq!(&std::fs::read(&ckp).unwrap()[..8], b"FENECKP1");
    let ledger: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("ledger.json")).unwrap()).unwrap();
    assert!(ledger["rows"].as_array().unwrap().len() >= 20);

    // continuing from step 10 reproduces the final snapshot exactly
    let out = fenelab(&["run", "--config", &path, "--restart", ckp.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(tmp.path().join("final.fld")).unwrap(), fld);
}

#[test]
fn heat_reference_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "", "dt = 0.05\nt_end = 0.5");
    let out = fenelab(&["heat-ref", "--config", &write_config(tmp.path(), &cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let series = std::fs::read_to_string(tmp.path().join("heat_series.csv")).unwrap();
    // ‖u‖ follows the heat flow: positive and strictly decreasing
    let u: Vec<f64> = series.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(u.len(), 11);
    assert!(u.iter().all(|v| *v > 0.0));
    assert!(u.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn linear_modes_report() {
    let out = fenelab(&["linear-modes", "--degree", "4", "--trials", "3", "--xi", "0.25,1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let entries = rep["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    for e in entries {
        assert!(e["abscissa"].as_f64().unwrap() < 0.0);
        assert!(e["pairing_residual"].as_f64().unwrap() <= 1e-12);
        assert!(e["monotone"].as_bool().unwrap());
    }
}

#[test]
fn poincare_table() {
    let out = fenelab(&["poincare", "--k", "2", "--degrees", "4,8"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("7.637"));
}

#[test]
fn fit_recovers_synthetic_rates() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: Vec<SeriesRow> = (0..=1024)
        .map(|i| {
            let t = 0.1 * i as f64;
            let s = 1.0 + t;
            SeriesRow {
                t,
                u_l2: 1e-2 * s.powf(-0.5),
                u_h1: 1e-2 * s.powf(-1.0),
                psi_l2: 1e-3 * s.powf(-1.0),
                psi_h1x: 1e-3 * s.powf(-1.0),
                diss_r: 1e-6 * s.powf(-2.0),
                lowfreq: vec![1e-4 * s.powf(-1.0); 3],
                lp: vec![1e-2 * s.powf(-0.75)],
            }
        })
        .collect();
    let path = tmp.path().join("norms.csv");
    write_series(std::fs::File::create(&path).unwrap(), &[3.0, 4.0, 6.0], &[4.0], &rows).unwrap();
    let json = tmp.path().join("report.json");
    let out = fenelab(&["fit", "--series", path.to_str().unwrap(), "--d", "2", "--out", json.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    for q in rep["quantities"].as_array().unwrap() {
        assert!(q["pass"].as_bool().unwrap(), "{q}");
    }
    assert!(String::from_utf8_lossy(&out.stderr).contains("u_l2"));
}

#[test]
fn verify_suite_passes() {
    let out = fenelab(&["verify"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
