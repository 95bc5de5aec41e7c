use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn polykin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_polykin"));
    c.env_remove("POLYKIN_DATA_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    polykin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn maxwellian_config(dir: &Path, out: &Path, omega: f64) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "species": { "alpha": 0.0 },
        "kernel": { "zeta": 1.0, "K": 1.0, "eta": 0.5, "eta_f": 0.5, "omega": omega },
        "initial": { "particles": 2000, "seed": 4,
                     "distribution": { "type": "maxwellian", "density": 1.0, "temperature": 1.0 } },
        "solver": { "dt": 0.01, "t_end": 0.5, "seed": 9 },
        "output": { "dir": out }
    });
    let path = dir.join("run.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn minimal_maxwellian_run_conserves() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("not").join("yet").join("there");
    let cfg = maxwellian_config(tmp.path(), &out, 1.0);
    let o = run(&["simulate", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for key in ["mass_drift", "momentum_drift", "energy_drift"] {
        let d = summary["run"][key].as_f64().unwrap();
        assert!(d < 1e-10, "{key} = {d}");
    }
    assert!(summary["run"]["equilibrium"]["vx"]["p_value"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "t,mass,px,py,pz,energy,m1_k3,m1_k4,m1_k6,entropy,n_collisions_exchange,n_collisions_frozen"
    );
    assert_eq!(csv.lines().count(), 1 + 6);
}

#[test]
fn omega_out_of_range_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = maxwellian_config(tmp.path(), &tmp.path().join("out"), 1.5);
    let o = run(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kernel.omega"), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn malformed_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"species": {"alpha": 0.0}, "initial": {"particles": 10,
            "distribution": {"type": "maxwellian", "density": 1.0, "temperature": 1.0}},
            "solver": {"t_end": 1.0, "threds": 2}}"#,
    )
    .unwrap();
    let o = run(&["simulate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver"), "{}", stderr(&o));
    let o = run(&["simulate", tmp.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_threaded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let cfg = maxwellian_config(tmp.path(), out, 0.7);
        let o = run(&["--threads", "1", "simulate", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ta = std::fs::read(a.join("timeseries.csv")).unwrap();
    let tb = std::fs::read(b.join("timeseries.csv")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn unknown_suite_exits_2() {
    let o = run(&["verify", "everything"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_collision_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("r").join("collision.json");
    let o = run(&[
        "verify",
        "collision",
        "--samples",
        "2e4",
        "--sampler-samples",
        "2e4",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["passed"], Value::Bool(true));
    assert_eq!(r["details"]["conservation"]["collisions"], 20000);
}

#[test]
fn verify_averaging_reports_k_star() {
    let o = run(&[
        "verify", "averaging", "--alpha", "0", "--zeta", "1", "--eta", "0.5", "--kmax", "40", "--states", "300", "--mc",
        "5000", "--bootstrap", "50",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["details"]["k_star"].as_f64().is_some(), "{}", r["details"]);
    assert_eq!(r["details"]["estimates"].as_array().unwrap().len(), 21);
}

#[test]
fn verify_energy_identity_and_kernel_constants_pass() {
    for suite in ["energy-identity", "kernel-constants"] {
        let o = run(&["verify", suite, "--samples", "1e4"]);
        assert!(o.status.success(), "{suite}: {}", stderr(&o));
    }
}

#[test]
fn feasible_p_for_nitrogen() {
    let o = run(&["transport", "feasible-p", "--alpha", "0.0035", "--zeta", "0.5329"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = r["p_bar"].as_f64().unwrap();
    assert!((p - 4.8163).abs() < 1e-4, "{p}");
    assert!((p - 4.8166).abs() <= 2e-3);
    assert_eq!(r["binding"][0], "(i) alpha < zeta/2");
    let o = run(&["transport", "feasible-p", "--alpha", "-1.5", "--zeta", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

fn write_power_law(path: &Path, zeta: f64) {
    let mut s = String::from("T,value\n");
    for i in 0..10 {
        let t = 250.0 + 40.0 * i as f64;
        s.push_str(&format!("{t},{:?}\n", 17.9 * (t / 300.0).powf(1.0 - zeta / 2.0)));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn fit_recovers_synthetic_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("n2.csv");
    write_power_law(&csv, 0.5329);
    std::fs::write(tmp.path().join("n2.units.json"), r#"{"T": "K", "value": "μPa·s"}"#).unwrap();
    let o = run(&["transport", "fit", "--kind", "viscosity", csv.to_str().unwrap(), "--reference", "17.9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((r["fit"]["zeta"].as_f64().unwrap() - 0.5329).abs() < 1e-10);
    assert!((r["fit"]["k_scale"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!(r["warnings"].as_array().unwrap().is_empty());
    // wrong units in the sidecar
    let o = run(&["transport", "fit", "--kind", "conductivity", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mW/m.K"), "{}", stderr(&o));
}

#[test]
fn malformed_csv_reports_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("bad.csv");
    std::fs::write(&csv, "T,value\n300,17.9\n350,abc\n400,21.0\n").unwrap();
    let o = run(&["transport", "fit", "--kind", "viscosity", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    std::fs::write(&csv, "T,value\n300,17.9\n350,19.0\n340,21.0\n").unwrap();
    let o = run(&["transport", "fit", "--kind", "viscosity", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    std::fs::write(&csv, "temperature,mu\n300,17.9\n").unwrap();
    let o = run(&["transport", "fit", "--kind", "viscosity", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn prandtl_from_flags() {
    let o = run(&[
        "transport", "prandtl", "--mass", "1", "--cv", "2.5", "--mu0", "1", "--kappa0", "3", "--units", "reduced",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    // (α + 7/2) μ/κ with α = 0
    assert!((r["pr"].as_f64().unwrap() - 3.5 / 3.0).abs() < 1e-12);
    let o = run(&["transport", "prandtl", "--mass", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tables_report_and_data_dir_override() {
    let o = run(&["transport", "tables"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 28);
    let o = run(&["transport", "tables", "--strict"]);
    assert_eq!(o.status.code(), Some(4));

    let tmp = tempfile::tempdir().unwrap();
    let o = polykin().env("POLYKIN_DATA_DIR", tmp.path()).args(["transport", "tables"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "missing table file must be reported");
    let bundled = polykin::GasTable::bundled().unwrap();
    let mut one = bundled.clone();
    one.entries.retain(|e| e.gas == "N2");
    std::fs::write(tmp.path().join("table1.json"), serde_json::to_string(&one).unwrap()).unwrap();
    let o = polykin().env("POLYKIN_DATA_DIR", tmp.path()).args(["transport", "tables", "--strict"]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).all(|l| l.contains("N2")));
}
