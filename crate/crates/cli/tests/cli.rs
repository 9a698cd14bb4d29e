use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn jpaql(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jpaql"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = jpaql(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: i32) -> String {
    let out = jpaql(dir, args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stderr).unwrap()
}

/// Parses a CSV with a header into its columns by name.
fn columns(path: &Path) -> Vec<(String, Vec<String>)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let mut cols: Vec<(String, Vec<String>)> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|h| (h.to_string(), Vec::new()))
        .collect();
    for line in lines {
        for (c, v) in cols.iter_mut().zip(line.split(',')) {
            c.1.push(v.to_string());
        }
    }
    cols
}

fn numbers(cols: &[(String, Vec<String>)], name: &str) -> Vec<f64> {
    cols.iter()
        .find(|c| c.0 == name)
        .unwrap_or_else(|| panic!("no column {name}"))
        .1
        .iter()
        .map(|v| v.parse().unwrap())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

#[test]
fn limit_with_oracle_on_default_config() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["limit", "--oracle", "--points", "80"]);
    let cols = columns(&tmp.path().join("out/limit.csv"));
    let closed = numbers(&cols, "n_ql");
    let oracle = numbers(&cols, "n_ql_oracle");
    assert_eq!(closed.len(), 80);
    let max = oracle.iter().cloned().fold(0.0, f64::max);
    let dev = closed.iter().zip(&oracle).map(|(c, o)| (c - o).abs()).fold(0.0, f64::max);
    assert!(dev <= 1e-2 * max, "{dev}");
    assert!(tmp.path().join("out/limit.config.json").exists());
}

#[test]
fn limit_delta_sweep_has_knees_at_b2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "detunings.json", r#"{"amplifier": {"max_gain": "60 dB"}}"#);
    ok(
        tmp.path(),
        &[
            "--config",
            &cfg,
            "limit",
            "--b-meas",
            "30kHz",
            "--delta",
            "30kHz,37.5kHz,300kHz",
            "--spacing",
            "linear",
            "--points",
            "300",
        ],
    );
    for delta in [30e3, 37.5e3, 300e3] {
        let path = &tmp.path().join(format!("out/limit_delta{delta}_b30000.csv"));
        let b2 = 2.0 * delta + 30e3;
        let cols = columns(path);
        for (b_s, eta) in numbers(&cols, "b_s_hz").iter().zip(numbers(&cols, "eta_ql")) {
            assert_eq!(eta == 1.0, *b_s >= b2, "{}: eta {eta} at {b_s}", path.display());
        }
    }
}

#[test]
fn limit_json_format() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["--format", "json", "limit", "--points", "5"]);
    let v = json(&tmp.path().join("out/limit.json"));
    assert_eq!(v["b_s_grid"].as_array().unwrap().len(), 5);
    assert_eq!(v["thresholds"]["b2"], 800e3);
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    fails(tmp.path(), &["limit", "--points", "0"], 2);
    fails(tmp.path(), &["limit", "--b-s-min", "3 THz"], 2);
    fails(tmp.path(), &["simulate"], 2);
    fails(tmp.path(), &["bogus"], 2);
}

#[test]
fn config_errors_name_line_and_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", "{\n  \"sweep\": {\n    \"sead\": 3\n  }\n}\n");
    let err = fails(tmp.path(), &["--config", &cfg, "pipeline"], 2);
    assert!(err.contains("sweep.sead") && err.contains("line 3"), "{err}");
    let cfg = write_config(tmp.path(), "units.json", r#"{"amplifier": {"delta": "300 kPa"}}"#);
    let err = fails(tmp.path(), &["--config", &cfg, "limit"], 2);
    assert!(err.contains("amplifier.delta") && err.contains("kPa"), "{err}");
    let cfg = write_config(tmp.path(), "physics.json", r#"{"noise": {"n_idler": 0.1}}"#);
    fails(tmp.path(), &["--config", &cfg, "simulate", "--kind", "planck"], 2);
}

#[test]
fn simulate_default_planck_run() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["simulate", "--kind", "planck"]);
    let cols = columns(&tmp.path().join("out/planck_sweep.csv"));
    let t = numbers(&cols, "x");
    assert_eq!(t.len(), 15);
    assert!((t[0] - 0.04).abs() < 1e-12 && (t[14] - 0.6).abs() < 1e-12);
    let sidecar = json(&tmp.path().join("out/planck_sweep.config.json"));
    assert_eq!(sidecar["run"]["command"], "simulate");
    assert_eq!(sidecar["amplifier"]["signal_frequency"], 5.435e9);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["--seed", "7", "--out", "a", "simulate", "--kind", "coherent"]);
    ok(tmp.path(), &["--seed", "7", "--out", "b", "simulate", "--kind", "coherent"]);
    ok(tmp.path(), &["--seed", "8", "--out", "c", "simulate", "--kind", "coherent"]);
    let read = |d: &str| fs::read(tmp.path().join(d).join("coherent_sweep.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn coherent_response_is_linear_over_three_decades() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"sweep": {"meas_noise_rel": 0}}"#);
    ok(
        tmp.path(),
        &["--config", &cfg, "simulate", "--kind", "coherent", "--gain", "20dB"],
    );
    let cols = columns(&tmp.path().join("out/coherent_sweep.csv"));
    let (x, y) = (numbers(&cols, "x"), numbers(&cols, "y"));
    assert!(x[x.len() - 1] / x[0] >= 999.0);
    for i in 1..x.len() {
        assert!(((y[i] - y[0]) / (x[i] - x[0]) - 100.0).abs() < 1e-6);
    }
}

#[test]
fn fit_ideal_broadband_sweep() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ideal.json",
        r#"{"noise": {"pump": {"n_jprime": 0, "epsilon": 0}}, "sweep": {"meas_noise_rel": 0}, "amplifier": {"signal_gain": 101}}"#,
    );
    ok(tmp.path(), &["--config", &cfg, "simulate", "--kind", "planck"]);
    ok(
        tmp.path(),
        &["--config", &cfg, "fit", "out/planck_sweep.csv", "--model", "planck"],
    );
    let report = json(&tmp.path().join("out/planck_sweep.fit.json"));
    let eta = report["efficiency"]["eta"].as_f64().unwrap();
    assert!((eta - 0.899).abs() < 1e-3, "{eta}");
    assert_eq!(report["efficiency"]["mode"], "broadband");
    assert_eq!(report["fit"]["converged"], true);
}

#[test]
fn fit_high_gain_narrowband_sweep() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "narrow.json",
        r#"{
            "amplifier": {"signal_frequency": "5.4003 GHz", "max_gain": "70 dB", "tau": "1 GHz", "signal_gain": "50 dB"},
            "noise": {"pump": {"n_jprime": 0, "epsilon": 0}},
            "sweep": {"meas_noise_rel": 0, "grid": {"spacing": "20 kHz", "span_factor": 0.002}}
        }"#,
    );
    ok(tmp.path(), &["--config", &cfg, "simulate", "--kind", "coherent"]);
    let stdout = ok(
        tmp.path(),
        &["--config", &cfg, "fit", "out/coherent_sweep.csv", "--model", "coherent"],
    );
    assert!(stdout.contains("eta ="));
    let eta = json(&tmp.path().join("out/coherent_sweep.fit.json"))["efficiency"]["eta"]
        .as_f64()
        .unwrap();
    assert!((eta - 0.5).abs() < 1e-3, "{eta}");
}

#[test]
fn fit_rejects_bad_datasets() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["simulate", "--kind", "planck"]);
    fails(tmp.path(), &["fit", "out/planck_sweep.csv", "--model", "coherent"], 2);
    let text = fs::read_to_string(tmp.path().join("out/planck_sweep.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[4] = lines[4].replacen(',', ",oops", 1);
    fs::write(tmp.path().join("broken.csv"), lines.join("\n")).unwrap();
    let err = fails(tmp.path(), &["fit", "broken.csv", "--model", "planck"], 2);
    assert!(err.contains("row 5"), "{err}");
    fails(tmp.path(), &["fit", "missing.csv", "--model", "planck"], 1);
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = TempDir::new().unwrap();
    let text = "x,y,kind,gain_linear,seed\n0.05,2,planck,10,0\n0.1,3,planck,10,0\n0.3,1e300,planck,10,0\n";
    fs::write(tmp.path().join("wild.csv"), text).unwrap();
    fails(tmp.path(), &["fit", "wild.csv", "--model", "planck"], 3);
}

#[test]
fn fit_accepts_json_datasets() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["--format", "json", "simulate", "--kind", "coherent"]);
    ok(
        tmp.path(),
        &[
            "fit",
            "out/coherent_sweep.json",
            "--model",
            "coherent",
            "--weighting",
            "relative",
        ],
    );
    let report = json(&tmp.path().join("out/coherent_sweep.fit.json"));
    assert_eq!(report["weighting"], "relative");
}

#[test]
fn pipeline_artifacts_and_sidecar_round_trip() {
    let tmp = TempDir::new().unwrap();
    let stdout = ok(tmp.path(), &["--seed", "3", "pipeline"]);
    assert!(stdout.contains("max broadband eta"));
    let out = tmp.path().join("out");
    let table = columns(&out.join("eta_curve.csv"));
    let names: Vec<&str> = table.iter().map(|c| c.0.as_str()).collect();
    assert_eq!(names, ["gain_db", "mode", "eta", "sigma_eta", "eta_sql"]);
    assert_eq!(table[0].1.len(), 16);
    let dirs: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .collect();
    assert_eq!(dirs.len(), 8);
    for d in dirs {
        let d = d.unwrap().path();
        for f in [
            "planck_sweep.csv",
            "coherent_sweep.csv",
            "planck_fit.json",
            "coherent_fit.json",
        ] {
            assert!(d.join(f).exists(), "{}", d.join(f).display());
        }
    }
    let summary = json(&out.join("summary.json"));
    let best = summary["max_broadband_eta"].as_f64().unwrap();
    assert!(best > 0.5);
    let gain = summary["max_broadband_gain_db"].as_f64().unwrap();
    let broad: Vec<f64> = numbers(&table, "gain_db").into_iter().step_by(2).collect();
    assert!(
        gain > broad[0] && gain < broad[broad.len() - 1],
        "maximum not interior: {gain}"
    );
    assert!(summary["broadband_fit"]["params"].is_array());

    ok(tmp.path(), &["--config", "out/config.json", "--out", "again", "pipeline"]);
    for f in ["eta_curve.csv", "summary.json", "gain_03_12.00dB/planck_sweep.csv"] {
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(tmp.path().join("again").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn pipeline_without_pump_noise_rises_monotonically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "quiet.json",
        r#"{"noise": {"pump": {"n_jprime": 0, "epsilon": 0}}, "sweep": {"meas_noise_rel": 0, "gains_db": ["6 dB", 12, 18, 24, 30]}}"#,
    );
    ok(tmp.path(), &["--config", &cfg, "pipeline"]);
    let table = columns(&tmp.path().join("out/eta_curve.csv"));
    let eta = numbers(&table, "eta");
    let broad: Vec<f64> = eta.iter().cloned().step_by(2).collect();
    let narrow: Vec<f64> = eta.iter().cloned().skip(1).step_by(2).collect();
    assert!(broad.windows(2).all(|w| w[1] > w[0]) && broad[4] > 0.98, "{broad:?}");
    assert!(
        narrow.windows(2).all(|w| w[1] > w[0]) && narrow[4] < 0.5 && narrow[4] > 0.48,
        "{narrow:?}"
    );
}

#[test]
fn pipeline_single_gain_and_stage_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "one.json", r#"{"sweep": {"gains_db": [20]}}"#);
    ok(tmp.path(), &["--config", &cfg, "--format", "json", "pipeline"]);
    let table = columns(&tmp.path().join("out/eta_curve.csv"));
    assert_eq!(table[0].1.len(), 2);
    assert!(tmp.path().join("out/eta_curve.json").exists());
    assert!(json(&tmp.path().join("out/summary.json"))["broadband_fit"].is_null());

    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"sweep": {"gains_db": [10], "temperatures": ["100 mK", "50 mK"]}}"#,
    );
    let err = fails(tmp.path(), &["--config", &cfg, "pipeline"], 2);
    assert!(err.contains("planck sweep at 10 dB"), "{err}");
}
