use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entroflow")).args(args).current_dir(dir).output().unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let c = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(c).unwrap().to_string()).collect()
}

fn numbers(csv: &str, name: &str) -> Vec<f64> {
    column(csv, name).iter().map(|v| v.parse().unwrap()).collect()
}

#[test]
fn simulate_writes_reports_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["simulate", "--d", "1", "--n", "3", "--p", "1,1.5", "--seed", "7"];
    let a = run(&[&args[..], &["--out", "a"]].concat(), tmp.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(&[&args[..], &["--out", "b"]].concat(), tmp.path());
    assert_eq!(b.status.code(), Some(0));
    for f in ["trajectory.csv", "summary.json"] {
        let x = fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(x, fs::read(tmp.path().join("b").join(f)).unwrap(), "{f} differs between runs");
    }
    let csv = fs::read_to_string(tmp.path().join("a/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,E_1,E_1.5,production,l2_dist,inf_w,sup_w,H_1\n"));
    assert_eq!(csv.lines().count(), 22);
    let e1 = numbers(&csv, "E_1");
    assert!(e1.windows(2).all(|w| w[1] <= w[0]));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n"], 3);
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["envelope_ok"], true);
    assert_eq!(summary["fits"].as_array().unwrap().len(), 2);
    assert!(summary["h_1_0"].as_f64().unwrap() >= 0.5);
    assert!(!tmp.path().join("a").read_dir().unwrap().any(|e| e.unwrap().file_name().to_string_lossy().contains(".tmp")));
}

#[test]
fn constant_data_has_zero_entropy() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--n", "2", "--init", "constant", "--p", "1,2"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    for c in ["E_1", "E_2", "production", "l2_dist"] {
        assert!(numbers(&csv, c).iter().all(|v| *v == 0.0), "{c}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--d", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--n") && err.contains("Usage: entroflow simulate"), "{err}");
    assert_eq!(run(&["simulate", "--n", "2", "--p", "3"], tmp.path()).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--n", "2", "--bogus"], tmp.path()).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], tmp.path()).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--potential", "poly:-x^2"], tmp.path()).status.code(), Some(2));
    assert_eq!(run(&["sharpness", "--n", "3", "--k", "2"], tmp.path()).status.code(), Some(2));
    fs::write(tmp.path().join("bad.json"), "{\"n\": 2, \"unknown\": 1}").unwrap();
    assert_eq!(run(&["inequality", "--config", "bad.json"], tmp.path()).status.code(), Some(2));
}

#[test]
fn inequality_sweep_example() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["inequality", "--n", "2", "--p", "1.5", "--sweeps", "100", "--eps", "0.3", "--seed", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("inequality.json")).unwrap()).unwrap();
    assert_eq!(reports.len(), 500);
    assert!(reports.iter().all(|r| r["pass"] == true));
    assert!(reports.iter().all(|r| r["seed"].is_u64() && r["recipe"].is_string() && r["quad_order"].is_u64()));
    assert_eq!(reports[0]["seed"], 1);
    assert_eq!(reports[499]["seed"], 100);
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.json"), r#"{"n": 3, "p": [1.5, 2.0], "seeds": [3, 4], "out": "from_file"}"#).unwrap();
    let o = run(&["decay", "--config", "run.json", "--n", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("from_file/decay.csv")).unwrap();
    assert_eq!(column(&csv, "n"), vec!["2"; 4]);
    assert_eq!(column(&csv, "seed"), vec!["3", "3", "4", "4"]);
    assert!(column(&csv, "envelope_ok").iter().all(|v| v == "true"));
}

#[test]
fn sharpness_example() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["sharpness", "--n", "2", "--k", "2", "--amps", "0.2,0.1,0.05,0.02,0.01"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("sharpness.csv")).unwrap();
    let t = numbers(&csv, "tightness");
    assert_eq!(t.len(), 5);
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    assert!(t[4] >= 0.95 && t[4] <= 1.0);
    let p = run(&["plot", "sharpness.csv"], tmp.path());
    assert_eq!(p.status.code(), Some(0));
    let script = fs::read_to_string(tmp.path().join("sharpness.gp")).unwrap();
    assert!(script.contains("title 'asymptote 1'") && script.contains("$data << EOD"));
}

#[test]
fn spectrum_example() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "--potential", "harmonic", "--points", "2001", "-m", "6"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("index,eigenvalue,group\n"));
    for (k, v) in numbers(&csv, "eigenvalue").iter().enumerate() {
        assert!((v - k as f64).abs() < 1e-3, "λ_{k} = {v}");
    }
    let o = run(&["spectrum", "--potential", "double-well", "--points", "801", "-m", "4", "--out", "dw"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["spectrum", "--potential", "poly:0.5*x^2+0.5*y^2", "--d", "2", "--half-width", "6", "-m", "3", "--out", "p2"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn plot_scripts() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--n", "2", "--out", "s"], tmp.path()).status.code(), Some(0));
    let o = run(&["plot", "s/trajectory.csv"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let script = fs::read_to_string(tmp.path().join("s/trajectory.gp")).unwrap();
    assert!(script.contains("set logscale y"));
    assert!(script.contains("E0*exp(-n*x/H1)") && script.contains("n = 2"));
    fs::write(tmp.path().join("empty.csv"), "").unwrap();
    assert_eq!(run(&["plot", "empty.csv"], tmp.path()).status.code(), Some(2));
    assert_eq!(run(&["plot", "missing.csv"], tmp.path()).status.code(), Some(2));
    // without a summary the trajectory envelope needs --n
    fs::copy(tmp.path().join("s/trajectory.csv"), tmp.path().join("lone.csv")).unwrap();
    assert_eq!(run(&["plot", "lone.csv"], tmp.path()).status.code(), Some(2));
    assert_eq!(run(&["plot", "lone.csv", "--n", "2", "--out", "gp"], tmp.path()).status.code(), Some(0));
    assert!(tmp.path().join("gp/lone.gp").exists());
}
