use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use parablow::diagnostics::TraceRow;

fn parablow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parablow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path, extra_model: &str, t_end: f64) -> String {
    let text = format!(
        "[model]\ncase = \"NC-Case3\"\n{extra_model}\n[grid]\nn = 64\n[init]\na = 1.0\nb = 1.0\n\
         [step]\nt_end = {t_end}\nsample_interval = 0.01\n[output]\nprefix = \"small\"\n"
    );
    let p = dir.join("small.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_owned)
        .collect()
}

#[test]
fn run_writes_outputs_with_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "", 0.05);
    let out = tmp.path().join("out");
    let o = parablow(&["--out-dir", out.to_str().unwrap(), "run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("halt"));

    for f in ["small_trace.csv", "small_diagnostics.csv", "small_final.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(text.starts_with('#'), "{f} lacks provenance");
        assert!(text.contains("NC-Case3"), "{f} lacks the resolved config");
    }
    assert_eq!(data_rows(&out.join("small_trace.csv")).len(), 6);
    assert_eq!(data_rows(&out.join("small_final.csv")).len(), 64);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("small_summary.json")).unwrap()).unwrap();
    assert!(summary["summary"].is_object());
    assert_eq!(summary["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn zero_length_run_records_the_initial_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "", 0.0);
    let o = parablow(&["--out-dir", tmp.path().to_str().unwrap(), "run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = data_rows(&tmp.path().join("small_trace.csv"));
    assert_eq!(rows.len(), 1);
    let t: f64 = rows[0].split(',').next().unwrap().parse().unwrap();
    assert_eq!(t, 0.0);
}

#[test]
fn invalid_exponent_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "alpha = 0.5", 0.05);
    let o = parablow(&["--out-dir", tmp.path().to_str().unwrap(), "run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
    assert!(!tmp.path().join("small_trace.csv").exists());
}

#[test]
fn missing_config_is_an_error() {
    let o = parablow(&["run", "/nonexistent/parablow.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

fn sweep_config(dir: &Path, lists: &str) -> String {
    let text = format!(
        "[model]\nalpha = 1.0\nbeta = 1.0\n[grid]\nn = 32\n[init]\na = 2.0\nb = 1.0\n\
         [step]\nt_end = 0.02\nsample_interval = 0.01\n[output]\nprefix = \"sw\"\n[sweep]\n{lists}\n"
    );
    let p = dir.join("sweep.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn sweep_covers_the_product_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = sweep_config(tmp.path(), "alpha = [1.0, 2.0]\nbeta = [1.0, 2.0]");
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out = tmp.path().join(sub);
        let o = parablow(&["--out-dir", out.to_str().unwrap(), "sweep", &cfg]);
        assert!(o.status.success(), "{}", stderr(&o));
        let rows = data_rows(&out.join("sw_sweep.csv"));
        assert_eq!(rows.len(), 4);
        outputs.push(fs::read_to_string(out.join("sw_sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn empty_sweep_list_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = sweep_config(tmp.path(), "alpha = []");
    let o = parablow(&["--out-dir", tmp.path().to_str().unwrap(), "sweep", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
}

#[test]
fn oracle_prints_the_closed_form() {
    let o = parablow(&["oracle", "--case", "NC-Case3", "--v1", "1", "--omega2", "1", "--t", "0.2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("Omega2 = 2.5"), "{s}");
    assert!(s.contains("V1 = 1"), "{s}");

    let o = parablow(&["oracle", "--case", "NC-Case3", "--v1", "1", "--omega2", "1", "--t", "0.2", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.is_object());
}

#[test]
fn check_identities_passes_on_a_small_run() {
    let o = parablow(&["check-identities", "--case", "F", "--trials", "10", "--n", "128"]);
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
}

#[test]
fn fit_rejects_a_trace_that_does_not_grow() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("flat.csv");
    let mut text = format!("{}\n", TraceRow::HEADER);
    for i in 0..50 {
        let t = i as f64 * 0.01;
        let row = TraceRow::reduced(t, 1.0, 1.0);
        let cells: Vec<String> = row.values().iter().map(|x| x.to_string()).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    fs::write(&p, text).unwrap();
    let o = parablow(&["fit", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}

#[test]
fn fit_recovers_the_singular_time_of_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "", 0.25);
    let o = parablow(&["--out-dir", tmp.path().to_str().unwrap(), "run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = tmp.path().join("small_trace.csv");
    let json = tmp.path().join("fit.json");
    let o = parablow(&[
        "fit",
        trace.to_str().unwrap(),
        "--window-start",
        "0.1",
        "--min-growth",
        "2",
        "--output",
        json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    let t0 = v["t0_hat"].as_f64().unwrap();
    assert!((t0 - 1.0 / 3.0).abs() < 0.03, "{t0}");
}

#[test]
fn snapshot_resume_continues_from_the_final_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "", 0.05);
    let dir = tmp.path().to_str().unwrap();
    let o = parablow(&["--out-dir", dir, "run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let snap = tmp.path().join("small_final.csv");
    let o = parablow(&["--out-dir", dir, "snapshot-resume", snap.to_str().unwrap(), "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["small_resumed_trace.csv", "small_resumed_final.csv", "small_resumed_summary.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "x,v,omega\n0,0,0\n").unwrap();
    let o = parablow(&["--out-dir", dir, "snapshot-resume", bad.to_str().unwrap(), "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}
