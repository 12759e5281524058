use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn smoothie(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothie")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SHORT_BUMPS: &str = "algorithm = smoothie\nenvironment = bumps\ntotal_steps = 300\n";

#[test]
fn train_writes_logs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", SHORT_BUMPS);
    let out = dir.path().join("out");
    let o = smoothie(&["train", "--config", &cfg, "--seed", "0,2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("seed_0.csv").exists() && out.join("seed_2.csv").exists());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "seed,final_return,best_return,final_sigma_mean,final_mu,wall_ms");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,") && lines[2].starts_with("2,"));
}

#[test]
fn repeated_train_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", "algorithm = ddpg\nenvironment = pointmass\ntotal_steps = 400\n");
    let mut outputs = Vec::new();
    for rep in ["a", "b"] {
        let out = dir.path().join(rep);
        let o = smoothie(&["train", "--config", &cfg, "--seed", "5", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        outputs.push((fs::read(out.join("seed_5.csv")).unwrap(), fs::read(out.join("summary.csv")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_order_only_permutes_summary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", SHORT_BUMPS);
    let mut rows = Vec::new();
    for (name, seeds) in [("fwd", "0,1"), ("rev", "1,0")] {
        let out = dir.path().join(name);
        assert!(smoothie(&["train", "--config", &cfg, "--seed", seeds, "--out", out.to_str().unwrap()]).status.success());
        let text = fs::read_to_string(out.join("summary.csv")).unwrap();
        let mut body: Vec<String> = text.lines().skip(1).map(String::from).collect();
        body.sort();
        rows.push(body);
    }
    assert_eq!(rows[0], rows[1]);
}

#[test]
fn range_error_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "algorithm = smoothie\nenvironment = bumps\n\ngamma = 1.5\n");
    let o = smoothie(&["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn missing_config_is_a_config_error() {
    let o = smoothie(&["train", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    let o = smoothie(&["train"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_3_and_keeps_partial_logs() {
    let dir = tempfile::tempdir().unwrap();
    let body = "algorithm = smoothie\nenvironment = bumps\ntotal_steps = 200\ncritic_lr = 1e300\nhuber_clip = 1e300\n";
    let cfg = write_config(dir.path(), "div.cfg", body);
    let out = dir.path().join("out");
    let o = smoothie(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let log = fs::read_to_string(out.join("seed_0.csv")).unwrap();
    assert!(log.lines().count() > 1);
    assert!(out.join("summary.csv").exists());
}

#[test]
fn verify_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = smoothie(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let report = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("name,max_abs,max_rel,tol,pass"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 10);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
}

#[test]
fn landscape_grid() {
    let o = smoothie(&["landscape", "--sigma", "0.5", "--lo", "-2", "--hi", "2", "--points", "9"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "a,reward,smoothed");
    assert_eq!(lines.len(), 10);
    assert!(lines[1].starts_with("-2,") && lines[9].starts_with("2,"));
    assert_eq!(smoothie(&["landscape", "--sigma", "0"]).status.code(), Some(2));
}

#[test]
fn single_trial_search() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", "algorithm = smoothie_kl\nenvironment = bumps\ntotal_steps = 200\n");
    let out = dir.path().join("search");
    let o = smoothie(&["search", "--config", &cfg, "--trials", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("search.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("rank,trial,score,status,"));
    assert!(lines[1].starts_with("1,0,"));
    assert!(lines[1].ends_with(",0.995,0.01,128,4.0,1.0"));
}
