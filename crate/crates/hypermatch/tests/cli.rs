use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hypermatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypermatch")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const VARIANCE: &str = r#"
experiment = "variance"
seed = 1
replicas = 120
[variance]
process = "cloaked-lattice"
d = 2
expected_counts = [16, 64]
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn lists_every_experiment() {
    let o = hypermatch(&["list-experiments"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(names, ["rates", "spectrum", "variance", "tails", "bl-check", "matching-moments"]);
}

#[test]
fn run_writes_outputs_and_plot_redraws_them() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "v.toml", VARIANCE);
    let out = tmp.path().join("out");
    let o = hypermatch(&["run", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let data = fs::read_to_string(out.join("data/variance.csv")).unwrap();
    assert!(data.starts_with("# hypermatch-schema v1\nn,volume,"));
    assert_eq!(data.lines().count(), 4);
    let svg = fs::read_to_string(out.join("plots/variance.svg")).unwrap();

    let again = tmp.path().join("again");
    let o = hypermatch(&["plot", out.join("record.json").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(again.join("plots/variance.svg")).unwrap(), svg);
}

#[test]
fn interrupted_run_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "v.toml", VARIANCE);
    let out = tmp.path().join("out");
    let o = hypermatch(&["run", &cfg, "--out", out.to_str().unwrap(), "--set", "stop_after=7"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("7 of 240"));
    assert!(!out.join("record.json").exists());
    let o = hypermatch(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(out.join("record.json").exists());
}

#[test]
fn configuration_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "v.toml", VARIANCE);
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    for args in [
        vec!["run", "missing.toml"],
        vec!["run", &cfg, "--out", out, "--set", "d=9"],
        vec!["run", &cfg, "--out", out, "--replicas", "10"],
        vec!["run", &cfg, "--out", out, "--set", "process=\"swarm\""],
        vec!["run", &cfg, "--out", out, "--set", "noise"],
    ] {
        let o = hypermatch(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let bad = write(tmp.path(), "record.json", "{\"version\": 1}");
    assert_eq!(code(&hypermatch(&["plot", &bad])), 2);
}

#[test]
fn module_errors_exit_with_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "t.toml",
        r#"
experiment = "tails"
replicas = 2
[tails]
process = "poisson"
target = "poisson"
d = 2
sides = [8]
min_tail_points = 100000
"#,
    );
    let out = tmp.path().join("out");
    let o = hypermatch(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    // Ginibre is planar only.
    let o = hypermatch(&["run", &cfg, "--out", out.to_str().unwrap(), "--set", "process=\"ginibre\"", "--set", "d=3"]);
    assert!(matches!(code(&o), 2 | 4), "{}", String::from_utf8_lossy(&o.stderr));
}
