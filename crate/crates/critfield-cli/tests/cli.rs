use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn critfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critfield")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SMALL: &str = "m = 1\nhbar = [0.0625]\nr = [0.5, 1.0]\nsamples = 150\nseed = 3\n";

#[test]
fn selftest_passes() {
    let o = critfield(&["selftest"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 9, "{text}");
}

#[test]
fn usage_errors_exit_with_four() {
    assert_eq!(code(&critfield(&["--help"])), 0);
    assert_eq!(code(&critfield(&["bogus"])), 4);
    assert_eq!(code(&critfield(&["--config", "/nonexistent/run.toml", "mean"])), 4);
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "m = 5\n");
    assert_eq!(code(&critfield(&["--config", &bad, "mean"])), 4);
    let unknown = write_config(dir.path(), "samples = 200\ncolour = 1\n");
    assert_eq!(code(&critfield(&["--config", &unknown, "mean"])), 4);
    let few = write_config(dir.path(), SMALL);
    assert_eq!(code(&critfield(&["--config", &few, "variance"])), 4);
}

#[test]
fn mean_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut runs = Vec::new();
    for (threads, out) in [("1", "a"), ("2", "b")] {
        let out = dir.path().join(out);
        let o = critfield(&["--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap(), "--plot", "mean"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("hist_cell1.svg").exists());
        runs.push(fs::read(out.join("counts.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn find_lists_critical_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("f");
    let o = critfield(&["--config", &cfg, "--out", out.to_str().unwrap(), "find", "--sample", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("critical_points.csv")).unwrap();
    let stdout = String::from_utf8(o.stdout).unwrap();
    let total: usize = stdout.split_whitespace().next().unwrap().parse().unwrap();
    assert_eq!(csv.lines().count(), total + 1);
    assert!(stdout.contains("alternating sum 0"), "{stdout}");
}
