use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcurl-amg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn stationarity_prints_one_line_per_factor() {
    let text = stdout(&run(&["stationarity", "--coarse", "3", "--refine", "2,3"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let interior: f64 = fields[5].parse().unwrap();
        assert!(interior <= 1e-10, "{line}");
    }
}

#[test]
fn export_then_import_solves() {
    let dir = tempfile::tempdir().unwrap();
    let mats = dir.path().join("mats");
    let m = mats.to_str().unwrap();
    stdout(&run(&["export", "--problem", "model2d_tri", "--shape", "12", "--out", m]));
    let file = |n: &str| mats.join(format!("{n}.mtx")).to_str().unwrap().to_owned();
    let out_dir = dir.path().join("tables");
    let text = stdout(&run(&[
        "import", "--Ae", &file("Ae"), "--S", &file("S"), "--An", &file("An"), "--D", &file("D"),
        "--out", out_dir.to_str().unwrap(), "--format", "csv",
    ]));
    assert!(text.contains("import"));
    let csv = std::fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("import,"));
}

#[test]
fn solve_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let text = stdout(&run(&[
        "solve", "--problem", "model2d_quad", "--shape", "16,20", "--sigma", "1e-2,1", "--out", out,
    ]));
    assert!(text.contains("quad16x16"));
    for name in ["convergence.txt", "convergence.csv", "convergence.jsonl", "histogram.csv"] {
        assert!(Path::new(out).join(name).exists(), "{name}");
    }
    let csv = std::fs::read_to_string(Path::new(out).join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = run(&["solve", "--problem", "model9d", "--shape", "4"]);
    assert!(!out.status.success());
    let out = run(&["solve", "--mode", "multigrid"]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
