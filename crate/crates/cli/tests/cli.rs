use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const C4: &str = "4 4\n0 1\n1 2\n2 3\n0 3\n";

fn sepkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepkit")).args(args).env_remove("SEPKIT_SEED").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn cycle(n: usize) -> String {
    let mut s = format!("{n} {n}\n");
    for i in 0..n {
        s += &format!("{} {}\n", i, (i + 1) % n);
    }
    s
}

#[test]
fn exact_on_four_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c4.txt", C4);
    let out = sepkit(&["exact", "--graph", g.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["exact"]["value"], 2);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "exact");
}

#[test]
fn missing_file_exits_two() {
    let out = sepkit(&["exact", "--graph", "/nonexistent/graph.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read graph file"));
}

#[test]
fn exact_beyond_cap_points_to_solve() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c25.txt", &cycle(25));
    let out = sepkit(&["exact", "--graph", g.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sepkit solve"));
}

#[test]
fn exponent_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c4.txt", C4);
    let out = sepkit(&["solve", "--graph", g.to_str().unwrap(), "--p", "2.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(0, 2]"));
}

#[test]
fn malformed_graph_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "bad.txt", "4 2\n0 1\n1 x\n");
    let out = sepkit(&["exact", "--graph", g.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = sepkit(&["verify", "--suite", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_concavity_passes() {
    let out = sepkit(&["verify", "--suite", "concavity", "--samples", "200"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["passed"], true);
    assert_eq!(r["suites"][0]["suite"], "concavity");
}

#[test]
fn solve_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c4.txt", C4);
    let artifact = dir.path().join("gram.json");
    let emb = dir.path().join("emb.json");
    let out = sepkit(&[
        "solve",
        "--graph",
        g.to_str().unwrap(),
        "--p",
        "2",
        "--artifact",
        artifact.to_str().unwrap(),
        "--embedding-out",
        emb.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    let value = r["relaxation"]["report"]["value"].as_f64().unwrap();
    assert!(value <= 2.0 + 1e-5, "relaxation {value} above the exact optimum");
    assert!(artifact.exists() && emb.exists());

    // The saved embedding can be rounded without re-solving.
    let out = sepkit(&[
        "pipeline",
        "--graph",
        g.to_str().unwrap(),
        "--embedding",
        emb.to_str().unwrap(),
        "--p",
        "2",
    ]);
    assert_ne!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json(&out)["pipeline"]["solver"].is_null());
}

#[test]
fn pipeline_single_graph_record() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c6.txt", &cycle(6));
    let out = sepkit(&["--seed", "3", "pipeline", "--graph", g.to_str().unwrap(), "--p", "1"]);
    assert_ne!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["seed"], 3);
    assert_eq!(r["pipeline"]["n"], 6);
    assert_eq!(r["pipeline"]["exact_value"], 2);
    assert_eq!(r["passed"], r["pipeline"]["success"]);
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c4.txt", C4);
    let out = Command::new(env!("CARGO_BIN_EXE_sepkit"))
        .args(["exact", "--graph", g.to_str().unwrap()])
        .env("SEPKIT_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(json(&out)["seed"], 99);
}

#[test]
fn batch_writes_csv_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let graphs = tempfile::tempdir().unwrap();
    write(graphs.path(), "c4.txt", C4);
    write(graphs.path(), "c6.txt", &cycle(6));
    write(graphs.path(), ".hidden", "not a graph");
    let csv_path = dir.path().join("rows.csv");
    let records = dir.path().join("records");
    let out = sepkit(&[
        "pipeline",
        "--graph-dir",
        graphs.path().to_str().unwrap(),
        "--p",
        "2",
        "--jobs",
        "2",
        "--csv",
        csv_path.to_str().unwrap(),
        "--out",
        records.to_str().unwrap(),
    ]);
    assert_ne!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "schema_version");
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let names: Vec<&str> = rows.iter().map(|r| &r[1]).collect();
    assert_eq!(names, ["c4.txt", "c6.txt"]);
    assert!(records.join("c4.txt.json").exists() && records.join("c6.txt.json").exists());
}

#[test]
fn batch_reports_bad_files() {
    let graphs = tempfile::tempdir().unwrap();
    write(graphs.path(), "c4.txt", C4);
    write(graphs.path(), "broken.txt", "3 1\n0 7\n");
    let out = sepkit(&["pipeline", "--graph-dir", graphs.path().to_str().unwrap(), "--p", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.txt"));
    // The good graph still gets its row.
    assert!(String::from_utf8_lossy(&out.stdout).contains("c4.txt"));
}

#[test]
fn convert_dimacs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "c4.col", "c four-cycle\np edge 4 4\ne 1 2\ne 2 3\ne 3 4\ne 4 1\n");
    let output = dir.path().join("c4.txt");
    let out = sepkit(&["convert-dimacs", "--input", input.to_str().unwrap(), "--output", output.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&output).unwrap(), "4 4\n0 1\n0 3\n1 2\n2 3\n");
}

#[test]
fn gaussian_test_record() {
    let out = sepkit(&["gaussian-test", "--d", "10", "--x", "0.1", "2", "--samples", "20000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    let reports = r["projection"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["x"], 0.1);
    assert_eq!(reports[1]["samples"], 20000);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c4.txt", C4);
    let path = dir.path().join("r.json");
    let out = sepkit(&["exact", "--graph", g.to_str().unwrap(), "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(r["exact"]["value"], 2);
}
