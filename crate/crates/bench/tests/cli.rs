use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadsub-bench"))
        .args(args)
        .output()
        .expect("spawn quadsub-bench")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(bytes: &[u8]) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let o = bench(&["gen", "--n", "30", "--d", "5", "--base", "diag", "--instance-seed", seed, "--out", path(out)]);
        assert!(o.status.success());
    }
    let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.starts_with(b"quadsub-instance v1\n"));
}

#[test]
fn naive_and_batch_agree_on_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    assert!(bench(&["gen", "--n", "300", "--d", "7", "--instance-seed", "3", "--out", path(&inst)]).status.success());
    let mut values = Vec::new();
    for algo in ["naive", "batch"] {
        let o = bench(&["run", "--input", path(&inst), "--algo", algo, "--k", "8"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let rows = csv_rows(&o.stdout);
        assert_eq!(rows.len(), 2);
        values.push(rows[0][9].clone());
    }
    assert_eq!(values[0], values[1]);
}

#[test]
fn repeats_produce_rows_and_median() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = bench(&[
        "run", "--n", "12", "--d", "3", "--algo", "fast-columns", "--k", "3", "--repeats", "4", "--seed", "10",
        "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("schema,row,seed,algo,"));
    let rows = csv_rows(text.as_bytes());
    assert_eq!(rows.len(), 5);
    let seeds: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(seeds, ["10", "11", "12", "13", ""]);
    assert_eq!(rows[4][1], "median");
    // n <= 20, so the exact optimum and ratio are filled in
    let ratio: f64 = rows[0][11].parse().unwrap();
    assert!(ratio > 0.0 && ratio <= 1.0 + 1e-12);
}

#[test]
fn audit_passes_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good");
    assert!(bench(&["gen", "--n", "20", "--d", "3", "--lambda-scale", "1", "--out", path(&good)]).status.success());
    let o = bench(&["audit", "--input", path(&good), "--samples", "300"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("audit ok"));

    // a large λ breaks monotonicity
    let text = std::fs::read_to_string(&good).unwrap();
    let lambda_line = text.lines().find(|l| l.starts_with("lambda ")).unwrap();
    let bad = dir.path().join("bad");
    std::fs::write(&bad, text.replace(lambda_line, "lambda 50")).unwrap();
    let o = bench(&["audit", "--input", path(&bad), "--samples", "300"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_and_input_errors_exit_2() {
    assert_eq!(bench(&["run", "--algo", "nope"]).status.code(), Some(2));
    assert_eq!(bench(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bench(&["run", "--input", "/nonexistent/file"]).status.code(), Some(2));
    assert_eq!(bench(&["run", "--n", "5", "--k", "9"]).status.code(), Some(2));
}

#[test]
fn oversized_ensemble_is_refused() {
    let o = bench(&["run", "--n", "2000", "--d", "4", "--algo", "fast-flat", "--k", "2", "--ensemble", "64,16,400", "--memory-limit-mib", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bench(&["run", "--n", "50", "--d", "4", "--algo", "fast-flat", "--k", "2", "--ensemble", "8,4,6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_covers_the_grid() {
    let o = bench(&["sweep", "--ns", "10,40", "--ds", "2,3", "--algos", "naive,knapsack,matroid", "--k", "3", "--repeats", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&o.stdout);
    // 4 instances x 3 algorithms x (2 repeats + median)
    assert_eq!(rows.len(), 36);
    assert!(rows.iter().filter(|r| r[4] == "10").all(|r| !r[10].is_empty()));
    assert!(rows.iter().filter(|r| r[4] == "40").all(|r| r[10].is_empty()));
}
