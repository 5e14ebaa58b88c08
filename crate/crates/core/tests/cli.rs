use std::path::Path;
use std::process::{Command, Output};

use dyadic_lab::harness::generators::random_shift;
use dyadic_lab::Grid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyadic-lab")).args(args).output().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn shift_file(dir: &Path, grid: Grid) -> String {
    let s = random_shift(grid, (1, 0), 0.7, true, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    write(dir, "shift.json", &s.to_json().unwrap())
}

#[test]
fn constants_reproduce_the_step_example() {
    let out = run(&["constants", "--weight", "step:2,2,1,1", "--p", "2", "--depth", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let row = &v["constants"][0];
    assert!((row["ap"].as_f64().unwrap() - 1.125).abs() < 1e-12);
    assert!((row["ainftyW"].as_f64().unwrap() - 7.0 / 6.0).abs() < 1e-12);
}

#[test]
fn constants_accept_a_list_of_exponents() {
    let out = run(&["constants", "--weight", "power:-0.5", "--p", "1.5,2,3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["constants"].as_array().unwrap().len(), 3);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json").display().to_string();
    for args in [
        vec!["constants", "--weight", "power:-1", "--p", "2"],
        vec!["constants", "--weight", "power:0", "--p", "1"],
        vec!["constants", "--weight", "bogus", "--p", "2"],
        vec!["frobnicate"],
        vec!["sweep", "--config", missing.as_str()],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn apply_emits_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(1, 4).unwrap();
    let shift = shift_file(dir.path(), grid);
    let values: Vec<String> = (0..16).map(|k| format!("{}", (k as f64).cos())).collect();
    let input = write(dir.path(), "f.csv", &format!("value\n{}\n", values.join("\n")));
    let out = run(&["apply", "--shift", &shift, "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "cell,f,Sf,SstarF,Snatural");
    assert_eq!(lines.len(), 17);
    let short = write(dir.path(), "short.csv", "1\n2\n3\n");
    assert_eq!(run(&["apply", "--shift", &shift, "--input", &short]).status.code(), Some(2));
}

#[test]
fn lerner_reports_a_sparse_family() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "f.csv", "1\n1\n0\n0\n0\n0\n0\n0\n");
    let out = run(&["lerner", "--input", &input, "--q0", "0:0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["sparse"], Value::Bool(true));
    assert_eq!(v["median"].as_f64(), Some(0.0));
    assert_eq!(run(&["lerner", "--input", &input, "--q0", "5:0"]).status.code(), Some(2));
}

#[test]
fn testing_reports_constants_and_layers() {
    let dir = tempfile::tempdir().unwrap();
    let shift = shift_file(dir.path(), Grid::new(1, 6).unwrap());
    let out = run(&["testing", "--shift", &shift, "--weight", "power:-0.5", "--p", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!(v["Sp"].as_f64().unwrap() > 0.0);
    assert!(v["SpStar"].as_f64().unwrap() > 0.0);
    assert!(!v["layers"].as_array().unwrap().is_empty());
}

const NESTED: &str = r#"{"source": "positive", "offsets": [1], "family": {"kind": "explicit", "generations":
    [[{"level": 1, "index": [0]}], [{"level": 2, "index": [0]}], [{"level": 3, "index": [0]}],
     [{"level": 4, "index": [0]}], [{"level": 5, "index": [0]}], [{"level": 6, "index": [0]}],
     [{"level": 7, "index": [0]}], [{"level": 8, "index": [0]}], [{"level": 9, "index": [0]}]]}}"#;
const LERNER: &str = r#"{"source": "positive", "offsets": [1], "family": {"kind": "lerner", "seeds": [0]}}"#;

fn sweep_config(shifts: &str) -> String {
    format!(
        r#"{{"grid": {{"dim": 1, "depth": 10}}, "weights": ["power:-0.9", "power:-0.99", "power:-0.999", "power:-0.9999"],
            "shifts": {shifts}, "verify": true}}"#
    )
}

#[test]
fn sweep_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.json", &sweep_config(NESTED));
    let csv_path = dir.path().join("out.csv").display().to_string();
    assert_eq!(run(&["sweep", "--config", &config, "--output", &csv_path]).status.code(), Some(0));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("weight_id,p,shift_id,i,ap,ainfty_w,ainfty_sigma,Sp,SpStar,R,rho,domC,decay_c\n"));
    assert_eq!(text.lines().count(), 5);
    let out = run(&["sweep", "--config", &config, "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out).as_array().unwrap().len(), 4);
    // reproducible
    let again = dir.path().join("again.csv").display().to_string();
    run(&["sweep", "--config", &config, "--output", &again]);
    assert_eq!(std::fs::read(&csv_path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn failed_verification_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.json", &sweep_config(LERNER));
    let out = run(&["sweep", "--config", &config]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("violation"));
}
