use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn duality(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duality")).args(args).output().expect("spawn")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn measures_worked_example() {
    let cfg = configs().join("measures.json");
    let o = duality(&["measures", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let row = &doc["rows"][0];
    assert!((row["w_c"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((row["w_p"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((row["lambda"].as_f64().unwrap() - 7.0 / 9.0).abs() < 1e-12);
    assert_eq!(doc["report"]["validation"]["ok"], true);
}

#[test]
fn measures_distinguishable_file() {
    let dir = tempfile::tempdir().unwrap();
    let state = configs().join("states/distinguishable.json");
    let cfg = write(
        dir.path(),
        "c.json",
        &format!(r#"{{"params": {{"state_file": {:?}}}}}"#, state.to_str().unwrap()),
    );
    let o = duality(&["measures", "--config", cfg.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_reader(o.stdout.as_slice());
    let header = rd.headers().unwrap().clone();
    let row = rd.records().next().unwrap().unwrap();
    assert_eq!(&row[1], "(1,1,1)");
    for col in ["w_c", "w_p"] {
        let i = header.iter().position(|h| h == col).unwrap();
        assert!(row[i].parse::<f64>().unwrap().abs() < 1e-12);
    }
}

#[test]
fn symmetry_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let state = configs().join("states/broken_symmetry.json");
    let cfg = write(
        dir.path(),
        "c.json",
        &format!(r#"{{"experiment": "measures", "params": {{"state_file": {:?}}}}}"#, state.to_str().unwrap()),
    );
    let o = duality(&["measures", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("SymmetryViolation"), "{err}");
    assert!(err.contains("line 10"), "{err}");
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "a.json", r#"{"experiment": "hom", "colour": 1}"#);
    assert_eq!(code(&duality(&["hom", "--config", unknown.to_str().unwrap()])), 1);
    let wrong = write(dir.path(), "b.json", r#"{"experiment": "hom"}"#);
    assert_eq!(code(&duality(&["random-sweep", "--config", wrong.to_str().unwrap()])), 1);
    let missing = dir.path().join("none.json");
    assert_eq!(code(&duality(&["hom", "--config", missing.to_str().unwrap()])), 1);
    assert_eq!(code(&duality(&["hom"])), 1);
    let ok = write(dir.path(), "c.json", r#"{"params": {"r_grid": [1.0], "theta_grid": [0.0]}}"#);
    assert_eq!(code(&duality(&["hom", "--config", ok.to_str().unwrap(), "--format", "xml"])), 1);
    assert_eq!(code(&duality(&["hom", "--config", ok.to_str().unwrap(), "--threads", "0"])), 1);
}

#[test]
fn hom_csv_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "hom.json",
        r#"{"experiment": "hom", "params": {"r_grid": [0.0, 0.3, 1.0], "theta_grid": [0.0, 0.7, 3.141592653589793]}}"#,
    );
    let csv_path = dir.path().join("out.csv");
    let json_path = dir.path().join("out.json");
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&duality(&["hom", "--config", c, "--out", csv_path.to_str().unwrap()])), 0);
    let o = duality(&["hom", "--config", c, "--format", "json", "--out", json_path.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(code(&o), 0);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let mut rd = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header[..5], ["r", "theta", "p11", "p20", "p02"]);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    for (rec, row) in rd.records().zip(rows) {
        let rec = rec.unwrap();
        for (cell, col) in rec.iter().zip(&header) {
            match row[col.as_str()].as_f64() {
                Some(x) => {
                    let y: f64 = cell.parse().unwrap();
                    assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300), "{col}: {x} vs {y}");
                }
                None => assert_eq!(row[col.as_str()].as_str().unwrap_or(""), cell),
            }
        }
    }
    assert!(doc["meta"]["notes"][0].as_str().unwrap().contains("realization"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"experiment": "random_sweep", "seed": 1, "params": {"k_total": 5, "ls": [1, 10]}}"#,
    );
    let c = cfg.to_str().unwrap();
    let a = duality(&["random-sweep", "--config", c, "--format", "json"]);
    let b = duality(&["random-sweep", "--config", c, "--format", "json", "--threads", "3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let other = duality(&["random-sweep", "--config", c, "--format", "json", "--seed", "2"]);
    assert_ne!(a.stdout, other.stdout);
    let doc: serde_json::Value = serde_json::from_slice(&other.stdout).unwrap();
    assert_eq!(doc["meta"]["seed"], 2);
}

#[test]
fn bose_hubbard_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bh.json",
        r#"{"params": {"gamma_grid": [0.5, 1.0], "t_grid": [0.0, 4.0], "u_over_j_grid": [0.0, 10.0], "povms": ["O", "2P"]}}"#,
    );
    let o = duality(&["bose-hubbard", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2 * 2 * 2);
}
