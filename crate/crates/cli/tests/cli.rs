use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn walg(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walg"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("WALG_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn gens_sl2() {
    let t = tempfile::tempdir().unwrap();
    let o = walg(&["walg", "gens", "--alg", "sl2:[2]", "--max-deg", "4"], t.path());
    assert_eq!(o.status.code(), Some(0));
    let r = read(&t.path().join("gens.json"));
    assert_eq!(r["schema"], "walg-report/1");
    let theta = r["data"]["theta"].as_array().unwrap();
    assert_eq!(theta.len(), 1);
    // Left-handed normalization; the right-handed invariant has +1/2*h1.
    assert_eq!(theta[0]["element"], "e12 + 1/4*h1^2 - 1/2*h1");
    assert_eq!(theta[0]["kazhdan"], 4);
}

#[test]
fn lift_sl2_natural() {
    let t = tempfile::tempdir().unwrap();
    let o = walg(&["lift", "solve", "--alg", "sl2:[2]", "--rep", "natural"], t.path());
    assert_eq!(o.status.code(), Some(0));
    let r = read(&t.path().join("lift.json"));
    let show: Vec<Vec<String>> = serde_json::from_value(r["data"]["x0"]["show"].clone()).unwrap();
    assert_eq!(show, vec![vec!["1", "0"], vec!["-1/2*h1", "1"]]);
}

#[test]
fn config_errors_exit_2() {
    let t = tempfile::tempdir().unwrap();
    for args in [
        &["walg", "gens", "--alg", "sl2:[2]", "--max-deg", "3"][..],
        &["walg", "gens", "--alg", "nonsense"],
        &["suite", "all", "--alg", "sl2:[2]", "--suite", "nope"],
        &["lift", "solve", "--alg", "sl2:[2]", "--rep", "missing.json"],
        &["verma", "translate", "--alg", "sl2:[2]", "--lambda", "1,2"],
    ] {
        let o = walg(args, t.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
}

#[test]
fn failing_check_exit_1() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(walg(&["alg", "build", "--alg", "sl2:[2]"], t.path()).status.code(), Some(0));
    let mut alg = read(&t.path().join("alg.json"))["data"]["algebra"].clone();
    alg["grading"] = serde_json::json!([1, 0, -1]);
    let bad = t.path().join("bad.json");
    fs::write(&bad, alg.to_string()).unwrap();
    let out = t.path().join("bad");
    let o = walg(&["alg", "build", "--alg", bad.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(1));
    let r = read(&out.join("alg.json"));
    let failed: Vec<&Value> = r["checks"].as_array().unwrap().iter().filter(|c| c["status"] == false).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["name"], "good_grading");
    assert!(!failed[0]["detail"].as_str().unwrap().is_empty());
    assert_eq!(read(&out.join("summary.json"))["passed"], false);
}

#[test]
fn empty_suite_list() {
    let t = tempfile::tempdir().unwrap();
    let o = walg(&["suite", "all", "--alg", "sl2:[2]", "--suite", ""], t.path());
    assert_eq!(o.status.code(), Some(0));
    let s = read(&t.path().join("summary.json"));
    assert_eq!(s["checks"], 0);
    assert_eq!(s["suites"].as_array().unwrap().len(), 0);
}

#[test]
fn reports_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["suite", "all", "--alg", "sl2:[2]", "--rep", "natural", "--seed", "7"];
    assert_eq!(walg(&args, a.path()).status.code(), Some(0));
    assert_eq!(walg(&args, b.path()).status.code(), Some(0));
    assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));
}

#[test]
fn cache_roundtrip() {
    let (cache, a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run = |out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_walg"))
            .args(["walg", "gens", "--alg", "sl3:[2,1]", "--max-deg", "6", "--out"])
            .arg(out)
            .env("WALG_CACHE_DIR", cache.path())
            .output()
            .unwrap()
    };
    assert_eq!(run(a.path()).status.code(), Some(0));
    assert_eq!(fs::read_dir(cache.path()).unwrap().count(), 1);
    assert_eq!(run(b.path()).status.code(), Some(0));
    assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));
}

#[test]
fn suite_all_sl3_minimal_nilpotent() {
    let t = tempfile::tempdir().unwrap();
    let args = ["suite", "all", "--alg", "sl3:[2,1]", "--rep", "natural", "--max-deg", "6", "--depth", "3"];
    let o = walg(&args, t.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let s = read(&t.path().join("summary.json"));
    assert_eq!(s["passed"], true);
    let names: Vec<&str> = s["suites"].as_array().unwrap().iter().map(|l| l["suite"].as_str().unwrap()).collect();
    assert_eq!(names, ["alg", "gens", "dims", "lift", "act", "trans", "brst", "verma"]);
    // Working-degree raises are reported, never silent.
    let v = read(&t.path().join("verma.json"));
    let raises = v["data"]["degree_raises"].as_array().unwrap();
    assert_eq!(raises.last().unwrap()["to"], v["data"]["working_degree"]);
}
