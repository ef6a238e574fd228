use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const DRIFT: &str = r#"
moduli = [2]
master_seed = 11

[[atoms]]
element = "2:(1; {})"
weight = "7/10"

[[atoms]]
element = "2:(-1; {0:1})"
weight = "3/10"

[walk]
n = 400
trials = 40
depth = 8

[hitting]
depth = 3
"#;

const HOROCYCLIC: &str = r#"
moduli = [2]
master_seed = 1

[[atoms]]
element = "2:(0; {0:1})"
weight = "1"

[walk]
n = 10
trials = 2
"#;

fn treewalk(dir: &Path, config: &str, args: &[&str]) -> (Output, PathBuf) {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_treewalk"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .env_remove("TREEWALK_OUT")
        .output()
        .unwrap();
    (output, out)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn walk_writes_reports() {
    let dir = TempDir::new().unwrap();
    let (output, out) = treewalk(dir.path(), DRIFT, &["walk"]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report = json(&out.join("walk.json"));
    let f = &report["report"]["factors"][0];
    assert!((f["rate_mean"].as_f64().unwrap() - 0.4).abs() < 0.05);
    assert!(f["rate_stderr"].is_number());
    assert_eq!(report["triviality"]["trivial"], false);
    let csv = fs::read_to_string(out.join("walk.csv")).unwrap();
    assert!(csv.starts_with("factor,drift_exact,rate_mean,rate_stderr"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn fully_exceptional_support_exits_2() {
    let dir = TempDir::new().unwrap();
    for cmd in ["walk", "hitting"] {
        let config = format!("{HOROCYCLIC}\n[hitting]\ndepth = 2\n");
        let (output, _) = treewalk(dir.path(), &config, &[cmd]);
        assert_eq!(output.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&output.stderr).contains("fully exceptional support"));
    }
}

#[test]
fn config_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let bad_weight = DRIFT.replace("\"3/10\"", "\"2/10\"");
    let no_seed = DRIFT.replace("master_seed = 11", "");
    let too_deep = DRIFT.replace("depth = 3", "depth = 17");
    for (config, cmd) in [(bad_weight.as_str(), "walk"), (no_seed.as_str(), "walk"), (too_deep.as_str(), "hitting")] {
        let (output, _) = treewalk(dir.path(), config, &[cmd]);
        assert_eq!(output.status.code(), Some(1), "{}", String::from_utf8_lossy(&output.stderr));
    }
}

#[test]
fn hitting_writes_histogram_and_gap() {
    let dir = TempDir::new().unwrap();
    let (output, out) = treewalk(dir.path(), DRIFT, &["hitting"]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let csv = fs::read_to_string(out.join("hitting_factor0.csv")).unwrap();
    assert!(csv.starts_with("depth,word,count\n3,"));
    let report = json(&out.join("hitting.json"));
    let gap = &report["factors"][0]["stationarity"];
    assert!(gap["tv_gap"].is_number() && gap["tv_radius"].is_number());
}

#[test]
fn output_is_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let mut runs = Vec::new();
    for threads in ["1", "4", "1"] {
        let sub = dir.path().join(format!("t{}", runs.len()));
        fs::create_dir_all(&sub).unwrap();
        for cmd in ["walk", "hitting"] {
            let (output, _) = treewalk(&sub, DRIFT, &[cmd, "--threads", threads]);
            assert!(output.status.success());
        }
        let files: Vec<Vec<u8>> = ["walk.json", "walk.csv", "hitting.json", "hitting_factor0.csv"]
            .iter()
            .map(|f| fs::read(sub.join("out").join(f)).unwrap())
            .collect();
        runs.push(files);
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn classify_examples() {
    let dir = TempDir::new().unwrap();
    let opposite = "moduli = [3, 3]\nmaster_seed = 1\n[classify]\ngenerators = [\"[3:(1; {}), 3:(-1; {})]\"]\n";
    let (output, out) = treewalk(dir.path(), opposite, &["classify"]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let r = json(&out.join("classify.json"));
    assert_eq!((r["unimodular_sampled"].as_bool(), r["uniscalar"].as_bool()), (Some(true), Some(false)));

    let (_, out) = treewalk(dir.path(), HOROCYCLIC, &["classify"]);
    assert_eq!(json(&out.join("classify.json"))["subgroup"], "fully-exceptional");

    let mixed = "moduli = [2, 2]\nmaster_seed = 1\n[classify]\ngenerators = [\"[2:(1; {}), 2:(1; {})]\", \"[2:(0; {}), 2:(0; {0:1})]\"]\n";
    let (_, out) = treewalk(dir.path(), mixed, &["classify"]);
    assert_eq!(json(&out.join("classify.json"))["subgroup"], "partially-exceptional");
}

#[test]
fn scale_reports_oracle() {
    let dir = TempDir::new().unwrap();
    let config = "moduli = [3]\nmaster_seed = 1\n[scale]\nelements = [\"3:(-2; {1:2})\"]\n";
    let (output, out) = treewalk(dir.path(), config, &["scale"]);
    assert!(output.status.success());
    let e = &json(&out.join("scale.json"))["elements"][0];
    assert_eq!(e["scale"]["total"], "9");
    assert_eq!(e["oracle"][0], 9);
    assert_eq!(e["modular_consistent"], true);
}

#[test]
fn coset_tree_degrees_and_rejection() {
    let dir = TempDir::new().unwrap();
    for (q, m, lo, hi, expected) in [(2, 1, -2, 2, "2"), (3, 2, -1, 1, "9")] {
        let config = format!("master_seed = 1\n[coset_tree]\nq = {q}\nm = {m}\nj_min = {lo}\nj_max = {hi}\n");
        let (output, out) = treewalk(dir.path(), &config, &["coset-tree"]);
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        let r = json(&out.join("coset_tree.json"));
        let degrees = r["degrees"]["out_degrees"].as_object().unwrap();
        assert_eq!(degrees.keys().collect::<Vec<_>>(), vec![expected]);
        assert_eq!(r["degrees"]["degrees_regular"], true);
        let csv = fs::read_to_string(out.join("coset_tree.csv")).unwrap();
        assert!(csv.starts_with("level,rep,parent_level,parent_rep\n"));
    }
    let deep = "master_seed = 1\n[coset_tree]\nq = 2\nm = 1\nj_min = 0\nj_max = 9\n";
    let (output, _) = treewalk(dir.path(), deep, &["coset-tree"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn output_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "master_seed = 1\n[coset_tree]\nq = 2\nm = 1\nj_min = 0\nj_max = 2\n").unwrap();
    let target = dir.path().join("env_out");
    let status = Command::new(env!("CARGO_BIN_EXE_treewalk"))
        .args(["coset-tree", "--config"])
        .arg(&path)
        .env("TREEWALK_OUT", &target)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(target.join("coset_tree.json").exists());
}
