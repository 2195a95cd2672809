use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracsource"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env("FRACSOURCE_THREADS", "2")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Every output file except the manifest, which carries wall-clock stamps.
fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn small_forward(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "experiment = \"forward\"\nseed = 3\n[mesh]\nn = 24\n[order]\nkind = \"constant\"\nalpha = 0.6\n[solver]\ndt = 0.02\n",
    )
    .unwrap();
    path
}

#[test]
fn forward_run_writes_hashed_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = small_forward(tmp.path());
    let out = tmp.path().join("out");
    let o = run(&[
        "forward",
        "--scenario",
        sc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["seed"], 3);
    let outputs = manifest["outputs"].as_array().unwrap();
    let names: Vec<&str> = outputs
        .iter()
        .map(|o| o["file"].as_str().unwrap())
        .collect();
    assert!(
        names.contains(&"field.csv") && names.contains(&"summary.json"),
        "{names:?}"
    );
    for o in outputs {
        let file = o["file"].as_str().unwrap();
        assert!(out.join(file).exists());
        assert_eq!(o["sha256"].as_str().unwrap().len(), 64, "{file}");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = small_forward(tmp.path());
    let mut outs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let o = run(&[
            "forward",
            "--scenario",
            sc.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        outs.push(artifacts(&out));
    }
    assert!(!outs[0].is_empty());
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn seed_override_changes_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = small_forward(tmp.path());
    let out = tmp.path().join("seeded");
    let o = run(&[
        "forward",
        "--scenario",
        sc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert!(o.status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
}

#[test]
fn inadmissible_window_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    // an observation window starting at the horizon leaves no data
    let path = tmp.path().join("bad.toml");
    let text = std::fs::read_to_string(scenarios().join("delayed_window.toml")).unwrap();
    assert!(text.contains("t1 = 0.15"));
    std::fs::write(&path, text.replace("t1 = 0.15", "t1 = 1.0")).unwrap();
    let o = run(&[
        "invert-h",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("(T1<T)"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn unknown_fields_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("typo.toml");
    std::fs::write(
        &path,
        "experiment = \"forward\"\n[mesh]\nn = 8\nbogus = 1\n",
    )
    .unwrap();
    let o = run(&[
        "forward",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn verify_titchmarsh_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = run(&[
        "verify",
        "--suite",
        "titchmarsh",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn ml_eval_prints_value_and_regime() {
    let o = run(&["ml-eval", "1", "1", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let value: f64 = text.split_whitespace().next().unwrap().parse().unwrap();
    assert!((value - std::f64::consts::E).abs() <= 1e-15, "{text}");

    let o = run(&["ml-eval", "2", "1", "-4"]);
    let value: f64 = stdout(&o)
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - 2f64.cos()).abs() <= 1e-14);

    let o = run(&["ml-eval", "0", "1", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
