use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_degenpde"))
}

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn list_names_every_suite() {
    let o = run(&["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.contains("poincare-identity"));
}

#[test]
fn verify_tensor_writes_a_passing_summary() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["verify-tensor", "--seed", "7", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("verify-tensor.json")).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
    assert_eq!(json["seed"], 7);
    let ids: Vec<&str> = json["invariants"].as_array().unwrap().iter().map(|i| i["id"].as_str().unwrap()).collect();
    assert!(ids.contains(&"tensor.sharp_isometry"));
    assert!(ids.contains(&"tensor.divergence_order_2d"));
}

#[test]
fn verify_alias_matches_subcommand() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(&["verify", "verify-norms", "--seed", "3", "--out", a.path().to_str().unwrap()]).status.success());
    assert!(run(&["verify-norms", "--seed", "3", "--out", b.path().to_str().unwrap()]).status.success());
    assert_eq!(dir_contents(a.path()), dir_contents(b.path()));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s = spec("cusp1d.toml");
    for d in [&a, &b] {
        let o = run(&[
            "run",
            s.to_str().unwrap(),
            "--grid",
            "16,32,64",
            "--seed",
            "11",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (ca, cb) = (dir_contents(a.path()), dir_contents(b.path()));
    assert_eq!(ca.len(), 3);
    assert_eq!(ca, cb);
}

#[test]
fn timings_fill_the_wall_clock_column() {
    let out = tempfile::tempdir().unwrap();
    let s = spec("cusp1d.toml");
    let o = run(&["run", s.to_str().unwrap(), "--grid", "16", "--timings", "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.path().join("cusp1d.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(!row.ends_with(','));
}

#[test]
fn schema_violation_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(spec("cusp1d.toml")).unwrap().replace("steps = 400", "steps = \"many\"");
    fs::write(&bad, text).unwrap();
    let o = run(&["run", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("time.steps"), "{}", stderr(&o));

    let text = fs::read_to_string(spec("cusp1d.toml")).unwrap().replace("cells = 64", "cells = 64\ncolour = 1");
    fs::write(&bad, text).unwrap();
    let o = run(&["run", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("geometry.colour"), "{}", stderr(&o));
}

#[test]
fn bad_override_exits_2() {
    let s = spec("cusp1d.toml");
    let o = run(&["run", s.to_str().unwrap(), "--dt", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--dt"));
    let o = run(&["verify", "no-such-suite"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_invariant_exits_1_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let strict = dir.path().join("strict.toml");
    let text = fs::read_to_string(spec("cusp1d.toml")).unwrap().replace("min_order = 1.8", "min_order = 3.0");
    fs::write(&strict, text).unwrap();
    let o = run(&["run", strict.to_str().unwrap(), "--grid", "16,32", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("failed invariant: run.space_order.direct"), "{}", stderr(&o));
    // reports are kept
    assert!(dir.path().join("strict.json").exists());
}

#[test]
fn sweep_rows_follow_the_product() {
    let out = tempfile::tempdir().unwrap();
    let s = spec("cusp_homogeneous.toml");
    let o = run(&[
        "sweep",
        s.to_str().unwrap(),
        "--axes",
        "alpha=1,2",
        "--axes",
        "lambda=0,1",
        "--grid",
        "32",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.path().join("cusp_homogeneous_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    let verdicts = fs::read_to_string(out.path().join("cusp_homogeneous_sweep_verdicts.csv")).unwrap();
    assert_eq!(verdicts.lines().count(), 1 + 4);
}
