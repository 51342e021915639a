use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_blurcam");

fn blurcam(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn blurcam")
}

fn ok(args: &[&str]) -> String {
    let out = blurcam(args);
    assert!(
        out.status.success(),
        "blurcam {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(out.stderr.trim_ascii()).expect("stderr is one JSON object")
}

/// Small textured dataset plus a short gyro trace.
fn small_inputs(dir: &Path) -> (PathBuf, PathBuf) {
    let data = dir.join("data");
    let gyro = dir.join("gyro.csv");
    ok(&["make-fixture", "--out", s(&data), "--size", "96", "--count", "2", "--seed", "3"]);
    ok(&["gen-gyro", "--out", s(&gyro), "--duration-ms", "4000", "--seed", "3"]);
    (data, gyro)
}

fn oracle_chain(dir: &Path) -> PathBuf {
    let (data, gyro) = small_inputs(dir);
    let run = dir.join("run");
    ok(&[
        "simulate",
        "--rgb",
        s(&data.join("rgb/fixture_00.png")),
        "--depth",
        s(&data.join("depth/fixture_00.bcdm")),
        "--camera",
        s(&data.join("camera.json")),
        "--traj",
        s(&gyro),
        "--out",
        s(&run),
        "--frames",
        "10",
        "--seed",
        "7",
    ]);
    ok(&["track", "--run", s(&run), "--oracle", "--half-width", "4", "--margin", "12"]);
    ok(&["recover", "--run", s(&run), "--half-width", "4"]);
    run
}

#[test]
fn oracle_chain_matches_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = oracle_chain(dir.path());
    let summary = ok(&["eval", "--run", s(&run)]);
    assert!(summary.starts_with("samples=9 abs_rel="), "{summary}");
    let report = fs::read_to_string(run.join("eval.json")).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/oracle_eval.json");
    if std::env::var_os("BLURCAM_BLESS").is_some() {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        fs::write(&golden, &report).unwrap();
    }
    assert_eq!(report, fs::read_to_string(&golden).unwrap());
    for m in ["sim_manifest.json", "track_manifest.json", "recover_manifest.json", "eval_manifest.json"] {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join(m)).unwrap()).unwrap();
        assert_eq!(v["tool"], "blurcam-cli");
        assert!(v["inputs"].as_object().unwrap().values().all(|d| d["sha256"].as_str().unwrap().len() == 64));
    }
}

#[test]
fn stage_outputs_compose_and_plot_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = oracle_chain(dir.path());
    ok(&["densify", "--run", s(&run), "--samples-per-frame", "30"]);
    let dense = fs::read_to_string(run.join("dense_30.csv")).unwrap();
    assert_eq!(dense.lines().count(), 1 + 9 * 30 + 1);
    ok(&["eval", "--run", s(&run), "--pred", s(&run.join("dense_30.csv"))]);
    assert!(run.join("eval_dense_30.json").is_file());
    ok(&["plot", "--run", s(&run)]);
    let first = fs::read(run.join("plot.svg")).unwrap();
    ok(&["plot", "--run", s(&run)]);
    assert_eq!(first, fs::read(run.join("plot.svg")).unwrap());
    let svg = String::from_utf8(first).unwrap();
    for label in ["ground truth", "densified", "per frame"] {
        assert!(svg.contains(&format!("data-series=\"{label}\"")), "{label}");
    }
}

#[test]
fn zero_trajectory_reproduces_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = small_inputs(dir.path());
    let zero = dir.path().join("zero.csv");
    let mut csv = String::from("t_ms,alpha_rad,beta_rad,gamma_rad\n");
    for i in 0..200 {
        csv.push_str(&format!("{},0,0,0\n", 2 * i));
    }
    fs::write(&zero, csv).unwrap();
    let run = dir.path().join("still");
    let rgb = data.join("rgb/fixture_01.png");
    ok(&[
        "simulate",
        "--rgb",
        s(&rgb),
        "--depth",
        s(&data.join("depth/fixture_01.bcdm")),
        "--traj",
        s(&zero),
        "--out",
        s(&run),
        "--frames",
        "1",
        "--exposure-ms",
        "60",
    ]);
    let a = blurcam::load_rgb(&rgb).unwrap();
    let b = blurcam::load_rgb(&run.join("frame_0000.png")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn onset_past_the_file_is_a_range_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let gyro = dir.path().join("gyro.csv");
    ok(&["make-fixture", "--out", s(&data), "--size", "518"]);
    ok(&["gen-gyro", "--out", s(&gyro), "--seed", "1"]);
    let out = blurcam(&[
        "simulate",
        "--rgb",
        s(&data.join("rgb/fixture_00.png")),
        "--depth",
        s(&data.join("depth/fixture_00.bcdm")),
        "--traj",
        s(&gyro),
        "--out",
        s(&dir.path().join("run")),
        "--frames",
        "30",
        "--onset-ms",
        "66000",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_json(&out);
    assert_eq!(e["error"], "range");
    assert_eq!(e["exit_code"], 2);
}

#[test]
fn missing_upstream_names_the_producing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = blurcam(&["recover", "--run", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    let e = error_json(&out);
    assert!(e["message"].as_str().unwrap().contains("blurcam simulate"), "{e}");
}

#[test]
fn grid_mismatch_and_bad_flags_are_argument_errors() {
    let dir = tempfile::tempdir().unwrap();
    let run = oracle_chain(dir.path());
    let out = blurcam(&["recover", "--run", s(&run), "--half-width", "12"]);
    assert_eq!(out.status.code(), Some(2));
    let out = blurcam(&["track", "--run"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["class"], "argument");
}

#[test]
fn corrupt_depth_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (data, gyro) = small_inputs(dir.path());
    let bad = dir.path().join("bad.bcdm");
    fs::write(&bad, b"BCDM\x60\0\0\0\x60\0\0\0\0\0\0\0short").unwrap();
    let out = blurcam(&[
        "simulate",
        "--rgb",
        s(&data.join("rgb/fixture_00.png")),
        "--depth",
        s(&bad),
        "--traj",
        s(&gyro),
        "--out",
        s(&dir.path().join("run")),
        "--frames",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"], "format");
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.to_string_lossy().ends_with("manifest.json") {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn batch_is_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (data, gyro) = small_inputs(dir.path());
    let run = |jobs: &str, out: &Path| {
        let o = Command::new(BIN)
            .args([
                "batch", "--traj", s(&gyro), "--out", s(out), "--n", "3", "--jobs", jobs, "--size", "96",
                "--frames", "6", "--half-width", "4", "--margin", "12", "--seed", "11",
            ])
            .env("BLURCAM_DATA_DIR", &data)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b) = (dir.path().join("j1"), dir.path().join("j3"));
    run("1", &a);
    run("3", &b);
    let (ta, tb) = (tree_bytes(&a), tree_bytes(&b));
    assert!(ta.iter().any(|(n, _)| n.ends_with("frame_0005.png")));
    assert_eq!(ta, tb);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("batch_manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["jobs"], 3);
    assert_eq!(m["config"]["layout"].as_array().unwrap().len(), 3);
}
