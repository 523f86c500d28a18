use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL_HOMOGENEOUS: &str = "\
[run]
scenario = homogeneous
[data.F0]
l2m0 = gaussian amplitude=1 width=1 center=0
l1m1 = poly-tail amplitude=0.5 p=1.5
[grid]
h = 0.1
T = 12
samples = 10
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_radscatter"));
    c.env_remove("RADSCATTER_OUT");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

// [TRIVIAL] passing validate run exits 0 and writes the bundle
#[test]
fn exit_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let o = run(&["validate", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["status"], "pass");
    assert_eq!(s["schema_version"], 1);
    assert!(out.join("series.csv").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("dalembert_order"));
}

// [TRIVIAL] a completed run with a failed item exits 1
#[test]
fn exit_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.cfg", "[run]\nscenario = convergence\n[acceptance]\nmin_order = 3\n");
    let out = tmp.path().join("b");
    let o = run(&["convergence", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(summary(&out)["status"], "fail");
}

// [TRIVIAL] missing or malformed configuration exits 2 with a config-stage error
#[test]
fn exit_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let o = run(&["homogeneous", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let s = summary(&out);
    assert_eq!(s["status"], "error");
    assert_eq!(s["error"]["stage"], "config");

    let cfg = write(tmp.path(), "bad.cfg", "[grid]\nh = 0.1\nh = 0.2\n");
    let o = run(&["homogeneous", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("line 3"), "{err}");

    assert_eq!(run(&["nosuch"]).status.code(), Some(2));
    assert_eq!(run(&["validate", "--threads", "0", "--out", out.to_str().unwrap()]).status.code(), Some(2));
}

// [TRIVIAL] blowup during the solve exits 3 and names the stage
#[test]
fn exit_runtime() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "n.cfg",
        "[run]\nscenario = nullradial\n[data.F0]\nl0m0 = gaussian amplitude=50 width=1 center=0\n[grid]\nh = 0.1\nT = 12\nt0 = 1\nsamples = 8\n",
    );
    let out = tmp.path().join("b");
    let o = run(&["nullradial", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let s = summary(&out);
    assert_eq!(s["status"], "error");
    assert_eq!(s["error"]["stage"], "nullradial");
    assert!(s["error"]["message"].as_str().unwrap().contains("non-finite"));
    assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
}

// [TRIVIAL] the output directory can come from the environment
#[test]
fn out_from_env() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("from-env");
    let o = bin().args(["validate", "--quiet"]).env("RADSCATTER_OUT", &out).current_dir(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("summary.json").exists());
    assert!(!tmp.path().join("radscatter-out").exists());
}

// [TRIVIAL] --quiet prints nothing on success
#[test]
fn quiet() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let o = run(&["validate", "--quiet", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

fn without_threads(mut v: Value) -> Value {
    v["environment"].as_object_mut().unwrap().remove("threads");
    v
}

// [DERIVED] the bundle does not depend on the worker count
#[test]
fn thread_count_invariance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "h.cfg", SMALL_HOMOGENEOUS);
    let mut bundles = Vec::new();
    for n in ["1", "4"] {
        let out = tmp.path().join(format!("t{n}"));
        let o = run(&[
            "homogeneous",
            "--config",
            cfg.to_str().unwrap(),
            "--threads",
            n,
            "--out",
            out.to_str().unwrap(),
            "--quiet",
        ]);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
        bundles.push(out);
    }
    for f in ["series.csv", "named_series.csv"] {
        let a = std::fs::read(bundles[0].join(f)).unwrap();
        let b = std::fs::read(bundles[1].join(f)).unwrap();
        assert!(a == b, "{f} differs between thread counts");
    }
    assert_eq!(without_threads(summary(&bundles[0])), without_threads(summary(&bundles[1])));
    assert_eq!(summary(&bundles[1])["environment"]["threads"], 4);
}

// [TRIVIAL] plot scripts only touch files inside the bundle
#[test]
fn plot_paths_in_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "h.cfg", SMALL_HOMOGENEOUS);
    let out = tmp.path().join("b");
    run(&["homogeneous", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    let plots = out.join("plots");
    let scripts: Vec<PathBuf> = std::fs::read_dir(&plots).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(!scripts.is_empty());
    for p in scripts {
        let text = std::fs::read_to_string(&p).unwrap();
        for q in text.split('\'').skip(1).step_by(2).filter(|q| q.ends_with(".csv") || q.ends_with(".png")) {
            assert!(!q.starts_with('/') && !q.contains(".."), "{}: {q}", p.display());
            assert!(q.starts_with("plots/") || !q.contains('/'), "{}: {q}", p.display());
        }
    }
}
