use std::path::Path;
use std::process::{Command, Output};

fn nenmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nenmf"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs a tiny problem; `overrides` replace the default flag values.
fn small_run(out: &Path, method: &str, overrides: &[(&str, &str)]) -> Output {
    let mut flags = vec![
        ("--n", "60"),
        ("--m", "50"),
        ("--p", "4"),
        ("--nu", "8"),
        ("--q", "2"),
        ("--seeds", "3,4"),
        ("--max-outer", "10"),
        ("--method", method),
        ("--out", out.to_str().unwrap()),
    ];
    for &(flag, value) in overrides {
        match flags.iter_mut().find(|(f, _)| *f == flag) {
            Some(slot) => slot.1 = value,
            None => flags.push((flag, value)),
        }
    }
    let mut args = vec!["run"];
    for (flag, value) in flags {
        args.extend([flag, value]);
    }
    nenmf(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = nenmf(&[
            "generate",
            "--n",
            "30",
            "--m",
            "20",
            "--p",
            "3",
            "--seeds",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["X.nmfb", "G_true.nmfb", "F_true.nmfb", "meta.json"] {
        let read = |name: &str| {
            std::fs::read(dir.path().join(name).join("instance_seed9").join(file)).unwrap()
        };
        assert_eq!(read("a"), read("b"), "{file}");
    }
}

#[test]
fn run_writes_traces_summary_and_spec() {
    let dir = tempfile::tempdir().unwrap();
    let o = small_run(dir.path(), "subspace", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for file in [
        "runspec.json",
        "summary.csv",
        "trace_subspace_seed3.csv",
        "trace_subspace_seed4.csv",
    ] {
        assert!(dir.path().join(file).is_file(), "{file} missing");
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().last().unwrap().starts_with("median,"));
}

#[test]
fn sketch_smaller_than_rank_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = small_run(dir.path(), "gaussian", &[("--nu", "3")]);
    assert!(!o.status.success());
    let msg = stderr(&o);
    assert!(msg.contains("nu >= p"), "{msg}");
}

#[test]
fn compare_against_itself_has_unit_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("v");
    assert!(small_run(&run, "vanilla", &[]).status.success());
    let csv = dir.path().join("cmp.csv");
    let o = nenmf(&[
        "compare",
        run.to_str().unwrap(),
        run.to_str().unwrap(),
        "--target",
        "0.5",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(csv).unwrap();
    for line in text.lines().skip(1) {
        assert!(line.ends_with(",1.000000"), "{line}");
    }
}

#[test]
fn compare_rejects_different_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(small_run(&a, "vanilla", &[]).status.success());
    assert!(small_run(&b, "vanilla", &[("--n", "70")]).status.success());
    let o = nenmf(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("not comparable"), "{}", stderr(&o));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.conf");
    std::fs::write(&config, "# small problem\nn = 40\nm = 40\nmax_inner = 50\n").unwrap();
    let out = dir.path().join("run");
    let o = small_run(&out, "vanilla", &[("--config", config.to_str().unwrap())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let spec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("runspec.json")).unwrap()).unwrap();
    assert_eq!(spec["n"], 60);
    assert_eq!(spec["m"], 50);
    assert_eq!(spec["max_inner"], 50);
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "rank = 3\n").unwrap();
    let o = nenmf(&["run", "--config", config.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("rank"), "{}", stderr(&o));
}
