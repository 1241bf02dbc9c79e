use std::path::Path;
use std::process::{Command, Output};

fn selfaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfaug"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, seed: &str) -> std::path::PathBuf {
    let sim = dir.join("sim");
    let o = selfaug(&["simulate", "--seed", seed, "--out", p(&sim)]);
    assert!(o.status.success(), "{}", stderr(&o));
    sim
}

#[test]
fn simulate_augment_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "3");
    assert!(sim.join("manifest.json").is_file());
    assert!(sim.join("segment_01.emb").is_file());
    assert!(sim.join("enroll_0.5s.enr").is_file());

    let aug = dir.path().join("aug");
    let o = selfaug(&[
        "augment",
        "--threshold",
        "0.5",
        "--manifest",
        p(&sim),
        "--lambda",
        "0.2",
        "--out",
        p(&aug),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = std::fs::read_to_string(aug.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 11);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(aug.join("trace.json")).unwrap()).unwrap();
    assert_eq!(side["rule"], "weighted");
    assert_eq!(side["lambda"], 0.2);

    let eval = dir.path().join("eval");
    let o = selfaug(&[
        "evaluate",
        "--manifest",
        p(&sim.join("manifest.json")),
        "--trace",
        p(&aug.join("trace.csv")),
        "--out",
        p(&eval),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["segments"].as_array().unwrap().len(), 10);
    assert_eq!(m["segments"][0]["reference_n"], 1);
    assert!(m["pooled"]["f1"].as_f64().unwrap() >= 0.0);
    assert!(eval.join("detections/segment_10.csv").is_file());
    assert_eq!(
        std::fs::read_to_string(eval.join("metrics.csv"))
            .unwrap()
            .lines()
            .count(),
        11
    );
}

#[test]
fn evaluate_without_trace_uses_enrollment() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "4");
    let eval = dir.path().join("eval");
    let o = selfaug(&[
        "evaluate",
        "--manifest",
        p(&sim),
        "--enroll-tag",
        "full",
        "--out",
        p(&eval),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["reference"], "enrollment");
    assert_eq!(m["enroll_tag"], "full");
}

#[test]
fn sweep_writes_long_form_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = selfaug(&[
        "sweep",
        "--threshold",
        "0.5",
        "--seeds",
        "2",
        "--tags",
        "0.5s,full",
        "--rules",
        "weighted",
        "--lambdas",
        "0.1,0.3",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("seed,rule,lambda,tag,segment,reference_n"));
    assert_eq!(lines.count(), 2 * 2 * 2 * 10);
}

#[test]
fn sweep_over_saved_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "5");
    let out = dir.path().join("sweep");
    let o = selfaug(&[
        "sweep",
        "--threshold",
        "0.5",
        "--manifest",
        p(&sim),
        "--lambdas",
        "0.1",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = std::fs::read_to_string(out.join("sweep.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(rows, 4 * 4 * 10);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"simulation": {"num_segments": 3, "frames_per_segment": 40, "dim": 16}, "out": "ignored"}"#,
    )
    .unwrap();
    let sim = dir.path().join("sim");
    let o = selfaug(&["simulate", "--config", p(&cfg), "--out", p(&sim)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sim.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["segments"].as_array().unwrap().len(), 3);
}

#[test]
fn usage_errors_exit_2() {
    let o = selfaug(&["simulate", "--rule", "mean", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[Usage]:"));
    let o = selfaug(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_are_single_coded_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(Vec<String>, &str)> = vec![
        (
            vec![
                "simulate".into(),
                "--lambda".into(),
                "1.5".into(),
                "--out".into(),
                "x".into(),
            ],
            "InvalidConfig",
        ),
        (vec!["simulate".into()], "InvalidConfig"),
        (
            vec![
                "augment".into(),
                "--threshold".into(),
                "0.5".into(),
                "--manifest".into(),
                p(&dir.path().join("missing")).into(),
                "--out".into(),
                "x".into(),
            ],
            "Io",
        ),
    ];
    for (args, code) in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = selfaug(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = stderr(&o);
        assert!(
            err.starts_with(&format!("error[{code}]:")),
            "{args:?}: {err}"
        );
        assert_eq!(err.trim_end().lines().count(), 1);
    }
}

#[test]
fn augment_requires_a_stated_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "9");
    let aug = dir.path().join("aug");
    let o = selfaug(&["augment", "--manifest", p(&sim), "--out", p(&aug)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[InvalidConfig]:"));

    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"selection": {"threshold": 0.4}}"#).unwrap();
    let o = selfaug(&[
        "augment",
        "--config",
        p(&cfg),
        "--manifest",
        p(&sim),
        "--out",
        p(&aug),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"fusion": {"rule": "weighted", "lamda": 0.2}}"#).unwrap();
    let o = selfaug(&["simulate", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("lamda"), "{}", stderr(&o));
}

#[test]
fn corrupt_segment_names_code_and_offset() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "6");
    let seg = sim.join("segment_02.emb");
    let mut bytes = std::fs::read(&seg).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&seg, bytes).unwrap();
    let o = selfaug(&[
        "augment",
        "--threshold",
        "0.5",
        "--manifest",
        p(&sim),
        "--out",
        p(&dir.path().join("aug")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(
        err.starts_with("error[TruncatedFile]:") && err.contains("offset"),
        "{err}"
    );
}

#[test]
fn cat_rule_rejects_multi_segment_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "8");
    let o = selfaug(&[
        "augment",
        "--threshold",
        "0.5",
        "--manifest",
        p(&sim),
        "--rule",
        "cat",
        "--out",
        p(&dir.path().join("a")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error["), "{}", stderr(&o));
}

#[test]
fn help_and_version() {
    let o = selfaug(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["simulate", "augment", "evaluate", "sweep"] {
        assert!(text.contains(cmd));
    }
    assert!(selfaug(&["--version"]).status.success());
}
