use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn shadowspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shadowspec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SADDLE: &str = r#"{"kind":"dense","dim":2,"entries":[[2,0],[0,0],[0,0],[0.5,0]]}"#;
const IDENTITY: &str = r#"{"kind":"dense","dim":2,"entries":[[1,0],[0,0],[0,0],[1,0]]}"#;
const SHIFT_T: &str = r#"{"kind":"shift","direction":"forward","weight_pos":2.8284271247461903,"weight_neg":0.35355339059327373,"crossover":0}"#;

#[test]
fn analyze_writes_a_deterministic_report() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "a.json", SADDLE);
    let out = dir.path().join("r.json");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = shadowspec(&[
            "analyze",
            "--input",
            &input,
            "--output",
            out.to_str().unwrap(),
            "--seed",
            "9",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(fs::read(&out).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    let a = &runs[0];
    let doc: Value = serde_json::from_slice(a).unwrap();
    assert_eq!(doc["report"]["verdicts"]["hyperbolic"], true);
    assert_eq!(doc["config"]["seed"], 9);
    // no temporary files left behind
    let names: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn analyze_prints_to_stdout_without_output() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "t.json", SHIFT_T);
    let o = shadowspec(&["analyze", "--input", &input]);
    assert!(o.status.success());
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["report"]["verdicts"]["uniformly_expansive"], true);
    assert_eq!(doc["report"]["verdicts"]["shadowing"], false);
}

#[test]
fn shadow_succeeds_on_a_saddle_and_fails_the_certificate_on_the_identity() {
    let dir = TempDir::new().unwrap();
    let saddle = write(dir.path(), "s.json", SADDLE);
    let o = shadowspec(&[
        "shadow", "--input", &saddle, "--window", "20", "--delta", "1e-3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["checks"]["within_bound"], true);
    assert_eq!(doc["checks"]["recurrence_residual_ok"], true);

    let identity = write(dir.path(), "i.json", IDENTITY);
    let o = shadowspec(&["shadow", "--input", &identity, "--window", "5"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn probe_writes_csv() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "s.json", SADDLE);
    let out = dir.path().join("gains.csv");
    let o = shadowspec(&[
        "probe",
        "--input",
        &input,
        "--window",
        "8",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,gain"));
    let ns: Vec<usize> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ns, vec![1, 2, 4, 8]);
}

#[test]
fn example_writes_report_and_sweeps() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ex.json");
    let o = shadowspec(&["example17", "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!((doc["radius_outer"].as_f64().unwrap() - 8f64.sqrt()).abs() < 1e-12);
    assert!(
        fs::read_to_string(dir.path().join("ex_bgain.csv"))
            .unwrap()
            .lines()
            .count()
            > 1
    );
    assert!(
        fs::read_to_string(dir.path().join("ex_trend.csv"))
            .unwrap()
            .lines()
            .count()
            > 1
    );
}

#[test]
fn input_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", "{not json");
    assert_eq!(
        shadowspec(&["analyze", "--input", &bad]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("absent.json");
    assert_eq!(
        shadowspec(&["analyze", "--input", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let shift = write(dir.path(), "t.json", SHIFT_T);
    assert_eq!(
        shadowspec(&["analyze", "--input", &shift, "--kind", "dense"])
            .status
            .code(),
        Some(2)
    );
    let saddle = write(dir.path(), "s.json", SADDLE);
    assert_eq!(
        shadowspec(&["analyze", "--input", &saddle, "--tol", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        shadowspec(&["probe", "--input", &saddle, "--q", "0.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(shadowspec(&["analyze", "--bogus"]).status.code(), Some(2));
}

#[test]
fn singular_input_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let sing = write(
        dir.path(),
        "z.json",
        r#"{"kind":"dense","dim":2,"entries":[[1,0],[2,0],[2,0],[4,0]]}"#,
    );
    assert_eq!(
        shadowspec(&["analyze", "--input", &sing]).status.code(),
        Some(3)
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "s.json", SADDLE);
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_shadowspec"))
            .args(["shadow", "--input", &input, "--window", "10", "--seed", "3"])
            .env("SHADOWSPEC_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("4"));
}
