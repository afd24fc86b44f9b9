use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sensorprint_cli::{CliError, Dataset};

const SWEEP: &str = r#"{"population": 8,
  "ranges": {"noise": {"accel_sigma": 0.02, "placement_sigma": 0.0185, "offset_drift_sigma": 0.0092}},
  "experiment": {"kind": "accel_sweep", "m_sz": [1, 10, 100, 300, 1000, 10000]}}"#;

const ENTROPY: &str = r#"{"population": 30,
  "ranges": {"noise": {"accel_sigma": 0.02, "placement_sigma": 0.0185, "offset_drift_sigma": 0.0092}},
  "experiment": {"kind": "accel_entropy"}}"#;

fn sensorprint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sensorprint"))
        .args(args)
        .env_remove("SENSORPRINT_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_csv_has_one_row_per_m_sz() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", SWEEP);
    let csv = stdout(&sensorprint(&["sweep", "--config", s(&cfg), "--seed", "3", "--format", "csv"]));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "m_sz,correct,evaluated,rate");
    let m: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(m, ["1", "10", "100", "300", "1000", "10000"]);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "entropy.json", ENTROPY);
    let run = |tag: &str| {
        let ds = dir.path().join(format!("{tag}.jsonl"));
        let csv = stdout(&sensorprint(&[
            "entropy", "--config", s(&cfg), "--seed", "4", "--format", "csv", "--dataset", s(&ds),
        ]));
        (csv, std::fs::read(ds).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn entropy_is_printed_with_three_decimals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "entropy.json", ENTROPY);
    let text = stdout(&sensorprint(&["entropy", "--config", s(&cfg), "--seed", "1"]));
    let line = text.lines().find(|l| l.starts_with("entropy: ")).expect("entropy line");
    let value = line.trim_start_matches("entropy: ").trim_end_matches(" bits");
    assert_eq!(value.split('.').nth(1).map(str::len), Some(3), "{line}");
}

#[test]
fn staged_pipeline_matches_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", SWEEP);
    let devices = dir.path().join("devices.jsonl");
    let prints = dir.path().join("prints.jsonl");
    stdout(&sensorprint(&["simulate", "--config", s(&cfg), "--seed", "6", "--out", s(&devices)]));
    stdout(&sensorprint(&[
        "accel-fp", "--config", s(&cfg), "--seed", "6", "--input", s(&devices), "--out", s(&prints),
    ]));
    let staged = stdout(&sensorprint(&["sweep", "--config", s(&cfg), "--seed", "6", "--input", s(&prints)]));
    let direct = stdout(&sensorprint(&["run", "--config", s(&cfg), "--seed", "6"]));
    assert_eq!(staged, direct);
}

#[test]
fn report_renders_stored_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", SWEEP);
    let json = dir.path().join("result.json");
    stdout(&sensorprint(&["run", "--config", s(&cfg), "--seed", "2", "--format", "json", "--out", s(&json)]));
    let from_report = stdout(&sensorprint(&["report", "--input", s(&json), "--format", "csv"]));
    let direct = stdout(&sensorprint(&["run", "--config", s(&cfg), "--seed", "2", "--format", "csv"]));
    assert_eq!(from_report, direct);
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", SWEEP);
    let with_env = |value: &str, extra: &[&str]| {
        let mut args = vec!["run", "--config", s(&cfg), "--format", "json"];
        args.extend_from_slice(extra);
        let out = Command::new(env!("CARGO_BIN_EXE_sensorprint"))
            .args(&args)
            .env("SENSORPRINT_SEED", value)
            .output()
            .unwrap();
        stdout(&out)
    };
    let flagged = stdout(&sensorprint(&["run", "--config", s(&cfg), "--format", "json", "--seed", "5"]));
    assert_eq!(with_env("5", &[]), flagged);
    assert_eq!(with_env("9", &["--seed", "5"]), flagged);
    assert!(flagged.contains("\"seed\": 5"));

    let seeded = write(dir.path(), "seeded.json", &SWEEP.replacen("{", r#"{"seed": 5, "#, 1));
    let out = Command::new(env!("CARGO_BIN_EXE_sensorprint"))
        .args(["run", "--config", s(&seeded), "--format", "json"])
        .env("SENSORPRINT_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(stdout(&out), flagged);

    let bad = Command::new(env!("CARGO_BIN_EXE_sensorprint"))
        .args(["run", "--config", s(&cfg)])
        .env("SENSORPRINT_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "unknown.json", &SWEEP.replacen("{", r#"{"colour": 1, "#, 1));
    let out = sensorprint(&["run", "--config", s(&unknown)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let invalid = write(dir.path(), "invalid.json", &SWEEP.replace("\"population\": 8", "\"population\": 0"));
    assert_eq!(sensorprint(&["run", "--config", s(&invalid)]).status.code(), Some(1));

    let cfg = write(dir.path(), "sweep.json", SWEEP);
    let wrong_kind = sensorprint(&["entropy", "--config", s(&cfg)]);
    assert_eq!(wrong_kind.status.code(), Some(1));

    assert_eq!(sensorprint(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(sensorprint(&["run", "--config", s(&dir.path().join("missing.json"))]).status.code(), Some(2));
    let unwritable = dir.path().join("no-such-dir").join("out.txt");
    assert_eq!(
        sensorprint(&["run", "--config", s(&cfg), "--out", s(&unwritable)]).status.code(),
        Some(2)
    );
}

#[test]
fn malformed_record_names_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", SWEEP);
    let text = stdout(&sensorprint(&["accel-fp", "--config", s(&cfg), "--seed", "1"]));
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let target = lines
        .iter()
        .position(|l| l.contains("\"kind\":\"submission\""))
        .expect("submission record");
    let mut record: serde_json::Value = serde_json::from_str(&lines[target]).unwrap();
    record["o_z"] = serde_json::Value::String("abc".into());
    lines[target] = record.to_string();
    let broken = write(dir.path(), "broken.jsonl", &(lines.join("\n") + "\n"));

    let out = sensorprint(&["sweep", "--config", s(&cfg), "--input", s(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(&format!("line {}", target + 1)), "{stderr}");
    assert!(stderr.contains("o_z"), "{stderr}");

    match Dataset::load(&broken) {
        Err(CliError::Record { line, field, .. }) => {
            assert_eq!(line, target + 1);
            assert_eq!(field, "o_z");
        }
        other => panic!("expected a record error, got {other:?}"),
    }
}

#[test]
fn empty_file_is_an_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.jsonl", "");
    let ds = Dataset::load(&empty).unwrap();
    assert!(ds.is_empty());
    assert_eq!(ds.to_jsonl(), "");
}

#[test]
fn dangling_reference_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", SWEEP);
    let text = stdout(&sensorprint(&["accel-fp", "--config", s(&cfg), "--seed", "1"]));
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| !(l.contains("\"kind\":\"device\"") && l.contains("\"device_id\":0,")))
        .collect();
    let broken = write(dir.path(), "dangling.jsonl", &(kept.join("\n") + "\n"));
    let out = sensorprint(&["sweep", "--config", s(&cfg), "--input", s(&broken)]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
