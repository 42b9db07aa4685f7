use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn noteprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noteprobe"))
        .args(args)
        .env_remove("NOTEPROBE_TOKEN")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic corpus of `n` notes in a fresh directory.
fn corpus(n: usize) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let notes = dir.path().join("notes.jsonl");
    let out = noteprobe(&["synth", "--out", s(&notes), "--notes", &n.to_string(), "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (dir, notes)
}

fn mock_model(dir: &Path) -> PathBuf {
    let path = dir.join("mock.json");
    fs::write(
        &path,
        r#"{"base_logits": {"mortality": -1.0, "Hypertension": 0.0},
            "lexicon": [{"token": "transgender", "label": "mortality", "weight": 0.4}]}"#,
    )
    .unwrap();
    path
}

fn jsonl_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".jsonl"))
        .collect();
    names.sort();
    names
}

#[test]
fn generate_writes_one_file_per_group() {
    let (dir, notes) = corpus(20);
    let runs = dir.path().join("runs");
    for (name, groups) in [("gender", 3), ("age", 73), ("ethnicity", 5)] {
        let out = noteprobe(&["generate", "--input", s(&notes), "--characteristic", name, "--out", s(&runs)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let files = jsonl_files(&runs.join(name));
        assert_eq!(files.len(), groups, "{name}: {files:?}");
        assert!(runs.join(name).join("excluded.json").exists());
        assert!(runs.join(name).join("oplog.json").exists());
    }
    assert_eq!(jsonl_files(&runs.join("gender")), ["female.jsonl", "male.jsonl", "transgender.jsonl"]);
}

#[test]
fn unknown_characteristic_lists_builtins() {
    let (dir, notes) = corpus(3);
    let out = noteprobe(&[
        "generate",
        "--input",
        s(&notes),
        "--characteristic",
        "religion",
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("gender") && err.contains("age") && err.contains("ethnicity"), "{err}");
}

#[test]
fn dumped_spec_drives_generation() {
    let (dir, notes) = corpus(10);
    let out = noteprobe(&["dump-spec", "ethnicity"]);
    assert_eq!(code(&out), 0);
    let mut spec: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(spec["groups"].as_array().unwrap().len(), 5);

    // drop one group and rename the characteristic
    spec["name"] = "ethnicity_small".into();
    spec["groups"].as_array_mut().unwrap().pop();
    let path = dir.path().join("spec.json");
    fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    let runs = dir.path().join("runs");
    let out = noteprobe(&["generate", "--input", s(&notes), "--spec", s(&path), "--out", s(&runs)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(jsonl_files(&runs.join("ethnicity_small")).len(), 4);
}

#[test]
fn mock_predictions_cover_every_sample() {
    let (dir, notes) = corpus(10);
    let runs = dir.path().join("runs");
    let mock = mock_model(dir.path());
    let base = ["--characteristic", "gender", "--out", s(&runs)];
    let out = noteprobe(&[&["generate", "--input", s(&notes)][..], &base].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = noteprobe(&[&["predict", "--mock", s(&mock)][..], &base].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let pred_dir = runs.join("gender").join("predictions");
    let mut records = 0;
    for file in jsonl_files(&pred_dir) {
        for line in fs::read_to_string(pred_dir.join(file)).unwrap().lines() {
            let v: Value = serde_json::from_str(line).unwrap();
            assert!(v["probabilities"]["mortality"].is_f64());
            records += 1;
        }
    }
    assert_eq!(records, 30);

    // a predictions file is an equivalent source
    let merged = dir.path().join("all.jsonl");
    let all: String = jsonl_files(&pred_dir)
        .iter()
        .map(|f| fs::read_to_string(pred_dir.join(f)).unwrap())
        .collect();
    fs::write(&merged, all).unwrap();
    let before = fs::read(pred_dir.join("male.jsonl")).unwrap();
    let out = noteprobe(&[&["predict", "--predictions", s(&merged)][..], &base].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(pred_dir.join("male.jsonl")).unwrap(), before);
}

#[test]
fn unreachable_endpoint_exits_3() {
    let (dir, notes) = corpus(4);
    let runs = dir.path().join("runs");
    let base = ["--characteristic", "gender", "--out", s(&runs)];
    assert_eq!(code(&noteprobe(&[&["generate", "--input", s(&notes)][..], &base].concat())), 0);
    let out = noteprobe(
        &[&["predict", "--endpoint", "http://127.0.0.1:9", "--timeout-ms", "500"][..], &base].concat(),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("transport error"));
}

#[test]
fn model_source_must_be_unique() {
    let (dir, notes) = corpus(4);
    let runs = dir.path().join("runs");
    let mock = mock_model(dir.path());
    let out = noteprobe(&[
        "run",
        "--input",
        s(&notes),
        "--characteristic",
        "gender",
        "--out",
        s(&runs),
        "--mock",
        s(&mock),
        "--endpoint",
        "http://127.0.0.1:9",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("exactly one"));
}

#[test]
fn stages_need_their_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    for stage in ["analyze", "report"] {
        let out = noteprobe(&[stage, "--characteristic", "gender", "--out", s(&runs)]);
        assert_eq!(code(&out), 2, "{stage}: {}", stderr(&out));
    }
    let out = noteprobe(&["generate", "--characteristic", "gender", "--out", s(&runs)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--input"));
}

#[test]
fn full_run_writes_every_artifact() {
    let (dir, notes) = corpus(120);
    let runs = dir.path().join("runs");
    let mock = mock_model(dir.path());
    // settings from a config file, one of them overridden on the command line
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        format!(
            r#"{{"input": "notes.jsonl", "characteristic": "ethnicity", "mock": "{}", "out": "runs", "top_k": 1}}"#,
            s(&mock)
        ),
    )
    .unwrap();
    let out = noteprobe(&["run", "--config", s(&config), "--characteristic", "gender"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let g = runs.join("gender");
    for f in [
        "analysis.json",
        "means.csv",
        "deviations.csv",
        "heatmap.svg",
        "table.md",
        "table.csv",
        "baseline.json",
        "baseline_counts.csv",
        "baseline_deviations.csv",
        "baseline_heatmap.svg",
    ] {
        assert!(g.join(f).exists(), "{f} missing");
    }
    assert!(!runs.join("ethnicity").exists());
    assert!(notes.exists());

    // deviations of each label sum to zero
    let csv = fs::read_to_string(g.join("deviations.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let sum: f64 = line.split(',').skip(1).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!(sum.abs() < 1e-9, "{line}");
    }
    // top_k from the config file limits the heatmap rows
    let svg = fs::read_to_string(g.join("heatmap.svg")).unwrap();
    assert_eq!(svg.matches("<rect x=").count(), 3);

    let analysis: Value = serde_json::from_str(&fs::read_to_string(g.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(analysis["groups"], serde_json::json!(["female", "male", "transgender"]));
    assert!(analysis["deviations"]["transgender"]["mortality"].as_f64().unwrap() > 0.0);
    let table = fs::read_to_string(g.join("table.md")).unwrap();
    assert!(table.contains("| transgender | **"), "{table}");
}

#[test]
fn age_run_draws_the_sweep() {
    let (dir, notes) = corpus(30);
    let runs = dir.path().join("runs");
    let mock = mock_model(dir.path());
    let out = noteprobe(&[
        "run",
        "--input",
        s(&notes),
        "--characteristic",
        "age",
        "--mock",
        s(&mock),
        "--out",
        s(&runs),
        "--sequential",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = fs::read_to_string(runs.join("age").join("age_plot.svg")).unwrap();
    assert!(svg.contains("&gt;90"));
    assert!(svg.contains("stroke-dasharray"));
}

#[test]
fn selftest_passes() {
    let out = noteprobe(&["selftest", "--notes", "150", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("PASS") && !text.contains("FAIL"), "{text}");
}
