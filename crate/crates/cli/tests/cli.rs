use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pathsift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathsift"))
        .args(args)
        .env_remove("PATHSIFT_SEED")
        .env_remove("PATHSIFT_PRA_SEED")
        .env_remove("PATHSIFT_LABEL_SEED")
        .env_remove("PATHSIFT_EVAL_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = pathsift(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    ok(&["synth", "--out-dir", s(dir), "--seed", seed]);
}

#[test]
fn missing_kb_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    let out = pathsift(&["kg-stats", "--kb", s(&missing)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.tsv"), "{err}");
}

#[test]
fn unknown_flag_is_rejected() {
    assert!(!pathsift(&["kg-stats", "--kb", "x", "--frobnicate"]).status.success());
    assert!(!pathsift(&["no-such-command"]).status.success());
}

#[test]
fn malformed_kb_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("kb.tsv");
    std::fs::write(&kb, "a\tr\tb\nbroken line\n").unwrap();
    let out = pathsift(&["kg-stats", "--kb", s(&kb)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn synth_then_run_all() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "1");
    for f in ["kb.tsv", "corpus.jsonl", "truth.json", "spec.json", "manifest.toml"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let table = ok(&["run-all", "--manifest", s(&dir.path().join("manifest.toml"))]);
    assert!(table.contains("PRA-reduced"), "{table}");
    let run = dir.path().join("run");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(run.join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["relations"].as_array().unwrap().len(), 1);
    assert!(run.join("summaries/evaluate.json").exists());
    assert!(run.join("process_involves_product/fn_report.json").exists());
}

#[test]
fn pra_paths_are_listed_by_weight() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "2");
    let model = dir.path().join("model.txt");
    ok(&["pra-train", "--kb", s(&dir.path().join("kb.tsv")), "--relation", "process_involves_product", "--out", s(&model)]);
    let text = ok(&["pra-paths", "--model", s(&model)]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("Relation: process_involves_product"));
    assert_eq!(lines.next().map(str::trim), Some("Weight  Path"));
    let weights: Vec<f64> = lines.map(|l| l.split_whitespace().next().unwrap().parse().unwrap()).collect();
    assert!(!weights.is_empty());
    assert!(weights.windows(2).all(|w| w[0] >= w[1]), "{weights:?}");

    let positive = ok(&["pra-paths", "--model", s(&model), "--positive"]);
    let shown: Vec<&str> = positive.lines().skip(2).collect();
    assert!(!shown.is_empty() && shown.len() <= weights.len());
    // Two-decimal display can round a tiny positive weight to 0.00.
    assert!(shown.iter().all(|l| l.split_whitespace().next().unwrap().parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn summaries_are_stable_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "3");
    let out = dir.path().join("labeled.jsonl");
    let (kb, corpus) = (dir.path().join("kb.tsv"), dir.path().join("corpus.jsonl"));
    let args = [
        "label",
        "--kb",
        s(&kb),
        "--corpus",
        s(&corpus),
        "--relation",
        "process_involves_product",
        "--out",
        s(&out),
    ];
    ok(&args);
    let first = std::fs::read(dir.path().join("labeled.jsonl.summary.json")).unwrap();
    ok(&args);
    let second = std::fs::read(dir.path().join("labeled.jsonl.summary.json")).unwrap();
    assert_eq!(first, second);
    let summary: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(summary["stage"], "label");
    assert_eq!(summary["inputs"].as_object().unwrap().len(), 2);
    assert_eq!(summary["outputs"][s(&out)].as_str().unwrap().len(), 64);
}

#[test]
fn stage_by_stage_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "4");
    let kb = d.join("kb.tsv");
    let p = |f: &str| d.join(f);
    let rel = "process_involves_product";
    ok(&["label", "--kb", s(&kb), "--corpus", s(&p("corpus.jsonl")), "--relation", rel, "--out", s(&p("labeled.jsonl"))]);
    ok(&["adjust-bias", "--kb", s(&kb), "--dataset", s(&p("labeled.jsonl")), "--ratio", "2", "--out", s(&p("adjusted.jsonl"))]);
    ok(&["pra-train", "--kb", s(&kb), "--relation", rel, "--out", s(&p("model.txt"))]);
    ok(&["fn-detect", "--kb", s(&kb), "--model", s(&p("model.txt")), "--dataset", s(&p("adjusted.jsonl")), "--out", s(&p("fn.json"))]);
    ok(&["reduce", "--kb", s(&kb), "--dataset", s(&p("adjusted.jsonl")), "--report", s(&p("fn.json")), "--out", s(&p("pra.jsonl"))]);
    ok(&[
        "random-reduce",
        "--kb",
        s(&kb),
        "--dataset",
        s(&p("adjusted.jsonl")),
        "--reference",
        s(&p("pra.jsonl")),
        "--seed",
        "9",
        "--out",
        s(&p("random.jsonl")),
    ]);
    ok(&[
        "train-extractor",
        "--kb",
        s(&kb),
        "--dataset",
        s(&p("pra.jsonl")),
        "--out",
        s(&p("extractor.txt")),
        "--predict",
        s(&p("random.jsonl")),
        "--predictions",
        s(&p("preds.csv")),
    ]);

    let count = |f: &str, label: &str| {
        std::fs::read_to_string(p(f)).unwrap().lines().filter(|l| l.contains(&format!("\"label\":\"{label}\""))).count()
    };
    let (pos, neg) = (count("adjusted.jsonl", "positive"), count("adjusted.jsonl", "negative"));
    assert_eq!(neg, 2 * pos);
    assert_eq!(count("pra.jsonl", "positive"), pos);
    assert_eq!(count("random.jsonl", "positive"), pos);
    assert_eq!(count("random.jsonl", "negative"), count("pra.jsonl", "negative"));
    let fn_report: Value = serde_json::from_str(&std::fs::read_to_string(p("fn.json")).unwrap()).unwrap();
    assert!(!fn_report["flagged"].as_array().unwrap().is_empty());
    assert!(count("pra.jsonl", "negative") < neg);
    let csv = std::fs::read_to_string(p("preds.csv")).unwrap();
    assert!(csv.starts_with("pair_first,pair_second,probability,label\n"));
    assert!(csv.lines().count() > 1);
}

#[test]
fn bias_below_the_request_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "5");
    let kb = d.join("kb.tsv");
    ok(&[
        "label",
        "--kb",
        s(&kb),
        "--corpus",
        s(&d.join("corpus.jsonl")),
        "--relation",
        "process_involves_product",
        "--out",
        s(&d.join("l.jsonl")),
    ]);
    let out = pathsift(&["adjust-bias", "--kb", s(&kb), "--dataset", s(&d.join("l.jsonl")), "--ratio", "100", "--out", s(&d.join("a.jsonl"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("adjust-bias") && err.contains("oversampling"), "{err}");
}
