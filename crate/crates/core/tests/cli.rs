//! The `eafd` binary end to end: exit codes and output formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eafd::eval::MetricsReport;
use eafd::graph::from_canonical_text;

fn eafd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eafd")).args(args).env_remove("EAFD_KB_DIR").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = eafd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/d2_graph.txt")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let help = ok(&["--help"]);
    for cmd in ["validate", "ingest", "extract", "kb", "generate", "evaluate", "baseline", "serve"] {
        assert!(help.contains(cmd), "{cmd} missing from\n{help}");
    }
}

#[test]
fn validate_reports_and_exit_codes() {
    let text = ok(&["validate", s(&golden())]);
    assert_eq!(text.lines().last(), Some("PASS"), "{text}");
    let report: serde_json::Value = serde_json::from_str(&ok(&["validate", s(&golden()), "--format", "report-v1"])).unwrap();
    assert_eq!(report["format"], "report-v1");
    assert_eq!(report["pass"], true);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    let orphan = r#"{"canonical_key":"stray","criticality":"supporting","goal":"Stray","id":"x-a","lane":"maker","origin":"maker","record":"node","status":"unevaluated","type":"action"}"#;
    let mut lines: Vec<String> = std::fs::read_to_string(golden()).unwrap().lines().map(String::from).collect();
    lines.insert(1, orphan.into());
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let out = eafd(&["validate", s(&bad), "--format", "report-v1"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
    assert!(report["violations"].as_array().unwrap().iter().any(|v| v.to_string().contains("x-a")), "{report}");

    std::fs::write(&bad, "not a graph").unwrap();
    assert_eq!(eafd(&["validate", s(&bad)]).status.code(), Some(2));
    assert_eq!(eafd(&["validate", "/nonexistent/graph.txt"]).status.code(), Some(2));
}

#[test]
fn corpus_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"n_cases": 120, "seed": 11}"#).unwrap();
    let corpus = dir.path().join("corpus");
    ok(&["generate", "--spec", s(&spec), "--out", s(&corpus), "--split", "0.75"]);
    let train = corpus.join("train");
    let test = corpus.join("test");
    let count = |p: &Path| std::fs::read_dir(p).unwrap().count();
    assert_eq!((count(&train), count(&test)), (90, 30));

    let record = std::fs::read_dir(&train).unwrap().map(|e| e.unwrap().path()).min().unwrap();
    let full = from_canonical_text(&ok(&["extract", s(&record)])).unwrap();
    let maker = from_canonical_text(&ok(&["extract", s(&record), "--maker-only"])).unwrap();
    assert!(maker.node_count() < full.node_count());

    let kb = dir.path().join("kb");
    ok(&["ingest", s(&train), "--kb", s(&kb)]);
    let stats: serde_json::Value = serde_json::from_str(&ok(&["kb", "stats", "--kb", s(&kb)])).unwrap();
    assert_eq!(stats["count"], 90);
    // Re-ingesting the same corpus is rejected as duplicates.
    assert_ne!(eafd(&["ingest", s(&train), "--kb", s(&kb)]).status.code(), Some(0));

    let hits = ok(&["kb", "query", "--kb", s(&kb), "--case", s(&record), "--k", "3"]);
    // One tab-separated line per hit: score, case id, verdict, summary.
    let hits: Vec<Vec<&str>> = hits.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(hits.len(), 3);
    assert_eq!(hits[0][1], record.file_stem().unwrap().to_str().unwrap());
    assert_eq!(hits[0][0].parse::<f64>().unwrap(), 1.0);
    assert!(hits.windows(2).all(|w| w[0][0].parse::<f64>().unwrap() >= w[1][0].parse::<f64>().unwrap()));
    assert!(!ok(&["kb", "query", "--kb", s(&kb), "--text", "expired product"]).is_empty());

    let report_path = dir.path().join("metrics.json");
    let predictions = dir.path().join("predictions.jsonl");
    ok(&["evaluate", "--kb", s(&kb), "--test", s(&test), "--report", s(&report_path), "--predictions", s(&predictions)]);
    let report = MetricsReport::from_text(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.format, "metrics-v1");
    assert_eq!(report.total, 30);
    assert_eq!(std::fs::read_to_string(&predictions).unwrap().lines().count(), 30);

    let cbr = MetricsReport::from_text(&ok(&["baseline", "--name", "cbr", "--kb", s(&kb), "--test", s(&test)])).unwrap();
    assert_eq!(cbr.total, 30);
    assert!(cbr.per_class.get("rmi").map_or(true, |c| c.support == 0 || c.recall == 0.0));

    let replies = dir.path().join("replies.json");
    std::fs::write(&replies, r#"{"replies": {}, "fallback": "approve"}"#).unwrap();
    let direct = ok(&["baseline", "--name", "direct", "--kb", s(&kb), "--test", s(&test), "--replies", s(&replies)]);
    let direct = MetricsReport::from_text(&direct).unwrap();
    assert_eq!(direct.confusion_matrix.iter().map(|row| row[0]).sum::<u64>(), 30);
    assert_eq!(eafd(&["baseline", "--name", "direct", "--kb", s(&kb), "--test", s(&test)]).status.code(), Some(2));
}
