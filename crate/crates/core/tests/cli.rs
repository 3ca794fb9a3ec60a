mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use xsum_core::io;
use xsum_core::topics::ReviewRecord;
use xsum_core::Method;

fn xsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xsum")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_synth_then_summarize() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("ws");
    let out = xsum(&["gen-synth", "--n-images", "40", "--n-clusters", "8", "--seed", "3", "--out", s(&dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = dir.join("manifest.json");
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), s(&manifest));

    let summary = tmp.path().join("cross.json");
    let out = xsum(&[
        "summarize", "--manifest", s(&manifest), "--method", "cross", "--segment", "synthetic", "--k", "4", "--out",
        s(&summary),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = io::read_summary(&summary).unwrap();
    assert_eq!(report.method, Method::CrossSummarizer);
    assert_eq!(report.selected.len(), 4);
    assert!(report.selected.iter().all(|s| s.topic_id.is_some()));
    let m = report.metrics.unwrap();
    assert!(m.cov.is_some() && m.rcov.is_some());

    // stdout variant prints the same document
    let out = xsum(&[
        "summarize", "--manifest", s(&manifest), "--method", "cross", "--segment", "synthetic", "--k", "4",
    ]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), fs::read_to_string(&summary).unwrap());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("ws");
    assert!(xsum(&["gen-synth", "--out", s(&dir)]).status.success());
    let manifest = dir.join("manifest.json");
    let m = s(&manifest);

    let code = |args: &[&str]| xsum(args).status.code().unwrap();
    assert_eq!(code(&["summarize", "--manifest", m, "--method", "pam", "--segment", "synthetic"]), 1);
    assert_eq!(code(&["summarize", "--manifest", m, "--method", "cross", "--segment", "Ski"]), 1);
    assert_eq!(code(&["summarize", "--manifest", m, "--method", "cross", "--segment", "synthetic", "--k", "0"]), 1);
    assert_eq!(
        code(&["summarize", "--manifest", m, "--method", "cross", "--segment", "synthetic", "--class-threshold", "2"]),
        1
    );
    assert_eq!(code(&["gen-synth", "--n-images", "3", "--n-clusters", "5", "--out", s(&dir)]), 1);
    assert_eq!(code(&["summarize", "--manifest", "/nonexistent.json", "--method", "cross", "--segment", "s"]), 2);

    fs::write(dir.join("topics.emb"), b"not a blob").unwrap();
    assert_eq!(code(&["summarize", "--manifest", m, "--method", "cross", "--segment", "synthetic"]), 2);
}

#[test]
fn evaluate_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = common::write_multi_gallery_workspace(&tmp.path().join("ws"), &[5, 6, 7]);
    let runs = tmp.path().join("runs");
    let csv = runs.join("k9.csv");
    let out = xsum(&["evaluate", "--manifest", s(&manifest), "--method", "cross,default", "--out", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = io::read_metrics(&csv).unwrap();
    assert_eq!(rows.len(), 6);
    let keys: Vec<(String, String)> = rows.iter().map(|r| (r.gallery_id.clone(), r.method.clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    let out = xsum(&["evaluate", "--manifest", s(&manifest), "--k", "4", "--out", s(&runs.join("k4.csv"))]);
    assert!(out.status.success());

    let table = tmp.path().join("compare.csv");
    let out = xsum(&["compare", "--manifest", s(&manifest), "--input", s(&runs), "--out", s(&table)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "split,method,segment,k,galleries,div,repr,cov,rcov");
    // (Big, Small) x 4 methods at k=4 plus (Big, Small) x 2 methods at k=9
    assert_eq!(lines.len(), 1 + 8 + 4);
    assert!(lines.iter().any(|l| l.starts_with("Small,cross,synthetic,9,2,")));
    assert!(lines.iter().any(|l| l.starts_with("Big,default,synthetic,4,1,")));

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = xsum(&["compare", "--manifest", s(&manifest), "--input", s(&empty)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn topics_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let review = |id: &str, seg: &str, probs: &[(&str, f64)]| ReviewRecord {
        review_id: id.into(),
        segment_id: seg.into(),
        topic_probs: probs.iter().map(|&(t, p)| (t.to_string(), p)).collect(),
    };
    let reviews = vec![
        review("r1", "Ski", &[("snow", 0.9), ("food", 0.5)]),
        review("r2", "Ski", &[("snow", 0.7), ("food", 0.6)]),
        review("r3", "Beach", &[("sea", 0.99), ("food", 0.2)]),
    ];
    let path = tmp.path().join("reviews.jsonl");
    io::write_reviews(&path, &reviews).unwrap();
    let heatmap = tmp.path().join("heatmap.csv");
    let stats = tmp.path().join("stats.csv");
    let lists = tmp.path().join("lists.json");
    let out = xsum(&[
        "topics", "--reviews", s(&path), "--min-count", "1", "--out", s(&heatmap), "--stats-out", s(&stats),
        "--lists-out", s(&lists),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read_to_string(&heatmap).unwrap(),
        "segment,snow,food,sea\nSki,1.000000,0.500000,0.000000\nBeach,0.000000,0.000000,1.000000\n"
    );
    assert_eq!(
        fs::read_to_string(&stats).unwrap(),
        "segment,topic,count,review_count\nSki,food,1,2\nSki,snow,2,2\nBeach,sea,1,1\n"
    );
    let lists: serde_json::Value = serde_json::from_str(&fs::read_to_string(&lists).unwrap()).unwrap();
    assert_eq!(lists["Ski"], serde_json::json!(["snow", "food"]));

    fs::write(&path, "{\"review_id\": \"x\"}\n").unwrap();
    assert_eq!(xsum(&["topics", "--reviews", s(&path), "--strict"]).status.code(), Some(2));
}
