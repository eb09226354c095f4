mod common;

use std::fs;
use std::path::Path;

use common::*;

fn annotated(dir: &Path) {
    let out = run(dir, &["--config", "run.toml", "annotate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn validate_reports_linkage_counts() {
    let dir = stage("small");
    let out = run(dir.path(), &["--config", "run.toml", "validate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s = summary(&dir.path().join("out"));
    let c = &s["corpus"]["counts"];
    assert_eq!(
        (c["submissions_linked"].as_u64(), c["feedback_linked"].as_u64(), c["ratings_linked"].as_u64()),
        (Some(12), Some(7), Some(3))
    );
    assert_eq!(s["exit_code"], 0);
}

#[test]
fn validate_names_a_dangling_reference() {
    let dir = stage("small");
    let fb = dir.path().join("feedback.jsonl");
    let text = fs::read_to_string(&fb).unwrap().replace("\"submission_id\": \"d0\"", "\"submission_id\": \"zz9\"");
    fs::write(&fb, text).unwrap();
    let out = run(dir.path(), &["--config", "run.toml", "validate"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("zz9"), "{}", stderr(&out));
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["exit_code"], 2);
    assert!(s["errors"][0].as_str().unwrap().contains("zz9"));
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let dir = stage("small");
    let mut cfg = fs::read_to_string(dir.path().join("run.toml")).unwrap();
    cfg.push_str("likert_cuttoff = 3\n");
    fs::write(dir.path().join("bad.toml"), cfg).unwrap();
    let out = run(dir.path(), &["--config", "bad.toml", "--out-dir", "o", "validate"]);
    assert_eq!(code(&out), 2);
    assert_eq!(summary(&dir.path().join("o"))["exit_code"], 2);
}

#[test]
fn annotate_writes_sorted_files_and_reruns_from_cache() {
    let dir = stage("small");
    annotated(dir.path());
    let ann = dir.path().join("out/annotations");
    assert_eq!(lines(&ann.join("pedagogy.jsonl")), 7);
    assert_eq!(lines(&ann.join("engagement.jsonl")), 4);
    let first = summary(&dir.path().join("out"));
    assert_eq!(first["judge"]["backend_requests"], 11);
    let before = tree(&ann);

    annotated(dir.path());
    let again = summary(&dir.path().join("out"));
    assert_eq!(again["judge"]["backend_requests"], 0);
    assert_eq!(again["judge"]["cache_hits"], 11);
    assert!(tree(&ann) == before);
}

#[test]
fn annotate_which_rewrites_only_that_file() {
    let dir = stage("small");
    let out = run(dir.path(), &["--config", "run.toml", "annotate", "--which", "engagement"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let ann = dir.path().join("out/annotations");
    assert!(ann.join("engagement.jsonl").exists());
    assert!(!ann.join("pedagogy.jsonl").exists());
}

#[test]
fn evaluate_without_annotations_is_a_state_error() {
    let dir = stage("small");
    let out = run(dir.path(), &["--config", "run.toml", "evaluate"]);
    assert_eq!(code(&out), 4);
    assert!(summary(&dir.path().join("out"))["errors"][0].as_str().unwrap().contains("annotate"));
}

#[test]
fn evaluate_with_empty_ratings_skips_regression() {
    let dir = stage("small");
    fs::write(dir.path().join("ratings.jsonl"), "").unwrap();
    annotated(dir.path());
    let out = run(dir.path(), &["--config", "run.toml", "evaluate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let o = dir.path().join("out");
    let reg = fs::read_to_string(o.join("tables/regression.md")).unwrap();
    assert!(reg.contains("skipped: no ratings"));
    // one row per rubric dimension
    let damr = fs::read_to_string(o.join("tables/damr.md")).unwrap();
    assert_eq!(damr.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| Dimension")).count(), 8);
    assert!(o.join("figures/delta.svg").exists());
    let s = summary(&o);
    assert!(s["warnings"].as_array().unwrap().iter().any(|w| w["code"] == "regression-skipped"));
}

#[test]
fn evaluate_fails_when_a_model_cannot_be_fitted() {
    // three ratings cannot support eleven covariates
    let dir = stage("small");
    annotated(dir.path());
    let out = run(dir.path(), &["--config", "run.toml", "evaluate"]);
    assert_eq!(code(&out), 4);
    let o = dir.path().join("out");
    assert!(o.join("tables/damr.md").exists());
    assert!(!summary(&o)["errors"].as_array().unwrap().is_empty());
}

#[test]
fn unknown_baseline_tutor_is_an_input_error() {
    let dir = stage("small");
    annotated(dir.path());
    let cfg = fs::read_to_string(dir.path().join("run.toml"))
        .unwrap()
        .replace("baseline_tutor = \"baseline_tutor\"", "baseline_tutor = \"nobody\"");
    fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let out = run(dir.path(), &["--config", "run.toml", "evaluate"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nobody"));
}

#[test]
fn transport_failure_exits_3_without_writing_annotations() {
    let dir = stage("small");
    let tr = dir.path().join("transcript.jsonl");
    let text = fs::read_to_string(&tr).unwrap();
    let broken: Vec<String> = text
        .lines()
        .map(|l| {
            if l.contains("\"pedagogy\"") && l.contains("\"f3\"") {
                r#"{"task":"pedagogy","feedback_id":"f3","replies":[{"transport_error":"connection reset"}]}"#.to_string()
            } else {
                l.to_string()
            }
        })
        .collect();
    fs::write(&tr, broken.join("\n")).unwrap();
    let cfg = fs::read_to_string(dir.path().join("run.toml")).unwrap().replace("parallelism = 2", "parallelism = 1\nmax_retries = 1\nbackoff_ms = 1");
    fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let out = run(dir.path(), &["--config", "run.toml", "annotate"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["exit_code"], 3);
    assert!(s["errors"][0].as_str().unwrap().contains("connection reset"));
    assert!(s["judge"]["retries"].as_u64().unwrap() >= 1);
    assert!(!dir.path().join("out/annotations/pedagogy.jsonl").exists());
}

#[test]
fn unparseable_reply_is_skipped_with_a_warning() {
    let dir = stage("small");
    let tr = dir.path().join("transcript.jsonl");
    let text = fs::read_to_string(&tr).unwrap();
    let broken: Vec<String> = text
        .lines()
        .map(|l| {
            if l.contains("\"pedagogy\"") && l.contains("\"f2\"") {
                r#"{"task":"pedagogy","feedback_id":"f2","replies":[{"text":"I think it is fine."}]}"#.to_string()
            } else {
                l.to_string()
            }
        })
        .collect();
    fs::write(&tr, broken.join("\n")).unwrap();
    annotated(dir.path());
    let o = dir.path().join("out");
    assert_eq!(lines(&o.join("annotations/pedagogy.jsonl")), 6);
    let s = summary(&o);
    assert_eq!(s["annotations"]["failed"], 1);
    assert_eq!(s["judge"]["reprompts"], 1);
    assert!(s["warnings"].as_array().unwrap().iter().any(|w| w["code"] == "annotation-failed"));
}

#[test]
fn synth_is_reproducible_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = run(dir.path(), &["--out-dir", name, "--seed", "7", "synth"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    // summary.json records the output directory
    assert_same_tree(&dir.path().join("a"), &dir.path().join("b"), &["summary.json"]);
    let out = run(dir.path(), &["--out-dir", "c", "--seed", "8", "synth"]);
    assert_eq!(code(&out), 0);
    assert_ne!(
        fs::read(dir.path().join("a/feedback.jsonl")).unwrap(),
        fs::read(dir.path().join("c/feedback.jsonl")).unwrap()
    );
    let out = run(&dir.path().join("a"), &["--config", "run.toml", "validate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn synth_rejects_empty_population() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), "[synth]\nn_students = 0\n").unwrap();
    let out = run(dir.path(), &["--config", "s.toml", "synth"]);
    assert_eq!(code(&out), 2);
    assert_eq!(summary(&dir.path().join("out"))["exit_code"], 2);
}

fn write_labels(path: &Path, labels: &[(String, u8)]) {
    let text: String = labels
        .iter()
        .map(|(id, l)| format!("{{\"feedback_id\":\"{id}\",\"labels\":{{\"coherence\":{l}}}}}\n"))
        .collect();
    fs::write(path, text).unwrap();
}

#[test]
fn agreement_on_hand_built_confusion_matrix() {
    let dir = tempfile::tempdir().unwrap();
    // rows: first annotator, columns: second; [[20, 5], [10, 15]]
    let cells = [(1, 1, 20), (1, 2, 5), (2, 1, 10), (2, 2, 15)];
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (la, lb, n) in cells {
        for _ in 0..n {
            let id = format!("x{:03}", a.len());
            a.push((id.clone(), la));
            b.push((id, lb));
        }
    }
    write_labels(&dir.path().join("a.jsonl"), &a);
    write_labels(&dir.path().join("b.jsonl"), &b);
    let out = run(dir.path(), &["agreement", "a.jsonl", "b.jsonl"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s = summary(&dir.path().join("out"));
    assert!((s["agreement"]["dimensions"][0]["kappa"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert!(dir.path().join("out/tables/agreement.md").exists());

    let out = run(dir.path(), &["agreement", "a.jsonl", "a.jsonl"]);
    assert_eq!(code(&out), 0);
    assert_eq!(summary(&dir.path().join("out"))["agreement"]["macro_kappa"], 1.0);
}

#[test]
fn agreement_on_disjoint_files_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    write_labels(&dir.path().join("a.jsonl"), &[("x1".into(), 1)]);
    write_labels(&dir.path().join("b.jsonl"), &[("y1".into(), 1)]);
    let out = run(dir.path(), &["agreement", "a.jsonl", "b.jsonl"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bad_flag_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--backend", "carrier-pigeon", "validate"]);
    assert_eq!(code(&out), 2);
}
