//! Runs the `lori` binary end to end and checks exit codes, outputs and
//! byte-level reproducibility.

use std::path::Path;
use std::process::{Command, Output};

use lori_core::synth::separable_rows;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/three_letters.txt");
const GOLDEN: &str = include_str!("../../core/tests/fixtures/three_letters.report.json");

fn lori(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lori"))
        .current_dir(dir)
        .env_remove("LORI_STORE")
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stdout:\n{}\nstderr:\n{}", stdout(&o), stderr(&o));
    o
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn rows_file(dir: &Path, name: &str, n: usize, seed: u64) {
    let text: String = separable_rows(n, seed)
        .iter()
        .map(|r| serde_json::to_string(r).unwrap() + "\n")
        .collect();
    write(dir, name, &text);
}

#[test]
fn missing_required_flag_exits_1_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = lori(dir.path(), &["eval", "--truth", "t.ndrec"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--pred"), "{}", stderr(&o));
    assert!(stderr(&o).to_lowercase().contains("usage"));
    assert_eq!(code(&lori(dir.path(), &["no-such-command"])), 1);
    assert_eq!(code(&lori(dir.path(), &["--help"])), 0);
}

#[test]
fn eval_prints_hand_computed_weighted_f1() {
    let dir = tempfile::tempdir().unwrap();
    // tp 1, fn 1, tn 2, fp 0.
    let lines = |labels: [u8; 4]| -> String {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{{\"sentence_id\":\"s{i}\",\"label\":{l}}}\n"))
            .collect()
    };
    write(dir.path(), "t.ndrec", &lines([1, 1, 0, 0]));
    write(dir.path(), "p.ndrec", &lines([1, 0, 0, 0]));
    let o = ok(lori(dir.path(), &["eval", "--truth", "t.ndrec", "--pred", "p.ndrec", "--out", "m.json"]));
    assert!(stdout(&o).lines().any(|l| l == "weighted_f1 0.7333"), "{}", stdout(&o));
    assert!(stdout(&o).lines().any(|l| l == "accuracy 0.7500"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("m.json")).unwrap()).unwrap();
    assert!((report["metrics"]["weighted"]["f1"].as_f64().unwrap() - 11.0 / 15.0).abs() < 1e-12);

    write(dir.path(), "short.ndrec", &lines([1, 0, 0, 0])[..30]);
    let o = lori(dir.path(), &["eval", "--truth", "t.ndrec", "--pred", "short.ndrec"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("no prediction for s1"));
}

#[test]
fn outputs_are_not_overwritten_without_force() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "report.json", "keep me");
    let o = lori(dir.path(), &["analyze", "--input", FIXTURE, "--applicant", "applicant-001", "--out", "report.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--force"));
    assert_eq!(std::fs::read_to_string(dir.path().join("report.json")).unwrap(), "keep me");
    ok(lori(
        dir.path(),
        &["analyze", "--input", FIXTURE, "--applicant", "applicant-001", "--out", "report.json", "--force"],
    ));
}

#[test]
fn analyze_output_equals_golden_service_report() {
    let dir = tempfile::tempdir().unwrap();
    ok(lori(
        dir.path(),
        &["analyze", "--input", FIXTURE, "--applicant", "applicant-001", "--out", "r.json", "--traces", "t.ndjson"],
    ));
    assert_eq!(std::fs::read_to_string(dir.path().join("r.json")).unwrap(), GOLDEN);
    let traces = std::fs::read_to_string(dir.path().join("t.ndjson")).unwrap();
    // 7 highlighted sentences times 3 micro-labels, each ending in a final step.
    assert_eq!(traces.lines().filter(|l| l.contains("\"kind\":\"final\"")).count(), 21);

    let o = lori(
        dir.path(),
        &["analyze", "--input", FIXTURE, "--applicant", "a", "--out", "x.json", "--boundary", "explicit:1-9"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("ingest stage"), "{}", stderr(&o));
}

#[test]
fn weaklabel_with_all_abstaining_lfs_writes_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    ok(lori(dir.path(), &["prep", "--input", FIXTURE, "--applicant", "a1", "--out", "corpus"]));
    write(
        dir.path(),
        "lfs.toml",
        "[[lf]]\nid = \"a\"\nkind = \"constant\"\nverdict = \"abstain\"\n\
         [[lf]]\nid = \"b\"\nkind = \"constant\"\nverdict = \"abstain\"\n",
    );
    ok(lori(
        dir.path(),
        &["weaklabel", "--corpus", "corpus", "--lfs", "lfs.toml", "--out", "weak.ndrec", "--coverage", "cov.json"],
    ));
    assert_eq!(std::fs::read(dir.path().join("weak.ndrec")).unwrap(), b"");
    let cov: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("cov.json")).unwrap()).unwrap();
    assert_eq!(cov["labeled_count"], 0);
    for lf in cov["per_lf"].as_object().unwrap().values() {
        assert_eq!(lf["coverage"], 0.0, "{lf}");
    }
    for pair in cov["pairs"].as_array().unwrap() {
        assert_eq!(pair["overlap"], 0.0);
        assert_eq!(pair["conflict"], 0.0);
    }
}

/// prep, features, weaklabel, train, extract; twice into separate
/// directories, comparing every output byte for byte.
#[test]
fn pipeline_stages_are_reproducible() {
    let run = |dir: &Path| {
        std::fs::create_dir_all(dir.join("docs")).unwrap();
        std::fs::copy(FIXTURE, dir.join("docs/app-1.txt")).unwrap();
        std::fs::write(dir.join("docs/app-2.txt"), "She invented a new assay for the lab group. The weather in spring was mild and pleasant.\x0cHe led the team well through a hard quarter.").unwrap();
        ok(lori(
            dir,
            &["prep", "--input", "docs", "--out", "corpus", "--iqr", "--cleaned", "clean.ndrec", "--split", "0.5,0.5,0"],
        ));
        ok(lori(dir, &["features", "--corpus", "corpus", "--out", "feat.ndrec", "--normalize", "stats.json"]));
        write(
            dir,
            "lfs.toml",
            "[[lf]]\nid = \"kw\"\nkind = \"keyword\"\nconfidence = 0.9\n\
             [[lf]]\nid = \"fs\"\nkind = \"fewshot\"\nexamples = \"ex.ndrec\"\n",
        );
        rows_file(dir, "ex.ndrec", 40, 3);
        ok(lori(
            dir,
            &["weaklabel", "--corpus", "corpus", "--lfs", "lfs.toml", "--out", "weak.ndrec", "--coverage", "cov.json", "--exclude", "app-2"],
        ));
        rows_file(dir, "train.ndrec", 300, 1);
        rows_file(dir, "test.ndrec", 60, 2);
        let o = ok(lori(
            dir,
            &["--seed", "7", "train", "--data", "train.ndrec", "--out", "model", "--eval", "test.ndrec", "--curve", "curve.json", "--sizes", "50,100,300"],
        ));
        assert!(stdout(&o).contains("weighted_f1"));
        ok(lori(
            dir,
            &["--models", "model", "extract", "--corpus", "corpus", "--highlighted", "--out", "ex.out", "--traces", "ex.traces"],
        ));
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());
    for f in [
        "corpus/letters.ndrec",
        "corpus/sentences.ndrec",
        "corpus/splits.json",
        "corpus/prep_report.json",
        "clean.ndrec",
        "feat.ndrec",
        "stats.json",
        "weak.ndrec",
        "cov.json",
        "model/manifest.json",
        "model/weights.json",
        "curve.json",
        "ex.out",
        "ex.traces",
    ] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
    }
    let cov: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("cov.json")).unwrap()).unwrap();
    assert!(cov["skipped_excluded_applicants"].as_u64().unwrap() > 0);
    let weak = std::fs::read_to_string(a.path().join("weak.ndrec")).unwrap();
    assert!(!weak.is_empty());
    let curve: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("curve.json")).unwrap()).unwrap();
    assert_eq!(curve.as_array().unwrap().len(), 3);
}

#[test]
fn runtime_and_validation_failures_use_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    rows_file(dir.path(), "train.ndrec", 100, 1);
    let o = lori(dir.path(), &["train", "--data", "train.ndrec", "--out", "m", "--backend", "transformer"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("transformer"));

    // The `paper` profile's curve sizes cannot be met by a 100-row dataset.
    let o = lori(
        dir.path(),
        &["--paper-config", "train", "--data", "train.ndrec", "--out", "m2", "--eval", "train.ndrec", "--curve", "c.json"],
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("5000"), "{}", stderr(&o));

    let o = lori(dir.path(), &["serve"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("LORI_STORE"));

    let o = lori(dir.path(), &["features", "--corpus", "missing", "--out", "f.ndrec"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn lexicon_backend_artifact_reproduces_default_classifier() {
    let dir = tempfile::tempdir().unwrap();
    rows_file(dir.path(), "train.ndrec", 10, 1);
    ok(lori(dir.path(), &["train", "--data", "train.ndrec", "--out", "lex", "--backend", "lexicon"]));
    ok(lori(
        dir.path(),
        &["--models", "lex", "analyze", "--input", FIXTURE, "--applicant", "applicant-001", "--out", "r.json"],
    ));
    assert_eq!(std::fs::read_to_string(dir.path().join("r.json")).unwrap(), GOLDEN);
}
