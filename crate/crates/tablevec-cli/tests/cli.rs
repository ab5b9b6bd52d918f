//! End-to-end pipeline tests against the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tablevec"))
}

fn run_ok(args: &[&str]) -> Output {
    let output = bin().args(args).output().expect("spawn tablevec");
    assert!(
        output.status.success(),
        "tablevec {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn run_err(args: &[&str]) -> Output {
    let output = bin().args(args).output().expect("spawn tablevec");
    assert!(
        !output.status.success(),
        "tablevec {args:?} unexpectedly succeeded"
    );
    output
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synth + ingest a small corpus into a fresh directory.
fn prepare_data(dir: &Path, tables: usize, queries: usize) {
    run_ok(&[
        "synth",
        "--out",
        path_str(dir),
        "--tables",
        &tables.to_string(),
        "--queries",
        &queries.to_string(),
    ]);
    run_ok(&["--data-dir", path_str(dir), "ingest"]);
}

fn train_small(dir: &Path, variant: &str, seed: u64) -> PathBuf {
    let out = dir.join(format!("vectors_{variant}_s{seed}.tsv"));
    run_ok(&[
        "--data-dir",
        path_str(dir),
        "train",
        "--variant",
        variant,
        "--dim",
        "24",
        "--epochs",
        "8",
        "--negatives",
        "5",
        "--rng-seed",
        &seed.to_string(),
        "--out",
        path_str(&out),
    ]);
    out
}

#[test]
fn ingest_writes_four_sequence_files_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    prepare_data(dir.path(), 24, 4);
    for name in [
        "sequences_w.tsv",
        "sequences_h.tsv",
        "sequences_e.tsv",
        "sequences_estar.tsv",
        "index.json",
    ] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
    let before = std::fs::read(dir.path().join("index.json")).unwrap();
    run_ok(&["--data-dir", path_str(dir.path()), "ingest"]);
    let after = std::fs::read(dir.path().join("index.json")).unwrap();
    assert_eq!(before, after, "ingest rerun must be byte-identical");
}

#[test]
fn train_echoes_overrides_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    prepare_data(dir.path(), 24, 4);
    let out = dir.path().join("vectors_h.tsv");
    for _ in 0..2 {
        run_ok(&[
            "--data-dir",
            path_str(dir.path()),
            "train",
            "--variant",
            "h",
            "--dim",
            "16",
            "--window",
            "7",
            "--epochs",
            "4",
            "--negatives",
            "5",
            "--rng-seed",
            "3",
            "--out",
            path_str(&out),
        ]);
    }
    let content = std::fs::read_to_string(&out).unwrap();
    let header: Vec<&str> = content.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(
        header.iter().any(|l| l.contains("window=7")),
        "override missing from header: {header:?}"
    );

    let first = std::fs::read(&out).unwrap();
    run_ok(&[
        "--data-dir",
        path_str(dir.path()),
        "train",
        "--variant",
        "h",
        "--dim",
        "16",
        "--window",
        "7",
        "--epochs",
        "4",
        "--negatives",
        "5",
        "--rng-seed",
        "3",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(first, std::fs::read(&out).unwrap());
}

#[test]
fn train_fails_without_sequence_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_err(&[
        "--data-dir",
        path_str(dir.path()),
        "train",
        "--variant",
        "w",
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("not found"), "stderr: {stderr}");
}

#[test]
fn populate_rows_at_alpha_one_ignores_the_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    prepare_data(dir.path(), 30, 4);
    let vectors_a = train_small(dir.path(), "estar", 1);
    let vectors_b = train_small(dir.path(), "estar", 2);

    let run_for = |vectors: &Path, out_name: &str| {
        let out = dir.path().join(out_name);
        run_ok(&[
            "--data-dir",
            path_str(dir.path()),
            "populate",
            "--mode",
            "row",
            "--alpha",
            "1.0",
            "--seed-size",
            "2",
            "--vectors",
            path_str(vectors),
            "--out",
            path_str(&out),
        ]);
        std::fs::read_to_string(&out).unwrap()
    };
    let run_a = run_for(&vectors_a, "kb_only_a.tsv");
    let run_b = run_for(&vectors_b, "kb_only_b.tsv");
    // At the alpha = 1 endpoint the ranking is the knowledge-base ranking;
    // swapping in differently-trained vectors must not change a single line.
    let body = |s: &str| {
        s.lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(body(&run_a), body(&run_b));
}

#[test]
fn populate_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    prepare_data(dir.path(), 30, 4);
    train_small(dir.path(), "estar", 1);
    std::fs::rename(
        dir.path().join("vectors_estar_s1.tsv"),
        dir.path().join("vectors_estar.tsv"),
    )
    .unwrap();

    let run_path = dir.path().join("rows.tsv");
    let qrels_path = dir.path().join("rows_qrels.tsv");
    run_ok(&[
        "--data-dir",
        path_str(dir.path()),
        "populate",
        "--mode",
        "row",
        "--alpha",
        "0.3",
        "--out",
        path_str(&run_path),
        "--qrels-out",
        path_str(&qrels_path),
    ]);
    let out = run_ok(&[
        "--data-dir",
        path_str(dir.path()),
        "eval",
        "--run",
        path_str(&run_path),
        "--qrels",
        path_str(&qrels_path),
        "--metric",
        "map",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mean: f64 = stdout
        .lines()
        .find(|l| l.starts_with("run\t"))
        .and_then(|l| l.split('\t').next_back())
        .unwrap()
        .parse()
        .unwrap();
    assert!(mean > 0.0 && mean <= 1.0, "MAP {mean} out of range");
}

#[test]
fn eval_matches_hand_computed_map() {
    let dir = tempfile::tempdir().unwrap();
    let run_path = dir.path().join("run.tsv");
    let qrels_path = dir.path().join("qrels.tsv");
    // q1: relevant at ranks 1 and 3 of 3 -> AP = (1 + 2/3)/2 = 5/6.
    // q2: the only relevant item is never retrieved -> AP = 0.
    std::fs::write(
        &run_path,
        "q1\tQ0\ta\t1\t3.0\ttest\nq1\tQ0\tb\t2\t2.0\ttest\nq1\tQ0\tc\t3\t1.0\ttest\nq2\tQ0\tx\t1\t1.0\ttest\n",
    )
    .unwrap();
    std::fs::write(&qrels_path, "q1\t0\ta\t1\nq1\t0\tc\t1\nq2\t0\ty\t1\n").unwrap();
    let out = run_ok(&[
        "eval",
        "--run",
        path_str(&run_path),
        "--qrels",
        path_str(&qrels_path),
        "--metric",
        "map",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mean: f64 = stdout
        .lines()
        .find(|l| l.starts_with("run\t"))
        .and_then(|l| l.split('\t').next_back())
        .unwrap()
        .parse()
        .unwrap();
    let expected = (5.0 / 6.0) / 2.0;
    assert!((mean - expected).abs() < 1e-9, "MAP {mean} vs {expected}");
}

#[test]
fn eval_rejects_unjudged_run_cases() {
    let dir = tempfile::tempdir().unwrap();
    let run_path = dir.path().join("run.tsv");
    let qrels_path = dir.path().join("qrels.tsv");
    std::fs::write(&run_path, "mystery\tQ0\ta\t1\t1.0\ttest\n").unwrap();
    std::fs::write(&qrels_path, "q1\t0\ta\t1\n").unwrap();
    let out = run_err(&[
        "eval",
        "--run",
        path_str(&run_path),
        "--qrels",
        path_str(&qrels_path),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("mystery"), "stderr: {stderr}");
}

#[test]
fn gridsearch_reports_a_curve_and_best_alpha() {
    let dir = tempfile::tempdir().unwrap();
    prepare_data(dir.path(), 30, 4);
    train_small(dir.path(), "h", 1);
    std::fs::rename(
        dir.path().join("vectors_h_s1.tsv"),
        dir.path().join("vectors_h.tsv"),
    )
    .unwrap();
    let curve_path = dir.path().join("curve.tsv");
    let out = run_ok(&[
        "--data-dir",
        path_str(dir.path()),
        "gridsearch",
        "--mode",
        "column",
        "--seed-size",
        "2",
        "--curve-out",
        path_str(&curve_path),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let grid_lines = stdout
        .lines()
        .filter(|l| l.split('\t').count() == 2 && !l.starts_with("best"))
        .count();
    assert_eq!(grid_lines, 11, "stdout: {stdout}");
    assert!(stdout.contains("best alpha"));
    let curve = std::fs::read_to_string(&curve_path).unwrap();
    assert!(curve.lines().any(|l| l.starts_with("best\t")));
}

#[test]
fn retrieve_ranks_every_query() {
    let dir = tempfile::tempdir().unwrap();
    prepare_data(dir.path(), 30, 6);
    let w = train_small(dir.path(), "w", 1);
    let e = train_small(dir.path(), "e", 1);
    let run_path = dir.path().join("retrieve.tsv");
    run_ok(&[
        "--data-dir",
        path_str(dir.path()),
        "retrieve",
        "--vectors-w",
        path_str(&w),
        "--vectors-e",
        path_str(&e),
        "--folds",
        "3",
        "--trees",
        "20",
        "--out",
        path_str(&run_path),
    ]);
    let content = std::fs::read_to_string(&run_path).unwrap();
    let queries: std::collections::BTreeSet<&str> = content
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(queries.len(), 6, "one ranked list per query");

    // Determinism across reruns.
    let first = std::fs::read(&run_path).unwrap();
    run_ok(&[
        "--data-dir",
        path_str(dir.path()),
        "retrieve",
        "--vectors-w",
        path_str(&w),
        "--vectors-e",
        path_str(&e),
        "--folds",
        "3",
        "--trees",
        "20",
        "--out",
        path_str(&run_path),
    ]);
    assert_eq!(first, std::fs::read(&run_path).unwrap());
}
