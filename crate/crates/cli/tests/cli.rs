use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn nectar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nectar"))
        .current_dir(dir)
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = nectar(dir, args);
    assert!(
        out.status.success(),
        "nectar {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Lines of a file that are not `#` comments.
fn body(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn unknown_subcommand_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nectar(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(nectar(dir.path(), &["detect", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(nectar(dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = nectar(dir.path(), &["detect", "--graph", "missing.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));
    fs::write(dir.path().join("k3.txt"), "1 2\n2 3\n1 3\n").unwrap();
    let out = nectar(dir.path(), &["detect", "--graph", "k3.txt", "--beta", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = nectar(dir.path(), &["detect", "--graph", "k3.txt", "--objective", "model"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn detect_on_triangle_writes_one_community() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("k3.txt"), "1 2\n2 3\n1 3\n").unwrap();
    ok(
        dir.path(),
        &["detect", "--graph", "k3.txt", "--objective", "qe", "--output", "cover.txt"],
    );
    let text = fs::read_to_string(dir.path().join("cover.txt")).unwrap();
    assert!(text.starts_with("# nectar "));
    assert!(text.contains("# input k3.txt sha256 "));
    assert_eq!(body(&dir.path().join("cover.txt")), vec!["1 2 3"]);
}

#[test]
fn evaluate_identical_covers_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.txt"), "a b\nb c\na c\nc d\nd e\ne f\nd f\n").unwrap();
    fs::write(dir.path().join("truth.txt"), "a b c\nd e f\n").unwrap();
    let out = ok(
        dir.path(),
        &[
            "evaluate", "--truth", "truth.txt", "--detected", "truth.txt", "--graph", "g.txt", "--format", "csv",
        ],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, ["onmi,omega,avg_f1,metrics_average,onmi_variant", "1.000000,1.000000,1.000000,1.000000,LFK"]);
}

#[test]
fn prune_drops_unlisted_nodes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.txt"), "1 2\n2 3\n3 4\n4 5\n").unwrap();
    fs::write(dir.path().join("truth.txt"), "1 2 3\n4 5\n").unwrap();
    ok(
        dir.path(),
        &["prune", "--graph", "g.txt", "--truth", "truth.txt", "--top", "1", "--output", "p.txt"],
    );
    assert_eq!(body(&dir.path().join("p.txt")), vec!["1 2", "2 3"]);
}

const PIPELINE_OUTPUTS: [&str; 6] = ["corpus/manifest.tsv", "ds.tsv", "m.model", "cv.tsv", "cells.tsv", "nets.tsv"];

fn pipeline(dir: &Path) {
    ok(dir, &["--seed", "5", "generate", "--out-dir", "corpus", "--count", "40"]);
    ok(dir, &["--seed", "5", "label", "--manifest", "corpus/manifest.tsv", "--out", "ds.tsv"]);
    ok(
        dir,
        &["--seed", "5", "train", "--dataset", "ds.tsv", "--out", "m.model", "--cv-out", "cv.tsv"],
    );
    ok(
        dir,
        &[
            "compare", "--dataset", "ds.tsv", "--model", "m.model", "--cells-out", "cells.tsv", "--networks-out", "nets.tsv",
        ],
    );
}

#[test]
fn toy_pipeline_runs_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let start = Instant::now();
    pipeline(a.path());
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "pipeline took {elapsed:?}");

    let rows = body(&a.path().join("ds.tsv"));
    assert_eq!(rows.len(), 1 + 40 * 4);
    for line in body(&a.path().join("cells.tsv")).iter().skip(1) {
        let value: f64 = line.split('\t').nth(4).unwrap().parse().unwrap();
        assert!((-1.0..=1.0).contains(&value));
    }

    // Different worker counts must not change any output.
    ok(b.path(), &["--workers", "1", "--seed", "5", "generate", "--out-dir", "corpus", "--count", "40"]);
    ok(
        b.path(),
        &["--workers", "2", "--seed", "5", "label", "--manifest", "corpus/manifest.tsv", "--out", "ds.tsv"],
    );
    ok(
        b.path(),
        &["--workers", "3", "--seed", "5", "train", "--dataset", "ds.tsv", "--out", "m.model", "--cv-out", "cv.tsv"],
    );
    ok(
        b.path(),
        &[
            "compare", "--dataset", "ds.tsv", "--model", "m.model", "--cells-out", "cells.tsv", "--networks-out", "nets.tsv",
        ],
    );
    for name in PIPELINE_OUTPUTS {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn model_commands_read_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let d = dir.path();
    let out = ok(d, &["eval", "--model", "m.model", "--dataset", "ds.tsv", "--weighted"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("average\ttrue\t40\t")));
    let out = ok(d, &["predict", "--model", "m.model", "--graph", "corpus/graphs/toy000.txt"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().last().unwrap();
    assert!(row.starts_with("wocc\t") || row.starts_with("qe\t"), "{row}");
    ok(
        d,
        &[
            "detect", "--graph", "corpus/graphs/toy001.txt", "--objective", "model", "--model", "m.model", "--output", "c.txt",
        ],
    );
    assert!(!body(&d.join("c.txt")).is_empty());
    let out = ok(d, &["feature-ig", "--dataset", "ds.tsv", "--bins", "10"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().filter(|l| !l.starts_with('#')).count(), 6);
}
