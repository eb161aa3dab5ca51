use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tgc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tgc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn tgc")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = tgc(dir, args);
    assert!(
        out.status.success(),
        "tgc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Small planted graph plus 8-dimensional features in `dir`.
fn fixture() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--n", "40", "--k", "2", "--events", "800", "--seed", "3", "--output", "g"]);
    ok(
        d,
        &[
            "pretrain", "--input", "g.interactions", "--output", "f.txt", "--dim", "8",
            "--walk-length", "10", "--walks-per-node", "2", "--window", "3",
        ],
    );
    dir
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<&str>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().collect())
        .collect()
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["generate", "--n", "200", "--k", "4", "--events", "20000", "--p-in", "0.9", "--seed", "1"];
    for prefix in ["a", "b"] {
        let mut run = args.to_vec();
        run.extend(["--output", prefix]);
        ok(d, &run);
    }
    for ext in ["interactions", "labels"] {
        let a = fs::read(d.join(format!("a.{ext}"))).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, fs::read(d.join(format!("b.{ext}"))).unwrap(), "{ext} differs");
    }
    assert_eq!(data_rows(&read(d, "a.interactions")).len(), 20000);
    assert_eq!(data_rows(&read(d, "a.labels")).len(), 200);
    assert!(read(d, "a.manifest").contains("meta.command=generate"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing_k = tgc(dir.path(), &["generate", "--n", "200", "--output", "g"]);
    assert_eq!(missing_k.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_k.stderr).contains("--k"));
    let bad_value = tgc(dir.path(), &["generate", "--n", "x", "--k", "2", "--output", "g"]);
    assert_eq!(bad_value.status.code(), Some(2));
    assert_eq!(tgc(dir.path(), &["bogus"]).status.code(), Some(2));
}

#[test]
fn invalid_config_values_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = tgc(dir.path(), &["generate", "--n", "10", "--k", "1", "--output", "g"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn pretrain_writes_one_row_per_node_with_requested_dim() {
    let dir = fixture();
    let text = read(dir.path(), "f.txt");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r.len() == 1 + 8));
    let manifest = read(dir.path(), "f.txt.manifest");
    assert!(manifest.contains("dim=8"));
    assert!(manifest.contains("meta.input.input.sha256="));
}

#[test]
fn pretrain_dim_16_gives_16_columns() {
    let dir = fixture();
    ok(
        dir.path(),
        &["pretrain", "--input", "g.interactions", "--output", "f16.txt", "--dim", "16", "--walk-length", "8", "--walks-per-node", "1"],
    );
    let text = read(dir.path(), "f16.txt");
    let rows = data_rows(&text);
    assert!(rows.iter().all(|r| r.len() == 17));
}

#[test]
fn corrupt_input_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad"), "1 2 0.5\n2 3 1.0\n3 oops 2.0\n").unwrap();
    let out = tgc(dir.path(), &["pretrain", "--input", "bad", "--output", "f.txt"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    let missing = tgc(dir.path(), &["pretrain", "--input", "nope", "--output", "f.txt"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn zero_epochs_checkpoint_equals_features() {
    let dir = fixture();
    ok(
        dir.path(),
        &["train", "--input", "g.interactions", "--features", "f.txt", "--clusters", "2", "--epochs", "0", "--output", "z.txt"],
    );
    assert_eq!(read(dir.path(), "z.txt"), read(dir.path(), "f.txt"));
    let meta = read(dir.path(), "z.txt.meta");
    assert!(meta.contains("epoch=0\n") && meta.contains("seed=0\n") && meta.contains("config_hash="));
}

#[test]
fn temporal_only_run_and_report() {
    let dir = fixture();
    ok(
        dir.path(),
        &[
            "train", "--input", "g.interactions", "--features", "f.txt", "--clusters", "2", "--epochs", "3",
            "--w-node", "0", "--w-batch", "0", "--batch-size", "128", "--output", "z.txt",
        ],
    );
    let report = read(dir.path(), "z.txt.report");
    let rows = data_rows(&report);
    assert_eq!(rows.len(), 4, "{report}");
    for r in &rows[1..] {
        let tem: f64 = r[1].parse().unwrap();
        let total: f64 = r[4].parse().unwrap();
        assert!(tem.is_finite());
        assert_eq!(tem, total);
    }
    assert_ne!(read(dir.path(), "z.txt"), read(dir.path(), "f.txt"));
}

#[test]
fn dim_flag_is_checked_against_features() {
    let dir = fixture();
    let out = tgc(
        dir.path(),
        &["train", "--input", "g.interactions", "--features", "f.txt", "--clusters", "2", "--dim", "5", "--output", "z.txt"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--dim 5"));
}

fn metric(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn truth_embedding_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut emb = String::new();
    let mut labels = String::new();
    for node in 0..30u64 {
        let c = (node * 7 % 3) as usize;
        let row: Vec<&str> = (0..3).map(|j| if j == c { "1" } else { "0" }).collect();
        emb.push_str(&format!("{node} {}\n", row.join(" ")));
        labels.push_str(&format!("{node} class{c}\n"));
    }
    fs::write(d.join("truth.txt"), emb).unwrap();
    fs::write(d.join("labels"), labels).unwrap();
    let stdout = ok(d, &["eval", "--embeddings", "truth.txt", "--labels", "labels", "--output", "m.txt"]);
    let record = read(d, "m.txt");
    assert!(stdout.starts_with(&record));
    for key in ["acc", "nmi", "ari", "f1"] {
        assert!((metric(&record, key) - 1.0).abs() < 1e-12, "{key}: {record}");
    }
    assert!(record.contains("k=3"));
}

#[test]
fn eval_is_repeatable_and_warns_on_k_mismatch() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["eval", "--embeddings", "f.txt", "--labels", "g.labels", "--seed", "5", "--output", "m1.txt"]);
    ok(d, &["eval", "--embeddings", "f.txt", "--labels", "g.labels", "--seed", "5", "--output", "m2.txt"]);
    assert_eq!(read(d, "m1.txt"), read(d, "m2.txt"));
    let out = tgc(d, &["eval", "--embeddings", "f.txt", "--labels", "g.labels", "--k", "3", "--output", "m3.txt"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(read(d, "m3.txt").contains("k=3"));
}

#[test]
fn sweep_batch_gives_one_row_per_size() {
    let dir = fixture();
    let stdout = ok(
        dir.path(),
        &["sweep-batch", "--input", "g.interactions", "--features", "f.txt", "--clusters", "2", "--sizes", "1,64,4096", "--output", "s.tsv"],
    );
    let table = read(dir.path(), "s.tsv");
    assert_eq!(stdout, table);
    let rows = data_rows(&table);
    assert_eq!(rows.len(), 4);
    let sizes: Vec<&str> = rows[1..].iter().map(|r| r[0]).collect();
    assert_eq!(sizes, ["1", "64", "4096"]);
    let bytes: Vec<usize> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(bytes.windows(2).all(|w| w[0] <= w[1]), "{bytes:?}");
}

fn replay(dir: &Path, command: &str, manifest: &str, output: &str) -> PathBuf {
    ok(dir, &[command, "--config", manifest, "--output", output]);
    dir.join(output)
}

#[test]
fn manifests_replay_identically() {
    let dir = fixture();
    let d = dir.path();
    ok(
        d,
        &[
            "train", "--input", "g.interactions", "--features", "f.txt", "--clusters", "2", "--epochs", "2",
            "--batch-size", "100", "--exec", "sequential", "--seed", "9", "--output", "z.txt",
        ],
    );
    let z2 = replay(d, "train", "z.txt.manifest", "z2.txt");
    assert_eq!(read(d, "z.txt"), fs::read_to_string(z2).unwrap());
    assert_eq!(read(d, "z.txt.meta").lines().next(), read(d, "z2.txt.meta").lines().next());

    let f2 = replay(d, "pretrain", "f.txt.manifest", "f2.txt");
    assert_eq!(read(d, "f.txt"), fs::read_to_string(f2).unwrap());

    ok(d, &["eval", "--embeddings", "z.txt", "--labels", "g.labels", "--output", "m.txt"]);
    let m2 = replay(d, "eval", "m.txt.manifest", "m2.txt");
    assert_eq!(read(d, "m.txt"), fs::read_to_string(m2).unwrap());

    ok(d, &["generate", "--config", "g.manifest", "--output", "h"]);
    assert_eq!(read(d, "g.interactions"), read(d, "h.interactions"));
}

#[test]
fn command_line_flags_override_config_file() {
    let dir = fixture();
    let d = dir.path();
    fs::write(
        d.join("run.cfg"),
        "# shared settings\ninput=g.interactions\nfeatures=f.txt\nclusters=2\nepochs=4\nbatch_size=200\n",
    )
    .unwrap();
    ok(d, &["train", "--config", "run.cfg", "--epochs", "1", "--output", "z.txt"]);
    assert!(read(d, "z.txt.meta").starts_with("epoch=1\n"));
    let manifest = read(d, "z.txt.manifest");
    assert!(manifest.contains("\nbatch-size=200\n"), "{manifest}");
    assert!(manifest.contains("\nepochs=1\n"));

    ok(d, &["train", "--config", "run.cfg", "--output", "z4.txt"]);
    assert!(read(d, "z4.txt.meta").starts_with("epoch=4\n"));
}
