use std::path::Path;
use std::process::{Command, Output};

fn centrank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_centrank"))
        .args(args)
        .current_dir(dir)
        .env_remove("CENTRANK_SEED")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = centrank(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

const TINY: [&str; 12] = [
    "--epochs",
    "2",
    "--corpus-count",
    "6",
    "--n-min",
    "30",
    "--n-max",
    "40",
    "--batch-size",
    "16",
    "--embed-dim",
    "8",
];

fn train_tiny(dir: &Path, out: &str) {
    let mut args = vec!["train", "--out", out];
    args.extend(TINY);
    ok(dir, &args);
}

#[test]
fn generate_ws_has_nk_over_2_edges() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["generate", "--model", "ws", "--n", "100", "--k", "4", "--p", "0.1", "--seed", "7", "--out", "g.txt"]);
    let edges = read(d.path(), "g.txt").lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(edges, 200);
    assert!(read(d.path(), "g.txt.manifest").contains("status ok"));
}

#[test]
fn generate_corpus_writes_every_file() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["generate", "--corpus", "6", "--n-min", "20", "--n-max", "30", "--mix", "0.5", "--seed", "1", "--out", "c"]);
    let files = std::fs::read_dir(d.path().join("c")).unwrap().count();
    assert_eq!(files, 7);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    assert_eq!(centrank(p, &["generate", "--model", "er", "--n", "10", "--out", "x"]).status.code(), Some(2));
    assert_eq!(centrank(p, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        centrank(p, &["train", "--metric", "bc", "--decoder", "mixer", "--batch-size", "1", "--out", "r"]).status.code(),
        Some(2)
    );
    assert_eq!(centrank(p, &["compute-exact", "--graph", "missing.txt", "--out", "o.txt"]).status.code(), Some(3));
    std::fs::write(p.join("bad.ckpt"), "not a checkpoint\nend\n").unwrap();
    ok(p, &["generate", "--model", "ba", "--n", "30", "--out", "g.txt"]);
    let out = centrank(p, &["predict", "--checkpoint", "bad.ckpt", "--graph", "g.txt", "--out", "s.txt"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!p.join("s.txt").exists());
    assert!(read(p, "s.txt.manifest").contains("status failed"));
}

#[test]
fn config_file_equals_flags() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let cfg: String = TINY.chunks(2).map(|kv| format!("{}={}\n", kv[0][2..].replace('-', "_"), kv[1])).collect();
    std::fs::write(p.join("tiny.cfg"), cfg).unwrap();
    train_tiny(p, "a");
    ok(p, &["train", "--config", "tiny.cfg", "--out", "b"]);
    assert_eq!(std::fs::read(p.join("a/model.ckpt")).unwrap(), std::fs::read(p.join("b/model.ckpt")).unwrap());
    let log = read(p, "a/train_log.tsv");
    assert_eq!(log.lines().count(), 3);
    assert!(log.starts_with("epoch\ttrain_loss\ttest_tau"));
}

#[test]
fn predict_is_deterministic_and_replayable() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    train_tiny(p, "run");
    ok(p, &["generate", "--model", "ba", "--n", "50", "--m", "2", "--out", "g.txt"]);
    ok(p, &["predict", "--checkpoint", "run/model.ckpt", "--graph", "g.txt", "--out", "a.txt"]);
    ok(p, &["predict", "--checkpoint", "run/model.ckpt", "--graph", "g.txt", "--out", "b.txt"]);
    let a = read(p, "a.txt");
    assert_eq!(a, read(p, "b.txt"));
    assert_eq!(a.lines().count(), 50);
    let mut ranks: Vec<usize> = a.lines().map(|l| l.split(' ').nth(2).unwrap().parse().unwrap()).collect();
    ranks.sort_unstable();
    assert_eq!(ranks, (1..=50).collect::<Vec<_>>());

    ok(p, &["replay", "--manifest", "a.txt.manifest", "--out", "c.txt"]);
    assert_eq!(a, read(p, "c.txt"));
    ok(p, &["replay", "--manifest", "run/manifest.txt", "--out", "run2"]);
    assert_eq!(std::fs::read(p.join("run/model.ckpt")).unwrap(), std::fs::read(p.join("run2/model.ckpt")).unwrap());
}

#[test]
fn evaluate_emits_rows_per_run_and_mean() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    train_tiny(p, "run");
    ok(p, &["generate", "--model", "ws", "--n", "40", "--out", "g.txt"]);
    ok(p, &["evaluate", "--checkpoint", "run/model.ckpt", "--graph", "g.txt", "--runs", "10", "--out", "ev.tsv"]);
    let ev = read(p, "ev.tsv");
    let rows: Vec<&str> = ev.lines().filter(|l| l.starts_with("g.txt\t")).collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[10].contains("\tmean\t"));
    assert!(ev.contains("# runs 10"));
}

#[test]
fn pca_writes_two_coordinates_per_node() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    train_tiny(p, "run");
    ok(p, &["generate", "--model", "ba", "--n", "25", "--out", "g.txt"]);
    ok(p, &["pca", "--checkpoint", "run/model.ckpt", "--graph", "g.txt", "--out", "pca.txt"]);
    let text = read(p, "pca.txt");
    assert_eq!(text.lines().count(), 25);
    assert!(text.lines().all(|l| l.split(' ').count() == 3));
}
