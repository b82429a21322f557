use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn sphrase(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sphrase"));
    c.args(args).env_remove("SPHRASE_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    sphrase(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = sphrase(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn lines_for<'a>(out: &'a str, target: &str) -> Vec<&'a str> {
    let mut v: Vec<&str> = out.lines().filter(|l| l.split('\t').next() == Some(target)).collect();
    v.sort_unstable();
    v
}

#[test]
fn pairs_golden_unit_context() {
    let s = "british airways to [ new york ] has departed";
    let out = stdout(&run(&["pairs", "--sentence", s, "--regime", "sphrase", "--window", "1", "--full-window"]));
    assert_eq!(lines_for(&out, "new"), ["new\thas", "new\tto"]);
    assert_eq!(lines_for(&out, "york"), ["york\thas", "york\tto"]);
    let out = stdout(&run(&["pairs", "--sentence", s, "--regime", "word2vec", "--window", "1", "--full-window"]));
    assert_eq!(lines_for(&out, "new"), ["new\tto", "new\tyork"]);
}

#[test]
fn pairs_golden_phrase_in_window() {
    let s = "[ british airways ] to rome has departed";
    let out = stdout(&run(&["pairs", "--sentence", s, "--regime", "sphrase", "--window", "2", "--full-window"]));
    assert_eq!(lines_for(&out, "rome"), ["rome\tairways", "rome\tbritish", "rome\tdeparted", "rome\thas", "rome\tto"]);
}

#[test]
fn seed_environment_overrides_flag() {
    let corpus = "a b c d e f g h i j k l m n o p\nq r [ s t ] u v w x y z\n".repeat(5);
    let args = ["pairs", "--regime", "sphrase-r", "--window", "5", "--seed", "1"];
    let with_flag = stdout(&run_stdin(&["pairs", "--regime", "sphrase-r", "--window", "5", "--seed", "77"], &corpus));
    let mut c = sphrase(&args);
    c.env("SPHRASE_SEED", "77").stdin(Stdio::piped()).stdout(Stdio::piped());
    let mut child = c.spawn().unwrap();
    child.stdin.take().unwrap().write_all(corpus.as_bytes()).unwrap();
    let with_env = stdout(&child.wait_with_output().unwrap());
    assert_eq!(with_env, with_flag);
    assert_ne!(with_flag, stdout(&run_stdin(&args, &corpus)));
}

#[test]
fn unknown_flag_exits_with_usage() {
    let o = run(&["train", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn runtime_errors_are_one_line_with_status_1() {
    let o = run(&["nearest", "--embedding", "/nonexistent.txt", "--word", "x"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("/nonexistent.txt"));
}

#[test]
fn ingest_vocab_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let mut article = String::from("== Heading ==\n");
    for i in 0..300 {
        article.push_str(&format!(
            "the {} flew to [[New York City|New York]] and then to [[Los Angeles]] on '''day''' {} {{{{cite}}}}\n",
            ["cat", "dog", "bird"][i % 3],
            i % 7
        ));
    }
    article.push_str("[[Category:Cities]]\n");
    let mut bundle = Vec::new();
    sphrase::formats::write_bundle(&mut bundle, [article.as_str(), "second [[Rome]] article\n"]).unwrap();
    std::fs::write(p("wiki.bundle"), bundle).unwrap();

    stdout(&run(&["ingest", "--bundle", &p("wiki.bundle"), "-o", &p("corpus.txt"), "--stats", &p("stats.tsv")]));
    let corpus = std::fs::read_to_string(p("corpus.txt")).unwrap();
    assert_eq!(corpus.lines().next(), Some("heading"));
    assert!(corpus.lines().nth(1).unwrap().contains("[ new york ]"), "{corpus}");
    assert!(corpus.contains("second rome article"));
    assert!(!corpus.contains("category"));
    let stats = std::fs::read_to_string(p("stats.tsv")).unwrap();
    assert!(stats.contains("sentences\t302\n"), "{stats}");
    assert!(Path::new(&p("corpus.txt.manifest.json")).exists());

    let vocab = stdout(&run_stdin(&["vocab", "--min-count", "5"], &corpus));
    assert!(vocab.lines().all(|l| l.split('\t').count() == 2));
    assert!(vocab.starts_with("to\t600\n"), "{vocab}");

    stdout(&run(&[
        "train", "--corpus", &p("corpus.txt"), "--out-dir", &p("run"), "--min-count", "1", "--dim", "8", "--epochs", "2",
        "--num-sampled", "5", "--batch-tokens", "400", "--lr", "0.01",
    ]));
    let progress = std::fs::read_to_string(p("run/progress.tsv")).unwrap();
    assert_eq!(progress.lines().count(), 2);
    assert!(progress.lines().all(|l| l.split('\t').count() == 4));
    assert!(Path::new(&p("run/checkpoints/epoch-001.ckpt")).exists());
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["train"]["regime"], "sphrase-r");
    assert_eq!(manifest["train"]["dim"], 8);
    let emb = p("run/embedding.txt");
    let ckpt = sphrase::formats::load_checkpoint(Path::new(&p("run/checkpoints/epoch-001.ckpt"))).unwrap();
    let text = sphrase::formats::load_embedding(Path::new(&emb)).unwrap();
    assert_eq!(text.vectors(), &ckpt.input[..]);

    let near = stdout(&run(&["nearest", "--embedding", &emb, "--word", "New", "--topk", "3"]));
    assert_eq!(near.lines().count(), 3);
    assert!(!near.contains("new\t"));

    std::fs::write(p("phrases.txt"), "new york\nlos angeles\nunknown words here\n").unwrap();
    let sim = stdout(&run(&["eval-sim", "--embedding", &emb, "--phrases", &p("phrases.txt"), "--format", "tsv", "--repeats", "5"]));
    assert_eq!(sim.lines().count(), 6);
    assert!(sim.starts_with("2\t2\t"));

    let questions = ": one\nnew york los angeles\nthe cat dog bird\n: two\nmissing word here now\n";
    let rep = stdout(&run_stdin(&["eval-analogy", "--embedding", &emb, "--questions", "-", "--format", "tsv"], questions));
    let rows: Vec<&str> = rep.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("one\t") && rows[0].contains("\t2\t"));
    assert_eq!(rows[1], "two\t0\t0\t0.0000");
    assert!(rows[2].starts_with("all\t"));
}

#[test]
fn analogy_report_on_standard_set_has_fourteen_categories_and_all() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("e.txt");
    std::fs::write(&emb, "4 2\nathens 1 0\ngreece 0 1\nbaghdad 1 1\niraq 0.5 2\n").unwrap();
    let q = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/questions-words.txt");
    let out = stdout(&run(&["eval-analogy", "--embedding", emb.to_str().unwrap(), "--questions", q.to_str().unwrap()]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1 + 14 + 1, "{out}");
    assert!(lines[0].starts_with("category"));
    assert!(lines[1].starts_with("capital-common-countries"));
    assert!(lines[15].starts_with("all"));
}
