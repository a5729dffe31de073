mod common;

use std::fs;
use std::path::Path;

use apnet::embed::write_word2vec_text;
use apnet::eval::{read_attention, write_dataset};

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = apnet::cli::run(std::iter::once("apnet").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_toy(dir: &Path, seed: u64) -> std::path::PathBuf {
    let path = dir.join("toy.tsv");
    write_dataset(&common::toy_corpus(seed), fs::File::create(&path).unwrap()).unwrap();
    path
}

fn quick_train(dir: &Path, model: &str) -> std::path::PathBuf {
    let data = write_toy(dir, 3);
    let out = dir.join(format!("{model}.ckpt"));
    let (code, _, err) = cli(&[
        "train", "--model", model, "--data", p(&data), "--out", p(&out), "--dim", "6", "--epochs", "2",
        "--batch", "10",
    ]);
    assert_eq!(code, 0, "{err}");
    out
}

#[test]
fn usage_errors_exit_one() {
    let (code, _, err) = cli(&["train", "--model", "AP-CNN", "--out", "x.ckpt"]);
    assert_eq!(code, 1);
    assert!(err.contains("--data"), "{err}");
    assert_eq!(cli(&["eval", "--bogus"]).0, 1);
    assert_eq!(cli(&["train", "--model", "CNN-X", "--data", "a", "--out", "b"]).0, 1);
    assert_eq!(cli(&[]).0, 1);
}

#[test]
fn architecture_flag_mismatch_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy(dir.path(), 1);
    let out = dir.path().join("m.ckpt");
    let (code, _, err) = cli(&["train", "--model", "AP-CNN", "--data", p(&data), "--out", p(&out), "--hidden", "5"]);
    assert_eq!(code, 1, "{err}");
    let (code, _, _) = cli(&["train", "--model", "QA-biLSTM", "--data", p(&data), "--out", p(&out), "--filters", "5"]);
    assert_eq!(code, 1);
    assert!(!out.exists());
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("train") && out.contains("attend"));
    let (code, out, _) = cli(&["train", "--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("--freeze-embeddings"));
    assert_eq!(cli(&["--version"]).0, 0);
}

#[test]
fn missing_file_is_data_error() {
    let (code, _, err) = cli(&["eval", "--checkpoint", "/nonexistent/m.ckpt", "--data", "/nonexistent/d.tsv"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error:"), "{err}");
}

#[test]
fn malformed_data_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.tsv");
    fs::write(&data, "q1\tc1\t1\twhat is it\tan answer\nq1\tc2\tyes\twhat is it\tanother\n").unwrap();
    let out = dir.path().join("m.ckpt");
    let (code, _, err) = cli(&["train", "--model", "QA-CNN", "--data", p(&data), "--out", p(&out)]);
    assert_eq!(code, 2);
    assert!(err.contains(":2:"), "{err}");
}

#[test]
fn perfectly_trained_toy_model_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::toy_corpus(7);
    let path = write_toy(dir.path(), 7);
    let emb_path = dir.path().join("vectors.txt");
    let mut vec_out = fs::File::create(&emb_path).unwrap();
    write_word2vec_text(&common::toy_pretrained(&data, 16, 7), &mut vec_out).unwrap();
    drop(vec_out);
    let ckpt = dir.path().join("ap.ckpt");
    let (code, report, err) = cli(&[
        "train", "--model", "AP-CNN", "--data", p(&path), "--dev", p(&path), "--out", p(&ckpt),
        "--embeddings", p(&emb_path), "--dim", "16", "--filters", "32", "--window", "3", "--epochs", "60",
        "--seed", "7",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(report.contains("embeddings=frozen"));
    assert!(!report.contains(p(dir.path())), "report leaks paths");

    let (code, out, err) = cli(&["eval", "--checkpoint", p(&ckpt), "--data", p(&path), "--length-buckets", "6,8"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("P@1 1.000000"), "{out}");
    assert!(out.contains("MAP 1.000000") && out.contains("MRR 1.000000"), "{out}");
    assert!(out.contains("length<=8 accuracy 1.000000 questions 20"), "{out}");
}

#[test]
fn eval_writes_rankings() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = quick_train(dir.path(), "QA-biLSTM");
    let data = dir.path().join("toy.tsv");
    let rankings = dir.path().join("ranks.tsv");
    let (code, _, err) = cli(&["eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--rankings", p(&rankings)]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(&rankings).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), common::TOY_QUESTIONS * common::TOY_CANDIDATES);
    assert!(rows.iter().all(|r| r.len() == 5));
    for q in rows.chunks(common::TOY_CANDIDATES) {
        let ranks: Vec<&str> = q.iter().map(|r| r[1]).collect();
        assert_eq!(ranks, (1..=10).map(|i| i.to_string()).collect::<Vec<_>>().iter().map(String::as_str).collect::<Vec<_>>());
        let scores: Vec<f64> = q.iter().map(|r| r[3].parse().unwrap()).collect();
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn score_is_a_cosine() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = quick_train(dir.path(), "AP-biLSTM");
    let (code, out, err) = cli(&[
        "score", "--checkpoint", p(&ckpt), "--question", "what is topic3a", "--answer", "the topic3a of it",
    ]);
    assert_eq!(code, 0, "{err}");
    let s: f64 = out.trim().parse().unwrap();
    assert!((-1.0..=1.0).contains(&s));
    // unknown words map to the padding vector rather than failing
    let (code, _, _) = cli(&["score", "--checkpoint", p(&ckpt), "--question", "zzz", "--answer", "yyy qqq"]);
    assert_eq!(code, 0);
}

#[test]
fn attend_exports_and_filters() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = quick_train(dir.path(), "AP-CNN");
    let data = dir.path().join("toy.tsv");
    let (code, out, err) = cli(&["attend", "--checkpoint", p(&ckpt), "--data", p(&data), "--limit", "2"]);
    assert_eq!(code, 0, "{err}");
    let records = read_attention(out.as_bytes()).unwrap();
    assert_eq!(records.len(), 2 * common::TOY_CANDIDATES);

    let file = dir.path().join("att.jsonl");
    let (code, _, _) = cli(&[
        "attend", "--checkpoint", p(&ckpt), "--data", p(&data), "--question-id", "q04", "--candidate-id", "c1",
        "--out", p(&file),
    ]);
    assert_eq!(code, 0);
    let records = read_attention(std::io::BufReader::new(fs::File::open(&file).unwrap())).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!((records[0].question_id.as_str(), records[0].candidate_id.as_str()), ("q04", "c1"));
    for w in [&records[0].q_weights, &records[0].a_weights] {
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn attend_refuses_plain_pooling_models() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = quick_train(dir.path(), "QA-CNN");
    let data = dir.path().join("toy.tsv");
    let (code, out, err) = cli(&["attend", "--checkpoint", p(&ckpt), "--data", p(&data)]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.starts_with("error:"));
}

#[test]
fn gradcheck_command_passes() {
    let (code, out, err) = cli(&["gradcheck", "--seed", "3"]);
    assert_eq!(code, 0, "{out}{err}");
    assert_eq!(out.lines().filter(|l| l.ends_with("PASS")).count(), 8, "{out}");
}
