use std::path::Path;
use std::process::{Command, Output};

fn neurotext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurotext")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = neurotext(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn figure_one_shapes_are_printed() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = path(dir.path(), "c.tsv");
    std::fs::write(&corpus, "1\ta b c d e f g\n0\tg f e d c b a\n1\ta a b\n").unwrap();
    let stdout = ok(&[
        "train", "--model", "cnn", "--corpus", &corpus, "--out", &path(dir.path(), "run"), "--s", "7", "--d", "5", "--nf", "2",
        "--epochs", "1", "--val-fraction", "0",
    ]);
    for line in ["region 2: 2 filters, feature map length 6", "region 3: 2 filters, feature map length 5", "region 4: 2 filters, feature map length 4", "pooled vector length: 6"] {
        assert!(stdout.contains(line), "missing `{line}` in\n{stdout}");
    }
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = neurotext(&["train", "--model", "cnn", "--corpus", &path(dir.path(), "nope.tsv")]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_flag = neurotext(&["train", "--no-such-flag"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    let config = path(dir.path(), "c.toml");
    std::fs::write(&config, "model = \"cnn\"\nunknown_key = 3\n").unwrap();
    assert_eq!(neurotext(&["train", "--config", &config]).status.code(), Some(2));
}

#[test]
fn config_replay_and_generation_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = path(dir.path(), "lm.txt");
    std::fs::write(&corpus, "the cat sat\nthe dog ran\na cat ran\nthe cat ran far\n").unwrap();
    let run = path(dir.path(), "run");
    ok(&["train", "--model", "gru-lm", "--corpus", &corpus, "--out", &run, "--hidden", "6", "--epochs", "2", "--seed", "3"]);
    let replay = path(dir.path(), "replay");
    ok(&["train", "--config", &path(Path::new(&run), "config.toml"), "--out", &replay]);
    let a = std::fs::read(Path::new(&run).join("model.ckpt")).unwrap();
    let b = std::fs::read(Path::new(&replay).join("model.ckpt")).unwrap();
    assert_eq!(a, b);

    let first = ok(&["generate", "--run", &run, "--seed", "9", "--samples", "3", "--max-steps", "10"]);
    let second = ok(&["generate", "--run", &run, "--seed", "9", "--samples", "3", "--max-steps", "10"]);
    assert_eq!(first, second);
}

#[test]
fn unit_beam_translates_like_greedy() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = path(dir.path(), "copy.tsv");
    ok(&["synth", "copy", "--out", &corpus, "--n", "60", "--vocab", "6", "--max-len", "5"]);
    let run = path(dir.path(), "run");
    ok(&["train", "--model", "seq2seq", "--corpus", &corpus, "--out", &run, "--hidden", "8", "--epochs", "2"]);
    let input = path(dir.path(), "in.txt");
    std::fs::write(&input, "t1 t2 t3\nt4 t0\n").unwrap();
    let greedy = ok(&["translate", "--run", &run, "--input", &input, "--greedy", "--max-len", "8"]);
    let beam = ok(&["translate", "--run", &run, "--input", &input, "--beam", "1", "--max-len", "8"]);
    assert_eq!(greedy, beam);
    assert_eq!(greedy.lines().count(), 2);
}

#[test]
fn inspect_rejects_mismatched_model() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = path(dir.path(), "lm.txt");
    std::fs::write(&corpus, "a b c\nb c a\n").unwrap();
    let run = path(dir.path(), "run");
    ok(&["train", "--model", "rnn-lm", "--corpus", &corpus, "--out", &run, "--hidden", "4", "--epochs", "1"]);
    let out = neurotext(&["inspect", "saliency", "--run", &run, "--corpus", &corpus, "--out", &path(dir.path(), "i")]);
    assert_eq!(out.status.code(), Some(1));
}
