use std::path::Path;
use std::process::{Command, Output};

fn pdisc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdisc"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = pdisc(args, dir);
    assert!(out.status.success(), "pdisc {args:?}: {}", stderr(&out));
    String::from_utf8(out.stdout).unwrap()
}

const SUBCOMMANDS: [&str; 8] = ["ingest", "synth", "augment", "train", "evaluate", "predict", "ablate", "baseline"];

#[test]
fn help_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let top = ok(&["--help"], dir.path());
    for sub in SUBCOMMANDS {
        assert!(top.contains(sub), "{sub} missing from help");
        let text = ok(&[sub, "--help"], dir.path());
        assert!(text.contains("--seed"), "{sub} help lacks --seed");
    }
}

#[test]
fn bad_invocations_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(pdisc(&["train", "--bogus"], d).status.code(), Some(1));
    assert_eq!(pdisc(&[], d).status.code(), Some(1));
    assert_eq!(pdisc(&["ablate", "--variants", "full,nope", "--out", "x"], d).status.code(), Some(1));

    std::fs::write(d.join("run.toml"), "epochs = 2\nbogus_key = 1\n").unwrap();
    let out = pdisc(&["synth", "--config", "run.toml", "--out", "c.jsonl"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bogus_key"));

    let out = pdisc(&["evaluate", "--data", "c.jsonl", "--checkpoint", "missing"], d);
    assert_eq!(out.status.code(), Some(1));
    let out = pdisc(&["train", "--data", "absent.jsonl", "--out", "ckpt"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("absent.jsonl"));
}

#[test]
fn synth_train_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--n-per-cell", "20", "--seed", "3", "--out", "c.jsonl"], d);
    let corpus = std::fs::read_to_string(d.join("c.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 120);

    std::fs::write(d.join("run.toml"), "epochs = 2\nseed = 3\n").unwrap();
    let last = ok(&["train", "--config", "run.toml", "--data", "c.jsonl", "--out", "ckpt"], d);
    let epoch: serde_json::Value = serde_json::from_str(last.trim()).unwrap();
    assert_eq!(epoch["epoch"], 2);
    let config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("ckpt/config.json")).unwrap()).unwrap();
    assert_eq!(config["epochs"], 2);

    let line = ok(
        &[
            "predict", "--checkpoint", "ckpt", "--text", "my bank declined my card again", "--device", "android",
            "--time", "2019-03-01T21:15:00Z",
        ],
        d,
    );
    let pred: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(pred["type_probs"].as_array().unwrap().len(), 3);
    let sum: f64 = pred["type_probs"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-9);
    assert!(matches!(pred["disclosure"].as_u64(), Some(0 | 1)));

    let all = ok(&["predict", "--checkpoint", "ckpt", "--data", "c.jsonl"], d);
    assert_eq!(all.lines().count(), 120);

    // a checkpoint cannot be scored with a different parser
    let out = pdisc(&["evaluate", "--data", "c.jsonl", "--checkpoint", "ckpt", "--parser", "real"], d);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn augment_balances_cells() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--n-per-cell", "10", "--out", "c.jsonl"], d);
    ok(&["augment", "--data", "c.jsonl", "--per-cell", "15", "--seed", "1", "--out", "b.jsonl"], d);
    let text = std::fs::read_to_string(d.join("b.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 90);
    assert_eq!(text.matches("augmented_from").count(), 30);
}

#[test]
fn ingest_round_trips_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--n-per-cell", "5", "--out", "c.jsonl"], d);
    ok(&["ingest", "--data", "c.jsonl", "--out", "again.jsonl"], d);
    assert_eq!(
        std::fs::read_to_string(d.join("c.jsonl")).unwrap(),
        std::fs::read_to_string(d.join("again.jsonl")).unwrap()
    );
}

#[test]
fn pretrained_without_support_is_a_validation_error() {
    if cfg!(feature = "pretrained") {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--n-per-cell", "5", "--out", "c.jsonl"], d);
    let out = pdisc(&["train", "--data", "c.jsonl", "--out", "ckpt", "--encoder", "pretrained"], d);
    assert_eq!(out.status.code(), Some(1));
}
