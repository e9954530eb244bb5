use std::path::Path;
use std::process::{Command, Output};

use neurostream::dataset::{SynthSpec, Split};
use neurostream::features_io;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurostream")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, split: Split, seed: &str) -> std::path::PathBuf {
    let spec = SynthSpec { duration: 4.0, noise_sigma: 0.2, split, ..SynthSpec::separable(1, 1) };
    let spec_path = dir.join(format!("{split}_spec.json"));
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    ok(&["synth", "--spec", s(&spec_path), "--seed", seed, "--out", s(dir)]);
    dir.join(format!("{split}.csv"))
}

#[test]
fn pipeline_subcommands_produce_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let raw = synth(d, Split::Train, "1");
    let val = synth(d, Split::Validation, "2");
    assert!(d.join("train.json").exists());

    let prep = d.join("prep.csv");
    ok(&["preprocess", "--in", s(&raw), "--out", s(&prep)]);
    let feats = d.join("features.bin");
    ok(&["features", "--in", s(&prep), "--manifest", s(&d.join("prep.json")), "--out", s(&feats)]);
    let blocks = features_io::load(&feats).unwrap();
    assert_eq!(blocks.len(), 6);
    // 1200 − 12 trimmed samples, window 256 / hop 128.
    assert_eq!((blocks[0].frames, blocks[0].n_channels, blocks[0].n_bins), (8, 21, 42));

    let exp = d.join("exp.json");
    std::fs::write(&exp, r#"{"epochs": 3, "batch_size": 3, "model": {"conv_filters": 3, "lstm_units": 4, "dense_units": 5}}"#).unwrap();
    let run = d.join("run");
    ok(&["train", "--train", s(&raw), "--val", s(&val), "--config", s(&exp), "--out", s(&run)]);
    for f in ["model.ckpt", "report.json", "confusion.csv", "confusion_pct.csv", "loss_curve.csv", "config.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let curve = std::fs::read_to_string(run.join("loss_curve.csv")).unwrap();
    assert!(curve.starts_with("epoch,train_loss,val_loss,val_acc\n"));
    assert_eq!(curve.lines().count(), 4);

    let eval_dir = d.join("eval");
    ok(&["eval", "--in", s(&val), "--model", s(&run.join("model.ckpt")), "--config", s(&exp), "--out", s(&eval_dir)]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(eval_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 6);

    let preds = d.join("predictions.csv");
    ok(&["predict", "--in", s(&val), "--model", s(&run.join("model.ckpt")), "--config", s(&exp), "--out", s(&preds)]);
    let text = std::fs::read_to_string(&preds).unwrap();
    assert!(text.starts_with("subject,trial,label,p_anger,"));
    assert_eq!(text.lines().count(), 7);

    let cmp = d.join("compare.csv");
    ok(&["compare", "--train", s(&raw), "--val", s(&val), "--config", s(&exp), "--seeds", "2", "--out", s(&cmp)]);
    let table = std::fs::read_to_string(&cmp).unwrap();
    assert_eq!(table.lines().count(), 3);

    let scan = d.join("scan.csv");
    ok(&["temporal-scan", "--train", s(&raw), "--val", s(&val), "--config", s(&exp), "--out", s(&scan)]);
    let scan = std::fs::read_to_string(&scan).unwrap();
    assert!(scan.starts_with("variant,j,train_acc,val_acc,status\n"));
    assert_eq!(scan.lines().count(), 17);
}

#[test]
fn inspect_prints_partition_and_layer_table() {
    let out = ok(&["inspect", "--partition"]);
    assert!(out.contains("left : Fp1 F7 C3 P3 O1 F3 T3 T5 Fz Cz A1"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(&cfg, "{}").unwrap();
    let out = ok(&["inspect", "--model", s(&cfg), "--fs", "300"]);
    assert!(out.contains("left.conv.kernel"));
    assert!(out.contains("param_count 147078"));
}

#[test]
fn gradcheck_runs_on_a_tiny_model() {
    let out = cli(&["gradcheck", "--variant", "mono", "--seed", "3"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("mono objective: max relative error"), "{text}");
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
}

#[test]
fn exit_codes_follow_error_kind() {
    assert_eq!(cli(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(cli(&["train", "--train", "x.csv"]).status.code(), Some(1));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(cli(&["preprocess", "--in", s(&missing), "--out", s(&dir.path().join("o.csv"))]).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"epochs": 0}"#).unwrap();
    let out = cli(&["inspect", "--model", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochs"));

    std::fs::write(&bad, r#"{"epochz": 3}"#).unwrap();
    assert_eq!(cli(&["inspect", "--model", s(&bad)]).status.code(), Some(1));
}
