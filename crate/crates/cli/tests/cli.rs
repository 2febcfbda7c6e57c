use std::path::Path;
use std::process::{Command, Output};

fn sceneact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sceneact")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = sceneact(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = sceneact(args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(path: &Path, text: &str) -> String {
    std::fs::write(path, text).unwrap();
    s(path).to_string()
}

fn small_dataset(dir: &Path) -> String {
    let cfg = write(&dir.join("gen.cfg"), "seed = 2\ntrain = 80\nval = 20\ntest_ordinary = 20\ntest_2hop_ta = 12\ntest_2hop_qh = 12\nblind = true\n");
    let data = dir.join("data");
    ok(&["gen", "--config", &cfg, "--out", s(&data)]);
    s(&data).to_string()
}

const TRAIN: &str = "stage1_epochs = 2\nstage2_epochs = 2\nstage1_pairs = 40\nidentity_pairs = 4\nhidden_width = 32\nlstm_hidden = 16\naction_dim = 10\n";

#[test]
fn oracle_eval_is_perfect_on_every_split() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let out = dir.path().join("eval");
    for split in ["train", "val", "test_ordinary", "test_2hop_ta", "test_2hop_qh"] {
        let table = ok(&["eval", "--data", &data, "--split", split, "--mode", "oracle", "--out", s(&out)]);
        assert!(table.lines().nth(1).unwrap().contains("100.0"), "{table}");
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join(format!("{split}.oracle.report.json"))).unwrap()).unwrap();
        assert_eq!(json["overall"]["accuracy"], 100.0);
    }
}

#[test]
fn generation_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (da, db) = (small_dataset(a.path()), small_dataset(b.path()));
    for name in ["train.jsonl", "test_ordinary.jsonl", "test_ordinary.oracle.jsonl", "vocab.json", "metadata.json"] {
        assert_eq!(std::fs::read(Path::new(&da).join(name)).unwrap(), std::fs::read(Path::new(&db).join(name)).unwrap(), "{name}");
    }
}

#[test]
fn learned_path_end_to_end_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let cfg = write(&dir.path().join("train.cfg"), TRAIN);
    let p = |name: &str| s(&dir.path().join(name)).to_string();
    for run in ["a", "b"] {
        ok(&["train-stage1", "--data", &data, "--config", &cfg, "--out", &p(&format!("s1{run}.bin"))]);
        ok(&["train-stage2", "--data", &data, "--stage1", &p(&format!("s1{run}.bin")), "--config", &cfg, "--out", &p(&format!("s2{run}.bin"))]);
        let args = ["eval", "--data", &data, "--split", "test_2hop_ta", "--stage1", &p(&format!("s1{run}.bin")), "--stage2", &p(&format!("s2{run}.bin")), "--out"];
        ok(&[&args[..], &[&p(&format!("eval{run}"))]].concat());
    }
    for name in ["s1a.bin", "s2a.bin", "s1a.bin.json"] {
        assert_eq!(std::fs::read(p(name)).unwrap(), std::fs::read(p(&name.replacen('a', "b", 1))).unwrap(), "{name}");
    }
    for name in ["test_2hop_ta.learned.report.json", "test_2hop_ta.learned.report.txt", "test_2hop_ta.learned.predictions.jsonl"] {
        assert_eq!(std::fs::read(dir.path().join("evala").join(name)).unwrap(), std::fs::read(dir.path().join("evalb").join(name)).unwrap(), "{name}");
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("evala/test_2hop_ta.learned.report.json")).unwrap()).unwrap();
    assert_eq!(json["action_types"].as_array().unwrap().len(), 6);
    let predictions = std::fs::read_to_string(dir.path().join("evala/test_2hop_ta.learned.predictions.jsonl")).unwrap();
    assert_eq!(predictions.lines().count(), 12);
    for line in predictions.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["id"].is_string() && v["scene_pred"]["objects"].is_array() && !v["answer"].is_null());
    }

    let csv = p("vectors.csv");
    ok(&["export-vectors", "--data", &data, "--stage1", &p("s1a.bin"), "--stage2", &p("s2a.bin"), "--out", &csv]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 20);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 3 + 10);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let cfg = write(&dir.path().join("train.cfg"), TRAIN);
    let csv = dir.path().join("sweep.csv");
    ok(&["sweep", "--data", &data, "--axis", "vector_length", "--values", "4,8", "--config", &cfg, "--out", s(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "axis_value,scene_acc,qa_acc");
    assert!(lines[1].starts_with("4,") && lines[2].starts_with("8,"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn failures_map_to_exit_codes_and_leave_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let bad = write(&dir.path().join("bad.cfg"), "stage1_epochs = 1\nwarp = 9\n");
    let (c, err) = code(&["train-stage1", "--data", &data, "--config", &bad, "--out", s(&dir.path().join("x.bin"))]);
    assert_eq!(c, 2, "{err}");
    assert_eq!(err.lines().count(), 1);
    assert!(!dir.path().join("x.bin").exists());

    assert_eq!(code(&["eval", "--data", &data, "--split", "holdout", "--mode", "oracle", "--out", s(dir.path())]).0, 2);
    assert_eq!(code(&["sweep", "--data", &data, "--axis", "depth", "--out", s(&dir.path().join("s.csv"))]).0, 2);
    assert_eq!(code(&["eval", "--data", s(&dir.path().join("missing")), "--split", "val", "--mode", "oracle", "--out", s(dir.path())]).0, 3);

    // A stage-2 checkpoint evaluated against a different stage-1 decoder.
    let one = write(&dir.path().join("one.cfg"), TRAIN);
    let other = write(&dir.path().join("other.cfg"), &format!("{TRAIN}seed = 8\n"));
    let p = |name: &str| s(&dir.path().join(name)).to_string();
    ok(&["train-stage1", "--data", &data, "--config", &one, "--out", &p("s1.bin")]);
    ok(&["train-stage1", "--data", &data, "--config", &other, "--out", &p("s1other.bin")]);
    ok(&["train-stage2", "--data", &data, "--stage1", &p("s1.bin"), "--config", &one, "--out", &p("s2.bin")]);
    let out = dir.path().join("mismatch");
    let (c, err) = code(&["eval", "--data", &data, "--split", "val", "--stage1", &p("s1other.bin"), "--stage2", &p("s2.bin"), "--out", s(&out)]);
    assert_eq!(c, 4, "{err}");
    assert!(std::fs::read_dir(&out).map_or(true, |mut d| d.next().is_none()));
    let (c, _) = code(&["train-stage2", "--data", &data, "--stage1", &p("s2.bin"), "--out", &p("s3.bin")]);
    assert_eq!(c, 4);
    assert!(!dir.path().join("s3.bin").exists());
}
