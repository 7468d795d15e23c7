use std::path::Path;
use std::process::{Command, Output};

use facepolicy::config::SEED_ENV;
use facepolicy::format::read_animation;

fn run(dir: &Path, args: &[&str], env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_facepolicy"));
    cmd.args(args).current_dir(dir).env_remove(SEED_ENV);
    if let Some(seed) = env {
        cmd.env(SEED_ENV, seed);
    }
    cmd.output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args, None);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn resolved(stdout: &str) -> serde_json::Value {
    let line = stdout
        .lines()
        .find_map(|l| l.strip_prefix("resolved config: "))
        .expect("resolved config line");
    serde_json::from_str(line).unwrap()
}

const CONFIG: &str = r#"{
    "manifest": "data/manifest.json",
    "checkpoint": "run/p.fckp",
    "log": "run/log.jsonl",
    "policy": {"encoder": {"channels": 4, "feature_dim": 16}, "denoiser": {"hidden": 16, "step_dim": 8, "blocks": 1}},
    "train": {"epochs": 5, "learning_rate": 0.001}
}"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), CONFIG).unwrap();
    ok(
        dir.path(),
        &[
            "synth",
            "--seed",
            "1",
            "--count",
            "6",
            "--vertices",
            "10",
            "--frames",
            "16",
            "--out",
            "data",
        ],
    );
    dir
}

#[test]
fn smoke_pipeline_produces_a_table() {
    let dir = setup();
    let d = dir.path();
    let stdout = ok(d, &["train", "--config", "c.json", "--epochs", "2"]);
    let cfg = resolved(&stdout);
    // flag beats file, file beats default, defaults fill the rest
    assert_eq!(cfg["train"]["epochs"], 2);
    assert_eq!(cfg["train"]["learning_rate"], 0.001);
    assert_eq!(cfg["train"]["batch_size"], 1);
    assert_eq!(cfg["policy"]["vertices"], 10);
    let log = std::fs::read_to_string(d.join("run/log.jsonl")).unwrap();
    let epochs: std::collections::BTreeSet<u64> = log
        .lines()
        .map(|l| {
            let r: serde_json::Value = serde_json::from_str(l).unwrap();
            assert!(r["loss"].as_f64().unwrap().is_finite() && r["wall_time"].is_number());
            r["epoch"].as_u64().unwrap()
        })
        .collect();
    assert_eq!(epochs.into_iter().collect::<Vec<_>>(), [0, 1]);

    std::fs::create_dir_all(d.join("gt")).unwrap();
    for name in ["seq_005", "seq_004"] {
        std::fs::copy(d.join(format!("data/{name}.fanim")), d.join(format!("gt/{name}.fanim"))).unwrap();
        let audio = format!("data/{name}.faud");
        let template = format!("data/{name}.fanim");
        let out = format!("pred/{name}.fanim");
        ok(
            d,
            &[
                "generate",
                "--checkpoint",
                "run/p.fckp",
                "--audio",
                &audio,
                "--template",
                &template,
                "--out",
                &out,
                "--seed",
                "2",
            ],
        );
        let gen = read_animation(&d.join(&out)).unwrap();
        let src = read_animation(&d.join(&template)).unwrap();
        assert_eq!(gen.sequence.num_frames(), 16);
        assert_eq!(gen.sequence.frame(0), src.sequence.frame(0));
        assert_eq!(gen.template, src.template);
    }
    std::fs::write(d.join("mask.json"), "[0, 1, 2, 3]").unwrap();
    let stdout = ok(
        d,
        &[
            "eval",
            "--pred",
            "pred",
            "--gt",
            "gt",
            "--mask",
            "mask.json",
            "--out",
            "table.json",
        ],
    );
    assert!(stdout.contains("mean"));
    let table: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("table.json")).unwrap()).unwrap();
    assert_eq!(table["sequences"].as_array().unwrap().len(), 2);
    assert_eq!(table["mask_size"], 4);
    assert!(table["mean"]["mve"].as_f64().unwrap() > 0.0);

    ok(
        d,
        &[
            "generate",
            "--checkpoint",
            "run/p.fckp",
            "--audio",
            "data/seq_004.faud",
            "--template",
            "data/seq_004.fanim",
            "--out",
            "tf.fanim",
            "--frames",
            "9",
            "--teacher-forced",
        ],
    );
    assert_eq!(read_animation(&d.join("tf.fanim")).unwrap().sequence.num_frames(), 9);

    // unpaired files are reported, excluded and fail the run after writing the table
    let out = run(d, &["eval", "--pred", "pred", "--gt", "data", "--out", "t2.json"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unpaired"));
    let t2: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("t2.json")).unwrap()).unwrap();
    assert_eq!(t2["sequences"].as_array().unwrap().len(), 2);
    assert_eq!(t2["unpaired"].as_array().unwrap().len(), 4);

    let stdout = ok(d, &["inspect", "run/p.fckp"]);
    assert!(stdout.contains("format: FCKP") && stdout.contains("denoiser."));
}

#[test]
fn file_value_applies_without_flag() {
    let dir = setup();
    let stdout = ok(dir.path(), &["train", "--config", "c.json", "--max-steps", "3"]);
    let cfg = resolved(&stdout);
    assert_eq!(cfg["train"]["epochs"], 5);
    assert_eq!(cfg["train"]["max_steps"], 3);
    let stdout = ok(
        dir.path(),
        &[
            "train",
            "--manifest",
            "data/manifest.json",
            "--checkpoint",
            "x.fckp",
            "--log",
            "x.jsonl",
            "--max-steps",
            "1",
        ],
    );
    assert_eq!(resolved(&stdout)["train"]["epochs"], 50);
}

#[test]
fn seed_env_is_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["synth", "--count", "2", "--vertices", "8", "--frames", "8", "--out"];
    let out = run(d, &[&args[..], &["a"]].concat(), Some("42"));
    assert!(out.status.success());
    assert_eq!(resolved(&String::from_utf8_lossy(&out.stdout))["synth"]["seed"], 42);
    let out = run(d, &[&args[..], &["b", "--seed", "3"]].concat(), Some("42"));
    assert_eq!(resolved(&String::from_utf8_lossy(&out.stdout))["synth"]["seed"], 3);
    let out = run(d, &[&args[..], &["c"]].concat(), None);
    assert_eq!(resolved(&String::from_utf8_lossy(&out.stdout))["synth"]["seed"], 0);
    assert_eq!(
        std::fs::read(d.join("a/seq_000.fanim")).unwrap().len(),
        std::fs::read(d.join("c/seq_000.fanim")).unwrap().len()
    );
    assert_ne!(
        std::fs::read(d.join("a/seq_000.faud")).unwrap(),
        std::fs::read(d.join("c/seq_000.faud")).unwrap()
    );
}

#[test]
fn inspect_prints_header_and_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--seed",
            "2",
            "--count",
            "1",
            "--vertices",
            "9",
            "--frames",
            "12",
            "--out",
            "data",
        ],
    );
    let stdout = ok(d, &["inspect", "data/seq_000.fanim"]);
    for needle in ["V: 9", "N: 12", "fps: 60", "x: template [", "frames ["] {
        assert!(stdout.contains(needle), "{needle} missing in {stdout}");
    }
    let stdout = ok(d, &["inspect", "data/seq_000.faud"]);
    assert!(stdout.contains("sample_rate: 16000") && stdout.contains("range: ["));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["--help"], None).status.code(), Some(0));
    assert_eq!(run(d, &["train", "--help"], None).status.code(), Some(0));
    assert_eq!(run(d, &["frobnicate"], None).status.code(), Some(2));
    assert_eq!(run(d, &["train", "--bogus"], None).status.code(), Some(2));
    assert_eq!(run(d, &["train", "--epochs", "many"], None).status.code(), Some(2));
    assert_eq!(run(d, &["inspect"], None).status.code(), Some(2));
    assert_eq!(run(d, &["inspect", "missing.fanim"], None).status.code(), Some(1));
    assert_eq!(
        run(d, &["train", "--manifest", "missing.json"], None).status.code(),
        Some(1)
    );
    std::fs::write(d.join("junk.fanim"), b"FAP1\x02\0\0\0").unwrap();
    let out = run(d, &["inspect", "junk.fanim"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
    std::fs::write(d.join("bad.json"), r#"{"train": {"epochz": 3}}"#).unwrap();
    let out = run(d, &["train", "--config", "bad.json"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochz"));
}
