use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fontgan::models::{ModelConfig, ModelKind, Models};
use serde_json::Value;

fn fontgan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fontgan"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Every file under `root`, relative to it.
fn tree(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

const CORPUS: &str = r#"{"words": ["CAT", "DOGS", "SUN", "MAP"], "font_count": 3}"#;

fn corpus(dir: &Path) -> PathBuf {
    fs::write(dir.join("data.json"), CORPUS).unwrap();
    let out = fontgan(dir, &["dataset-gen", "--config", "data.json", "--out", "corpus"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir.join("corpus/manifest.json")
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fontgan(dir.path(), &["train", "--out", "r"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--config"));
    assert!(stderr(&out).contains("Usage"));
    assert!(tree(dir.path()).is_empty());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fontgan(dir.path(), &["fly"])), 2);
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("c.json"), "{}").unwrap();
    let cases: [(&[&str], &str); 5] = [
        (&["--set", "batch_size=0"], "batch_size"),
        (&["--set", "colour=red"], "colour"),
        (&["--set", "epochs=many"], "epochs"),
        (&["--set", "noequals"], "noequals"),
        (&["--set", "lambda_l1=-1"], "lambda_l1"),
    ];
    for (extra, key) in cases {
        let mut args = vec!["train", "--config", "c.json", "--data", "m.json", "--out", "r"];
        args.extend_from_slice(extra);
        let out = fontgan(p, &args);
        assert_eq!(code(&out), 2, "{extra:?}: {}", stderr(&out));
        assert!(stderr(&out).contains(key), "{extra:?}: {}", stderr(&out));
    }
    fs::write(p.join("bad.json"), r#"{"epochs": 3, "colour": "red"}"#).unwrap();
    let out = fontgan(p, &["train", "--config", "bad.json", "--data", "m.json", "--out", "r"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("colour") && stderr(&out).contains("bad.json"));
    let out = fontgan(p, &["train", "--config", "nowhere.json", "--out", "r"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nowhere.json"));
    assert_eq!(tree(p), vec![PathBuf::from("bad.json"), PathBuf::from("c.json")]);
}

#[test]
fn missing_corpus_is_a_runtime_error_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), "{}").unwrap();
    let out = fontgan(
        dir.path(),
        &["train", "--config", "c.json", "--data", "absent.json", "--out", "r"],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("absent.json"));
    let out = fontgan(dir.path(), &["train", "--config", "c.json", "--out", "r"]);
    assert_eq!(code(&out), 2, "no manifest anywhere");
}

#[test]
fn empty_config_resolves_to_defaults_and_overrides_win() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let manifest = corpus(p);
    let data = manifest.to_str().unwrap();
    fs::write(p.join("empty.json"), "{}").unwrap();
    let out = fontgan(
        p,
        &[
            "train",
            "--config",
            "empty.json",
            "--data",
            data,
            "--out",
            "a",
            "--width",
            "tiny",
            "--stop-after-step",
            "0",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cfg = json(&p.join("a/resolved-config.json"));
    assert_eq!(cfg["learning_rate"], 0.001);
    assert_eq!(cfg["batch_size"], 32);
    assert_eq!(cfg["epochs"], 60);
    assert_eq!(cfg["pretrain_epochs"], 2);
    assert_eq!(cfg["lambda_l1"], 100.0);
    assert_eq!(cfg["model"], "recurrent");

    fs::write(p.join("five.json"), r#"{"epochs": 5, "seed": 3}"#).unwrap();
    let out = fontgan(
        p,
        &[
            "train",
            "--config",
            "five.json",
            "--set",
            "epochs=1",
            "--set",
            "pretrain_epochs=1",
            "--seed",
            "9",
            "--data",
            data,
            "--out",
            "b",
            "--width",
            "tiny",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cfg = json(&p.join("b/resolved-config.json"));
    assert_eq!(cfg["epochs"], 1);
    assert_eq!(cfg["seed"], 9);
    assert_eq!(json(&p.join("b/report.json"))["epochs_completed"], 1);
}

#[test]
fn translate_keeps_the_input_size() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    Models::init(ModelConfig::tiny(4), ModelKind::Recurrent, 1)
        .unwrap()
        .to_checkpoint()
        .save(&p.join("m.ckpt"))
        .unwrap();
    let img = image::GrayImage::from_fn(70, 32, |x, y| {
        image::Luma([if (x / 7 + y / 5) % 2 == 0 { 0 } else { 255 }])
    });
    img.save(p.join("in.png")).unwrap();
    let out = fontgan(
        p,
        &[
            "translate",
            "--checkpoint",
            "m.ckpt",
            "--input",
            "in.png",
            "--target-font",
            "3",
            "--out",
            "out/t.png",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        image::open(p.join("out/t.png")).unwrap().into_luma8().dimensions(),
        (70, 32)
    );

    let out = fontgan(
        p,
        &[
            "translate",
            "--checkpoint",
            "m.ckpt",
            "--input",
            "in.png",
            "--target-font",
            "4",
            "--out",
            "x.png",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--target-font"));
    let out = fontgan(
        p,
        &[
            "translate",
            "--checkpoint",
            "gone.ckpt",
            "--input",
            "in.png",
            "--target-font",
            "0",
            "--out",
            "x.png",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("gone.ckpt"));
    assert!(!p.join("x.png").exists());
}

#[test]
fn smoke_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let manifest = corpus(p);
    let data = manifest.to_str().unwrap();
    let corpus_files = tree(&p.join("corpus"));
    assert!(corpus_files.contains(&PathBuf::from("manifest.json")));
    assert!(corpus_files.contains(&PathBuf::from("resolved-config.json")));
    assert!(corpus_files.contains(&PathBuf::from("source/CAT.png")));
    assert!(corpus_files.contains(&PathBuf::from("target/2/DOGS.png")));

    fs::write(
        p.join("train.json"),
        r#"{"batch_size": 4, "epochs": 100, "pretrain_epochs": 2}"#,
    )
    .unwrap();
    for (kind, out) in [("recurrent", "runs/rec"), ("baseline", "runs/base")] {
        let model = format!("model={kind}");
        let res = fontgan(
            p,
            &[
                "train",
                "--config",
                "train.json",
                "--set",
                &model,
                "--data",
                data,
                "--out",
                out,
                "--width",
                "tiny",
                "--stop-after-step",
                "50",
            ],
        );
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        let files = tree(&p.join(out));
        for f in ["checkpoint.ckpt", "steps.csv", "report.json", "resolved-config.json"] {
            assert!(files.contains(&PathBuf::from(f)), "{out}/{f}");
        }
        let steps = fs::read_to_string(p.join(out).join("steps.csv")).unwrap();
        assert_eq!(steps.lines().count(), 51);
        assert_eq!(json(&p.join(out).join("report.json"))["steps"], 50);
    }

    let res = fontgan(
        p,
        &[
            "translate",
            "--checkpoint",
            "runs/rec/checkpoint.ckpt",
            "--input",
            "corpus/source/DOGS.png",
            "--target-font",
            "1",
            "--out",
            "translated/DOGS.png",
        ],
    );
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let res = fontgan(
        p,
        &[
            "eval",
            "--recurrent",
            "runs/rec/checkpoint.ckpt",
            "--baseline",
            "runs/base/checkpoint.ckpt",
            "--data",
            data,
            "--out",
            "report",
        ],
    );
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(
        tree(&p.join("report")),
        ["grid.png", "paired.csv", "report.json"].map(PathBuf::from).to_vec()
    );
    assert_eq!(json(&p.join("report/report.json"))["samples"], 8);

    // Nothing outside the declared output locations.
    let top: Vec<_> = fs::read_dir(p)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let mut top = top;
    top.sort();
    assert_eq!(
        top,
        ["corpus", "data.json", "report", "runs", "train.json", "translated"]
    );
}

#[test]
fn resolved_config_reproduces_and_resume_matches() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let manifest = corpus(p);
    let data = manifest.to_str().unwrap();
    fs::write(
        p.join("c.json"),
        r#"{"batch_size": 4, "epochs": 3, "pretrain_epochs": 1, "seed": 11}"#,
    )
    .unwrap();
    let train = |config: &str, out: &str, extra: &[&str]| {
        let mut args = vec![
            "train", "--config", config, "--data", data, "--out", out, "--width", "tiny",
        ];
        args.extend_from_slice(extra);
        let res = fontgan(p, &args);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
    };
    train("c.json", "one", &[]);
    train("one/resolved-config.json", "two", &[]);
    train("c.json", "three", &["--stop-after-step", "5"]);
    train("c.json", "three", &["--resume"]);
    let csv = |run: &str| fs::read(p.join(run).join("steps.csv")).unwrap();
    let ckpt = |run: &str| fs::read(p.join(run).join("checkpoint.ckpt")).unwrap();
    assert_eq!(csv("one"), csv("two"));
    assert_eq!(csv("one"), csv("three"));
    assert_eq!(ckpt("one"), ckpt("two"));
    assert_eq!(ckpt("one"), ckpt("three"));

    // Resuming under a different config is refused.
    let res = fontgan(
        p,
        &[
            "train", "--config", "c.json", "--set", "epochs=4", "--data", data, "--out", "one", "--resume",
        ],
    );
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("resolved-config.json"));
}
