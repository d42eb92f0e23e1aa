use std::path::Path;
use std::process::Command;

fn prediag(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_prediag"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn classifier_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let models = dir.path().join("models");
    let manifest = data.join("manifest.csv");
    std::fs::create_dir_all(&data).unwrap();

    let out = prediag(&["gen-manifest", "--out", s(&manifest)]);
    assert!(out.starts_with("7909 records"));
    let out = prediag(&[
        "--seed",
        "3",
        "gen-features",
        "--manifest",
        s(&manifest),
        "--out",
        s(&data),
        "--shape",
        "1,1,8",
    ]);
    assert_eq!(out.lines().count(), 4);

    let out = prediag(&[
        "--seed",
        "3",
        "train-classifier",
        "--manifest",
        s(&manifest),
        "--features",
        s(&data),
        "--head",
        "EfficientNetV2-SA",
        "--magnification",
        "400",
        "--epochs",
        "3",
        "--out",
        s(&models),
    ]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("model,magnification,accuracy"));
    assert!(lines.next().unwrap().starts_with("EfficientNetV2-SA,400X,"));
    assert_eq!(
        lines.next(),
        Some("model,magnification,A,F,PT,TA,DC,LC,MC,PC")
    );
    let model = models.join("efficientnetv2-sa-400x.json");
    let test = models.join("efficientnetv2-sa-400x.test.csv");
    assert!(model.exists());
    // 30% of the 1820 records at 400X
    assert_eq!(
        std::fs::read_to_string(&test).unwrap().lines().count(),
        1 + 1820 - 1274
    );

    let eval = prediag(&[
        "eval-classifier",
        "--model",
        s(&model),
        "--manifest",
        s(&test),
        "--features",
        s(&data),
    ]);
    // scoring the saved test split repeats the training report
    assert_eq!(eval, out);
}

#[test]
fn chat_training_and_gcr() {
    let dir = tempfile::tempdir().unwrap();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let config = dir.path().join("prediag.toml");
    std::fs::write(&config, "store = \"chat.jsonl\"\n").unwrap();
    let out = prediag(&[
        "--config",
        s(&config),
        "train-chat",
        "--corpus-dir",
        s(&data.join("corpus")),
    ]);
    assert!(out.contains("chat.jsonl"));
    assert!(dir.path().join("chat.jsonl").exists());

    let report = prediag(&[
        "--config",
        s(&config),
        "eval-gcr",
        "--scripts",
        s(&data.join("dialogues")),
    ]);
    assert_eq!(report.lines().count(), 32);
    assert_eq!(report.lines().last(), Some("GCR,19/30,63.33%"));
    for line in report.lines().skip(1).take(30) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], f[2], "{line}");
    }
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_prediag"))
        .args([
            "train-classifier",
            "--manifest",
            "/nonexistent.csv",
            "--features",
            "/tmp",
            "--head",
            "LeNet",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("LeNet"));
}
