//! End-to-end tests of the command-line interface, driving the built binary
//! the way a user would.

use std::io::Write;
use std::process::{Command, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_codemix");

fn run(args: &[&str], cwd: &std::path::Path) -> (bool, String, String) {
    let out = Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs");
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn ingest_reports_stats_and_rejects_bad_labels() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("ok.tsv"),
        "super movie\tPositive\nworst\tNegative\nhello\tnot-Tamil\n",
    )
    .unwrap();
    let (ok, stdout, _) = run(
        &["ingest", "--input", "ok.tsv", "--lang", "tamil"],
        dir.path(),
    );
    assert!(ok);
    assert!(stdout.contains("samples:  3"));
    assert!(stdout.contains("Positive         1"));
    assert!(stdout.contains("not-language     1"));

    std::fs::write(dir.path().join("bad.tsv"), "hello\tGreat\n").unwrap();
    let (ok, _, stderr) = run(
        &["ingest", "--input", "bad.tsv", "--lang", "tamil"],
        dir.path(),
    );
    assert!(!ok);
    assert!(stderr.contains("line 1"), "stderr: {stderr}");

    std::fs::write(dir.path().join("notab.tsv"), "ok\tPositive\nno tab\n").unwrap();
    let (ok, _, stderr) = run(
        &["ingest", "--input", "notab.tsv", "--lang", "tamil"],
        dir.path(),
    );
    assert!(!ok);
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}

#[test]
fn script_tag_emits_token_tag_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(BIN)
        .arg("script-tag")
        .current_dir(dir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all("super ಕನಸು 99 !!\npadam".as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(
        lines,
        vec![
            "super\tlatin",
            "ಕನಸು\tkannada",
            "99\tdigit",
            "!!\tpunct",
            "padam\tlatin"
        ]
    );
}

#[test]
fn translit_translate_variants_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("train.tsv"),
        "super movie\tPositive\nworst padam (tag)\tNegative\nskip me\tnot-Kannada\n",
    )
    .unwrap();

    let (ok, _, stderr) = run(
        &[
            "translit",
            "--input",
            "train.tsv",
            "--lang",
            "kannada",
            "--out",
            "translit.tsv",
            "--save-lm",
            "lm.json",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    let translit = std::fs::read_to_string(dir.path().join("translit.tsv")).unwrap();
    assert_eq!(
        translit.lines().count(),
        2,
        "NotLanguage row must be dropped"
    );
    assert!(translit.lines().all(|l| l.ends_with("\ttransliterated")));
    assert!(dir.path().join("lm.json").exists());

    std::fs::write(dir.path().join("dict.tsv"), "super\tgreat\n").unwrap();
    let (ok, _, stderr) = run(
        &[
            "translate",
            "--input",
            "translit.tsv",
            "--lang",
            "kannada",
            "--kind",
            "dictionary",
            "--dict",
            "dict.tsv",
            "--out",
            "translated.tsv",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    let translated = std::fs::read_to_string(dir.path().join("translated.tsv")).unwrap();
    assert!(translated.lines().all(|l| l.ends_with("\ttranslated")));

    let (ok, stdout, stderr) = run(
        &[
            "build-variants",
            "--base",
            "train.tsv",
            "--translit",
            "translit.tsv",
            "--translated",
            "translated.tsv",
            "--lang",
            "kannada",
            "--out-dir",
            "variants",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    assert!(stdout.contains("TRA: 3 samples"));
    assert!(stdout.contains("TRAI: 5 samples"));
    assert!(stdout.contains("MERGED: 7 samples"));
    for name in ["TRA", "TRAI", "TRAA", "MERGED"] {
        assert!(dir
            .path()
            .join(format!("variants/kannada_{name}.tsv"))
            .exists());
    }
}

#[test]
fn external_command_translator_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("in.tsv"),
        "one two\tPositive\nthree\tNegative\n",
    )
    .unwrap();
    let (ok, _, stderr) = run(
        &[
            "translate",
            "--input",
            "in.tsv",
            "--lang",
            "tamil",
            "--kind",
            "command",
            "--out",
            "out.tsv",
            "--",
            "/bin/cat",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    let out = std::fs::read_to_string(dir.path().join("out.tsv")).unwrap();
    assert!(out.starts_with("one two\tPositive\ttranslated"));

    // failing command surfaces as a nonzero exit with diagnostics
    let (ok, _, stderr) = run(
        &[
            "translate",
            "--input",
            "in.tsv",
            "--lang",
            "tamil",
            "--kind",
            "command",
            "--out",
            "out2.tsv",
            "--cache",
            "fresh.cache.tsv",
            "--",
            "/bin/sh",
            "-c",
            "exit 9",
        ],
        dir.path(),
    );
    assert!(!ok);
    assert!(stderr.contains("translator"), "stderr: {stderr}");
}

#[test]
fn train_and_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::new();
    for i in 0..40 {
        if i % 2 == 0 {
            rows.push_str(&format!("good nalla super s{i}\tPositive\n"));
        } else {
            rows.push_str(&format!("bad mosam worst m{i}\tNegative\n"));
        }
    }
    std::fs::write(dir.path().join("train.tsv"), &rows).unwrap();

    for (model, extra) in [
        ("nb", vec![]),
        ("mlp", vec!["--epochs", "3", "--batch", "8"]),
    ] {
        let mut args = vec![
            "train",
            "--model",
            model,
            "--input",
            "train.tsv",
            "--lang",
            "malayalam",
            "--variant",
            "tra",
            "--dim-log2",
            "10",
            "--out",
        ];
        let out_name = format!("{model}.bin");
        args.push(&out_name);
        args.extend(extra);
        let (ok, stdout, stderr) = run(&args, dir.path());
        assert!(ok, "{stderr}");
        assert!(stdout.contains("trained"), "{stdout}");

        let (ok, stdout, stderr) = run(
            &[
                "evaluate",
                "--model",
                &out_name,
                "--input",
                "train.tsv",
                "--lang",
                "malayalam",
                "--out",
                "metrics.csv",
            ],
            dir.path(),
        );
        assert!(ok, "{stderr}");
        assert!(stdout.contains("weighted"), "{stdout}");
        let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert!(csv.starts_with("label,precision,recall,f1,support"));
    }
}

#[test]
fn grid_runs_from_config_and_report_rerenders() {
    let dir = tempfile::tempdir().unwrap();
    let rows = "super movie nalla\tPositive\nworst padam\tNegative\nidk man\tunknown_state\nhalf half\tMixed_feelings\nenglish\tnot-Tamil\nnalla padam chanca\tPositive\n";
    for name in ["train", "dev", "test"] {
        std::fs::write(dir.path().join(format!("ta_{name}.tsv")), rows).unwrap();
    }
    std::fs::write(
        dir.path().join("grid.toml"),
        r#"
seed = 7
out_dir = "out"

[[language]]
name = "tamil"
train = "ta_train.tsv"
dev = "ta_dev.tsv"
test = "ta_test.tsv"

[translit]
k = 2
beam = 8
lm_order = 2

[features]
ngram_lo = 1
ngram_hi = 2
dim_log2 = 10

[mlp]
batch_size = 4
epochs = 2
hidden0 = 16
hidden1 = 8
"#,
    )
    .unwrap();

    let (ok, stdout, stderr) = run(&["grid", "--config", "grid.toml"], dir.path());
    assert!(ok, "{stderr}");
    assert!(stdout.contains("== tamil =="));
    assert!(stdout.contains("grid complete: 8 cells"));
    for artifact in [
        "out/report.txt",
        "out/report.csv",
        "out/report_dev.csv",
        "out/manifest.json",
    ] {
        assert!(dir.path().join(artifact).exists(), "missing {artifact}");
    }

    let (ok, stdout, stderr) = run(&["report", "--csv", "out/report.csv"], dir.path());
    assert!(ok, "{stderr}");
    assert!(stdout.contains("== tamil =="));
    assert!(stdout.contains("TRAI"));

    // seed override is accepted and the run stays deterministic
    let (ok, _, stderr) = run(
        &[
            "grid",
            "--config",
            "grid.toml",
            "--seed",
            "7",
            "--out",
            "out2",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    let a = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("out2/report.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bad_config_fails_with_stage_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("grid.toml"),
        "out_dir = \"out\"\n[[language]]\nname = \"tamil\"\ntrain = \"missing.tsv\"\ndev = \"missing.tsv\"\ntest = \"missing.tsv\"\n",
    )
    .unwrap();
    let (ok, _, stderr) = run(&["grid", "--config", "grid.toml"], dir.path());
    assert!(!ok);
    assert!(stderr.contains("validate"), "stderr: {stderr}");
    assert!(stderr.contains("missing.tsv"), "stderr: {stderr}");
}
