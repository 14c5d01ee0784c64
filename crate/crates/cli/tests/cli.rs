use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use persic_core::eval::RankingReport;

fn persic(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persic"))
        .current_dir(dir)
        .env_remove("PERSIC_LOG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = persic(dir, args);
    assert!(
        out.status.success(),
        "persic {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_synth(dir: &Path, out: &str) {
    ok(
        dir,
        &[
            "synth",
            "--users",
            "80",
            "--posts",
            "40",
            "--density",
            "0.1",
            "--seed",
            "3",
            "--out",
            out,
        ],
    );
}

/// Every file under `dir` except the timestamped log.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() != "run.log" {
            files.insert(path.clone(), std::fs::read(&path).unwrap());
        }
    }
    files
}

#[test]
fn every_subcommand_documents_its_flags() {
    let dir = tempfile::tempdir().unwrap();
    let global = ["--config", "--seed", "--out", "--json", "--jobs"];
    let cases: [(&str, &[&str]); 8] = [
        (
            "synth",
            &["--users", "--posts", "--effect", "--density", "--noise"],
        ),
        ("features", &["--dataset", "--lexicon", "--k"]),
        (
            "train",
            &[
                "--dataset",
                "--features",
                "--model",
                "--ablation",
                "--epochs",
            ],
        ),
        (
            "eval",
            &["--checkpoint", "--dataset", "--features", "--cutoffs"],
        ),
        ("ablate", &["--dataset", "--ablations", "--epochs"]),
        ("compare", &["--dataset", "--models", "--epochs"]),
        ("traits", &["--dataset", "--top"]),
        ("stats", &["--dataset"]),
    ];
    for (cmd, flags) in cases {
        let help = ok(dir.path(), &[cmd, "--help"]);
        for flag in global.iter().chain(flags) {
            assert!(help.contains(flag), "`{cmd} --help` lacks {flag}:\n{help}");
        }
    }
    let top = ok(dir.path(), &["--help"]);
    for cmd in [
        "synth", "features", "train", "eval", "ablate", "compare", "traits",
    ] {
        assert!(top.contains(cmd));
    }
}

#[test]
fn pipeline_runs_end_to_end_on_a_small_spec() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let start = Instant::now();
    ok(d, &["synth", "--users", "200", "--out", "data"]);
    ok(d, &["features", "--dataset", "data", "--out", "feat"]);
    ok(
        d,
        &[
            "train",
            "--dataset",
            "data",
            "--features",
            "feat",
            "--out",
            "train",
        ],
    );
    ok(
        d,
        &[
            "eval",
            "--checkpoint",
            "train/checkpoint.json",
            "--dataset",
            "data",
            "--features",
            "feat",
            "--out",
            "eval",
        ],
    );
    assert!(start.elapsed().as_secs() < 60);

    let report: RankingReport =
        serde_json::from_str(&std::fs::read_to_string(d.join("eval/evaluation.json")).unwrap())
            .unwrap();
    report.validate().unwrap();
    assert_eq!(report.headers().len() - 1, 5);
    assert!(d.join("eval/evaluation.csv").is_file());
    assert!(d.join("eval/evaluation.txt").is_file());
    let trace = std::fs::read_to_string(d.join("train/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 31);
    for out in ["data", "feat", "train", "eval"] {
        assert!(d.join(out).join("config.resolved.json").is_file());
        assert!(d.join(out).join("run.log").is_file());
    }
}

#[test]
fn missing_checkpoint_fails_with_the_path() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "data");
    let out = persic(
        dir.path(),
        &[
            "eval",
            "--checkpoint",
            "nowhere/ck.json",
            "--dataset",
            "data",
            "--out",
            "eval",
        ],
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(
        stderr.starts_with("error: ") && stderr.contains("nowhere/ck.json"),
        "{stderr}"
    );
    let log = std::fs::read_to_string(dir.path().join("eval/run.log")).unwrap();
    assert!(log.contains("nowhere/ck.json"));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(!persic(d, &["stats", "--dataset", "absent"])
        .status
        .success());
    assert!(!persic(d, &["stats"]).status.success());
    assert!(!persic(d, &["compare", "--models", "svd"]).status.success());
    std::fs::write(d.join("bad.json"), r#"{"seeed": 1}"#).unwrap();
    let out = persic(d, &["--config", "bad.json", "stats"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("bad.json"));
    assert!(!persic(d, &["synth", "--density", "0.95", "--posts", "10"])
        .status
        .success());
}

#[test]
fn commands_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d, "data");
    let data = snapshot(&d.join("data"));
    small_synth(d, "data");
    assert_eq!(snapshot(&d.join("data")), data);

    let train = [
        "train",
        "--dataset",
        "data",
        "--model",
        "neucf",
        "--epochs",
        "3",
        "--out",
        "train",
    ];
    ok(d, &train);
    let first = snapshot(&d.join("train"));
    ok(d, &train);
    assert_eq!(snapshot(&d.join("train")), first);

    let eval = [
        "eval",
        "--checkpoint",
        "train/checkpoint.json",
        "--dataset",
        "data",
        "--out",
        "eval",
    ];
    ok(d, &eval);
    let first = snapshot(&d.join("eval"));
    ok(d, &eval);
    assert_eq!(snapshot(&d.join("eval")), first);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("exp.json"),
        r#"{"seed": 7, "synth": {"n_users": 50, "n_posts": 30, "density": 0.1}, "out": "from-config"}"#,
    )
    .unwrap();
    ok(d, &["--config", "exp.json", "synth", "--users", "60"]);
    let snap: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(d.join("from-config/config.resolved.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(snap["command"], "synth");
    assert_eq!(snap["config"]["seed"], 7);
    assert_eq!(snap["config"]["synth"]["n_users"], 60);
    assert_eq!(snap["config"]["synth"]["n_posts"], 30);

    ok(
        d,
        &[
            "--config", "exp.json", "--seed", "8", "--out", "flagged", "stats",
        ],
    );
    let snap: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(d.join("flagged/config.resolved.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(snap["config"]["seed"], 8);
}

#[test]
fn in_memory_synth_matches_the_written_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d, "data");
    std::fs::write(
        d.join("exp.json"),
        r#"{"synth": {"n_users": 80, "n_posts": 40, "density": 0.1}, "seed": 3}"#,
    )
    .unwrap();
    let from_disk = ok(d, &["--json", "stats", "--dataset", "data", "--out", "a"]);
    let in_memory = ok(
        d,
        &["--json", "--config", "exp.json", "stats", "--out", "b"],
    );
    assert_eq!(from_disk, in_memory);
}

#[test]
fn compare_reports_models_in_table_order() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d, "data");
    let stdout = ok(
        d,
        &[
            "--json",
            "compare",
            "--dataset",
            "data",
            "--models",
            "persic,pcd,bivae,neucf,fm,mf",
            "--epochs",
            "2",
            "--latent-dim",
            "16",
            "--out",
            "cmp",
        ],
    );
    let report: RankingReport = serde_json::from_str(&stdout).unwrap();
    report.validate().unwrap();
    let labels: Vec<&str> = report.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["MF", "FM", "NeuCF", "BiVAECF", "PCD", "PersiC"]);
    let on_disk = std::fs::read_to_string(d.join("cmp/comparison.json")).unwrap();
    assert_eq!(
        serde_json::from_str::<RankingReport>(&on_disk).unwrap(),
        report
    );
}

#[test]
fn traits_and_stats_write_their_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d, "data");
    let text = ok(
        d,
        &["traits", "--dataset", "data", "--top", "2", "--out", "tr"],
    );
    assert!(text.contains("Extravert (E)"));
    for ext in ["txt", "csv", "json"] {
        assert!(d.join(format!("tr/traits.{ext}")).is_file());
    }
    let stats = ok(d, &["--json", "stats", "--dataset", "data", "--out", "st"]);
    let v: serde_json::Value = serde_json::from_str(&stats).unwrap();
    assert_eq!(v["users"], 80);
    assert_eq!(v["posts"], 40);
}
