//! Black-box tests of the command-line binary: the full artifact chain,
//! the exit-code contract, and output determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sign2text"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn full_chain_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let archive = dir.path().join("features.bin");
    let run_dir = dir.path().join("run");
    let hyps = dir.path().join("hyps.tsv");
    let metrics = dir.path().join("metrics.csv");

    // keep training short: tiny corpus, few epochs
    let out = run(&[
        "synth",
        "--out",
        &path_str(&data),
        "--videos",
        "30",
        "--vocab-size",
        "8",
    ]);
    assert_code(&out, 0);
    assert!(data.join("manifest.tsv").exists());
    assert!(data.join("synth.config.json").exists());

    let manifest = path_str(&data.join("manifest.tsv"));
    let out = run(&["preprocess", "--manifest", &manifest, "--out", &path_str(&archive)]);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("(30,"), "shape line missing: {stdout}");
    assert!(archive.with_extension("config.json").exists());

    // rerunning preprocess reproduces the archive byte for byte
    let first = std::fs::read(&archive).unwrap();
    assert_code(&run(&["preprocess", "--manifest", &manifest, "--out", &path_str(&archive)]), 0);
    assert_eq!(first, std::fs::read(&archive).unwrap());

    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[train]\nepochs = 3\nbatch_size = 4\n").unwrap();
    let out = run(&[
        "train",
        "--config",
        &path_str(&config),
        "--manifest",
        &manifest,
        "--archive",
        &path_str(&archive),
        "--out",
        &path_str(&run_dir),
    ]);
    assert_code(&out, 0);
    let model = run_dir.join("model.json");
    assert!(model.exists());
    let loss_csv = std::fs::read_to_string(run_dir.join("loss.csv")).unwrap();
    assert!(loss_csv.starts_with("epoch,loss\n"));
    assert_eq!(loss_csv.lines().count(), 4);

    let out = run(&[
        "translate",
        "--model",
        &path_str(&model),
        "--archive",
        &path_str(&archive),
        "--out",
        &path_str(&hyps),
        "--manifest",
        &manifest,
        "--split",
        "test",
    ]);
    assert_code(&out, 0);
    let hyp_text = std::fs::read_to_string(&hyps).unwrap();
    assert_eq!(hyp_text.lines().count(), 3); // 10% of 30

    let out = run(&[
        "evaluate",
        "--manifest",
        &manifest,
        "--hypotheses",
        &path_str(&hyps),
        "--split",
        "test",
        "--out",
        &path_str(&metrics),
    ]);
    assert_code(&out, 0);
    let csv = std::fs::read_to_string(&metrics).unwrap();
    assert!(csv.starts_with("id,bleu4,rouge_l,meteor_exact\n"));
    assert!(csv.lines().last().unwrap().starts_with("CORPUS,"));
}

#[test]
fn inspect_dist_rows_sum_to_one() {
    let out = run(&["inspect-dist", "--T", "100", "--l_p", "17"]);
    assert_code(&out, 0);
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,prob");
    assert_eq!(lines.len(), 102); // header + 100 rows + kurtosis
    let sum: f64 = lines[1..101]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((sum - 1.0).abs() < 1e-9);
    assert!(lines[101].starts_with("kurtosis,"));
}

#[test]
fn usage_errors_exit_1() {
    assert_code(&run(&["no-such-command"]), 1);
    assert_code(&run(&["preprocess"]), 1); // missing required flags
    // bad value in a config file
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[preprocess]\nnormalization = \"bogus\"\n").unwrap();
    let data = dir.path().join("data");
    assert_code(&run(&["synth", "--out", &path_str(&data), "--videos", "5"]), 0);
    let out = run(&[
        "preprocess",
        "--config",
        &path_str(&config),
        "--manifest",
        &path_str(&data.join("manifest.tsv")),
        "--out",
        &path_str(&dir.path().join("a.bin")),
    ]);
    assert_code(&out, 1);
    // unknown key is rejected, not ignored
    std::fs::write(&config, "[preprocess]\nnormalizaton = \"customized\"\n").unwrap();
    let out = run(&[
        "preprocess",
        "--config",
        &path_str(&config),
        "--manifest",
        &path_str(&data.join("manifest.tsv")),
        "--out",
        &path_str(&dir.path().join("a.bin")),
    ]);
    assert_code(&out, 1);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train",
        "--manifest",
        "/nonexistent/manifest.tsv",
        "--archive",
        "/nonexistent/features.bin",
        "--out",
        &path_str(&dir.path().join("run")),
    ]);
    assert_code(&out, 2);

    // corrupt keypoint file: error names the file and line
    let data = dir.path().join("data");
    assert_code(&run(&["synth", "--out", &path_str(&data), "--videos", "5"]), 0);
    let manifest = data.join("manifest.tsv");
    let victim = std::fs::read_to_string(&manifest)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .to_string();
    std::fs::write(&victim, "{\"frame\":0,\"keypoints\":[1.0,2.0]}\nnot json\n").unwrap();
    let out = run(&[
        "preprocess",
        "--manifest",
        &path_str(&manifest),
        "--out",
        &path_str(&dir.path().join("b.bin")),
    ]);
    assert_code(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(&victim), "stderr should name the file: {stderr}");
    assert!(stderr.contains("line"), "stderr should report a line: {stderr}");
}
