//! End-to-end command-line behavior: exit codes, artifacts, determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pscgan"))
}

fn make_data(dir: &Path, count: usize, seed: u64) {
    let out = bin()
        .args([
            "make-toy-data",
            "--out-dir",
            dir.to_str().unwrap(),
            "--count",
            &count.to_string(),
            "--size",
            "16",
            "--seed",
            &seed.to_string(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn write_cfg(path: &Path, data_dir: &Path, extra: &str) {
    std::fs::write(
        path,
        format!(
            "mode=pscgan\nb=4\npb=2\nm=2\nn_critic=1\ntotal_steps=3\nsigma=38.25\n\
             image_size=16\nchannels=1\ngen_widths=4,8\ncritic_widths=4,8\n\
             checkpoint_every=10\nseed=3\ndata_dir={}\n{extra}",
            data_dir.display()
        ),
    )
    .unwrap();
}

#[test]
fn train_smoke_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    make_data(&data, 8, 0);
    let cfg = dir.path().join("toy.cfg");
    write_cfg(&cfg, &data, "");
    let run = dir.path().join("run");
    let out = bin()
        .args([
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--run-dir",
            run.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("checkpoint.json").exists());
    assert!(run.join("config.frozen").exists());
    assert!(run.join("MANIFEST").exists());
    let losses = std::fs::read_to_string(run.join("losses.csv")).unwrap();
    assert_eq!(losses.lines().next().unwrap(), "step,critic_loss,gp,mean_penalty,gen_adv");
    assert_eq!(losses.lines().count(), 4, "header + 3 steps");
}

#[test]
fn unknown_config_key_exits_2_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    make_data(&data, 4, 0);
    let cfg = dir.path().join("bad.cfg");
    write_cfg(&cfg, &data, "lamda_gp=10\n");
    let out = bin()
        .args(["train", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lambda_gp"), "should suggest the nearest key: {err}");
}

#[test]
fn missing_dataset_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("toy.cfg");
    write_cfg(&cfg, &dir.path().join("nonexistent"), "");
    let out = bin()
        .args(["train", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn corrupt_checkpoint_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    make_data(&data, 4, 0);
    let ckpt = dir.path().join("bad.json");
    std::fs::write(&ckpt, "{}").unwrap();
    let out = bin()
        .args([
            "denoise",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--input-dir",
            data.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_extractor_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    make_data(&data, 8, 0);
    let cfg = dir.path().join("toy.cfg");
    write_cfg(&cfg, &data, "");
    let run = dir.path().join("run");
    bin()
        .args(["train", "--config", cfg.to_str().unwrap(), "--run-dir", run.to_str().unwrap()])
        .output()
        .unwrap();
    let out = bin()
        .args([
            "evaluate",
            "--checkpoint",
            run.join("checkpoint.json").to_str().unwrap(),
            "--dataset",
            data.to_str().unwrap(),
            "--extractor",
            "inception-v3-pool3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tiny-random-conv"), "lists available extractors: {err}");
}

#[test]
fn toy_data_is_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    make_data(&a, 6, 9);
    make_data(&b, 6, 9);
    for i in 0..6 {
        let fa = std::fs::read(a.join(format!("{i:05}.png"))).unwrap();
        let fb = std::fs::read(b.join(format!("{i:05}.png"))).unwrap();
        assert_eq!(fa, fb);
    }
}

#[test]
fn denoise_sigma_z_zero_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    make_data(&data, 4, 1);
    let cfg = dir.path().join("toy.cfg");
    write_cfg(&cfg, &data, "");
    let run = dir.path().join("run");
    bin()
        .args(["train", "--config", cfg.to_str().unwrap(), "--run-dir", run.to_str().unwrap()])
        .output()
        .unwrap();
    let ckpt = run.join("checkpoint.json");
    let mut outs = Vec::new();
    for name in ["d1", "d2"] {
        let d = dir.path().join(name);
        let out = bin()
            .args([
                "denoise",
                "--checkpoint",
                ckpt.to_str().unwrap(),
                "--input-dir",
                data.to_str().unwrap(),
                "--sigma-z",
                "0",
                "--seed",
                if name == "d1" { "1" } else { "2" },
                "--run-dir",
                d.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outs.push(d);
    }
    for i in 0..4 {
        let f1 = std::fs::read(outs[0].join(format!("{i:05}_denoised.png"))).unwrap();
        let f2 = std::fs::read(outs[1].join(format!("{i:05}_denoised.png"))).unwrap();
        assert_eq!(f1, f2, "sigma_z=0 must be deterministic regardless of seed");
    }
    assert!(outs[0].join("manifest.csv").exists());
}

#[test]
fn resume_reproduces_loss_log() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    make_data(&data, 8, 2);
    // Full run: 4 steps.
    let cfg4 = dir.path().join("full.cfg");
    write_cfg(&cfg4, &data, "");
    std::fs::write(
        &cfg4,
        std::fs::read_to_string(&cfg4).unwrap().replace("total_steps=3", "total_steps=4"),
    )
    .unwrap();
    let full = dir.path().join("full");
    bin()
        .args(["train", "--config", cfg4.to_str().unwrap(), "--run-dir", full.to_str().unwrap()])
        .output()
        .unwrap();
    // Half run: 2 steps, then resume to 4.
    let cfg2 = dir.path().join("half.cfg");
    write_cfg(&cfg2, &data, "");
    std::fs::write(
        &cfg2,
        std::fs::read_to_string(&cfg2).unwrap().replace("total_steps=3", "total_steps=2"),
    )
    .unwrap();
    let half = dir.path().join("half");
    bin()
        .args(["train", "--config", cfg2.to_str().unwrap(), "--run-dir", half.to_str().unwrap()])
        .output()
        .unwrap();
    let resumed = dir.path().join("resumed");
    let out = bin()
        .args([
            "train",
            "--config",
            cfg4.to_str().unwrap(),
            "--resume",
            half.join("checkpoint.json").to_str().unwrap(),
            "--run-dir",
            resumed.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let full_log = std::fs::read_to_string(full.join("losses.csv")).unwrap();
    let resumed_log = std::fs::read_to_string(resumed.join("losses.csv")).unwrap();
    let tail_full: Vec<&str> = full_log.lines().skip(3).collect();
    let tail_resumed: Vec<&str> = resumed_log.lines().skip(1).collect();
    assert_eq!(tail_full, tail_resumed, "resumed steps must reproduce the loss log");
}

#[test]
fn oracle_command_reports_gap() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("oracle");
    let out = bin()
        .args(["oracle", "--n-mc", "2000", "--run-dir", run.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gap_db=3.0"), "{stdout}");
    assert!(run.join("oracle_report.csv").exists());
}

#[test]
fn oracle_low_budget_warns() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "oracle",
            "--n-mc",
            "100",
            "--run-dir",
            dir.path().join("o").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("warning"), "{stdout}");
}
