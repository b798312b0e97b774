//! End-to-end checks of the `gaze-dt` binary: subcommand plumbing, config
//! precedence, exit codes, and reproducibility of artifacts on disk.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gaze-dt"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(
        &p,
        r#"
seed = 7
[dataset]
n_episodes = 6
[scene]
frame_width_px = 24
frame_height_px = 24
episode_len = 8
actor_size_px = 5
distractor_count = 1
seed = 7
[foveal]
crop_size_px = 9
model_input_px = 12
[model]
n_layers = 1
n_heads = 2
embed_dim = 16
context_len = 4
max_timestep = 8
dropout = 0.0
[train]
learning_rate = 1e-3
batch_size = 4
max_epochs = 1
seed = 7
windows_per_epoch = 4
"#,
    )
    .unwrap();
    p
}

fn run_ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: stdout={} stderr={}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn full_pipeline_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let data = dir.path().join("data");
    let run = dir.path().join("run");

    // gen-data prints a split summary
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "gen-data", "--out-dir"])
        .arg(&data)
        .output()
        .unwrap();
    let stdout = run_ok(&out);
    assert!(stdout.contains("6 episodes"), "{stdout}");

    // regeneration with the same seed is byte-identical
    let manifest_bytes = std::fs::read(data.join("manifest.toml")).unwrap();
    let ep_bytes = std::fs::read(data.join("ep_0000/frames/frames.bin")).unwrap();
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "gen-data", "--out-dir"])
        .arg(&data)
        .output()
        .unwrap();
    run_ok(&out);
    assert_eq!(
        manifest_bytes,
        std::fs::read(data.join("manifest.toml")).unwrap()
    );
    assert_eq!(
        ep_bytes,
        std::fs::read(data.join("ep_0000/frames/frames.bin")).unwrap()
    );

    // train each agent kind; --epochs 0 writes an initialized checkpoint only
    for agent in ["dt", "dt-explore", "bc"] {
        let out = bin()
            .args(["--config", cfg.to_str().unwrap(), "train"])
            .args(["--agent", agent, "--data-dir"])
            .arg(&data)
            .arg("--out-dir")
            .arg(&run)
            .output()
            .unwrap();
        run_ok(&out);
        assert!(run.join(format!("{agent}.ckpt")).exists());
    }
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "train"])
        .args(["--agent", "bc", "--epochs", "0", "--data-dir"])
        .arg(&data)
        .arg("--out-dir")
        .arg(dir.path().join("run0"))
        .output()
        .unwrap();
    run_ok(&out);
    assert!(dir.path().join("run0/bc.ckpt").exists());

    // eval: model rows + random baseline + oracle row of zeros
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "eval", "--with-oracle"])
        .arg("--data-dir")
        .arg(&data)
        .arg("--checkpoint")
        .arg(run.join("dt-explore.ckpt"))
        .arg("--checkpoint")
        .arg(run.join("bc.ckpt"))
        .output()
        .unwrap();
    let stdout = run_ok(&out);
    assert!(stdout.contains("dt-explore") && stdout.contains("bc"));
    assert!(stdout.contains("random"));
    let oracle_row = stdout.lines().find(|l| l.starts_with("oracle")).unwrap();
    assert!(oracle_row.contains("0.00"), "{oracle_row}");

    // a corrupt checkpoint fails its row but the command still succeeds
    let bad = dir.path().join("bad.ckpt");
    std::fs::write(&bad, b"garbage").unwrap();
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "eval"])
        .arg("--data-dir")
        .arg(&data)
        .arg("--checkpoint")
        .arg(&bad)
        .output()
        .unwrap();
    let stdout = run_ok(&out);
    assert!(stdout.contains("FAILED"), "{stdout}");
    assert!(stdout.contains("random"));

    // rollout: one row per frame, deterministic across reruns, sidecar written
    let frames_dir = data.join("ep_0000/frames");
    let pred = dir.path().join("pred.csv");
    let out = bin()
        .args(["rollout", "--checkpoint"])
        .arg(run.join("dt-explore.ckpt"))
        .arg("--frames-dir")
        .arg(&frames_dir)
        .arg("--out")
        .arg(&pred)
        .output()
        .unwrap();
    run_ok(&out);
    let first = std::fs::read_to_string(&pred).unwrap();
    assert_eq!(first.lines().count(), 9); // header + 8 frames
    assert!(dir.path().join("pred.toml").exists());
    let out = bin()
        .args(["rollout", "--checkpoint"])
        .arg(run.join("dt-explore.ckpt"))
        .arg("--frames-dir")
        .arg(&frames_dir)
        .arg("--out")
        .arg(&pred)
        .output()
        .unwrap();
    run_ok(&out);
    assert_eq!(first, std::fs::read_to_string(&pred).unwrap());

    // render gt + prediction
    let overlay = dir.path().join("overlay.png");
    let out = bin()
        .args(["render", "--frames-dir"])
        .arg(&frames_dir)
        .arg("--gt")
        .arg(data.join("ep_0000/gaze.csv"))
        .arg(&pred)
        .arg("--out")
        .arg(&overlay)
        .output()
        .unwrap();
    run_ok(&out);
    let png = std::fs::read(&overlay).unwrap();
    assert_eq!(&png[1..4], b"PNG");

    // ingest the generated layout back into a manifest
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "ingest", "--in-dir"])
        .arg(&data)
        .arg("--out-dir")
        .arg(dir.path().join("ingested"))
        .output()
        .unwrap();
    let stdout = run_ok(&out);
    assert!(stdout.contains("ingested 6 episodes"), "{stdout}");

    // missing manifest -> exit 2
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "train", "--data-dir"])
        .arg(dir.path().join("nowhere"))
        .arg("--out-dir")
        .arg(&run)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // unwritable output dir -> exit 2 with the path in the message
    let out = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "gen-data",
            "--out-dir",
            "/proc/not-writable",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/proc/not-writable"));
}

#[test]
fn config_precedence_flag_file_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());

    // default episode count is 200; file overrides to 6; flag overrides file
    let data = dir.path().join("d1");
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "gen-data", "--episodes", "4"])
        .arg("--out-dir")
        .arg(&data)
        .output()
        .unwrap();
    let stdout = run_ok(&out);
    assert!(stdout.contains("wrote 4 episodes"), "{stdout}");

    let data = dir.path().join("d2");
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "gen-data"])
        .arg("--out-dir")
        .arg(&data)
        .output()
        .unwrap();
    let stdout = run_ok(&out);
    assert!(stdout.contains("wrote 6 episodes"), "{stdout}");

    // --seed overrides the file seed: different data
    let d3 = dir.path().join("d3");
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "--seed", "99", "gen-data"])
        .arg("--out-dir")
        .arg(&d3)
        .output()
        .unwrap();
    run_ok(&out);
    let a = std::fs::read(dir.path().join("d2/ep_0000/frames/frames.bin")).unwrap();
    let b = std::fs::read(d3.join("ep_0000/frames/frames.bin")).unwrap();
    assert_ne!(a, b);

    // GAZE_DT_CONFIG is the fallback when --config is absent
    let d4 = dir.path().join("d4");
    let out = bin()
        .env("GAZE_DT_CONFIG", cfg.to_str().unwrap())
        .args(["gen-data", "--out-dir"])
        .arg(&d4)
        .output()
        .unwrap();
    let stdout = run_ok(&out);
    assert!(stdout.contains("wrote 6 episodes"), "{stdout}");

    // config typos are rejected loudly
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[model]\nn_layerz = 2\n").unwrap();
    let out = bin()
        .args(["--config", bad.to_str().unwrap(), "gen-data", "--out-dir"])
        .arg(dir.path().join("d5"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
