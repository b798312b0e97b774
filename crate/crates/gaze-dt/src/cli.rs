//! Subcommand pipeline: gen-data → train → eval / rollout / render, plus
//! an ingest adapter for external recordings.
//!
//! Exit codes: 0 success, 2 usage/IO failure, 3 numeric failure during
//! training. Defaults not pinned by the reference setup are marked
//! "(chosen)" in help text.

use crate::config::RunConfig;
use crate::error::{GazeError, Result};
use crate::foveation::load_episode_frames;
use crate::metrics::{
    evaluate, render_trajectory_overlay, EvalReport, OraclePredictor, OverlayTrack,
    OVERLAY_GT_COLOR, OVERLAY_PRED_COLOR,
};
use crate::model::{load_checkpoint, CheckpointMeta};
use crate::params::ParamSet;
use crate::rollout::Agent;
use crate::synth::generate_dataset;
use crate::train::{
    load_split, train_agent, AgentKind, ModelPredictor, RandomBaseline, TrainSink,
};
use crate::trajectory::{
    read_gaze_file, split_dataset, write_gaze_file, DatasetManifest, ManifestEntry, Split,
};
use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "gaze-dt",
    about = "Return-conditioned gaze prediction on foveated video",
    version
)]
pub struct Cli {
    /// Config file (TOML); falls back to $GAZE_DT_CONFIG, then defaults
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the config file
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for data generation (chosen default: all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Closed,
    Open,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset with oracle gaze
    GenData {
        /// Output directory for frames, gaze files, and the manifest
        #[arg(long)]
        out_dir: PathBuf,
        /// Episode count; overrides the config file
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Convert external recordings (per-episode frame dir + gaze CSV at
    /// display resolution) into a dataset manifest
    Ingest {
        /// Directory of episode subdirectories, each with frames and gaze.csv
        #[arg(long)]
        in_dir: PathBuf,
        /// Where to write manifest.toml
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train an agent on a generated or ingested dataset
    Train {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// dt = teacher forcing, dt-explore = noise-annealed returns, bc = no return conditioning
        #[arg(long, value_enum, default_value = "dt-explore")]
        agent: AgentKind,
        /// Epoch cap; overrides the config file
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate checkpoints plus the random baseline on the test split
    Eval {
        #[arg(long)]
        data_dir: PathBuf,
        /// Checkpoint files; each becomes one table row
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "closed")]
        mode: EvalMode,
        /// Also evaluate the perfect-oracle pseudo-predictor
        #[arg(long)]
        with_oracle: bool,
        /// Write per-predictor reports under this directory
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// Open-loop rollout over a frame directory
    Rollout {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        frames_dir: PathBuf,
        /// Output gaze CSV; a .toml sidecar records provenance
        #[arg(long)]
        out: PathBuf,
        /// Initial return-to-go target (chosen default: 0)
        #[arg(long, default_value_t = 0.0)]
        target_return: f64,
    },
    /// Render a trajectory overlay image (ground truth gray, predictions green)
    Render {
        #[arg(long)]
        frames_dir: PathBuf,
        /// Ground-truth gaze file, drawn gray
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Predicted gaze files, drawn green
        #[arg(required_unless_present = "gt")]
        gaze_files: Vec<PathBuf>,
        /// Frames sampled along the trajectory
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Stable scripting contract.
pub fn exit_code(err: &GazeError) -> i32 {
    match err {
        GazeError::Numeric { .. } => 3,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(w) = cli.workers {
        // ignore the error if a pool already exists (tests, repeated calls)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }

    match cli.command {
        Command::GenData { out_dir, episodes } => cmd_gen_data(&cfg, &out_dir, episodes),
        Command::Ingest { in_dir, out_dir } => cmd_ingest(&cfg, &in_dir, &out_dir),
        Command::Train {
            data_dir,
            out_dir,
            agent,
            epochs,
        } => cmd_train(&cfg, &data_dir, &out_dir, agent, epochs),
        Command::Eval {
            data_dir,
            checkpoints,
            mode,
            with_oracle,
            report_dir,
        } => cmd_eval(&cfg, &data_dir, &checkpoints, mode, with_oracle, report_dir.as_deref()),
        Command::Rollout {
            checkpoint,
            frames_dir,
            out,
            target_return,
        } => cmd_rollout(&checkpoint, &frames_dir, &out, target_return),
        Command::Render {
            frames_dir,
            gt,
            gaze_files,
            samples,
            out,
        } => cmd_render(&frames_dir, gt.as_deref(), &gaze_files, samples, &out),
    }
}

pub fn cmd_gen_data(cfg: &RunConfig, out_dir: &Path, episodes: Option<usize>) -> Result<()> {
    let n = episodes.unwrap_or(cfg.dataset.n_episodes);
    let manifest = generate_dataset(
        n,
        &cfg.scene,
        &cfg.oracle,
        cfg.ratios(),
        cfg.seed,
        cfg.dataset.storage,
        out_dir,
    )?;
    let counts = |s| manifest.split_ids(s).len();
    println!(
        "wrote {} episodes ({} train / {} val / {} test) of {} frames at {}x{} to {}",
        manifest.episodes.len(),
        counts(Split::Train),
        counts(Split::Val),
        counts(Split::Test),
        cfg.scene.episode_len,
        manifest.frame_width_px,
        manifest.frame_height_px,
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_ingest(cfg: &RunConfig, in_dir: &Path, out_dir: &Path) -> Result<()> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(in_dir)
        .map_err(|e| GazeError::io(in_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(GazeError::InsufficientData(format!(
            "no episode directories under {}",
            in_dir.display()
        )));
    }

    let mut dims: Option<(u32, u32)> = None;
    let mut episodes = Vec::new();
    for dir in &dirs {
        let gaze_file = dir.join("gaze.csv");
        // both layouts: frames next to gaze.csv, or under a frames/ subdir
        let frame_dir = if dir.join("frames").is_dir() {
            dir.join("frames")
        } else {
            dir.clone()
        };
        let frames = load_episode_frames(&frame_dir)?;
        let (h, w) = (frames[0].height() as u32, frames[0].width() as u32);
        match dims {
            None => dims = Some((w, h)),
            Some(d) if d != (w, h) => {
                return Err(GazeError::Alignment(format!(
                    "{}: frame size {}x{} differs from {}x{}",
                    dir.display(),
                    w,
                    h,
                    d.0,
                    d.1
                )))
            }
            _ => {}
        }
        let gaze = read_gaze_file(&gaze_file, (w, h))?;
        if gaze.len() != frames.len() {
            return Err(GazeError::Alignment(format!(
                "{}: {} fixations vs {} frames",
                dir.display(),
                gaze.len(),
                frames.len()
            )));
        }
        episodes.push(ManifestEntry {
            id: dir.file_name().unwrap().to_string_lossy().into_owned(),
            frame_dir,
            gaze_file,
            frame_count: frames.len(),
            scene_seed: 0,
            split: None,
        });
    }
    let (w, h) = dims.unwrap();
    let manifest = DatasetManifest {
        frame_width_px: w,
        frame_height_px: h,
        master_seed: cfg.seed,
        spec_echo: None,
        episodes,
    };
    let manifest = split_dataset(manifest, cfg.ratios(), cfg.seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| GazeError::io(out_dir, e))?;
    let path = out_dir.join("manifest.toml");
    manifest.save(&path)?;
    println!(
        "ingested {} episodes at {}x{} -> {}",
        manifest.episodes.len(),
        w,
        h,
        path.display()
    );
    Ok(())
}

fn dataset_fingerprint(manifest_path: &Path) -> Result<String> {
    let bytes = std::fs::read(manifest_path).map_err(|e| GazeError::io(manifest_path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub fn cmd_train(
    cfg: &RunConfig,
    data_dir: &Path,
    out_dir: &Path,
    agent: AgentKind,
    epochs: Option<usize>,
) -> Result<()> {
    let manifest_path = data_dir.join("manifest.toml");
    let manifest = DatasetManifest::load(&manifest_path)?;
    let fingerprint = dataset_fingerprint(&manifest_path)?;
    let train_eps = load_split(&manifest, Split::Train)?;
    let val_eps = load_split(&manifest, Split::Val)?;

    let mut train_cfg = cfg.train.clone();
    if let Some(e) = epochs {
        train_cfg.max_epochs = e;
    }
    std::fs::create_dir_all(out_dir).map_err(|e| GazeError::io(out_dir, e))?;
    let sink = TrainSink {
        checkpoint_path: out_dir.join(format!("{}.ckpt", agent.label())),
        log_path: out_dir.join(format!("{}.log", agent.label())),
    };
    let outcome = train_agent(
        agent,
        &train_eps,
        &val_eps,
        &cfg.model,
        &cfg.foveal,
        &train_cfg,
        &cfg.noise,
        Some(&sink),
        &fingerprint,
    )?;
    println!(
        "{}: best val error {:.2} px at epoch {} ({} steps); checkpoint {}",
        agent.label(),
        outcome.best_val_px,
        outcome.best_epoch,
        outcome.steps,
        sink.checkpoint_path.display()
    );
    Ok(())
}

fn checkpoint_label(path: &Path, meta: &CheckpointMeta) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if stem.is_empty() {
        if meta.model.return_conditioning {
            "dt".into()
        } else {
            "bc".into()
        }
    } else {
        stem
    }
}

pub fn cmd_eval(
    cfg: &RunConfig,
    data_dir: &Path,
    checkpoints: &[PathBuf],
    mode: EvalMode,
    with_oracle: bool,
    report_dir: Option<&Path>,
) -> Result<()> {
    let manifest = DatasetManifest::load(&data_dir.join("manifest.toml"))?;
    let mode_label = match mode {
        EvalMode::Closed => "closed",
        EvalMode::Open => "open",
    };

    type LoadResult = std::result::Result<(ParamSet, CheckpointMeta), GazeError>;
    // checkpoints load up front so one bad file does not sink the run
    let mut loaded: Vec<(String, LoadResult)> = Vec::new();
    for path in checkpoints {
        let label = load_checkpoint(path)
            .as_ref()
            .map(|(_, m)| checkpoint_label(path, m))
            .unwrap_or_else(|_| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string())
            });
        loaded.push((label, load_checkpoint(path)));
    }

    println!("{}", EvalReport::table_header());
    let mut reports: Vec<EvalReport> = Vec::new();
    let mut failures = 0usize;
    fn run_one(
        label: &str,
        pred: &dyn crate::metrics::Predictor,
        manifest: &DatasetManifest,
        cfg: &RunConfig,
        mode_label: &str,
        reports: &mut Vec<EvalReport>,
        failures: &mut usize,
    ) {
        match evaluate(pred, manifest, Split::Test, &cfg.geometry, mode_label) {
            Ok(report) => {
                println!("{}", report.table_row());
                reports.push(report);
            }
            Err(e) => {
                println!("{:<12} FAILED: {}", label, e);
                *failures += 1;
            }
        }
    }

    for (label, result) in &loaded {
        match result {
            Ok((params, meta)) => {
                let predictor = ModelPredictor {
                    label: label.clone(),
                    params,
                    model: &meta.model,
                    foveal: &meta.foveal,
                    closed_loop: mode == EvalMode::Closed,
                    initial_target: 0.0,
                };
                run_one(label, &predictor, &manifest, cfg, mode_label, &mut reports, &mut failures);
            }
            Err(e) => {
                println!("{:<12} FAILED: {}", label, e);
                failures += 1;
            }
        }
    }
    let random = RandomBaseline {
        std_frac: 0.25,
        seed: cfg.seed,
    };
    run_one("random", &random, &manifest, cfg, mode_label, &mut reports, &mut failures);
    if with_oracle {
        run_one("oracle", &OraclePredictor, &manifest, cfg, mode_label, &mut reports, &mut failures);
    }

    if let Some(dir) = report_dir {
        std::fs::create_dir_all(dir).map_err(|e| GazeError::io(dir, e))?;
        for r in &reports {
            r.save(&dir.join(format!("{}_{}.toml", r.predictor_id, mode_label)))?;
        }
    }
    if reports.is_empty() {
        return Err(GazeError::Domain(format!(
            "all {failures} predictors failed"
        )));
    }
    Ok(())
}

pub fn cmd_rollout(
    checkpoint: &Path,
    frames_dir: &Path,
    out: &Path,
    target_return: f64,
) -> Result<()> {
    let (params, meta) = load_checkpoint(checkpoint)?;
    let frames = load_episode_frames(frames_dir)?;
    let (h, w) = (frames[0].height() as u32, frames[0].width() as u32);
    let agent = Agent {
        params: &params,
        model: &meta.model,
        foveal: &meta.foveal,
    };
    let traj = agent.open_loop_rollout(&frames, (w, h), target_return)?;
    write_gaze_file(out, &traj)?;
    let sidecar = out.with_extension("toml");
    let provenance = toml::toml! {
        checkpoint = (checkpoint.display().to_string())
        frames_dir = (frames_dir.display().to_string())
        target_return = target_return
        mode = "open"
        config_hash = (meta.config_hash.clone())
        frame_count = (frames.len() as i64)
    };
    std::fs::write(&sidecar, provenance.to_string()).map_err(|e| GazeError::io(&sidecar, e))?;
    println!(
        "wrote {} fixations to {} (sidecar {})",
        traj.len(),
        out.display(),
        sidecar.display()
    );
    Ok(())
}

pub fn cmd_render(
    frames_dir: &Path,
    gt: Option<&Path>,
    gaze_files: &[PathBuf],
    samples: usize,
    out: &Path,
) -> Result<()> {
    let frames = load_episode_frames(frames_dir)?;
    let dims = (frames[0].width() as u32, frames[0].height() as u32);
    let mut trajs = Vec::new();
    if let Some(p) = gt {
        trajs.push((p.to_path_buf(), OVERLAY_GT_COLOR, read_gaze_file(p, dims)?));
    }
    for p in gaze_files {
        trajs.push((p.clone(), OVERLAY_PRED_COLOR, read_gaze_file(p, dims)?));
    }
    let tracks: Vec<OverlayTrack> = trajs
        .iter()
        .map(|(p, color, traj)| OverlayTrack {
            label: p.display().to_string(),
            color: *color,
            traj,
        })
        .collect();
    render_trajectory_overlay(&frames, &tracks, samples, out)?;
    println!("wrote overlay with {} track(s) to {}", tracks.len(), out.display());
    Ok(())
}
