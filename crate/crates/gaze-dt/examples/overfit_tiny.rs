//! Memorization sanity check: a tiny model driven to near-zero training
//! loss on two episodes. If this fails, nothing downstream will work.
//!
//!     cargo run --release --example overfit_tiny

use gaze_dt::foveation::FovealConfig;
use gaze_dt::model::ModelConfig;
use gaze_dt::synth::{generate_scene, oracle_gaze, OracleGazeParams, SceneSpec};
use gaze_dt::train::{train_dt, LoadedEpisode, TrainConfig};

fn episode(seed: u64) -> gaze_dt::Result<LoadedEpisode> {
    let spec = SceneSpec {
        frame_width_px: 32,
        frame_height_px: 32,
        episode_len: 8,
        actor_size_px: 5,
        distractor_count: 1,
        seed,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec)?;
    let gaze = oracle_gaze(
        &scene.actor_track,
        &scene.distractors,
        (32, 32),
        &OracleGazeParams {
            jitter_std_px: 0.0,
            glance_prob: 0.0,
            ..OracleGazeParams::default()
        },
        seed,
    )?;
    Ok(LoadedEpisode {
        id: format!("ep{seed}"),
        frames: scene.frames,
        gaze,
    })
}

fn main() -> gaze_dt::Result<()> {
    let eps = vec![episode(1)?, episode(2)?];
    let model = ModelConfig {
        n_layers: 2,
        n_heads: 2,
        embed_dim: 32,
        context_len: 8,
        max_timestep: 8,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let foveal = FovealConfig {
        crop_size_px: 11,
        model_input_px: 16,
        mask_value: 0.0,
    };
    let train = TrainConfig {
        learning_rate: 3e-3,
        batch_size: 2,
        max_epochs: 600,
        early_stop_patience: 600,
        windows_per_epoch: Some(2),
        seed: 0,
        ..TrainConfig::default()
    };

    let out = train_dt(&eps, &eps, &model, &foveal, &train, None, "overfit-demo")?;
    for rec in out.log.iter().step_by(50) {
        println!("epoch {:>4}  train mse {:.3e}", rec.epoch, rec.train_loss);
    }
    let last = out.log.last().unwrap();
    println!("final: epoch {} train mse {:.3e}", last.epoch, last.train_loss);
    Ok(())
}
