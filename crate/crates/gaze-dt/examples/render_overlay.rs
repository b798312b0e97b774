//! Render a trajectory-comparison image: ground-truth scanpath in gray,
//! a synthetic "prediction" (ground truth plus drift) in green, sampled at
//! ten frames along the episode.
//!
//!     cargo run --example render_overlay -- [out.png]

use gaze_dt::metrics::{
    render_trajectory_overlay, OverlayTrack, OVERLAY_GT_COLOR, OVERLAY_PRED_COLOR,
};
use gaze_dt::synth::{generate_scene, oracle_gaze, OracleGazeParams, SceneSpec};
use gaze_dt::trajectory::{Fixation, GazeTrajectory};
use std::path::Path;

fn main() -> gaze_dt::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/overlay.png".into());
    let spec = SceneSpec {
        frame_width_px: 160,
        frame_height_px: 120,
        episode_len: 40,
        actor_size_px: 13,
        seed: 9,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec)?;
    let gt = oracle_gaze(
        &scene.actor_track,
        &scene.distractors,
        (160, 120),
        &OracleGazeParams::default(),
        9,
    )?;

    let drifted: Vec<Fixation> = gt
        .fixations()
        .iter()
        .map(|f| Fixation {
            frame_index: f.frame_index,
            x: (f.x + 0.05 * (f.frame_index as f64 * 0.4).sin()).clamp(0.0, 1.0),
            y: (f.y + 0.05 * (f.frame_index as f64 * 0.3).cos()).clamp(0.0, 1.0),
        })
        .collect();
    let pred = GazeTrajectory::new(drifted, 160, 120)?;

    render_trajectory_overlay(
        &scene.frames,
        &[
            OverlayTrack {
                label: "ground truth".into(),
                color: OVERLAY_GT_COLOR,
                traj: &gt,
            },
            OverlayTrack {
                label: "prediction".into(),
                color: OVERLAY_PRED_COLOR,
                traj: &pred,
            },
        ],
        10,
        Path::new(&out),
    )?;
    println!("wrote {out}");
    Ok(())
}
