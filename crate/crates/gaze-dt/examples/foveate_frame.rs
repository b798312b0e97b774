//! Foveal masking demo: render one synthetic frame, mask it at the oracle
//! gaze, and save before/after PNGs plus the resized model input.
//!
//!     cargo run --example foveate_frame -- [out_dir]

use gaze_dt::foveation::{apply_foveal_mask, resize_frame, save_frame_png, FovealConfig};
use gaze_dt::synth::{generate_scene, oracle_gaze, OracleGazeParams, SceneSpec};
use gaze_dt::trajectory::denormalize_gaze;
use std::path::Path;

fn main() -> gaze_dt::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/example_foveation".into());
    let out = Path::new(&out_dir);
    std::fs::create_dir_all(out).map_err(|e| gaze_dt::GazeError::io(out, e))?;

    let spec = SceneSpec {
        frame_width_px: 128,
        frame_height_px: 128,
        episode_len: 8,
        actor_size_px: 15,
        seed: 3,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec)?;
    let gaze = oracle_gaze(
        &scene.actor_track,
        &scene.distractors,
        (128, 128),
        &OracleGazeParams::default(),
        3,
    )?;

    let foveal = FovealConfig {
        crop_size_px: 41,
        model_input_px: 64,
        mask_value: 0.0,
    };
    let t = 4;
    let f = &gaze.fixations()[t];
    let gaze_px = denormalize_gaze((f.x, f.y), (128, 128))?;
    let masked = apply_foveal_mask(&scene.frames[t], gaze_px, &foveal)?;
    let resized = resize_frame(&masked, foveal.model_input_px)?;

    save_frame_png(&out.join("full.png"), &scene.frames[t])?;
    save_frame_png(&out.join("masked.png"), &masked)?;
    save_frame_png(&out.join("model_input.png"), &resized)?;
    println!(
        "gaze at ({:.1}, {:.1}) px; wrote full.png, masked.png, model_input.png to {}",
        gaze_px.0, gaze_px.1, out_dir
    );
    Ok(())
}
