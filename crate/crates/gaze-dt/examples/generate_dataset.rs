//! Generate a small synthetic dataset and print its manifest summary.
//!
//!     cargo run --example generate_dataset -- [out_dir]

use gaze_dt::synth::{generate_dataset, FrameStorage, OracleGazeParams, SceneSpec};
use gaze_dt::trajectory::Split;

fn main() -> gaze_dt::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/example_dataset".into());
    let scene = SceneSpec {
        frame_width_px: 64,
        frame_height_px: 64,
        episode_len: 32,
        ..SceneSpec::default()
    };
    let manifest = generate_dataset(
        20,
        &scene,
        &OracleGazeParams::default(),
        (0.75, 0.05, 0.20),
        42,
        FrameStorage::Packed,
        out_dir.as_ref(),
    )?;

    println!(
        "{} episodes at {}x{} in {}",
        manifest.episodes.len(),
        manifest.frame_width_px,
        manifest.frame_height_px,
        out_dir
    );
    for split in [Split::Train, Split::Val, Split::Test] {
        let ids: Vec<&str> = manifest
            .split_ids(split)
            .iter()
            .map(|e| e.id.as_str())
            .collect();
        println!("{:?}: {} episodes {:?}", split, ids.len(), ids);
    }
    Ok(())
}
