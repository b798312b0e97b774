//! Open-loop rollout with an untrained (freshly initialized) agent: the
//! return target stays fixed while the mask follows the agent's own
//! predictions. Demonstrates the deployment interface without needing a
//! checkpoint.
//!
//!     cargo run --example rollout_open_loop

use gaze_dt::foveation::FovealConfig;
use gaze_dt::model::{init_params, ModelConfig};
use gaze_dt::rollout::Agent;
use gaze_dt::synth::{generate_scene, SceneSpec};
use gaze_dt::trajectory::denormalize_gaze;

fn main() -> gaze_dt::Result<()> {
    let spec = SceneSpec {
        frame_width_px: 48,
        frame_height_px: 48,
        episode_len: 16,
        actor_size_px: 7,
        seed: 5,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec)?;

    let model = ModelConfig {
        n_layers: 2,
        n_heads: 4,
        embed_dim: 48,
        context_len: 8,
        max_timestep: 16,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let foveal = FovealConfig {
        crop_size_px: 17,
        model_input_px: 24,
        mask_value: 0.0,
    };
    let params = init_params(&model, 5)?;
    let agent = Agent {
        params: &params,
        model: &model,
        foveal: &foveal,
    };

    let traj = agent.open_loop_rollout(&scene.frames, (48, 48), 0.0)?;
    println!("frame   pred_px      actor_px");
    for (f, actor) in traj.fixations().iter().zip(&scene.actor_track) {
        let p = denormalize_gaze((f.x, f.y), (48, 48))?;
        println!(
            "{:>5}  ({:>5.1},{:>5.1})  ({:>5.1},{:>5.1})",
            f.frame_index, p.0, p.1, actor.0, actor.1
        );
    }
    Ok(())
}
