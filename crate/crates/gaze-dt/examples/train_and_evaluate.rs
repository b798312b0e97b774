//! End-to-end miniature run: generate data, train the return-conditioned
//! agent and the behavioral-cloning baseline, then print a results table
//! against the random baseline.
//!
//!     cargo run --release --example train_and_evaluate

use gaze_dt::foveation::FovealConfig;
use gaze_dt::metrics::{evaluate, EvalReport, ViewingGeometry};
use gaze_dt::model::ModelConfig;
use gaze_dt::synth::{generate_dataset, FrameStorage, OracleGazeParams, SceneSpec};
use gaze_dt::train::{
    load_split, train_agent, AgentKind, ModelPredictor, NoiseSchedule, RandomBaseline,
    TrainConfig,
};
use gaze_dt::trajectory::Split;

fn main() -> gaze_dt::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let scene = SceneSpec {
        frame_width_px: 48,
        frame_height_px: 48,
        episode_len: 24,
        actor_size_px: 7,
        seed: 11,
        ..SceneSpec::default()
    };
    let manifest = generate_dataset(
        30,
        &scene,
        &OracleGazeParams::default(),
        (0.70, 0.10, 0.20),
        11,
        FrameStorage::Packed,
        dir.path(),
    )?;
    let train_eps = load_split(&manifest, Split::Train)?;
    let val_eps = load_split(&manifest, Split::Val)?;

    let model = ModelConfig {
        n_layers: 2,
        n_heads: 4,
        embed_dim: 48,
        context_len: 8,
        max_timestep: 24,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let foveal = FovealConfig {
        crop_size_px: 17,
        model_input_px: 24,
        mask_value: 0.0,
    };
    let train_cfg = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 8,
        max_epochs: 8,
        windows_per_epoch: Some(42),
        seed: 11,
        ..TrainConfig::default()
    };
    let noise = NoiseSchedule::default();
    let geom = ViewingGeometry::default();

    println!("{}", EvalReport::table_header());
    for kind in [AgentKind::DtExplore, AgentKind::Bc] {
        let out = train_agent(
            kind, &train_eps, &val_eps, &model, &foveal, &train_cfg, &noise, None, "demo",
        )?;
        let mut cfg = model.clone();
        cfg.return_conditioning = kind.return_conditioning();
        let pred = ModelPredictor {
            label: kind.label().into(),
            params: &out.params,
            model: &cfg,
            foveal: &foveal,
            closed_loop: true,
            initial_target: 0.0,
        };
        let report = evaluate(&pred, &manifest, Split::Test, &geom, "closed")?;
        println!("{}", report.table_row());
    }
    let random = RandomBaseline { std_frac: 0.25, seed: 11 };
    let report = evaluate(&random, &manifest, Split::Test, &geom, "closed")?;
    println!("{}", report.table_row());
    Ok(())
}
