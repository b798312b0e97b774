//! Release gate. One test per criterion; each prints a single
//! `criterion N (<name>): PASS` line on success.
//!
//! The ordering benchmark (criterion 1) trains two agents from scratch and
//! dominates the runtime; everything else finishes in seconds to a couple
//! of minutes.

use gaze_dt::config::RunConfig;
use gaze_dt::foveation::{
    apply_foveal_mask, resize_frame, ConvEncoder, FovealConfig, Frame, FrameEncoder,
};
use gaze_dt::metrics::{
    angular_error, evaluate, mean_axis_distance_error, ViewingGeometry,
};
use gaze_dt::model::{
    embed_window, encode_window_states, forward, init_params, mse_loss, ModelConfig,
    WindowInputs,
};
use gaze_dt::params::{ParamSet, ParamVars};
use gaze_dt::rollout::{Agent, RolloutMode, RolloutState};
use gaze_dt::synth::{
    generate_dataset, generate_scene, oracle_gaze, FrameStorage, OracleGazeParams, SceneSpec,
};
use gaze_dt::tape::Tape;
use gaze_dt::train::{
    load_split, train_agent, AgentKind, LoadedEpisode, ModelPredictor, NoiseSchedule,
    RandomBaseline, TrainConfig,
};
use gaze_dt::trajectory::{
    compute_returns_to_go, denormalize_gaze, Fixation, GazeTrajectory, Split,
};
use ndarray::Array3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn tiny_model(embed: usize, ctx: usize, max_t: usize) -> ModelConfig {
    ModelConfig {
        n_layers: 2,
        n_heads: 2,
        embed_dim: embed,
        context_len: ctx,
        max_timestep: max_t,
        action_dim: 2,
        dropout: 0.0,
        return_conditioning: true,
    }
}

fn tiny_foveal() -> FovealConfig {
    FovealConfig {
        crop_size_px: 5,
        model_input_px: 8,
        mask_value: 0.0,
    }
}

fn random_frame(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Frame {
    Frame::new(Array3::from_shape_fn((3, h, w), |_| rng.gen())).unwrap()
}

fn synthetic_episode(n: usize, px: u32, seed: u64) -> LoadedEpisode {
    let spec = SceneSpec {
        frame_width_px: px,
        frame_height_px: px,
        episode_len: n,
        actor_size_px: 5,
        distractor_count: 1,
        seed,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec).unwrap();
    let gaze = oracle_gaze(
        &scene.actor_track,
        &scene.distractors,
        (px, px),
        &OracleGazeParams {
            jitter_std_px: 0.0,
            glance_prob: 0.0,
            ..OracleGazeParams::default()
        },
        seed,
    )
    .unwrap();
    LoadedEpisode {
        id: format!("acc_{seed}"),
        frames: scene.frames,
        gaze,
    }
}

/// Loss value for the gradcheck, recomputed from scratch for given params.
fn window_loss(
    params: &ParamSet,
    model: &ModelConfig,
    foveal: &FovealConfig,
    frames: &[Frame],
    inputs: &WindowInputs,
    targets: &[(f64, f64)],
) -> f64 {
    let mut tape = Tape::new();
    let pv = ParamVars::leaf_all(&mut tape, params);
    let states = encode_window_states(&mut tape, &pv, frames, foveal).unwrap();
    let seq = embed_window(&mut tape, &pv, model, inputs, states).unwrap();
    let preds = forward(&mut tape, &pv, model, &seq, None).unwrap();
    let loss = mse_loss(&mut tape, preds, targets).unwrap();
    *tape.value(loss).first().unwrap()
}

#[test]
fn criterion_01_ordering_benchmark() {
    let started = std::time::Instant::now();
    let cfg_path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.toml");
    let cfg = RunConfig::load(std::path::Path::new(cfg_path)).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let manifest = generate_dataset(
        cfg.dataset.n_episodes,
        &cfg.scene,
        &cfg.oracle,
        cfg.ratios(),
        cfg.seed,
        FrameStorage::Packed,
        dir.path(),
    )
    .unwrap();
    let train = load_split(&manifest, Split::Train).unwrap();
    let val = load_split(&manifest, Split::Val).unwrap();

    let mut reports = Vec::new();
    for kind in [AgentKind::DtExplore, AgentKind::Bc] {
        let outcome = train_agent(
            kind,
            &train,
            &val,
            &cfg.model,
            &cfg.foveal,
            &cfg.train,
            &cfg.noise,
            None,
            "acceptance",
        )
        .unwrap();
        let mut model = cfg.model.clone();
        model.return_conditioning = kind.return_conditioning();
        let predictor = ModelPredictor {
            label: kind.label().to_string(),
            params: &outcome.params,
            model: &model,
            foveal: &cfg.foveal,
            closed_loop: true,
            initial_target: 0.0,
        };
        let report =
            evaluate(&predictor, &manifest, Split::Test, &cfg.geometry, "closed").unwrap();
        println!(
            "  {:<12} {:.2} px (best val {:.2} px at epoch {})",
            kind.label(),
            report.mean_euclid_px,
            outcome.best_val_px,
            outcome.best_epoch
        );
        reports.push(report.mean_euclid_px);
    }
    let random = evaluate(
        &RandomBaseline::default(),
        &manifest,
        Split::Test,
        &cfg.geometry,
        "closed",
    )
    .unwrap()
    .mean_euclid_px;
    println!("  {:<12} {:.2} px", "random", random);

    let (dt, bc) = (reports[0], reports[1]);
    assert!(
        dt < bc && bc < random,
        "ordering violated: dt {dt:.2} bc {bc:.2} random {random:.2}"
    );
    assert!(
        dt < 0.5 * random,
        "dt {dt:.2} not below half of random {random:.2}"
    );
    let mins = started.elapsed().as_secs_f64() / 60.0;
    assert!(mins < 30.0, "benchmark took {mins:.1} min");
    println!(
        "criterion 1 (ordering benchmark, dt {dt:.2} < bc {bc:.2} < random {random:.2} px, \
         dt < random/2, {mins:.1} min): PASS"
    );
}

#[test]
fn criterion_02_overfit_oracle() {
    let started = std::time::Instant::now();
    let eps = vec![synthetic_episode(8, 32, 71), synthetic_episode(8, 32, 72)];
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
    let cfg = TrainConfig {
        learning_rate: 3e-3,
        batch_size: 2,
        max_epochs: 2000,
        early_stop_patience: 2000,
        windows_per_epoch: Some(2),
        seed: 73,
        ..TrainConfig::default()
    };
    let out = train_agent(
        AgentKind::Dt,
        &eps,
        &eps,
        &model,
        &foveal,
        &cfg,
        &NoiseSchedule::default(),
        None,
        "overfit",
    )
    .unwrap();
    let (best_step, best_loss) = out
        .log
        .iter()
        .map(|r| (r.epoch as u64 + 1, r.train_loss)) // 1 optimizer step per epoch
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    assert!(
        best_loss < 1e-3 && best_step <= 2000,
        "best training MSE {best_loss:.2e} at step {best_step}"
    );
    assert!(
        started.elapsed().as_secs() < 120,
        "overfit exceeded 2 min ({:?})",
        started.elapsed()
    );
    println!(
        "criterion 2 (overfit oracle, MSE {best_loss:.1e} at step {best_step}): PASS"
    );
}

#[test]
fn criterion_03_gradient_correctness() {
    let started = std::time::Instant::now();
    let model = tiny_model(16, 4, 16);
    let foveal = tiny_foveal();
    let params = init_params(&model, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);

    let len = 3usize;
    let frames: Vec<Frame> = (0..len)
        .map(|_| random_frame(foveal.model_input_px, foveal.model_input_px, &mut rng))
        .collect();
    let rtg: Vec<f64> = (0..len).map(|_| -rng.gen::<f64>()).collect();
    let actions: Vec<(f64, f64)> = (0..len).map(|_| (rng.gen(), rng.gen())).collect();
    let timesteps: Vec<usize> = (0..len).collect();
    let targets: Vec<(f64, f64)> = (0..len).map(|_| (rng.gen(), rng.gen())).collect();
    let inputs = WindowInputs {
        returns_to_go: &rtg,
        actions: &actions,
        timesteps: &timesteps,
    };

    // analytic gradients
    let mut tape = Tape::new();
    let pv = ParamVars::leaf_all(&mut tape, &params);
    let states = encode_window_states(&mut tape, &pv, &frames, &foveal).unwrap();
    let seq = embed_window(&mut tape, &pv, &model, &inputs, states).unwrap();
    let preds = forward(&mut tape, &pv, &model, &seq, None).unwrap();
    let loss = mse_loss(&mut tape, preds, &targets).unwrap();
    let grads = tape.backward(loss);

    // every parameter group, a few entries each, against central differences
    let eps = 1e-5;
    let mut checked = 0usize;
    for (name, value) in params.iter() {
        let var = pv.var(name);
        let g = grads[var.0]
            .as_ref()
            .unwrap_or_else(|| panic!("no gradient for {name}"));
        let flat: Vec<usize> = {
            let total = value.len();
            let mut idx: Vec<usize> = (0..total).collect();
            idx.shuffle(&mut rng);
            idx.truncate(3.min(total));
            idx
        };
        for i in flat {
            let mut plus = params.clone();
            plus.get_mut(name).unwrap().as_slice_mut().unwrap()[i] += eps;
            let mut minus = params.clone();
            minus.get_mut(name).unwrap().as_slice_mut().unwrap()[i] -= eps;
            let numeric = (window_loss(&plus, &model, &foveal, &frames, &inputs, &targets)
                - window_loss(&minus, &model, &foveal, &frames, &inputs, &targets))
                / (2.0 * eps);
            let analytic = g.iter().nth(i).copied().unwrap();
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            let rel = (analytic - numeric).abs() / denom;
            assert!(
                rel < 1e-4,
                "{name}[{i}]: analytic {analytic:.3e} vs numeric {numeric:.3e} (rel {rel:.2e})"
            );
            checked += 1;
        }
    }
    assert!(started.elapsed().as_secs() < 10, "gradcheck exceeded 10 s");
    println!("criterion 3 (gradient correctness, {checked} entries): PASS");
}

#[test]
fn criterion_04_causality_suite() {
    let model = tiny_model(16, 8, 32);
    let foveal = tiny_foveal();
    let params = init_params(&model, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);

    let forward_preds = |frames: &[Frame], rtg: &[f64], actions: &[(f64, f64)], ts: &[usize]| {
        let mut tape = Tape::new();
        let pv = ParamVars::leaf_all(&mut tape, &params);
        let states = encode_window_states(&mut tape, &pv, frames, &foveal).unwrap();
        let inputs = WindowInputs {
            returns_to_go: rtg,
            actions,
            timesteps: ts,
        };
        let seq = embed_window(&mut tape, &pv, &model, &inputs, states).unwrap();
        let preds = forward(&mut tape, &pv, &model, &seq, None).unwrap();
        tape.value(preds).clone()
    };

    for case in 0..100 {
        let len = rng.gen_range(2..=6);
        let frames: Vec<Frame> = (0..len)
            .map(|_| random_frame(foveal.model_input_px, foveal.model_input_px, &mut rng))
            .collect();
        let rtg: Vec<f64> = (0..len).map(|_| -rng.gen::<f64>()).collect();
        let actions: Vec<(f64, f64)> = (0..len).map(|_| (rng.gen(), rng.gen())).collect();
        let ts: Vec<usize> = (0..len).collect();
        let base = forward_preds(&frames, &rtg, &actions, &ts);

        // perturb one strictly-future timestep's tokens
        let t = rng.gen_range(0..len - 1);
        let future = rng.gen_range(t + 1..len);
        let mut rtg2 = rtg.clone();
        let mut actions2 = actions.clone();
        let mut frames2 = frames.clone();
        rtg2[future] -= 0.37;
        actions2[future] = (rng.gen(), rng.gen());
        frames2[future] = random_frame(foveal.model_input_px, foveal.model_input_px, &mut rng);
        let perturbed = forward_preds(&frames2, &rtg2, &actions2, &ts);
        for i in 0..=t {
            for c in 0..2 {
                let d = (base[[i, c]] - perturbed[[i, c]]).abs();
                assert!(d < 1e-6, "case {case}: future leak at t={i} ({d:.2e})");
            }
        }

        // perturbing a timestep's own action token leaves its prediction unchanged
        let own = rng.gen_range(0..len);
        let mut actions3 = actions.clone();
        actions3[own] = (rng.gen(), rng.gen());
        let own_pred = forward_preds(&frames, &rtg, &actions3, &ts);
        for c in 0..2 {
            let d = (base[[own, c]] - own_pred[[own, c]]).abs();
            assert!(d < 1e-6, "case {case}: own-action leak at t={own} ({d:.2e})");
        }
    }
    println!("criterion 4 (causality, 100 cases): PASS");
}

#[test]
fn criterion_05_return_to_go_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=64);
        let rewards: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * -2.0).collect();
        let rtg = compute_returns_to_go(&rewards).unwrap();
        for t in 0..n {
            let next = if t + 1 < n { rtg[t + 1] } else { 0.0 };
            assert_eq!(rtg[t], rewards[t] + next, "suffix identity must be exact");
        }
    }

    // closed-loop bookkeeping identity on a real stepwise rollout
    let model = tiny_model(16, 4, 64);
    let foveal = tiny_foveal();
    let params = init_params(&model, 32).unwrap();
    let agent = Agent {
        params: &params,
        model: &model,
        foveal: &foveal,
    };
    let ep = synthetic_episode(20, 16, 33);
    let mut state = RolloutState::new(RolloutMode::ClosedLoop, -3.25);
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for frame in &ep.frames {
        agent.predict_next(&mut state, frame).unwrap();
        state.record_reward(-rng.gen::<f64>());
        let realized: f64 = state.realized_rewards().iter().sum();
        assert_eq!(
            state.initial_target(),
            state.current_target() + realized,
            "bookkeeping identity must be exact at every step"
        );
    }
    println!("criterion 5 (return-to-go algebra): PASS");
}

#[test]
fn criterion_06_metric_fidelity() {
    let geom = ViewingGeometry::default();

    // 100 px offset at screen center
    let a = angular_error((960.0, 540.0), (1060.0, 540.0), &geom).unwrap();
    assert!(
        (a - 2.64).abs() <= 0.01,
        "100 px offset: {a:.4}° (want 2.64 ± 0.01)"
    );

    // constant (+10, -5) px offset -> per-axis error exactly (10, 5)
    let n = 12;
    let fix = |xs: Vec<(f64, f64)>| {
        GazeTrajectory::new(
            xs.iter()
                .enumerate()
                .map(|(i, &(x, y))| Fixation {
                    frame_index: i,
                    x,
                    y,
                })
                .collect(),
            1920,
            1080,
        )
        .unwrap()
    };
    let gt: Vec<(f64, f64)> = (0..n)
        .map(|i| (0.25 + 0.01 * i as f64, 0.40 + 0.01 * i as f64))
        .collect();
    let off: Vec<(f64, f64)> = gt
        .iter()
        .map(|&(x, y)| (x + 10.0 / 1920.0, y - 5.0 / 1080.0))
        .collect();
    let (ex, ey) = mean_axis_distance_error(&fix(off), &fix(gt)).unwrap();
    assert!((ex - 10.0).abs() < 1e-9 && (ey - 5.0).abs() < 1e-9);

    // small offsets match the planar arctangent approximation
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (w_m, h_m) = geom.screen_size_m;
    for _ in 0..200 {
        let p = (rng.gen_range(800.0..1100.0), rng.gen_range(400.0..700.0));
        let dx_px = rng.gen_range(-20.0..20.0);
        let dy_px = rng.gen_range(-20.0..20.0);
        let q = (p.0 + dx_px, p.1 + dy_px);
        let got = angular_error(p, q, &geom).unwrap();
        let dx_m = dx_px * w_m / 1920.0;
        let dy_m = dy_px * h_m / 1080.0;
        // planar approximation at the screen center
        let approx = ((dx_m * dx_m + dy_m * dy_m).sqrt() / geom.eye_distance_m)
            .atan()
            .to_degrees();
        assert!(
            (got - approx).abs() < 0.01,
            "small-angle mismatch: {got:.4}° vs {approx:.4}°"
        );
    }
    println!("criterion 6 (metric fidelity): PASS");
}

#[test]
fn criterion_07_masking_locality() {
    let foveal = FovealConfig {
        crop_size_px: 7,
        model_input_px: 16,
        mask_value: 0.0,
    };
    let model = tiny_model(16, 4, 16);
    let params = init_params(&model, 51).unwrap();
    let enc = ConvEncoder {
        params: &params,
        embed_dim: model.embed_dim,
        model_input_px: foveal.model_input_px,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for case in 0..50 {
        let frame = random_frame(16, 16, &mut rng);
        let gaze = (rng.gen_range(0.0..16.0), rng.gen_range(0.0..16.0));
        let masked = apply_foveal_mask(&frame, gaze, &foveal).unwrap();
        let out = enc.encode(&masked).unwrap();

        // randomize everything, then restore the kept window from the mask
        let mut scrambled = random_frame(16, 16, &mut rng);
        for c in 0..3 {
            for r in 0..16 {
                for col in 0..16 {
                    if masked.data[[c, r, col]] != foveal.mask_value {
                        scrambled.data[[c, r, col]] = frame.data[[c, r, col]];
                    }
                }
            }
        }
        let masked2 = apply_foveal_mask(&scrambled, gaze, &foveal).unwrap();
        let out2 = enc.encode(&masked2).unwrap();
        assert!(
            out.iter().zip(&out2).all(|(a, b)| a == b),
            "case {case}: outside-window pixels leaked into the encoding"
        );
    }
    println!("criterion 7 (masking locality, 50 cases): PASS");
}

#[test]
fn criterion_08_window_equivalence() {
    let model = tiny_model(16, 128, 256);
    let foveal = tiny_foveal();
    let params = init_params(&model, 61).unwrap();
    let agent = Agent {
        params: &params,
        model: &model,
        foveal: &foveal,
    };

    // episode shorter than the context: incremental == batched
    let ep = synthetic_episode(10, 12, 62);
    let dims = (12u32, 12u32);
    let target = -1.5;
    let inc = agent.open_loop_rollout(&ep.frames, dims, target).unwrap();
    let preds: Vec<(f64, f64)> = inc.fixations().iter().map(|f| (f.x, f.y)).collect();

    let mut frames = Vec::new();
    for (t, raw) in ep.frames.iter().enumerate() {
        let anchor = if t == 0 { (0.5, 0.5) } else { preds[t - 1] };
        let px = denormalize_gaze(anchor, dims).unwrap();
        let m = apply_foveal_mask(raw, px, &foveal).unwrap();
        frames.push(resize_frame(&m, foveal.model_input_px).unwrap());
    }
    let rtg = vec![target; preds.len()];
    let ts: Vec<usize> = (0..preds.len()).collect();
    let mut tape = Tape::new();
    let pv = ParamVars::leaf_all(&mut tape, &params);
    let states = encode_window_states(&mut tape, &pv, &frames, &foveal).unwrap();
    let inputs = WindowInputs {
        returns_to_go: &rtg,
        actions: &preds,
        timesteps: &ts,
    };
    let seq = embed_window(&mut tape, &pv, &model, &inputs, states).unwrap();
    let out = forward(&mut tape, &pv, &model, &seq, None).unwrap();
    let batched = tape.value(out);
    for t in 0..preds.len() {
        assert!(
            (batched[[t, 0]] - preds[t].0).abs() <= 1e-6
                && (batched[[t, 1]] - preds[t].1).abs() <= 1e-6,
            "incremental vs batched diverged at t={t}"
        );
    }

    // eviction: with > context_len history prepended, the retained window
    // fully determines the next prediction
    let long = synthetic_episode(131, 12, 63);
    let inc_long = agent.open_loop_rollout(&long.frames, dims, target).unwrap();
    let preds_long: Vec<(f64, f64)> = inc_long.fixations().iter().map(|f| (f.x, f.y)).collect();
    let t_last = 130usize; // history beyond 128 timesteps has been evicted
    let start = t_last + 1 - model.context_len;
    let mut frames = Vec::new();
    for t in start..=t_last {
        let anchor = preds_long[t - 1];
        let px = denormalize_gaze(anchor, dims).unwrap();
        let m = apply_foveal_mask(&long.frames[t], px, &foveal).unwrap();
        frames.push(resize_frame(&m, foveal.model_input_px).unwrap());
    }
    let rtg = vec![target; model.context_len];
    let actions: Vec<(f64, f64)> = (start..=t_last).map(|t| preds_long[t]).collect();
    let ts: Vec<usize> = (start..=t_last).collect();
    let mut tape = Tape::new();
    let pv = ParamVars::leaf_all(&mut tape, &params);
    let states = encode_window_states(&mut tape, &pv, &frames, &foveal).unwrap();
    let inputs = WindowInputs {
        returns_to_go: &rtg,
        actions: &actions,
        timesteps: &ts,
    };
    let seq = embed_window(&mut tape, &pv, &model, &inputs, states).unwrap();
    let out = forward(&mut tape, &pv, &model, &seq, None).unwrap();
    let batched = tape.value(out);
    let last = model.context_len - 1;
    assert!(
        (batched[[last, 0]] - preds_long[t_last].0).abs() <= 1e-6
            && (batched[[last, 1]] - preds_long[t_last].1).abs() <= 1e-6,
        "eviction changed the retained-window output"
    );
    println!("criterion 8 (window equivalence + eviction): PASS");
}

#[test]
fn criterion_09_end_to_end_determinism() {
    let run = || -> String {
        let dir = tempfile::tempdir().unwrap();
        let scene = SceneSpec {
            frame_width_px: 24,
            frame_height_px: 24,
            episode_len: 10,
            actor_size_px: 5,
            distractor_count: 1,
            seed: 81,
            ..SceneSpec::default()
        };
        let manifest = generate_dataset(
            8,
            &scene,
            &OracleGazeParams::default(),
            (0.6, 0.2, 0.2),
            81,
            FrameStorage::Packed,
            dir.path(),
        )
        .unwrap();
        let train_eps = load_split(&manifest, Split::Train).unwrap();
        let val_eps = load_split(&manifest, Split::Val).unwrap();
        let model = tiny_model(16, 6, 10);
        let foveal = FovealConfig {
            crop_size_px: 9,
            model_input_px: 12,
            mask_value: 0.0,
        };
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            batch_size: 4,
            max_epochs: 5,
            early_stop_patience: 5,
            windows_per_epoch: Some(8),
            seed: 82,
            ..TrainConfig::default()
        };
        let out = train_agent(
            AgentKind::DtExplore,
            &train_eps,
            &val_eps,
            &model,
            &foveal,
            &cfg,
            &NoiseSchedule::default(),
            None,
            "det",
        )
        .unwrap();
        let pred = ModelPredictor {
            label: "dt-explore".into(),
            params: &out.params,
            model: &model,
            foveal: &foveal,
            closed_loop: true,
            initial_target: 0.0,
        };
        let report = evaluate(
            &pred,
            &manifest,
            Split::Test,
            &ViewingGeometry::default(),
            "closed",
        )
        .unwrap();
        toml::to_string(&report).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b, "two identical runs produced different EvalReports");
    println!("criterion 9 (end-to-end determinism): PASS");
}

#[test]
fn criterion_10_hyperparameter_conformance() {
    let d = RunConfig::default();
    assert_eq!(d.model.n_layers, 6);
    assert_eq!(d.model.n_heads, 8);
    assert_eq!(d.model.embed_dim, 128);
    assert_eq!(d.model.context_len, 128);
    assert_eq!(d.foveal.crop_size_px, 75);
    assert_eq!(d.foveal.model_input_px, 224);
    assert_eq!(d.train.learning_rate, 1e-4);
    assert_eq!(d.train.batch_size, 64);
    assert_eq!(d.train.max_epochs, 1000);
    println!("criterion 10 (hyperparameter conformance): PASS");
}
