//! Autoregressive gaze generation: closed-loop evaluation (rewards realized
//! against ground truth) and open-loop deployment, with sliding-context and
//! return-target bookkeeping.

use crate::error::{GazeError, Result};
use crate::foveation::{apply_foveal_mask, resize_frame, Frame, FovealConfig};
use crate::model::{embed_window, encode_window_states, forward, ModelConfig, WindowInputs};
use crate::params::{ParamSet, ParamVars};
use crate::tape::Tape;
use crate::trajectory::{compute_reward, denormalize_gaze, Fixation, GazeTrajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutMode {
    ClosedLoop,
    OpenLoop,
}

/// Frozen model plus the preprocessing it expects.
pub struct Agent<'a> {
    pub params: &'a ParamSet,
    pub model: &'a ModelConfig,
    pub foveal: &'a FovealConfig,
}

/// Sliding context of one in-flight rollout. Single-owner; independent
/// rollouts against the same frozen weights may run in parallel.
pub struct RolloutState {
    mode: RolloutMode,
    initial_target: f64,
    consumed: f64,
    current_target: f64,
    realized: Vec<f64>,
    rtg: Vec<f64>,
    state_embeds: Vec<Vec<f64>>,
    actions: Vec<(f64, f64)>,
    timesteps: Vec<usize>,
    next_timestep: usize,
    last_pred: Option<(f64, f64)>,
}

impl RolloutState {
    pub fn new(mode: RolloutMode, initial_target: f64) -> Self {
        RolloutState {
            mode,
            initial_target,
            consumed: 0.0,
            current_target: initial_target,
            realized: Vec::new(),
            rtg: Vec::new(),
            state_embeds: Vec::new(),
            actions: Vec::new(),
            timesteps: Vec::new(),
            next_timestep: 0,
            last_pred: None,
        }
    }

    pub fn mode(&self) -> RolloutMode {
        self.mode
    }

    pub fn initial_target(&self) -> f64 {
        self.initial_target
    }

    pub fn current_target(&self) -> f64 {
        self.current_target
    }

    pub fn realized_rewards(&self) -> &[f64] {
        &self.realized
    }

    pub fn context_steps(&self) -> usize {
        self.timesteps.len()
    }

    /// Record the realized reward of the step just predicted and update the
    /// return target: R̂ ← R̂ − r. Closed-loop only.
    pub fn record_reward(&mut self, r: f64) {
        debug_assert_eq!(self.mode, RolloutMode::ClosedLoop);
        self.realized.push(r);
        self.consumed += r;
        self.current_target = self.initial_target - self.consumed;
        // the bookkeeping identity holds exactly by construction
        debug_assert_eq!(self.initial_target, self.current_target + self.consumed);
    }

    fn evict_to(&mut self, context_len: usize) {
        while self.timesteps.len() > context_len {
            self.rtg.remove(0);
            self.state_embeds.remove(0);
            self.actions.remove(0);
            self.timesteps.remove(0);
        }
    }
}

impl Agent<'_> {
    /// Mask the new frame at the previous prediction (frame center on the
    /// first step), encode it, append to the context, and return the
    /// model's prediction at the newest state token.
    pub fn predict_next(&self, state: &mut RolloutState, frame: &Frame) -> Result<(f64, f64)> {
        let dims = (frame.width() as u32, frame.height() as u32);
        let center = state.last_pred.unwrap_or((0.5, 0.5));
        let gaze_px = denormalize_gaze(center, dims)?;
        let masked = apply_foveal_mask(frame, gaze_px, self.foveal)?;
        let resized = resize_frame(&masked, self.foveal.model_input_px)?;

        let mut tape = Tape::new();
        let pvars = ParamVars::leaf_all(&mut tape, self.params);
        let emb = encode_window_states(&mut tape, &pvars, &[resized], self.foveal)?;
        let emb_vec: Vec<f64> = tape.value(emb).iter().copied().collect();

        state.rtg.push(state.current_target);
        state.state_embeds.push(emb_vec);
        // placeholder for the not-yet-known action; the causal mask keeps it
        // out of this step's prediction
        state.actions.push((0.5, 0.5));
        state.timesteps.push(state.next_timestep);
        state.next_timestep += 1;
        state.evict_to(self.model.context_len);

        let t = state.timesteps.len();
        let d = self.model.embed_dim;
        let states_leaf = tape.leaf(
            ndarray::Array2::from_shape_fn((t, d), |(i, j)| state.state_embeds[i][j]).into_dyn(),
        );
        let seq = embed_window(
            &mut tape,
            &pvars,
            self.model,
            &WindowInputs {
                returns_to_go: &state.rtg,
                actions: &state.actions,
                timesteps: &state.timesteps,
            },
            states_leaf,
        )?;
        let preds = forward(&mut tape, &pvars, self.model, &seq, None)?;
        let out = tape.value(preds);
        let pred = (out[[t - 1, 0]], out[[t - 1, 1]]);
        *state.actions.last_mut().unwrap() = pred;
        state.last_pred = Some(pred);
        Ok(pred)
    }

    /// Closed-loop rollout over an episode with ground truth: each frame is
    /// masked at the model's previous prediction, realized rewards update
    /// the return target.
    pub fn closed_loop_rollout(
        &self,
        frames: &[Frame],
        gt: &GazeTrajectory,
        initial_target: f64,
    ) -> Result<(GazeTrajectory, Vec<f64>)> {
        if frames.len() != gt.len() {
            return Err(GazeError::Alignment(format!(
                "{} frames vs {} fixations",
                frames.len(),
                gt.len()
            )));
        }
        let mut state = RolloutState::new(RolloutMode::ClosedLoop, initial_target);
        let mut fixations = Vec::with_capacity(frames.len());
        for (t, frame) in frames.iter().enumerate() {
            let pred = self.predict_next(&mut state, frame)?;
            let g = gt.fixations()[t];
            let r = compute_reward((g.x, g.y), pred);
            state.record_reward(r);
            fixations.push(Fixation {
                frame_index: t,
                x: pred.0,
                y: pred.1,
            });
        }
        let traj = GazeTrajectory::new(fixations, gt.frame_width_px, gt.frame_height_px)?;
        Ok((traj, state.realized))
    }

    /// Open-loop rollout: no ground truth, the return target is held at the
    /// initial value throughout.
    pub fn open_loop_rollout(
        &self,
        frames: &[Frame],
        dims: (u32, u32),
        initial_target: f64,
    ) -> Result<GazeTrajectory> {
        if frames.is_empty() {
            return Err(GazeError::EmptyEpisode);
        }
        let mut state = RolloutState::new(RolloutMode::OpenLoop, initial_target);
        let mut fixations = Vec::with_capacity(frames.len());
        for (t, frame) in frames.iter().enumerate() {
            let pred = self.predict_next(&mut state, frame)?;
            fixations.push(Fixation {
                frame_index: t,
                x: pred.0,
                y: pred.1,
            });
        }
        GazeTrajectory::new(fixations, dims.0, dims.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;
    use ndarray::Array3;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> (ModelConfig, FovealConfig) {
        (
            ModelConfig {
                n_layers: 1,
                n_heads: 2,
                embed_dim: 8,
                context_len: 4,
                max_timestep: 64,
                action_dim: 2,
                dropout: 0.0,
                return_conditioning: true,
            },
            FovealConfig {
                crop_size_px: 5,
                model_input_px: 8,
                mask_value: 0.0,
            },
        )
    }

    fn frames(n: usize, seed: u64) -> Vec<Frame> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Frame::new(Array3::from_shape_fn((3, 16, 16), |_| rng.gen())).unwrap())
            .collect()
    }

    fn gt(n: usize) -> GazeTrajectory {
        GazeTrajectory::new(
            (0..n)
                .map(|i| Fixation {
                    frame_index: i,
                    x: 0.25 + 0.5 * (i as f64 / n as f64),
                    y: 0.5,
                })
                .collect(),
            16,
            16,
        )
        .unwrap()
    }

    #[test]
    fn buffers_slide_and_outputs_bounded() {
        let (mc, fc) = tiny();
        let params = init_params(&mc, 0).unwrap();
        let agent = Agent {
            params: &params,
            model: &mc,
            foveal: &fc,
        };
        let mut state = RolloutState::new(RolloutMode::OpenLoop, 0.0);
        for f in frames(7, 1) {
            let p = agent.predict_next(&mut state, &f).unwrap();
            assert!((0.0..=1.0).contains(&p.0) && (0.0..=1.0).contains(&p.1));
            assert!(state.context_steps() <= mc.context_len);
        }
        assert_eq!(state.context_steps(), 4);
        assert_eq!(state.timesteps, vec![3, 4, 5, 6]);
    }

    #[test]
    fn closed_loop_bookkeeping_identity() {
        let (mc, fc) = tiny();
        let params = init_params(&mc, 2).unwrap();
        let agent = Agent {
            params: &params,
            model: &mc,
            foveal: &fc,
        };
        let fr = frames(6, 2);
        let g = gt(6);
        let (traj, rewards) = agent.closed_loop_rollout(&fr, &g, 0.0).unwrap();
        assert_eq!(traj.len(), 6);
        assert_eq!(rewards.len(), 6);
        // target sequence: R̂ ← R̂ − r with r ≤ 0 rises toward |Σ r|
        let mut state = RolloutState::new(RolloutMode::ClosedLoop, 0.0);
        let mut acc = 0.0;
        for &r in &rewards {
            state.realized.push(r);
            state.consumed += r;
            state.current_target = state.initial_target - state.consumed;
            acc += r;
            assert_eq!(state.initial_target, state.current_target + state.consumed);
            assert!(state.current_target >= 0.0);
        }
        assert_eq!(state.current_target, -acc);
    }

    #[test]
    fn target_update_example() {
        // realized rewards [−0.1, −0.2] from initial target 0 → targets [0, 0.1, 0.3]
        let mut state = RolloutState::new(RolloutMode::ClosedLoop, 0.0);
        assert_eq!(state.current_target(), 0.0);
        state.record_reward(-0.1);
        assert!((state.current_target() - 0.1).abs() < 1e-15);
        state.record_reward(-0.2);
        assert!((state.current_target() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn open_loop_deterministic_and_single_frame() {
        let (mc, fc) = tiny();
        let params = init_params(&mc, 3).unwrap();
        let agent = Agent {
            params: &params,
            model: &mc,
            foveal: &fc,
        };
        let fr = frames(5, 4);
        let a = agent.open_loop_rollout(&fr, (16, 16), 0.0).unwrap();
        let b = agent.open_loop_rollout(&fr, (16, 16), 0.0).unwrap();
        assert_eq!(a.fixations(), b.fixations());

        let single = agent.open_loop_rollout(&fr[..1], (16, 16), 0.0).unwrap();
        assert_eq!(single.len(), 1);
    }
}
