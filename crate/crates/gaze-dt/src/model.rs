//! The return-conditioned causal transformer: token embedding, masked
//! self-attention, the bounded action head, and checkpoint I/O.

use crate::error::{GazeError, Result};
use crate::foveation::{encode_state, init_encoder_params, Frame, FovealConfig};
use crate::params::{ParamSet, ParamVars};
use crate::tape::{Tape, Var};
use ndarray::{Array2, ArrayD, IxDyn};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

const NEG_INF: f64 = -1e30;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub embed_dim: usize,
    pub context_len: usize,
    pub max_timestep: usize,
    pub action_dim: usize,
    pub dropout: f64,
    /// Disabled for the behavioral-cloning baseline: return tokens become
    /// constant zero embeddings.
    pub return_conditioning: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_layers: 6,
            n_heads: 8,
            embed_dim: 128,
            context_len: 128,
            max_timestep: 1024,
            action_dim: 2,
            dropout: 0.1,
            return_conditioning: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.embed_dim.is_multiple_of(self.n_heads) {
            return Err(GazeError::Config(format!(
                "embed_dim {} not divisible by n_heads {}",
                self.embed_dim, self.n_heads
            )));
        }
        if self.context_len == 0 || self.n_layers == 0 {
            return Err(GazeError::Config("context_len and n_layers must be ≥ 1".into()));
        }
        if self.action_dim != 2 {
            return Err(GazeError::Config("action_dim must be 2 (x, y)".into()));
        }
        Ok(())
    }
}

/// Deterministic initialization of every learnable tensor (encoder plus
/// transformer). The action-head bias starts at zero, which the sigmoid
/// maps to (0.5, 0.5).
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ParamSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = self::init_transformer_params(config, &mut rng)?;
    Ok(d)
}

fn init_transformer_params(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<ParamSet> {
    let d = config.embed_dim;
    let std = 0.02;
    let mut p = ParamSet::new();
    init_encoder_params(&mut p, d, rng);
    p.init_normal("dt.embed_rtg.w", &[1, d], std, rng);
    p.init_const("dt.embed_rtg.b", &[d], 0.0);
    p.init_normal("dt.embed_state.w", &[d, d], std, rng);
    p.init_const("dt.embed_state.b", &[d], 0.0);
    p.init_normal("dt.embed_act.w", &[config.action_dim, d], std, rng);
    p.init_const("dt.embed_act.b", &[d], 0.0);
    p.init_normal("dt.time_embed", &[config.max_timestep, d], std, rng);
    for i in 0..config.n_layers {
        let pre = format!("dt.h{i}");
        p.init_const(&format!("{pre}.ln1.g"), &[d], 1.0);
        p.init_const(&format!("{pre}.ln1.b"), &[d], 0.0);
        for nm in ["wq", "wk", "wv", "wo"] {
            p.init_normal(&format!("{pre}.attn.{nm}"), &[d, d], std, rng);
        }
        for nm in ["bq", "bk", "bv", "bo"] {
            p.init_const(&format!("{pre}.attn.{nm}"), &[d], 0.0);
        }
        p.init_const(&format!("{pre}.ln2.g"), &[d], 1.0);
        p.init_const(&format!("{pre}.ln2.b"), &[d], 0.0);
        p.init_normal(&format!("{pre}.ff.w1"), &[d, 4 * d], std, rng);
        p.init_const(&format!("{pre}.ff.b1"), &[4 * d], 0.0);
        p.init_normal(&format!("{pre}.ff.w2"), &[4 * d, d], std, rng);
        p.init_const(&format!("{pre}.ff.b2"), &[d], 0.0);
    }
    p.init_const("dt.lnf.g", &[d], 1.0);
    p.init_const("dt.lnf.b", &[d], 0.0);
    p.init_normal("dt.head.w", &[d, config.action_dim], std, rng);
    p.init_const("dt.head.b", &[config.action_dim], 0.0);
    Ok(p)
}

/// Flattened token order: `(R̂_t, s_t, p_t)` per timestep.
pub struct TokenSequence {
    pub tokens: Var,
    pub timesteps: Vec<usize>,
}

impl TokenSequence {
    pub fn steps(&self) -> usize {
        self.timesteps.len()
    }
}

/// Aligned window pulled from one episode. `actions[t]` is the executed
/// action fed as the input token for step t; the model never sees the one
/// it is asked to predict.
pub struct WindowInputs<'a> {
    pub returns_to_go: &'a [f64],
    pub actions: &'a [(f64, f64)],
    pub timesteps: &'a [usize],
}

/// Embed one window into the interleaved token matrix. Token `3t` is the
/// return-to-go, `3t+1` the state, `3t+2` the action; all three share the
/// learned timestep embedding of t.
pub fn embed_window(
    tape: &mut Tape,
    pvars: &ParamVars,
    config: &ModelConfig,
    window: &WindowInputs,
    states: Var,
) -> Result<TokenSequence> {
    let t = window.timesteps.len();
    if t == 0 {
        return Err(GazeError::EmptyEpisode);
    }
    if t > config.context_len {
        return Err(GazeError::ContextOverflow {
            got: t,
            max: config.context_len,
        });
    }
    if window.returns_to_go.len() != t || window.actions.len() != t {
        return Err(GazeError::Alignment(format!(
            "window arrays misaligned: rtg {} actions {} timesteps {}",
            window.returns_to_go.len(),
            window.actions.len(),
            t
        )));
    }
    if let Some(&bad) = window.timesteps.iter().find(|&&ts| ts >= config.max_timestep) {
        return Err(GazeError::Domain(format!(
            "timestep {bad} ≥ max_timestep {}",
            config.max_timestep
        )));
    }

    let time = tape.gather_rows(pvars.var("dt.time_embed"), window.timesteps.to_vec());

    let rtg_tok = if config.return_conditioning {
        let rtg = tape.leaf(
            Array2::from_shape_fn((t, 1), |(i, _)| window.returns_to_go[i]).into_dyn(),
        );
        let e = tape.matmul(rtg, pvars.var("dt.embed_rtg.w"));
        let e = tape.add_bias(e, pvars.var("dt.embed_rtg.b"));
        tape.add(e, time)
    } else {
        // conditioning removed: zero embedding plus the timestep term
        time
    };

    let state_tok = {
        let e = tape.matmul(states, pvars.var("dt.embed_state.w"));
        let e = tape.add_bias(e, pvars.var("dt.embed_state.b"));
        tape.add(e, time)
    };

    let act_tok = {
        let acts = tape.leaf(
            Array2::from_shape_fn((t, 2), |(i, j)| {
                if j == 0 {
                    window.actions[i].0
                } else {
                    window.actions[i].1
                }
            })
            .into_dyn(),
        );
        let e = tape.matmul(acts, pvars.var("dt.embed_act.w"));
        let e = tape.add_bias(e, pvars.var("dt.embed_act.b"));
        tape.add(e, time)
    };

    let tokens = tape.interleave3(rtg_tok, state_tok, act_tok);
    Ok(TokenSequence {
        tokens,
        timesteps: window.timesteps.to_vec(),
    })
}

fn causal_mask(n: usize) -> ArrayD<f64> {
    ArrayD::from_shape_fn(IxDyn(&[n, n]), |ix| if ix[1] > ix[0] { NEG_INF } else { 0.0 })
}

/// Dropout state for training passes; `None` disables dropout entirely.
pub struct DropoutCtx<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub p: f64,
}

fn maybe_dropout(tape: &mut Tape, x: Var, ctx: &mut Option<DropoutCtx>) -> Var {
    match ctx {
        Some(c) if c.p > 0.0 => {
            let shape = tape.value(x).shape().to_vec();
            let keep = 1.0 - c.p;
            let mask = ArrayD::from_shape_fn(IxDyn(&shape), |_| {
                if c.rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            tape.mul_const(x, mask)
        }
        _ => x,
    }
}

/// Masked self-attention over the flattened token sequence; predictions
/// come from the state-token rows through a sigmoid-squashed linear head,
/// so every output lies in (0,1)².
pub fn forward(
    tape: &mut Tape,
    pvars: &ParamVars,
    config: &ModelConfig,
    seq: &TokenSequence,
    mut dropout: Option<DropoutCtx>,
) -> Result<Var> {
    let t = seq.steps();
    let n = 3 * t;
    let d = config.embed_dim;
    let dh = d / config.n_heads;
    let mask = causal_mask(n);

    let mut x = seq.tokens;
    for layer in 0..config.n_layers {
        let pre = format!("dt.h{layer}");
        let ln1 = {
            let g = pvars.var(&format!("{pre}.ln1.g"));
            let b = pvars.var(&format!("{pre}.ln1.b"));
            tape.layer_norm(x, g, b, 1e-5)
        };
        let q = {
            let m = tape.matmul(ln1, pvars.var(&format!("{pre}.attn.wq")));
            tape.add_bias(m, pvars.var(&format!("{pre}.attn.bq")))
        };
        let k = {
            let m = tape.matmul(ln1, pvars.var(&format!("{pre}.attn.wk")));
            tape.add_bias(m, pvars.var(&format!("{pre}.attn.bk")))
        };
        let v = {
            let m = tape.matmul(ln1, pvars.var(&format!("{pre}.attn.wv")));
            tape.add_bias(m, pvars.var(&format!("{pre}.attn.bv")))
        };
        let mut heads = Vec::with_capacity(config.n_heads);
        for hd in 0..config.n_heads {
            let qh = tape.slice_cols(q, hd * dh, dh);
            let kh = tape.slice_cols(k, hd * dh, dh);
            let vh = tape.slice_cols(v, hd * dh, dh);
            let att = tape.matmul_nt(qh, kh);
            let att = tape.scale(att, 1.0 / (dh as f64).sqrt());
            let att = tape.add_const(att, mask.clone());
            let att = tape.softmax_rows(att);
            heads.push(tape.matmul(att, vh));
        }
        let cat = tape.concat_cols(&heads);
        let proj = {
            let m = tape.matmul(cat, pvars.var(&format!("{pre}.attn.wo")));
            tape.add_bias(m, pvars.var(&format!("{pre}.attn.bo")))
        };
        let proj = maybe_dropout(tape, proj, &mut dropout);
        x = tape.add(x, proj);

        let ln2 = {
            let g = pvars.var(&format!("{pre}.ln2.g"));
            let b = pvars.var(&format!("{pre}.ln2.b"));
            tape.layer_norm(x, g, b, 1e-5)
        };
        let ff = {
            let m = tape.matmul(ln2, pvars.var(&format!("{pre}.ff.w1")));
            let m = tape.add_bias(m, pvars.var(&format!("{pre}.ff.b1")));
            let m = tape.gelu(m);
            let m = tape.matmul(m, pvars.var(&format!("{pre}.ff.w2")));
            tape.add_bias(m, pvars.var(&format!("{pre}.ff.b2")))
        };
        let ff = maybe_dropout(tape, ff, &mut dropout);
        x = tape.add(x, ff);

        if !tape.value(x).iter().all(|v| v.is_finite()) {
            return Err(GazeError::Numeric {
                layer,
                detail: "non-finite activations after transformer block".into(),
            });
        }
    }

    let xf = {
        let g = pvars.var("dt.lnf.g");
        let b = pvars.var("dt.lnf.b");
        tape.layer_norm(x, g, b, 1e-5)
    };
    let state_rows: Vec<usize> = (0..t).map(|i| 3 * i + 1).collect();
    let hs = tape.gather_rows(xf, state_rows);
    let logits = {
        let m = tape.matmul(hs, pvars.var("dt.head.w"));
        tape.add_bias(m, pvars.var("dt.head.b"))
    };
    Ok(tape.sigmoid(logits))
}

/// Mean over timesteps of the squared Euclidean distance between predicted
/// and target normalized coordinates.
pub fn mse_loss(tape: &mut Tape, preds: Var, targets: &[(f64, f64)]) -> Result<Var> {
    let n = targets.len();
    if n == 0 {
        return Err(GazeError::Domain("mse over empty input".into()));
    }
    let shape = tape.value(preds).shape().to_vec();
    if shape != [n, 2] {
        return Err(GazeError::Alignment(format!(
            "predictions {shape:?} vs {n} targets"
        )));
    }
    let gt = tape.leaf(
        Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { targets[i].0 } else { targets[i].1 })
            .into_dyn(),
    );
    let diff = tape.sub(preds, gt);
    let sq = tape.mul(diff, diff);
    let s = tape.sum_all(sq);
    Ok(tape.scale(s, 1.0 / n as f64))
}

/// Plain-value counterpart of [`mse_loss`] for reporting.
pub fn mse_value(pred: &[(f64, f64)], gt: &[(f64, f64)]) -> Result<f64> {
    if pred.is_empty() || pred.len() != gt.len() {
        return Err(GazeError::Alignment(format!(
            "mse over {} predictions vs {} targets",
            pred.len(),
            gt.len()
        )));
    }
    let s: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| (p.0 - g.0).powi(2) + (p.1 - g.1).powi(2))
        .sum();
    Ok(s / pred.len() as f64)
}

/// Encode masked+resized frames into the `[T, d]` state matrix on the tape.
pub fn encode_window_states(
    tape: &mut Tape,
    pvars: &ParamVars,
    frames: &[Frame],
    foveal: &FovealConfig,
) -> Result<Var> {
    let rows = frames
        .iter()
        .map(|f| encode_state(tape, pvars, f, foveal.model_input_px))
        .collect::<Result<Vec<_>>>()?;
    Ok(tape.stack_rows(&rows))
}

// ---- checkpointing ----

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub foveal: FovealConfig,
    pub seed: u64,
    pub step: u64,
    pub dataset_fingerprint: String,
    pub config_hash: String,
}

pub fn config_hash(model: &ModelConfig, foveal: &FovealConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(toml::to_string(model).unwrap().as_bytes());
    hasher.update(toml::to_string(foveal).unwrap().as_bytes());
    hex_lower(&hasher.finalize())
}

fn hex_lower(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

const CKPT_MAGIC: &[u8; 8] = b"GDTCKPT1";

fn sidecar_path(blob: &Path) -> PathBuf {
    let mut p = blob.as_os_str().to_owned();
    p.push(".toml");
    PathBuf::from(p)
}

/// Write the weight blob and its metadata sidecar atomically
/// (temp file then rename).
pub fn save_checkpoint(path: &Path, params: &ParamSet, meta: &CheckpointMeta) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CKPT_MAGIC);
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, value) in params.iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(value.ndim() as u32).to_le_bytes());
        for d in value.shape() {
            buf.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in value.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &buf).map_err(|e| GazeError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| GazeError::io(path, e))?;

    let side = sidecar_path(path);
    let text = toml::to_string_pretty(meta).map_err(|e| GazeError::parse(&side, e.to_string()))?;
    let tmp = side.with_extension("toml.tmp");
    std::fs::write(&tmp, text).map_err(|e| GazeError::io(&tmp, e))?;
    std::fs::rename(&tmp, &side).map_err(|e| GazeError::io(&side, e))?;
    Ok(())
}

/// Load a checkpoint, verifying the sidecar's config hash.
pub fn load_checkpoint(path: &Path) -> Result<(ParamSet, CheckpointMeta)> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| GazeError::io(&side, e))?;
    let meta: CheckpointMeta =
        toml::from_str(&text).map_err(|e| GazeError::parse(&side, e.to_string()))?;
    let expected = config_hash(&meta.model, &meta.foveal);
    if expected != meta.config_hash {
        return Err(GazeError::CheckpointMismatch(format!(
            "sidecar hash {} does not match configs ({})",
            meta.config_hash, expected
        )));
    }

    let buf = std::fs::read(path).map_err(|e| GazeError::io(path, e))?;
    if buf.len() < 12 || &buf[0..8] != CKPT_MAGIC {
        return Err(GazeError::parse(path, "not a checkpoint blob"));
    }
    let count = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let mut off = 12;
    let mut params = ParamSet::new();
    let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
        if *off + n > buf.len() {
            return Err(GazeError::parse(path, "truncated checkpoint"));
        }
        let s = &buf[*off..*off + n];
        *off += n;
        Ok(s)
    };
    for _ in 0..count {
        let name_len = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut off, name_len)?.to_vec())
            .map_err(|e| GazeError::parse(path, e.to_string()))?;
        let ndim = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()) as usize);
        }
        let n: usize = shape.iter().product();
        let bytes = take(&mut off, n * 8)?;
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.insert(name, ArrayD::from_shape_vec(IxDyn(&shape), data).unwrap());
    }
    Ok((params, meta))
}

/// Load and additionally insist the checkpoint was trained under the given
/// configs.
pub fn load_checkpoint_expecting(
    path: &Path,
    model: &ModelConfig,
    foveal: &FovealConfig,
) -> Result<(ParamSet, CheckpointMeta)> {
    let (params, meta) = load_checkpoint(path)?;
    let expected = config_hash(model, foveal);
    if meta.config_hash != expected {
        return Err(GazeError::CheckpointMismatch(
            "checkpoint was trained under a different configuration".into(),
        ));
    }
    Ok((params, meta))
}
