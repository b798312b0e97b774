//! Deterministic synthetic video episodes with a scripted oracle gaze,
//! standing in for recorded human eye-tracking data.

use crate::error::{GazeError, Result};
use crate::foveation::{save_frame_png, write_packed_frames, Frame};
use crate::trajectory::{
    normalize_gaze, split_dataset, write_gaze_file, DatasetManifest, Fixation, GazeTrajectory,
    ManifestEntry,
};
use ndarray::Array3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    LinearBounce,
    Waypoints,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    Constant,
    LowFreqNoise,
}

/// Everything needed to render one episode deterministically.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub frame_width_px: u32,
    pub frame_height_px: u32,
    pub episode_len: usize,
    pub actor_size_px: u32,
    pub actor_speed_px: f64,
    pub path_kind: PathKind,
    pub distractor_count: usize,
    pub distractor_size_px: u32,
    pub background: Background,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            frame_width_px: 64,
            frame_height_px: 64,
            episode_len: 64,
            actor_size_px: 9,
            actor_speed_px: 2.0,
            path_kind: PathKind::LinearBounce,
            distractor_count: 3,
            distractor_size_px: 7,
            background: Background::LowFreqNoise,
            seed: 0,
        }
    }
}

/// Scripted viewer behavior: track the actor with latency and jitter,
/// occasionally glancing at a distractor.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleGazeParams {
    pub jitter_std_px: f64,
    pub glance_prob: f64,
    pub glance_duration: usize,
    pub saccade_latency: usize,
}

impl Default for OracleGazeParams {
    fn default() -> Self {
        OracleGazeParams {
            jitter_std_px: 1.0,
            glance_prob: 0.02,
            glance_duration: 4,
            saccade_latency: 2,
        }
    }
}

impl OracleGazeParams {
    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.glance_prob) {
            return Err(GazeError::Config(format!(
                "glance probability {} outside [0,1)",
                self.glance_prob
            )));
        }
        if self.jitter_std_px < 0.0 {
            return Err(GazeError::Config("negative jitter std".into()));
        }
        Ok(())
    }
}

/// Rendered episode: frames, the actor centroid per frame, and the static
/// distractor centers.
pub struct Scene {
    pub frames: Vec<Frame>,
    pub actor_track: Vec<(f64, f64)>,
    pub distractors: Vec<(f64, f64)>,
}

fn draw_square(data: &mut Array3<f64>, cx: f64, cy: f64, size: u32, color: [f64; 3]) {
    let (_, h, w) = data.dim();
    let half = (size / 2) as isize;
    let x0 = (cx.round() as isize - half).max(0) as usize;
    let y0 = (cy.round() as isize - half).max(0) as usize;
    let x1 = ((cx.round() as isize - half) + size as isize).clamp(0, w as isize) as usize;
    let y1 = ((cy.round() as isize - half) + size as isize).clamp(0, h as isize) as usize;
    for (c, &v) in color.iter().enumerate() {
        data.slice_mut(ndarray::s![c, y0..y1, x0..x1]).fill(v);
    }
}

/// Render all frames of a scene. Deterministic in `spec.seed`; the actor
/// stays fully in-frame along its whole path.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    let (w, h) = (spec.frame_width_px as f64, spec.frame_height_px as f64);
    if spec.actor_size_px >= spec.frame_width_px.min(spec.frame_height_px) {
        return Err(GazeError::Config(format!(
            "actor size {} does not fit in {}x{} frame",
            spec.actor_size_px, spec.frame_width_px, spec.frame_height_px
        )));
    }
    if spec.episode_len == 0 {
        return Err(GazeError::Config("episode length must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let margin = spec.actor_size_px as f64 / 2.0 + 1.0;

    // static distractors, kept away from the borders
    let distractors: Vec<(f64, f64)> = (0..spec.distractor_count)
        .map(|_| {
            (
                rng.gen_range(margin..w - margin),
                rng.gen_range(margin..h - margin),
            )
        })
        .collect();

    // actor path
    let mut pos = (
        rng.gen_range(margin..w - margin),
        rng.gen_range(margin..h - margin),
    );
    let mut track = Vec::with_capacity(spec.episode_len);
    let mut vel = match spec.path_kind {
        PathKind::LinearBounce => {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            (spec.actor_speed_px * angle.cos(), spec.actor_speed_px * angle.sin())
        }
        PathKind::Waypoints => (0.0, 0.0),
    };
    let mut waypoint = pos;
    for t in 0..spec.episode_len {
        if t > 0 {
            match spec.path_kind {
                PathKind::LinearBounce => {
                    pos.0 += vel.0;
                    pos.1 += vel.1;
                    if pos.0 < margin || pos.0 > w - margin {
                        vel.0 = -vel.0;
                        pos.0 = pos.0.clamp(margin, w - margin);
                    }
                    if pos.1 < margin || pos.1 > h - margin {
                        vel.1 = -vel.1;
                        pos.1 = pos.1.clamp(margin, h - margin);
                    }
                }
                PathKind::Waypoints => {
                    let dx = waypoint.0 - pos.0;
                    let dy = waypoint.1 - pos.1;
                    let dist = (dx * dx + dy * dy).sqrt();
                    if dist < spec.actor_speed_px {
                        pos = waypoint;
                        waypoint = (
                            rng.gen_range(margin..w - margin),
                            rng.gen_range(margin..h - margin),
                        );
                    } else {
                        pos.0 += spec.actor_speed_px * dx / dist;
                        pos.1 += spec.actor_speed_px * dy / dist;
                    }
                }
            }
        }
        track.push(pos);
    }

    // background: constant gray or a fixed low-frequency pattern
    let base = match spec.background {
        Background::Constant => {
            Array3::from_elem((3, spec.frame_height_px as usize, spec.frame_width_px as usize), 0.15)
        }
        Background::LowFreqNoise => {
            let (px, py, amp) = (
                rng.gen_range(1.0..3.0),
                rng.gen_range(1.0..3.0),
                rng.gen_range(0.03..0.08),
            );
            Array3::from_shape_fn(
                (3, spec.frame_height_px as usize, spec.frame_width_px as usize),
                |(c, y, x)| {
                    0.15 + amp
                        * ((x as f64 / w * px * std::f64::consts::TAU).sin()
                            + (y as f64 / h * py * std::f64::consts::TAU
                                + c as f64)
                                .cos())
                        / 2.0
                },
            )
        }
    };

    let frames = track
        .iter()
        .map(|&(cx, cy)| {
            let mut data = base.clone();
            for &(dx, dy) in &distractors {
                draw_square(&mut data, dx, dy, spec.distractor_size_px, [0.3, 0.4, 0.75]);
            }
            draw_square(&mut data, cx, cy, spec.actor_size_px, [0.95, 0.35, 0.2]);
            Frame::new(data)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Scene {
        frames,
        actor_track: track,
        distractors,
    })
}

/// Gaze = the actor track delayed by the saccade latency, plus clamped
/// Gaussian jitter, with occasional rectangular-pulse glances at a random
/// distractor. Deterministic in the seed.
pub fn oracle_gaze(
    track: &[(f64, f64)],
    distractors: &[(f64, f64)],
    dims: (u32, u32),
    params: &OracleGazeParams,
    seed: u64,
) -> Result<GazeTrajectory> {
    if track.is_empty() {
        return Err(GazeError::EmptyEpisode);
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, params.jitter_std_px.max(f64::MIN_POSITIVE)).unwrap();
    let mut glance_left = 0usize;
    let mut glance_target = (0.0, 0.0);
    let mut fixations = Vec::with_capacity(track.len());
    for (t, _) in track.iter().enumerate() {
        let delayed = track[t.saturating_sub(params.saccade_latency)];
        if glance_left == 0
            && !distractors.is_empty()
            && params.glance_duration > 0
            && rng.gen::<f64>() < params.glance_prob
        {
            glance_left = params.glance_duration;
            glance_target = distractors[rng.gen_range(0..distractors.len())];
        }
        let target = if glance_left > 0 {
            glance_left -= 1;
            glance_target
        } else {
            delayed
        };
        let (jx, jy) = if params.jitter_std_px > 0.0 {
            (jitter.sample(&mut rng), jitter.sample(&mut rng))
        } else {
            (0.0, 0.0)
        };
        let (x, y) = normalize_gaze((target.0 + jx, target.1 + jy), dims)?;
        fixations.push(Fixation {
            frame_index: t,
            x,
            y,
        });
    }
    GazeTrajectory::new(fixations, dims.0, dims.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrameStorage {
    #[default]
    Packed,
    Png,
}

/// Generate `n_episodes` scenes plus oracle gaze under `out_dir`, write
/// the split manifest, and return it. Per-episode seeds derive from the
/// master seed, so regeneration is byte-identical.
pub fn generate_dataset(
    n_episodes: usize,
    template: &SceneSpec,
    oracle: &OracleGazeParams,
    ratios: (f64, f64, f64),
    master_seed: u64,
    storage: FrameStorage,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    if n_episodes < 3 {
        return Err(GazeError::InsufficientData(format!(
            "{n_episodes} episodes cannot cover three splits"
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| GazeError::io(out_dir, e))?;

    let entries: Vec<ManifestEntry> = (0..n_episodes)
        .into_par_iter()
        .map(|i| -> Result<ManifestEntry> {
            // masked to 63 bits so the manifest stays TOML-representable
            let scene_seed = master_seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(i as u64 + 1)
                & 0x7FFF_FFFF_FFFF_FFFF;
            let mut spec = template.clone();
            spec.seed = scene_seed;
            let scene = generate_scene(&spec)?;
            let gaze = oracle_gaze(
                &scene.actor_track,
                &scene.distractors,
                (spec.frame_width_px, spec.frame_height_px),
                oracle,
                scene_seed ^ 0xA5A5_5A5A,
            )?;

            let ep_dir = out_dir.join(format!("ep_{i:04}"));
            let frame_dir = ep_dir.join("frames");
            std::fs::create_dir_all(&frame_dir).map_err(|e| GazeError::io(&frame_dir, e))?;
            match storage {
                FrameStorage::Packed => {
                    write_packed_frames(&frame_dir.join("frames.bin"), &scene.frames)?
                }
                FrameStorage::Png => {
                    for (t, f) in scene.frames.iter().enumerate() {
                        save_frame_png(&frame_dir.join(format!("f_{t:04}.png")), f)?;
                    }
                }
            }
            let gaze_file = ep_dir.join("gaze.csv");
            write_gaze_file(&gaze_file, &gaze)?;
            Ok(ManifestEntry {
                id: format!("ep_{i:04}"),
                frame_dir,
                gaze_file,
                frame_count: scene.frames.len(),
                scene_seed,
                split: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = DatasetManifest {
        frame_width_px: template.frame_width_px,
        frame_height_px: template.frame_height_px,
        master_seed,
        spec_echo: Some(toml::Value::try_from(template).unwrap()),
        episodes: entries,
    };
    let manifest = split_dataset(manifest, ratios, master_seed)?;
    manifest.save(&out_dir.join("manifest.toml"))?;
    Ok(manifest)
}
