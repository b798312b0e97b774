//! Episodes, gaze normalization, rewards, returns-to-go, dataset splits,
//! and the on-disk gaze/manifest formats.

use crate::error::{GazeError, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Which norm the per-step reward uses. The evaluation metric is Euclidean,
/// so L2 is the default; L1 is kept for ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RewardNorm {
    #[default]
    L2,
    L1,
}

/// One gaze point, normalized to `[0,1]²` with origin at the top-left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub frame_index: usize,
    pub x: f64,
    pub y: f64,
}

/// Dense per-frame gaze over one video.
#[derive(Clone, Debug, PartialEq)]
pub struct GazeTrajectory {
    fixations: Vec<Fixation>,
    pub frame_width_px: u32,
    pub frame_height_px: u32,
}

impl GazeTrajectory {
    /// Fixations must be dense: frame indices exactly `0..n`.
    pub fn new(fixations: Vec<Fixation>, width_px: u32, height_px: u32) -> Result<Self> {
        if width_px == 0 || height_px == 0 {
            return Err(GazeError::InvalidGeometry(format!(
                "frame dims {width_px}x{height_px}"
            )));
        }
        if fixations.is_empty() {
            return Err(GazeError::EmptyEpisode);
        }
        for (i, f) in fixations.iter().enumerate() {
            if f.frame_index != i {
                return Err(GazeError::Alignment(format!(
                    "fixation {i} has frame_index {}, expected dense coverage",
                    f.frame_index
                )));
            }
            if !(0.0..=1.0).contains(&f.x) || !(0.0..=1.0).contains(&f.y) {
                return Err(GazeError::Domain(format!(
                    "fixation {i} out of [0,1]²: ({}, {})",
                    f.x, f.y
                )));
            }
        }
        Ok(GazeTrajectory {
            fixations,
            frame_width_px: width_px,
            frame_height_px: height_px,
        })
    }

    pub fn fixations(&self) -> &[Fixation] {
        &self.fixations
    }

    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixations.is_empty()
    }
}

/// Normalize a pixel coordinate to `[0,1]²`. Out-of-frame points are clamped
/// to the boundary so per-frame density is preserved.
pub fn normalize_gaze(p_px: (f64, f64), dims: (u32, u32)) -> Result<(f64, f64)> {
    let (w, h) = dims;
    if w == 0 || h == 0 {
        return Err(GazeError::InvalidGeometry(format!("dims {w}x{h}")));
    }
    let x = p_px.0.clamp(0.0, w as f64) / w as f64;
    let y = p_px.1.clamp(0.0, h as f64) / h as f64;
    Ok((x, y))
}

/// Map a normalized coordinate back to pixels.
pub fn denormalize_gaze(p: (f64, f64), dims: (u32, u32)) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&p.0) || !(0.0..=1.0).contains(&p.1) {
        return Err(GazeError::Domain(format!("({}, {}) outside [0,1]²", p.0, p.1)));
    }
    Ok((p.0 * dims.0 as f64, p.1 * dims.1 as f64))
}

/// Negative distance between ground truth and prediction, in normalized
/// units: 0 for a perfect prediction, at worst −√2 under L2.
pub fn compute_reward(gt: (f64, f64), pred: (f64, f64)) -> f64 {
    compute_reward_with(gt, pred, RewardNorm::L2)
}

pub fn compute_reward_with(gt: (f64, f64), pred: (f64, f64), norm: RewardNorm) -> f64 {
    let dx = gt.0 - pred.0;
    let dy = gt.1 - pred.1;
    match norm {
        RewardNorm::L2 => -(dx * dx + dy * dy).sqrt(),
        RewardNorm::L1 => -(dx.abs() + dy.abs()),
    }
}

/// Suffix sums: `out[t] = Σ rewards[t..]`.
pub fn compute_returns_to_go(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(GazeError::EmptyEpisode);
    }
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc += rewards[t];
        out[t] = acc;
    }
    Ok(out)
}

/// Aligned frames, gaze, rewards, returns-to-go, and timesteps — the unit
/// of training data.
#[derive(Clone, Debug)]
pub struct Episode {
    pub frame_refs: Vec<PathBuf>,
    pub gaze: GazeTrajectory,
    pub rewards: Vec<f64>,
    pub returns_to_go: Vec<f64>,
    pub timesteps: Vec<usize>,
}

impl Episode {
    /// Construct with explicit rewards; returns-to-go are recomputed so the
    /// suffix-sum invariant holds by construction.
    pub fn with_rewards(
        frame_refs: Vec<PathBuf>,
        gaze: GazeTrajectory,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        let n = gaze.len();
        if frame_refs.len() != n || rewards.len() != n {
            return Err(GazeError::Alignment(format!(
                "frames {} / gaze {} / rewards {}",
                frame_refs.len(),
                n,
                rewards.len()
            )));
        }
        let returns_to_go = compute_returns_to_go(&rewards)?;
        Ok(Episode {
            frame_refs,
            gaze,
            rewards,
            returns_to_go,
            timesteps: (0..n).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.gaze.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaze.is_empty()
    }
}

/// Teacher-forcing construction: ground-truth gaze has zero distance to
/// itself, so every reward and return-to-go is exactly zero.
pub fn build_training_episode(frame_refs: Vec<PathBuf>, gaze: GazeTrajectory) -> Result<Episode> {
    let n = gaze.len();
    Episode::with_rewards(frame_refs, gaze, vec![0.0; n])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub frame_dir: PathBuf,
    pub gaze_file: PathBuf,
    pub frame_count: usize,
    pub scene_seed: u64,
    pub split: Option<Split>,
}

/// On-disk index of a dataset: one entry per episode plus the global
/// frame geometry and provenance fields.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub frame_width_px: u32,
    pub frame_height_px: u32,
    pub master_seed: u64,
    #[serde(default)]
    pub spec_echo: Option<toml::Value>,
    pub episodes: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn split_ids(&self, split: Split) -> Vec<&ManifestEntry> {
        self.episodes
            .iter()
            .filter(|e| e.split == Some(split))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| GazeError::parse(path, e.to_string()))?;
        std::fs::write(path, text).map_err(|e| GazeError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GazeError::io(path, e))?;
        toml::from_str(&text).map_err(|e| GazeError::parse(path, e.to_string()))
    }
}

/// Assign train/val/test splits. Deterministic in the seed; counts follow
/// the ratios by largest remainder with every split kept non-empty.
#[allow(clippy::explicit_counter_loop)]
pub fn split_dataset(
    mut manifest: DatasetManifest,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetManifest> {
    let (rt, rv, rs) = ratios;
    if rt <= 0.0 || rv <= 0.0 || rs <= 0.0 {
        return Err(GazeError::Config("split ratios must be positive".into()));
    }
    if ((rt + rv + rs) - 1.0).abs() > 1e-9 {
        return Err(GazeError::Config(format!(
            "split ratios sum to {}, expected 1",
            rt + rv + rs
        )));
    }
    let n = manifest.episodes.len();
    if n < 3 {
        return Err(GazeError::InsufficientData(format!(
            "{n} episodes cannot cover three splits"
        )));
    }

    let mut counts = [0usize; 3];
    let mut remainders: Vec<(usize, f64)> = Vec::new();
    for (i, r) in [rt, rv, rs].iter().enumerate() {
        let exact = r * n as f64;
        counts[i] = exact.floor() as usize;
        remainders.push((i, exact - exact.floor()));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut assigned: usize = counts.iter().sum();
    for (i, _) in remainders.iter().cycle() {
        if assigned == n {
            break;
        }
        counts[*i] += 1;
        assigned += 1;
    }
    // every split gets at least one episode
    for i in 0..3 {
        while counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| counts[j]).unwrap();
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    for (k, &idx) in order.iter().enumerate() {
        let split = if k < counts[0] {
            Split::Train
        } else if k < counts[0] + counts[1] {
            Split::Val
        } else {
            Split::Test
        };
        manifest.episodes[idx].split = Some(split);
    }
    Ok(manifest)
}

/// Write a gaze file: `frame,x_px,y_px`, one row per frame, LF endings.
pub fn write_gaze_file(path: &Path, traj: &GazeTrajectory) -> Result<()> {
    let mut out = String::from("frame,x_px,y_px\n");
    let (w, h) = (traj.frame_width_px, traj.frame_height_px);
    for f in traj.fixations() {
        let (x, y) = denormalize_gaze((f.x, f.y), (w, h))?;
        writeln!(out, "{},{:.4},{:.4}", f.frame_index, x, y).unwrap();
    }
    std::fs::write(path, out).map_err(|e| GazeError::io(path, e))
}

/// Read a gaze file written at display resolution; coordinates are clamped
/// and normalized.
pub fn read_gaze_file(path: &Path, dims: (u32, u32)) -> Result<GazeTrajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| GazeError::io(path, e))?;
    let mut fixations = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "frame,x_px,y_px" {
                return Err(GazeError::parse(path, format!("bad header: {line:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| GazeError::parse(path, format!("line {}: short row", lineno + 1)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| GazeError::parse(path, format!("line {}: {e}", lineno + 1)))
        };
        let frame = parse(parts.next())? as usize;
        let x_px = parse(parts.next())?;
        let y_px = parse(parts.next())?;
        let (x, y) = normalize_gaze((x_px, y_px), dims)?;
        fixations.push(Fixation {
            frame_index: frame,
            x,
            y,
        });
    }
    GazeTrajectory::new(fixations, dims.0, dims.1)
}
