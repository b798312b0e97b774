//! Evaluation: per-axis pixel distance, angular error under a viewing
//! geometry, test-split evaluation, and trajectory overlay rendering.

use crate::error::{GazeError, Result};
use crate::foveation::{load_episode_frames, quantize_u8, Frame};
use crate::trajectory::{
    denormalize_gaze, read_gaze_file, DatasetManifest, GazeTrajectory, Split,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Screen geometry behind the line-of-sight metric. The eye is centered on
/// and perpendicular to the screen.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViewingGeometry {
    pub resolution: (u32, u32),
    pub screen_size_m: (f64, f64),
    pub eye_distance_m: f64,
}

impl Default for ViewingGeometry {
    fn default() -> Self {
        // a 24-inch 16:9 display at arm's length
        ViewingGeometry {
            resolution: (1920, 1080),
            screen_size_m: (0.531, 0.298),
            eye_distance_m: 0.60,
        }
    }
}

impl ViewingGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.resolution.0 == 0
            || self.resolution.1 == 0
            || self.screen_size_m.0 <= 0.0
            || self.screen_size_m.1 <= 0.0
            || self.eye_distance_m <= 0.0
        {
            return Err(GazeError::InvalidGeometry(
                "resolution, screen size, and eye distance must be positive".into(),
            ));
        }
        let px_aspect = self.resolution.0 as f64 / self.resolution.1 as f64;
        let m_aspect = self.screen_size_m.0 / self.screen_size_m.1;
        if (px_aspect / m_aspect - 1.0).abs() > 0.01 {
            return Err(GazeError::InvalidGeometry(format!(
                "physical aspect {m_aspect:.4} deviates from pixel aspect {px_aspect:.4} by more than 1%"
            )));
        }
        Ok(())
    }

    /// 3-D position of a screen pixel relative to the eye, in meters.
    fn eye_to_point(&self, p_px: (f64, f64)) -> [f64; 3] {
        let x = (p_px.0 / self.resolution.0 as f64 - 0.5) * self.screen_size_m.0;
        let y = (p_px.1 / self.resolution.1 as f64 - 0.5) * self.screen_size_m.1;
        [x, y, self.eye_distance_m]
    }
}

/// Angle in degrees between the two lines of sight through `p1` and `p2`.
pub fn angular_error(p1_px: (f64, f64), p2_px: (f64, f64), geom: &ViewingGeometry) -> Result<f64> {
    geom.validate()?;
    let a = geom.eye_to_point(p1_px);
    let b = geom.eye_to_point(p2_px);
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos = (dot / (na * nb)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// Mean absolute offset per axis, in display pixels.
pub fn mean_axis_distance_error(
    pred: &GazeTrajectory,
    gt: &GazeTrajectory,
) -> Result<(f64, f64)> {
    check_aligned(pred, gt)?;
    let (w, h) = (gt.frame_width_px as f64, gt.frame_height_px as f64);
    let n = gt.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (p, g) in pred.fixations().iter().zip(gt.fixations()) {
        sx += (p.x - g.x).abs() * w;
        sy += (p.y - g.y).abs() * h;
    }
    Ok((sx / n, sy / n))
}

/// Mean Euclidean distance in display pixels.
pub fn mean_euclid_px(pred: &GazeTrajectory, gt: &GazeTrajectory) -> Result<f64> {
    check_aligned(pred, gt)?;
    let (w, h) = (gt.frame_width_px as f64, gt.frame_height_px as f64);
    let s: f64 = pred
        .fixations()
        .iter()
        .zip(gt.fixations())
        .map(|(p, g)| {
            let dx = (p.x - g.x) * w;
            let dy = (p.y - g.y) * h;
            (dx * dx + dy * dy).sqrt()
        })
        .sum();
    Ok(s / gt.len() as f64)
}

/// Mean angular error over a trajectory pair, degrees.
pub fn mean_angular_error_deg(
    pred: &GazeTrajectory,
    gt: &GazeTrajectory,
    geom: &ViewingGeometry,
) -> Result<f64> {
    check_aligned(pred, gt)?;
    let dims = (geom.resolution.0, geom.resolution.1);
    let mut s = 0.0;
    for (p, g) in pred.fixations().iter().zip(gt.fixations()) {
        let pp = denormalize_gaze((p.x, p.y), dims)?;
        let gp = denormalize_gaze((g.x, g.y), dims)?;
        s += angular_error(pp, gp, geom)?;
    }
    Ok(s / gt.len() as f64)
}

fn check_aligned(pred: &GazeTrajectory, gt: &GazeTrajectory) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(GazeError::Alignment(format!(
            "{} predictions vs {} ground-truth fixations",
            pred.len(),
            gt.len()
        )));
    }
    if pred.frame_width_px != gt.frame_width_px || pred.frame_height_px != gt.frame_height_px {
        return Err(GazeError::Alignment("frame dimension mismatch".into()));
    }
    Ok(())
}

/// Anything that can emit a gaze trajectory for an episode. Closed-loop
/// predictors receive the ground truth for reward realization only.
pub trait Predictor {
    fn id(&self) -> String;
    fn predict(
        &self,
        episode_index: usize,
        frames: &[Frame],
        gt: Option<&GazeTrajectory>,
        dims: (u32, u32),
    ) -> Result<GazeTrajectory>;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeEval {
    pub id: String,
    pub x_err_px: f64,
    pub y_err_px: f64,
    pub euclid_px: f64,
    pub angular_deg: f64,
    pub failed: Option<String>,
}

/// Aggregated Table-1-style results for one predictor on one split.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub predictor_id: String,
    pub mode: String,
    pub geometry: ViewingGeometry,
    pub mean_x_err_px: f64,
    pub mean_y_err_px: f64,
    pub mean_euclid_px: f64,
    pub mean_angular_deg: f64,
    pub episodes: Vec<EpisodeEval>,
}

impl EvalReport {
    pub fn table_row(&self) -> String {
        format!(
            "{:<12} {:>10.2} {:>10.2} {:>12.2} {:>12.3}",
            self.predictor_id,
            self.mean_x_err_px,
            self.mean_y_err_px,
            self.mean_euclid_px,
            self.mean_angular_deg
        )
    }

    pub fn table_header() -> String {
        format!(
            "{:<12} {:>10} {:>10} {:>12} {:>12}",
            "predictor", "X px", "Y px", "Euclid px", "Angular °"
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            toml::to_string_pretty(self).map_err(|e| GazeError::parse(path, e.to_string()))?;
        std::fs::write(path, text).map_err(|e| GazeError::io(path, e))
    }
}

/// Evaluate a predictor over a manifest split: one rollout per episode,
/// metrics per episode, unweighted mean across episodes. Per-episode
/// failures are flagged in the report while the rest proceed.
pub fn evaluate(
    predictor: &dyn Predictor,
    manifest: &DatasetManifest,
    split: Split,
    geom: &ViewingGeometry,
    mode_label: &str,
) -> Result<EvalReport> {
    geom.validate()?;
    let entries = manifest.split_ids(split);
    if entries.is_empty() {
        return Err(GazeError::InsufficientData(format!(
            "no episodes in split {split:?}"
        )));
    }
    let dims = (manifest.frame_width_px, manifest.frame_height_px);
    let mut episodes = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let result = (|| -> Result<EpisodeEval> {
            let frames = load_episode_frames(&entry.frame_dir)?;
            let gt = read_gaze_file(&entry.gaze_file, dims)?;
            let pred = predictor.predict(i, &frames, Some(&gt), dims)?;
            let (x, y) = mean_axis_distance_error(&pred, &gt)?;
            Ok(EpisodeEval {
                id: entry.id.clone(),
                x_err_px: x,
                y_err_px: y,
                euclid_px: mean_euclid_px(&pred, &gt)?,
                angular_deg: mean_angular_error_deg(&pred, &gt, geom)?,
                failed: None,
            })
        })();
        episodes.push(result.unwrap_or_else(|e| EpisodeEval {
            id: entry.id.clone(),
            x_err_px: f64::NAN,
            y_err_px: f64::NAN,
            euclid_px: f64::NAN,
            angular_deg: f64::NAN,
            failed: Some(e.to_string()),
        }));
    }
    let ok: Vec<&EpisodeEval> = episodes.iter().filter(|e| e.failed.is_none()).collect();
    if ok.is_empty() {
        return Err(GazeError::InsufficientData(
            "every episode failed during evaluation".into(),
        ));
    }
    let n = ok.len() as f64;
    Ok(EvalReport {
        predictor_id: predictor.id(),
        mode: mode_label.to_string(),
        geometry: *geom,
        mean_x_err_px: ok.iter().map(|e| e.x_err_px).sum::<f64>() / n,
        mean_y_err_px: ok.iter().map(|e| e.y_err_px).sum::<f64>() / n,
        mean_euclid_px: ok.iter().map(|e| e.euclid_px).sum::<f64>() / n,
        mean_angular_deg: ok.iter().map(|e| e.angular_deg).sum::<f64>() / n,
        episodes,
    })
}

/// Echoes the ground truth; a zero-error reference row for sanity checks.
pub struct OraclePredictor;

impl Predictor for OraclePredictor {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn predict(
        &self,
        _episode_index: usize,
        _frames: &[Frame],
        gt: Option<&GazeTrajectory>,
        _dims: (u32, u32),
    ) -> Result<GazeTrajectory> {
        gt.cloned()
            .ok_or_else(|| GazeError::Domain("oracle predictor requires ground truth".into()))
    }
}

/// One labeled trajectory for overlay rendering.
pub struct OverlayTrack<'a> {
    pub label: String,
    pub color: [u8; 3],
    pub traj: &'a GazeTrajectory,
}

/// Ground truth is drawn gray, predictions green by convention.
pub const OVERLAY_GT_COLOR: [u8; 3] = [160, 160, 160];
pub const OVERLAY_PRED_COLOR: [u8; 3] = [40, 200, 60];

/// Evenly spaced sample indices including both endpoints.
pub fn overlay_sample_indices(len: usize, count: usize) -> Vec<usize> {
    if len == 0 || count == 0 {
        return vec![];
    }
    if count == 1 || len == 1 {
        return vec![0];
    }
    let k = count.min(len);
    (0..k)
        .map(|i| (i as f64 * (len - 1) as f64 / (k - 1) as f64).round() as usize)
        .collect()
}

fn draw_disc(img: &mut image::RgbImage, cx: f64, cy: f64, radius: i64, color: [u8; 3]) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (cxi, cyi) = (cx.round() as i64, cy.round() as i64);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dx * dx + dy * dy <= radius * radius {
                let (x, y) = (cxi + dx, cyi + dy);
                if x >= 0 && y >= 0 && x < w && y < h {
                    img.put_pixel(x as u32, y as u32, image::Rgb(color));
                }
            }
        }
    }
}

fn draw_line(img: &mut image::RgbImage, a: (f64, f64), b: (f64, f64), color: [u8; 3]) {
    let (mut x0, mut y0) = (a.0.round() as i64, a.1.round() as i64);
    let (x1, y1) = (b.0.round() as i64, b.1.round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (w, h) = (img.width() as i64, img.height() as i64);
    loop {
        if x0 >= 0 && y0 >= 0 && x0 < w && y0 < h {
            img.put_pixel(x0 as u32, y0 as u32, image::Rgb(color));
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Draw sampled fixations as dots joined by polylines onto a representative
/// frame (the middle one) and write a PNG.
pub fn render_trajectory_overlay(
    frames: &[Frame],
    tracks: &[OverlayTrack],
    sample_count: usize,
    out_path: &Path,
) -> Result<()> {
    if frames.is_empty() {
        return Err(GazeError::Domain("no frames to render".into()));
    }
    if tracks.is_empty() {
        return Err(GazeError::Domain("at least one trajectory required".into()));
    }
    let frame = &frames[frames.len() / 2];
    let (h, w) = (frame.height(), frame.width());
    let mut img = image::RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            img.put_pixel(
                x as u32,
                y as u32,
                image::Rgb([
                    quantize_u8(frame.data[[0, y, x]]),
                    quantize_u8(frame.data[[1, y, x]]),
                    quantize_u8(frame.data[[2, y, x]]),
                ]),
            );
        }
    }
    for track in tracks {
        let dims = (track.traj.frame_width_px, track.traj.frame_height_px);
        let idx = overlay_sample_indices(track.traj.len(), sample_count);
        let pts: Vec<(f64, f64)> = idx
            .iter()
            .map(|&i| {
                let f = track.traj.fixations()[i];
                denormalize_gaze((f.x, f.y), dims)
            })
            .collect::<Result<Vec<_>>>()?;
        for pair in pts.windows(2) {
            draw_line(&mut img, pair[0], pair[1], track.color);
        }
        for &p in &pts {
            draw_disc(&mut img, p.0, p.1, 1 + w as i64 / 128, track.color);
        }
    }
    img.save(out_path)
        .map_err(|e| GazeError::parse(out_path, e.to_string()))
}
