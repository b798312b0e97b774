//! Foveal masking, frame resizing, the convolutional state encoder, and
//! frame storage (PNG directories or a packed binary tensor file).

use crate::error::{GazeError, Result};
use crate::params::{ParamSet, ParamVars};
use crate::tape::{Tape, Var};
use ndarray::{Array2, Array3};
use rand::Rng;
use std::path::Path;

/// RGB frame, channel-first `[3, h, w]`, values in `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub data: Array3<f64>,
}

impl Frame {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (c, h, w) = data.dim();
        if c != 3 {
            return Err(GazeError::Domain(format!("expected 3 channels, got {c}")));
        }
        if h == 0 || w == 0 {
            return Err(GazeError::InvalidGeometry(format!("frame dims {w}x{h}")));
        }
        Ok(Frame { data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Frame {
            data: Array3::zeros((3, height, width)),
        }
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }
}

/// Foveal window geometry and the model input resolution.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FovealConfig {
    /// Side of the square kept region, in native frame pixels.
    pub crop_size_px: usize,
    /// Square resolution frames are resized to before encoding.
    pub model_input_px: usize,
    /// Value written outside the window.
    pub mask_value: f64,
}

impl Default for FovealConfig {
    fn default() -> Self {
        FovealConfig {
            crop_size_px: 75,
            model_input_px: 224,
            mask_value: 0.0,
        }
    }
}

/// Keep the axis-aligned `B×B` square centered at `gaze_px`; everything
/// else becomes `mask_value`. The window is clipped at frame borders,
/// never shifted.
pub fn apply_foveal_mask(frame: &Frame, gaze_px: (f64, f64), cfg: &FovealConfig) -> Result<Frame> {
    let (h, w) = (frame.height(), frame.width());
    let b = cfg.crop_size_px;
    if b > h.min(w) {
        return Err(GazeError::Config(format!(
            "crop {b} exceeds frame dims {w}x{h}"
        )));
    }
    let gx = gaze_px.0.round() as isize;
    let gy = gaze_px.1.round() as isize;
    let half = (b / 2) as isize;
    let x0 = (gx - half).max(0) as usize;
    let y0 = (gy - half).max(0) as usize;
    let x1 = ((gx - half) + b as isize).clamp(0, w as isize) as usize;
    let y1 = ((gy - half) + b as isize).clamp(0, h as isize) as usize;

    let mut out = Array3::from_elem((3, h, w), cfg.mask_value);
    if x0 < x1 && y0 < y1 {
        out.slice_mut(ndarray::s![.., y0..y1, x0..x1])
            .assign(&frame.data.slice(ndarray::s![.., y0..y1, x0..x1]));
    }
    Frame::new(out)
}

/// Bilinear resize to a square `target_px` output, half-pixel-center
/// sampling. Resizing to the same size reproduces the input bit for bit.
pub fn resize_frame(frame: &Frame, target_px: usize) -> Result<Frame> {
    if target_px == 0 {
        return Err(GazeError::Config("resize target must be positive".into()));
    }
    let (h, w) = (frame.height(), frame.width());
    let mut out = Array3::zeros((3, target_px, target_px));
    let sy = h as f64 / target_px as f64;
    let sx = w as f64 / target_px as f64;
    for oy in 0..target_px {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let wy = fy - y0 as f64;
        for ox in 0..target_px {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let wx = fx - x0 as f64;
            for c in 0..3 {
                let v00 = frame.data[[c, y0, x0]];
                let v01 = frame.data[[c, y0, x1]];
                let v10 = frame.data[[c, y1, x0]];
                let v11 = frame.data[[c, y1, x1]];
                let top = v00 * (1.0 - wx) + v01 * wx;
                let bot = v10 * (1.0 - wx) + v11 * wx;
                out[[c, oy, ox]] = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    Frame::new(out)
}

/// Conv stage widths of the state encoder.
pub const ENCODER_CHANNELS: [usize; 4] = [16, 32, 64, 128];

/// Initialize the encoder parameters: four stride-2 3x3 conv stages, then
/// a linear map from the pooled features to `embed_dim`.
/// Input channels seen by the first conv: RGB plus two coordinate planes.
/// Global pooling alone is translation-invariant; the coordinate planes
/// let pooled features carry absolute position.
pub const ENCODER_IN_CHANNELS: usize = 5;

pub fn init_encoder_params(params: &mut ParamSet, embed_dim: usize, rng: &mut impl Rng) {
    let mut c_in = ENCODER_IN_CHANNELS;
    for (i, &c_out) in ENCODER_CHANNELS.iter().enumerate() {
        let fan_in = c_in * 9;
        params.init_normal(
            &format!("enc.conv{i}.w"),
            &[c_out, fan_in],
            (2.0 / fan_in as f64).sqrt(),
            rng,
        );
        params.init_const(&format!("enc.conv{i}.b"), &[c_out], 0.0);
        c_in = c_out;
    }
    let pooled = *ENCODER_CHANNELS.last().unwrap();
    params.init_normal(
        "enc.proj.w",
        &[pooled, embed_dim],
        (1.0 / pooled as f64).sqrt(),
        rng,
    );
    params.init_const("enc.proj.b", &[embed_dim], 0.0);

    // soft-argmax pathway: 1x1-conv heatmaps over the stage-2 feature map,
    // softmaxed into expected coordinates
    let heat_in = ENCODER_CHANNELS[1];
    params.init_normal(
        "enc.heat.w",
        &[HEATMAP_COUNT, heat_in],
        (2.0 / heat_in as f64).sqrt(),
        rng,
    );
    params.init_const("enc.heat.b", &[HEATMAP_COUNT], 0.0);
    params.init_normal("enc.pos.w", &[2 * HEATMAP_COUNT, embed_dim], 0.25, rng);
}

/// Number of soft-argmax heatmaps feeding the positional pathway.
pub const HEATMAP_COUNT: usize = 2;

/// Encode a masked, resized frame into a `[1, embed_dim]` state embedding.
/// Differentiable through the tape.
pub fn encode_state(
    tape: &mut Tape,
    pvars: &ParamVars,
    frame: &Frame,
    model_input_px: usize,
) -> Result<Var> {
    if frame.height() != model_input_px || frame.width() != model_input_px {
        return Err(GazeError::Parameter(format!(
            "encoder expects {model_input_px}px input, got {}x{}",
            frame.width(),
            frame.height()
        )));
    }
    let n = model_input_px;
    let mut with_coords = Array3::<f64>::zeros((ENCODER_IN_CHANNELS, n, n));
    with_coords
        .slice_mut(ndarray::s![..3, .., ..])
        .assign(&frame.data);
    let denom = (n - 1).max(1) as f64;
    for r in 0..n {
        for c in 0..n {
            with_coords[[3, r, c]] = c as f64 / denom;
            with_coords[[4, r, c]] = r as f64 / denom;
        }
    }
    let mut x = tape.leaf(with_coords.into_dyn());
    let mut stage2 = x;
    for i in 0..ENCODER_CHANNELS.len() {
        let w = pvars.var(&format!("enc.conv{i}.w"));
        let b = pvars.var(&format!("enc.conv{i}.b"));
        x = tape.conv2d(x, w, b, 3, 2, 1);
        x = tape.relu(x);
        if i == 1 {
            stage2 = x;
        }
    }
    let pooled = tape.global_avg_pool(x); // [1, 128]
    let proj = tape.matmul(pooled, pvars.var("enc.proj.w"));
    let content = tape.add_bias(proj, pvars.var("enc.proj.b"));

    // soft-argmax location: GAP alone is translation-invariant, so this
    // pathway carries where things are
    let hw = pvars.var("enc.heat.w");
    let hb = pvars.var("enc.heat.b");
    let heat = tape.conv2d(stage2, hw, hb, 1, 1, 0); // [HEATMAP_COUNT, s, s]
    let shape = tape.value(heat).shape().to_vec();
    let (s_h, s_w) = (shape[1], shape[2]);
    let flat = tape.reshape(heat, &[HEATMAP_COUNT, s_h * s_w]);
    let weights = tape.softmax_rows(flat);
    let mut grid = Array2::<f64>::zeros((s_h * s_w, 2));
    for r in 0..s_h {
        for c in 0..s_w {
            grid[[r * s_w + c, 0]] = (c as f64 + 0.5) / s_w as f64;
            grid[[r * s_w + c, 1]] = (r as f64 + 0.5) / s_h as f64;
        }
    }
    let coords = tape.leaf(grid.into_dyn());
    let pos = tape.matmul(weights, coords); // [HEATMAP_COUNT, 2]
    let pos_flat = tape.reshape(pos, &[1, 2 * HEATMAP_COUNT]);
    let pos_embed = tape.matmul(pos_flat, pvars.var("enc.pos.w"));
    Ok(tape.add(content, pos_embed))
}

/// Inference-time encoder seam: anything that maps a masked frame to a
/// fixed-length vector can stand in for the trainable conv net.
pub trait FrameEncoder {
    fn embed_dim(&self) -> usize;
    fn encode(&self, frame: &Frame) -> Result<Vec<f64>>;
}

/// The trainable conv encoder with frozen weights.
pub struct ConvEncoder<'a> {
    pub params: &'a ParamSet,
    pub embed_dim: usize,
    pub model_input_px: usize,
}

impl FrameEncoder for ConvEncoder<'_> {
    fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    fn encode(&self, frame: &Frame) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let pvars = ParamVars::leaf_all(&mut tape, self.params);
        let v = encode_state(&mut tape, &pvars, frame, self.model_input_px)?;
        Ok(tape.value(v).iter().copied().collect())
    }
}

// ---- frame storage ----

const PACKED_MAGIC: &[u8; 4] = b"GDTF";

/// Write frames as a packed binary tensor: magic, then u32 LE counts
/// (n, h, w, c), then u8 pixel data in (frame, row, col, channel) order.
pub fn write_packed_frames(path: &Path, frames: &[Frame]) -> Result<()> {
    let (h, w) = (frames[0].height(), frames[0].width());
    let mut buf = Vec::with_capacity(16 + frames.len() * h * w * 3);
    buf.extend_from_slice(PACKED_MAGIC);
    for v in [frames.len() as u32, h as u32, w as u32, 3u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for f in frames {
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    buf.push(quantize_u8(f.data[[c, y, x]]));
                }
            }
        }
    }
    std::fs::write(path, buf).map_err(|e| GazeError::io(path, e))
}

pub fn read_packed_frames(path: &Path) -> Result<Vec<Frame>> {
    let buf = std::fs::read(path).map_err(|e| GazeError::io(path, e))?;
    if buf.len() < 20 || &buf[0..4] != PACKED_MAGIC {
        return Err(GazeError::parse(path, "not a packed frame file"));
    }
    let word = |i: usize| u32::from_le_bytes(buf[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (n, h, w, c) = (word(0), word(1), word(2), word(3));
    if c != 3 || buf.len() != 20 + n * h * w * 3 {
        return Err(GazeError::parse(path, "packed frame file size mismatch"));
    }
    let mut frames = Vec::with_capacity(n);
    let mut off = 20;
    for _ in 0..n {
        let mut data = Array3::zeros((3, h, w));
        for y in 0..h {
            for x in 0..w {
                for ch in 0..3 {
                    data[[ch, y, x]] = buf[off] as f64 / 255.0;
                    off += 1;
                }
            }
        }
        frames.push(Frame::new(data)?);
    }
    Ok(frames)
}

pub fn quantize_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn save_frame_png(path: &Path, frame: &Frame) -> Result<()> {
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
    img.save(path)
        .map_err(|e| GazeError::parse(path, e.to_string()))
}

pub fn load_frame_png(path: &Path) -> Result<Frame> {
    let img = image::open(path)
        .map_err(|e| GazeError::parse(path, e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let mut data = Array3::zeros((3, h as usize, w as usize));
    for y in 0..h {
        for x in 0..w {
            let p = img.get_pixel(x, y);
            for c in 0..3 {
                data[[c, y as usize, x as usize]] = p.0[c] as f64 / 255.0;
            }
        }
    }
    Frame::new(data)
}

/// Load an episode's frames: either `frames.bin` (packed) or a directory
/// of zero-padded PNG files.
pub fn load_episode_frames(frame_dir: &Path) -> Result<Vec<Frame>> {
    let packed = frame_dir.join("frames.bin");
    if packed.exists() {
        return read_packed_frames(&packed);
    }
    let mut names: Vec<_> = std::fs::read_dir(frame_dir)
        .map_err(|e| GazeError::io(frame_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(GazeError::InsufficientData(format!(
            "no frames under {}",
            frame_dir.display()
        )));
    }
    names.iter().map(|p| load_frame_png(p)).collect()
}
