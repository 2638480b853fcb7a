//! Feature backbones: a deterministic synthetic extractor for desk-scale runs
//! and a reader for per-frame tensors exported by an external CNN.

pub mod fmt1;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RoiWindow;
use crate::scoring::FeatureMapSet;

pub use fmt1::{load_tensor, store_tensor};

/// An RGB8 image with its position in the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    pub index: usize,
}

impl Frame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>, index: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("empty frame".into()));
        }
        if pixels.len() != width as usize * height as usize * 3 {
            return Err(Error::shape(
                format!("{} bytes", width as usize * height as usize * 3),
                format!("{} bytes", pixels.len()),
            ));
        }
        Ok(Frame {
            width,
            height,
            pixels,
            index,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3], index: usize) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Frame::new(width, height, pixels, index)
    }

    pub fn from_image(img: image::RgbImage, index: usize) -> Result<Self> {
        let (w, h) = img.dimensions();
        Frame::new(w, h, img.into_raw(), index)
    }

    pub fn load(path: impl AsRef<Path>, index: usize) -> Result<Self> {
        Frame::from_image(image::open(path)?.to_rgb8(), index)
    }

    pub fn to_image(&self) -> image::RgbImage {
        image::RgbImage::from_raw(self.width, self.height, self.pixels.clone()).expect("dimensions match")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackboneKind {
    Synthetic,
    File,
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackboneKind::Synthetic => "synthetic",
            BackboneKind::File => "file",
        })
    }
}

impl FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "synthetic" => Ok(BackboneKind::Synthetic),
            "file" => Ok(BackboneKind::File),
            other => Err(Error::InvalidArgument(format!("unknown backbone kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub kind: BackboneKind,
    pub out_rows: usize,
    pub out_cols: usize,
    pub out_channels: usize,
    pub synthetic_seed: u64,
    /// Side of the square the ROI is resized to before pooling.
    pub input_size: usize,
    /// Root of `<dir>/<task>/<frame:08>.fmt1` tensors for [`BackboneKind::File`].
    pub tensor_dir: Option<PathBuf>,
}

impl Default for BackboneSpec {
    fn default() -> Self {
        BackboneSpec {
            kind: BackboneKind::Synthetic,
            out_rows: 14,
            out_cols: 14,
            out_channels: 672,
            synthetic_seed: 0,
            input_size: 224,
            tensor_dir: None,
        }
    }
}

impl BackboneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.out_rows == 0 || self.out_cols == 0 || self.out_channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "backbone output {}x{}x{} must be non-empty",
                self.out_rows, self.out_cols, self.out_channels
            )));
        }
        if self.input_size < self.out_rows.max(self.out_cols) {
            return Err(Error::InvalidArgument(format!(
                "input size {} smaller than output grid {}x{}",
                self.input_size, self.out_rows, self.out_cols
            )));
        }
        Ok(())
    }

    /// Instantiates the extractor. File backbones read from `<tensor_dir>/<task>`.
    pub fn build(&self, task: Option<&str>) -> Result<Backbone> {
        self.validate()?;
        match self.kind {
            BackboneKind::Synthetic => Ok(Backbone::Synthetic(SyntheticBackbone::new(self.clone())?)),
            BackboneKind::File => {
                let root = self
                    .tensor_dir
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("file backbone needs tensor_dir".into()))?;
                let dir = match task {
                    Some(t) => root.join(t),
                    None => root.clone(),
                };
                Ok(Backbone::Tensors(TensorSource::new(dir, self.shape())))
            }
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.out_rows, self.out_cols, self.out_channels)
    }
}

/// Anything that turns an ROI of a frame into a feature set.
pub trait FeatureExtractor: Send + Sync {
    /// `(rows, cols, channels)` of every set produced.
    fn output_shape(&self) -> (usize, usize, usize);

    fn extract(&self, frame: &Frame, roi: &RoiWindow) -> Result<FeatureMapSet>;
}

#[derive(Debug, Clone)]
pub enum Backbone {
    Synthetic(SyntheticBackbone),
    Tensors(TensorSource),
}

impl FeatureExtractor for Backbone {
    fn output_shape(&self) -> (usize, usize, usize) {
        match self {
            Backbone::Synthetic(b) => b.output_shape(),
            Backbone::Tensors(t) => t.output_shape(),
        }
    }

    fn extract(&self, frame: &Frame, roi: &RoiWindow) -> Result<FeatureMapSet> {
        match self {
            Backbone::Synthetic(b) => b.extract(frame, roi),
            Backbone::Tensors(t) => t.extract(frame, roi),
        }
    }
}

/// Number of per-cell statistics: mean R, G, B and mean |dx|, |dy| of luminance.
pub const STATS: usize = 5;

/// Each channel is a fixed random projection of pooled color and gradient
/// statistics of the resized ROI, followed by a ReLU. Statistics are
/// centred on their ROI mean first, so a channel fires only where the ROI
/// departs from its average and responses stay sparse. Projections are
/// drawn once from `synthetic_seed`.
#[derive(Debug, Clone)]
pub struct SyntheticBackbone {
    spec: BackboneSpec,
    // channels x STATS
    projections: Vec<f32>,
}

impl SyntheticBackbone {
    pub fn new(spec: BackboneSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.synthetic_seed);
        let projections = (0..spec.out_channels * STATS)
            .map(|_| {
                let z: f32 = StandardNormal.sample(&mut rng);
                z
            })
            .collect();
        Ok(SyntheticBackbone { spec, projections })
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    /// Crops the ROI (edge-replicated) and bilinearly resizes it to
    /// `input_size x input_size`, returning planar R, G, B in `[0, 255]`.
    fn resize_roi(&self, frame: &Frame, roi: &RoiWindow) -> [Vec<f32>; 3] {
        let s = self.spec.input_size;
        let (fw, fh) = (frame.width as usize, frame.height as usize);
        let sx = roi.width() / s as f64;
        let sy = roi.height() / s as f64;
        let left = roi.bounds.left();
        let top = roi.bounds.top();

        // Separable bilinear taps, clamped to the image (edge replication).
        let taps = |origin: f64, step: f64, limit: usize| -> Vec<(usize, usize, f32)> {
            (0..s)
                .map(|u| {
                    let p = origin + (u as f64 + 0.5) * step - 0.5;
                    let p = p.clamp(0.0, (limit - 1) as f64);
                    let i0 = p.floor() as usize;
                    let i1 = (i0 + 1).min(limit - 1);
                    (i0, i1, (p - i0 as f64) as f32)
                })
                .collect()
        };
        let xt = taps(left, sx, fw);
        let yt = taps(top, sy, fh);

        let px = frame.pixels();
        let mut out = [vec![0f32; s * s], vec![0f32; s * s], vec![0f32; s * s]];
        for (v, &(y0, y1, fy)) in yt.iter().enumerate() {
            let r0 = y0 * fw * 3;
            let r1 = y1 * fw * 3;
            for (u, &(x0, x1, fx)) in xt.iter().enumerate() {
                for (ch, plane) in out.iter_mut().enumerate() {
                    let a = px[r0 + x0 * 3 + ch] as f32;
                    let b = px[r0 + x1 * 3 + ch] as f32;
                    let c = px[r1 + x0 * 3 + ch] as f32;
                    let d = px[r1 + x1 * 3 + ch] as f32;
                    let top = a + (b - a) * fx;
                    let bottom = c + (d - c) * fx;
                    plane[v * s + u] = top + (bottom - top) * fy;
                }
            }
        }
        out
    }

    /// Per-cell statistics scaled to roughly `[0, 1]`, laid out cell-major.
    fn pooled_stats(&self, rgb: &[Vec<f32>; 3]) -> Vec<[f32; STATS]> {
        let s = self.spec.input_size;
        let (rows, cols) = (self.spec.out_rows, self.spec.out_cols);
        let luma: Vec<f32> = (0..s * s).map(|i| (rgb[0][i] + rgb[1][i] + rgb[2][i]) / 3.0).collect();
        let mut stats = vec![[0f32; STATS]; rows * cols];
        for (r, row_stats) in stats.chunks_mut(cols).enumerate() {
            let (v0, v1) = (r * s / rows, (r + 1) * s / rows);
            for (c, cell) in row_stats.iter_mut().enumerate() {
                let (u0, u1) = (c * s / cols, (c + 1) * s / cols);
                let mut acc = [0f32; STATS];
                for v in v0..v1 {
                    for u in u0..u1 {
                        let i = v * s + u;
                        acc[0] += rgb[0][i];
                        acc[1] += rgb[1][i];
                        acc[2] += rgb[2][i];
                        if u + 1 < s {
                            acc[3] += (luma[i + 1] - luma[i]).abs();
                        }
                        if v + 1 < s {
                            acc[4] += (luma[i + s] - luma[i]).abs();
                        }
                    }
                }
                let n = ((v1 - v0) * (u1 - u0)) as f32 * 255.0;
                for k in 0..STATS {
                    cell[k] = acc[k] / n;
                }
                // Gradients are sparse; lift them to a range comparable with color.
                cell[3] *= 4.0;
                cell[4] *= 4.0;
            }
        }
        stats
    }
}

impl FeatureExtractor for SyntheticBackbone {
    fn output_shape(&self) -> (usize, usize, usize) {
        self.spec.shape()
    }

    fn extract(&self, frame: &Frame, roi: &RoiWindow) -> Result<FeatureMapSet> {
        let rgb = self.resize_roi(frame, roi);
        let mut stats = self.pooled_stats(&rgb);
        let cells = stats.len();
        let mut mean = [0f32; STATS];
        for st in &stats {
            for k in 0..STATS {
                mean[k] += st[k] / cells as f32;
            }
        }
        for st in &mut stats {
            for k in 0..STATS {
                st[k] -= mean[k];
            }
        }
        let mut data = vec![0f32; cells * self.spec.out_channels];
        for (proj, plane) in self.projections.chunks_exact(STATS).zip(data.chunks_exact_mut(cells)) {
            for (out, st) in plane.iter_mut().zip(&stats) {
                let mut v = 0f32;
                for k in 0..STATS {
                    v += proj[k] * st[k];
                }
                *out = v.max(0.0);
            }
        }
        FeatureMapSet::new(self.spec.out_rows, self.spec.out_cols, self.spec.out_channels, data)
    }
}

/// Precomputed per-frame tensors, read from `<dir>/<frame:08>.fmt1` or
/// served from memory once preloaded. The ROI argument is ignored: the
/// exporting tool owns the crop.
#[derive(Debug, Clone)]
pub struct TensorSource {
    dir: PathBuf,
    shape: (usize, usize, usize),
    preloaded: HashMap<usize, FeatureMapSet>,
}

impl TensorSource {
    pub fn new(dir: PathBuf, shape: (usize, usize, usize)) -> Self {
        TensorSource {
            dir,
            shape,
            preloaded: HashMap::new(),
        }
    }

    pub fn frame_path(&self, index: usize) -> PathBuf {
        self.dir.join(format!("{index:08}.fmt1"))
    }

    /// Reads every listed frame into memory so extraction does no I/O.
    pub fn preload(&mut self, indices: impl IntoIterator<Item = usize>) -> Result<()> {
        for i in indices {
            let f = load_tensor(self.frame_path(i))?;
            self.check_shape(&f, i)?;
            self.preloaded.insert(i, f);
        }
        Ok(())
    }

    pub fn insert(&mut self, index: usize, features: FeatureMapSet) -> Result<()> {
        self.check_shape(&features, index)?;
        self.preloaded.insert(index, features);
        Ok(())
    }

    fn check_shape(&self, f: &FeatureMapSet, index: usize) -> Result<()> {
        let got = (f.rows(), f.cols(), f.channels());
        if got != self.shape {
            return Err(Error::shape(
                format!("{:?} for frame {index}", self.shape),
                format!("{got:?}"),
            ));
        }
        Ok(())
    }
}

impl FeatureExtractor for TensorSource {
    fn output_shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    fn extract(&self, frame: &Frame, _roi: &RoiWindow) -> Result<FeatureMapSet> {
        if let Some(f) = self.preloaded.get(&frame.index) {
            return Ok(f.clone());
        }
        let path = self.frame_path(frame.index);
        if !path.exists() {
            return Err(Error::MissingFeatures {
                frame: frame.index,
                reason: format!("{} not found", path.display()),
            });
        }
        let f = load_tensor(&path)?;
        self.check_shape(&f, frame.index)?;
        Ok(f)
    }
}
