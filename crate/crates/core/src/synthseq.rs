//! Deterministic synthetic tracking sequences with exact ground truth.
//!
//! Objects are axis-aligned colored rectangles drawn with fractional pixel
//! coverage, so sub-pixel motion shows up in the image.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::format_predictions;
use crate::error::{Error, Result};
use crate::features::Frame;
use crate::geometry::Rect;

/// Position and size over time. Components add up, so a single object can
/// drift, oscillate and grow at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Trajectory {
    /// Pixels per frame.
    pub velocity: [f64; 2],
    /// Peak offset in pixels along x and y.
    pub amplitude: [f64; 2],
    /// Frames per oscillation; ignored when the amplitude is zero.
    pub period: f64,
    pub phase: f64,
    /// Relative growth per frame: size(t) = size(0) * (1 + rate)^t.
    pub scale_rate: f64,
}

impl Default for Trajectory {
    fn default() -> Self {
        Trajectory {
            velocity: [0.0, 0.0],
            amplitude: [0.0, 0.0],
            period: 50.0,
            phase: 0.0,
            scale_rate: 0.0,
        }
    }
}

impl Trajectory {
    pub fn rect_at(&self, start: &Rect, t: usize) -> Rect {
        let tf = t as f64;
        let wave = if self.period > 0.0 {
            (2.0 * PI * tf / self.period + self.phase).sin()
        } else {
            0.0
        };
        let wave0 = if self.period > 0.0 { self.phase.sin() } else { 0.0 };
        let s = (1.0 + self.scale_rate).powi(t as i32);
        Rect {
            x: start.x + self.velocity[0] * tf + self.amplitude[0] * (wave - wave0),
            y: start.y + self.velocity[1] * tf + self.amplitude[1] * (wave - wave0),
            w: start.w * s,
            h: start.h * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    /// Center-based rect at frame 0.
    pub rect: Rect,
    pub color: [u8; 3],
    #[serde(default)]
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Background {
    Flat { color: [u8; 3] },
    Checkerboard { cell: u32, a: [u8; 3], b: [u8; 3] },
    /// Static per-pixel noise around `base`, drawn from the scene seed.
    Noise { base: [u8; 3], amplitude: u8 },
}

/// Full-height bar drawn over everything in frames `start..end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub x: f64,
    pub width: f64,
    pub color: [u8; 3],
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    #[serde(default)]
    pub seed: u64,
    pub background: Background,
    pub target: SceneObject,
    #[serde(default)]
    pub distractors: Vec<SceneObject>,
    #[serde(default)]
    pub occluder: Option<Occluder>,
}

#[derive(Debug, Clone)]
pub struct Sequence {
    pub frames: Vec<Frame>,
    pub truths: Vec<Rect>,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn target_rects(&self) -> Vec<Rect> {
        (0..self.frames)
            .map(|t| self.target.trajectory.rect_at(&self.target.rect, t))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::Scene(format!("need at least 2 frames, got {}", self.frames)));
        }
        if self.width < 3 || self.height < 3 {
            return Err(Error::Scene(format!("image {}x{} too small", self.width, self.height)));
        }
        if let Background::Checkerboard { cell: 0, .. } = self.background {
            return Err(Error::Scene("checkerboard cell must be positive".into()));
        }
        for o in std::iter::once(&self.target).chain(&self.distractors) {
            o.rect.validate().map_err(|e| Error::Scene(e.to_string()))?;
            if !(o.trajectory.scale_rate > -1.0) || o.trajectory.period < 0.0 {
                return Err(Error::Scene("scale_rate must exceed -1 and period must be >= 0".into()));
            }
        }
        let (w, h) = (self.width as f64, self.height as f64);
        for (t, r) in self.target_rects().iter().enumerate() {
            let inside = r.left() >= 1.0 && r.top() >= 1.0 && r.right() <= w - 1.0 && r.bottom() <= h - 1.0;
            if !inside || r.validate().is_err() {
                return Err(Error::Scene(format!(
                    "target leaves the image at frame {t}: {:?}",
                    r.to_top_left()
                )));
            }
        }
        if let Some(o) = &self.occluder {
            if !(o.width > 0.0 && o.x.is_finite()) || o.start > o.end {
                return Err(Error::Scene("occluder needs positive width and start <= end".into()));
            }
        }
        Ok(())
    }

    fn background_pixels(&self) -> Vec<u8> {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut px = vec![0u8; w * h * 3];
        match &self.background {
            Background::Flat { color } => {
                for p in px.chunks_exact_mut(3) {
                    p.copy_from_slice(color);
                }
            }
            Background::Checkerboard { cell, a, b } => {
                let c = *cell as usize;
                for y in 0..h {
                    for x in 0..w {
                        let color = if (x / c + y / c).is_multiple_of(2) { a } else { b };
                        px[(y * w + x) * 3..][..3].copy_from_slice(color);
                    }
                }
            }
            Background::Noise { base, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let a = *amplitude as i32;
                for p in px.chunks_exact_mut(3) {
                    for (v, b) in p.iter_mut().zip(base) {
                        let n = if a > 0 { rng.random_range(-a..=a) } else { 0 };
                        *v = (*b as i32 + n).clamp(0, 255) as u8;
                    }
                }
            }
        }
        px
    }

    pub fn render(&self) -> Result<Sequence> {
        self.validate()?;
        let background = self.background_pixels();
        let mut frames = Vec::with_capacity(self.frames);
        let truths = self.target_rects();
        for (t, truth) in truths.iter().enumerate() {
            let mut px = background.clone();
            for d in &self.distractors {
                let r = d.trajectory.rect_at(&d.rect, t);
                paint(&mut px, self.width, self.height, r.left(), r.top(), r.right(), r.bottom(), d.color);
            }
            paint(
                &mut px,
                self.width,
                self.height,
                truth.left(),
                truth.top(),
                truth.right(),
                truth.bottom(),
                self.target.color,
            );
            if let Some(o) = self.occluder.as_ref().filter(|o| (o.start..o.end).contains(&t)) {
                let half = o.width / 2.0;
                paint(
                    &mut px,
                    self.width,
                    self.height,
                    o.x - half,
                    0.0,
                    o.x + half,
                    self.height as f64,
                    o.color,
                );
            }
            frames.push(Frame::new(self.width, self.height, px, t)?);
        }
        Ok(Sequence { frames, truths })
    }
}

fn overlap(lo: f64, hi: f64, p: usize) -> f64 {
    (hi.min(p as f64 + 1.0) - lo.max(p as f64)).max(0.0)
}

/// Blends `color` into the box by per-pixel area coverage.
#[allow(clippy::too_many_arguments)]
fn paint(px: &mut [u8], width: u32, height: u32, left: f64, top: f64, right: f64, bottom: f64, color: [u8; 3]) {
    let x0 = left.floor().max(0.0) as usize;
    let x1 = (right.ceil().min(width as f64)).max(0.0) as usize;
    let y0 = top.floor().max(0.0) as usize;
    let y1 = (bottom.ceil().min(height as f64)).max(0.0) as usize;
    for y in y0..y1 {
        let fy = overlap(top, bottom, y);
        for x in x0..x1 {
            let a = (overlap(left, right, x) * fy).clamp(0.0, 1.0);
            if a == 0.0 {
                continue;
            }
            let i = (y * width as usize + x) * 3;
            for (v, c) in px[i..i + 3].iter_mut().zip(color) {
                *v = (*v as f64 * (1.0 - a) + c as f64 * a).round() as u8;
            }
        }
    }
}

/// Writes `<root>/<name>/groundtruth_rect.txt` and `img/0001.png...`.
pub fn write_otb(seq: &Sequence, root: impl AsRef<Path>, name: &str) -> Result<PathBuf> {
    let dir = root.as_ref().join(name);
    let img = dir.join("img");
    fs::create_dir_all(&img)?;
    fs::write(dir.join("groundtruth_rect.txt"), format_predictions(&seq.truths))?;
    for (i, f) in seq.frames.iter().enumerate() {
        f.to_image().save(img.join(format!("{:04}.png", i + 1)))?;
    }
    Ok(dir)
}

fn object(x: f64, y: f64, w: f64, h: f64, color: [u8; 3], trajectory: Trajectory) -> SceneObject {
    SceneObject {
        rect: Rect { x, y, w, h },
        color,
        trajectory,
    }
}

fn jitter(rng: &mut ChaCha8Rng, v: f64, spread: f64) -> f64 {
    v + rng.random_range(-spread..=spread)
}

const TARGET_COLORS: [[u8; 3]; 4] = [[220, 50, 40], [240, 200, 30], [40, 80, 230], [230, 120, 200]];

/// Ten 100-frame tasks: two each of linear drift, sinusoidal motion, 1%/frame
/// growth, a look-alike distractor, and a brief occlusion.
pub fn standard_suite(seed: u64) -> Vec<(String, SceneSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for variant in 0..2 {
        let color = TARGET_COLORS[variant * 2];
        let alt = TARGET_COLORS[variant * 2 + 1];
        let bg = if variant == 0 {
            Background::Noise {
                base: [70, 110, 80],
                amplitude: 12,
            }
        } else {
            Background::Checkerboard {
                cell: 24,
                a: [90, 90, 100],
                b: [110, 120, 110],
            }
        };
        let base = |rng: &mut ChaCha8Rng, target: SceneObject| SceneSpec {
            width: 320,
            height: 240,
            frames: 100,
            seed: rng.random(),
            background: bg.clone(),
            target,
            distractors: Vec::new(),
            occluder: None,
        };

        let vx = jitter(&mut rng, 0.9, 0.2);
        let vy = jitter(&mut rng, 0.4, 0.2);
        let linear = Trajectory {
            velocity: [vx, vy],
            ..Default::default()
        };
        out.push(("linear", base(&mut rng, object(100.0, 100.0, 60.0, 48.0, color, linear))));

        let sine = Trajectory {
            amplitude: [jitter(&mut rng, 30.0, 5.0), jitter(&mut rng, 12.0, 4.0)],
            period: 100.0,
            ..Default::default()
        };
        out.push(("sine", base(&mut rng, object(160.0, 120.0, 56.0, 56.0, alt, sine))));

        let grow = Trajectory {
            velocity: [jitter(&mut rng, 0.2, 0.1), 0.0],
            scale_rate: 0.01,
            ..Default::default()
        };
        out.push(("scale", base(&mut rng, object(140.0, 120.0, 40.0, 30.0, color, grow))));

        let drift = Trajectory {
            velocity: [jitter(&mut rng, 0.6, 0.15), 0.0],
            ..Default::default()
        };
        let mut s = base(&mut rng, object(90.0, 90.0, 56.0, 48.0, alt, drift));
        s.distractors.push(object(
            240.0,
            150.0,
            56.0,
            48.0,
            alt,
            Trajectory {
                velocity: [-0.3, 0.0],
                ..Default::default()
            },
        ));
        out.push(("distractor", s));

        let slow = Trajectory {
            velocity: [jitter(&mut rng, 0.5, 0.1), 0.0],
            ..Default::default()
        };
        let mut s = base(&mut rng, object(120.0, 120.0, 64.0, 56.0, color, slow));
        s.occluder = Some(Occluder {
            x: 170.0,
            width: 10.0,
            color: [30, 30, 30],
            start: 45,
            end: 55,
        });
        out.push(("occlusion", s));
    }
    out.into_iter()
        .enumerate()
        .map(|(i, (kind, spec))| (format!("{kind}_{}", i / 5 + 1), spec))
        .collect()
}

/// A random scene for training data: one target, random background, drift,
/// oscillation and mild scale change.
pub fn random_scene(rng: &mut ChaCha8Rng, frames: usize) -> SceneSpec {
    let (width, height) = (320u32, 240u32);
    let w = rng.random_range(36.0..72.0);
    let h = w * rng.random_range(0.7..1.3);
    let mut color = [0u8; 3];
    for c in &mut color {
        *c = rng.random_range(0..=255);
    }
    color[rng.random_range(0..3)] = rng.random_range(200..=255);
    let background = match rng.random_range(0..3) {
        0 => Background::Flat {
            color: [rng.random_range(40..140), rng.random_range(40..140), rng.random_range(40..140)],
        },
        1 => Background::Checkerboard {
            cell: rng.random_range(12..40),
            a: [rng.random_range(60..120); 3],
            b: [rng.random_range(80..140), rng.random_range(80..140), rng.random_range(80..140)],
        },
        _ => Background::Noise {
            base: [rng.random_range(50..130), rng.random_range(50..130), rng.random_range(50..130)],
            amplitude: rng.random_range(0..20),
        },
    };
    let trajectory = Trajectory {
        velocity: [rng.random_range(-1.0..1.0), rng.random_range(-0.6..0.6)],
        amplitude: [rng.random_range(0.0..10.0), rng.random_range(0.0..6.0)],
        period: rng.random_range(30.0..90.0),
        phase: 0.0,
        scale_rate: rng.random_range(-0.003..0.003),
    };
    SceneSpec {
        width,
        height,
        frames,
        seed: rng.random(),
        background,
        target: object(width as f64 / 2.0, height as f64 / 2.0, w, h, color, trajectory),
        distractors: Vec::new(),
        occluder: None,
    }
}
