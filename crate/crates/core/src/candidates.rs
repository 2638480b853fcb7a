//! Candidate rect sampling around the previous estimate and confidence-based
//! selection on a normalized prediction map.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{center_distance, covered_cells, Rect, RoiWindow};
use crate::scoring::PredictionMap;

/// Scale draws at or below this are rejected and redrawn.
pub const MIN_SCALE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Center jitter as a fraction of `max(w, h)`.
    pub sigma_xy: f64,
    /// Standard deviation of the shared scale factor.
    pub sigma_wh: f64,
    pub num_candidates: usize,
    /// Mean of the shared scale factor; slightly below 1 counters drift toward larger boxes.
    pub size_mean: f64,
    pub seed: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            sigma_xy: 0.01,
            sigma_wh: 1.0 / 3.0,
            num_candidates: 600,
            size_mean: 0.996,
            seed: 0,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_xy >= 0.0 && self.sigma_xy.is_finite()) || !(self.sigma_wh >= 0.0 && self.sigma_wh.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sampler deviations must be finite and non-negative (sigma_xy={}, sigma_wh={})",
                self.sigma_xy, self.sigma_wh
            )));
        }
        if self.num_candidates == 0 {
            return Err(Error::InvalidArgument("num_candidates must be at least 1".into()));
        }
        if !(self.size_mean > MIN_SCALE && self.size_mean.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "size_mean must exceed {MIN_SCALE}, got {}",
                self.size_mean
            )));
        }
        Ok(())
    }
}

/// How a candidate rect collects map values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Coverage {
    /// Integrate the piecewise-constant map over the rect, so partially
    /// covered cells contribute in proportion to the covered area.
    #[default]
    Area,
    /// Whole cells whose centers lie inside the rect.
    CellCenter,
}

impl fmt::Display for Coverage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coverage::Area => "area",
            Coverage::CellCenter => "cell_center",
        })
    }
}

impl FromStr for Coverage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "area" => Ok(Coverage::Area),
            "cell_center" => Ok(Coverage::CellCenter),
            other => Err(Error::InvalidArgument(format!("unknown coverage rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEvaluation {
    pub rect: Rect,
    pub score: f64,
    pub distance: f64,
    pub confidence: f64,
    /// The candidate does not touch the ROI; its score is 0 by convention.
    pub degenerate: bool,
}

/// Draws `num_candidates` rects from a stream seeded with `params.seed`.
pub fn sample_candidates(prev: &Rect, params: &SamplerParams) -> Result<Vec<Rect>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    sample_candidates_with(prev, params, &mut rng)
}

/// Centers jitter with `N(prev, sigma_xy * max(w, h))`; one scale factor
/// `N(size_mean, sigma_wh)` multiplies both sides so the aspect ratio is kept.
pub fn sample_candidates_with<R: Rng + ?Sized>(prev: &Rect, params: &SamplerParams, rng: &mut R) -> Result<Vec<Rect>> {
    prev.validate()?;
    params.validate()?;
    let jitter = Normal::new(0.0, params.sigma_xy * prev.w.max(prev.h))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let scale = Normal::new(params.size_mean, params.sigma_wh).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut out = Vec::with_capacity(params.num_candidates);
    for _ in 0..params.num_candidates {
        let dx = jitter.sample(rng);
        let dy = jitter.sample(rng);
        let r = loop {
            let r = scale.sample(rng);
            if r > MIN_SCALE {
                break r;
            }
        };
        out.push(Rect {
            x: prev.x + dx,
            y: prev.y + dy,
            w: prev.w * r,
            h: prev.h * r,
        });
    }
    Ok(out)
}

/// Summed-area table over a prediction map, queried in cell units.
#[derive(Debug, Clone)]
pub struct MapIntegral {
    rows: usize,
    cols: usize,
    // (rows + 1) x (cols + 1), row-major
    table: Vec<f64>,
}

impl MapIntegral {
    pub fn new(map: &PredictionMap) -> Self {
        let (rows, cols) = (map.rows(), map.cols());
        let stride = cols + 1;
        let mut table = vec![0.0; (rows + 1) * stride];
        for r in 0..rows {
            let mut row_sum = 0.0;
            for c in 0..cols {
                row_sum += map.get(r, c);
                table[(r + 1) * stride + c + 1] = table[r * stride + c + 1] + row_sum;
            }
        }
        MapIntegral { rows, cols, table }
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.table[r * (self.cols + 1) + c]
    }

    /// Sum over whole cells `rows x cols`.
    pub fn cell_sum(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> f64 {
        if rows.is_empty() || cols.is_empty() {
            return 0.0;
        }
        self.at(rows.end, cols.end) - self.at(rows.start, cols.end) - self.at(rows.end, cols.start)
            + self.at(rows.start, cols.start)
    }

    /// Integral of the map over `[0, x] x [0, y]` in continuous cell units;
    /// bilinear interpolation of the table is exact for a piecewise-constant map.
    fn integral_to(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, self.cols as f64);
        let y = y.clamp(0.0, self.rows as f64);
        let c0 = (x.floor() as usize).min(self.cols.saturating_sub(1));
        let r0 = (y.floor() as usize).min(self.rows.saturating_sub(1));
        let fx = x - c0 as f64;
        let fy = y - r0 as f64;
        let a = self.at(r0, c0);
        let b = self.at(r0, c0 + 1);
        let c = self.at(r0 + 1, c0);
        let d = self.at(r0 + 1, c0 + 1);
        a * (1.0 - fx) * (1.0 - fy) + b * fx * (1.0 - fy) + c * (1.0 - fx) * fy + d * fx * fy
    }

    /// Integral over `[x0, x1] x [y0, y1]` (cell units), clipped to the map.
    pub fn area_sum(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        self.integral_to(x1, y1) - self.integral_to(x0, y1) - self.integral_to(x1, y0) + self.integral_to(x0, y0)
    }
}

/// Distance scale `D` of the confidence term: half the longer ROI side.
pub fn distance_scale(roi: &RoiWindow) -> f64 {
    roi.width().max(roi.height()) / 2.0
}

/// Scores one candidate: `sum over covered cells of (m - b)`. The confidence
/// field is left at 0; it depends on the whole batch (see [`rank_candidates`]).
pub fn evaluate_candidate(
    integral: &MapIntegral,
    cand: &Rect,
    prev: &Rect,
    roi: &RoiWindow,
    offset: f64,
    coverage: Coverage,
) -> CandidateEvaluation {
    let (rows, cols) = (integral.rows, integral.cols);
    let (xs, ys) = roi.normalized(cand);
    let (score, degenerate) = match coverage {
        Coverage::CellCenter => {
            let rr = covered_cells(ys.start, ys.end, rows);
            let cc = covered_cells(xs.start, xs.end, cols);
            let count = (rr.len() * cc.len()) as f64;
            let s = integral.cell_sum(rr.clone(), cc.clone()) - offset * count;
            (s, rr.is_empty() || cc.is_empty())
        }
        Coverage::Area => {
            let (nc, nr) = (cols as f64, rows as f64);
            let x0 = (xs.start * nc).clamp(0.0, nc);
            let x1 = (xs.end * nc).clamp(0.0, nc);
            let y0 = (ys.start * nr).clamp(0.0, nr);
            let y1 = (ys.end * nr).clamp(0.0, nr);
            let area = (x1 - x0) * (y1 - y0);
            if area <= 0.0 {
                (0.0, true)
            } else {
                (integral.area_sum(x0, x1, y0, y1) - offset * area, false)
            }
        }
    };
    CandidateEvaluation {
        rect: *cand,
        score,
        distance: center_distance(cand, prev),
        confidence: 0.0,
        degenerate,
    }
}

/// `(1 - d/D)(score - min score)`, clamped to 0 once `d > D`.
pub fn confidence(score: f64, min_score: f64, distance: f64, scale: f64) -> f64 {
    if distance > scale {
        return 0.0;
    }
    (1.0 - distance / scale) * (score - min_score)
}

/// Evaluates every candidate and fills in batch-relative confidences.
pub fn rank_candidates(
    map: &PredictionMap,
    cands: &[Rect],
    prev: &Rect,
    roi: &RoiWindow,
    offset: f64,
    coverage: Coverage,
) -> Vec<CandidateEvaluation> {
    let integral = MapIntegral::new(map);
    let mut evals: Vec<CandidateEvaluation> = cands
        .iter()
        .map(|c| evaluate_candidate(&integral, c, prev, roi, offset, coverage))
        .collect();
    let min_score = evals.iter().map(|e| e.score).fold(f64::INFINITY, f64::min);
    let scale = distance_scale(roi);
    for e in &mut evals {
        e.confidence = confidence(e.score, min_score, e.distance, scale);
    }
    evals
}

/// Index of the highest-confidence evaluation; ties go to the lower index.
pub fn best_index(evals: &[CandidateEvaluation]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in evals.iter().enumerate() {
        match best {
            Some(b) if evals[b].confidence >= e.confidence => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn select_best(
    map: &PredictionMap,
    cands: &[Rect],
    prev: &Rect,
    roi: &RoiWindow,
    offset: f64,
    coverage: Coverage,
) -> Result<Rect> {
    if cands.is_empty() {
        return Err(Error::InvalidArgument("no candidates to select from".into()));
    }
    let evals = rank_candidates(map, cands, prev, roi, offset, coverage);
    let i = best_index(&evals).expect("non-empty");
    Ok(evals[i].rect)
}
