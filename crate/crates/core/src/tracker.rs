//! Per-sequence tracking loop.
//!
//! Each frame: crop the ROI around the previous estimate, extract features,
//! build one prediction map per active target-map type (optionally minus a
//! scaled negative map), sum and normalize them, sample candidates, keep the
//! most confident one, then refresh running scores and channel weights
//! from target maps placed at the new estimate.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidates::{best_index, rank_candidates, sample_candidates_with, Coverage, SamplerParams};
use crate::error::{Error, Result};
use crate::features::{BackboneSpec, FeatureExtractor, Frame};
use crate::geometry::{make_roi, Rect, RoiWindow};
use crate::scoring::{
    combine_maps, combine_pos_neg, normalize01, prediction_map, score_channels, top_fraction_weights,
    update_avg_scores, FeatureMapSet, PredictionMap, ScoreVector, WeightVector,
};
use crate::targetmaps::{make_map, negate, MapKind, Polarity, TargetMap};
use crate::weightnet::DenseNet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Binary weights on the top-scoring fraction of channels.
    FmstHard,
    /// Weights produced by the positive/negative weight networks.
    Learned,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::FmstHard => "fmst_hard",
            Mode::Learned => "learned",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fmst_hard" => Ok(Mode::FmstHard),
            "learned" => Ok(Mode::Learned),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

/// Which score vector the weight networks consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NetInput {
    #[default]
    Average,
    Instant,
}

impl fmt::Display for NetInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetInput::Average => "average",
            NetInput::Instant => "instant",
        })
    }
}

impl FromStr for NetInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "average" => Ok(NetInput::Average),
            "instant" => Ok(NetInput::Instant),
            other => Err(Error::InvalidArgument(format!("unknown net input {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub mode: Mode,
    pub eta: f64,
    pub selection_fraction: f64,
    pub sampler: SamplerParams,
    /// Constant `b` subtracted from the normalized map before summing over a candidate.
    pub offset: f64,
    pub alpha: f64,
    pub map_types: Vec<MapKind>,
    pub use_negative: bool,
    pub net_input: NetInput,
    pub coverage: Coverage,
    pub backbone: BackboneSpec,
    pub net_pos: Option<PathBuf>,
    pub net_neg: Option<PathBuf>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            mode: Mode::Learned,
            eta: 0.99,
            selection_fraction: 0.1,
            sampler: SamplerParams::default(),
            offset: 0.2,
            alpha: 0.5,
            map_types: vec![MapKind::TypeS],
            use_negative: true,
            net_input: NetInput::Average,
            coverage: Coverage::default(),
            backbone: BackboneSpec::default(),
            net_pos: None,
            net_neg: None,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidArgument(format!("eta {} outside [0, 1]", self.eta)));
        }
        if !(self.selection_fraction > 0.0 && self.selection_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "selection_fraction {} outside (0, 1]",
                self.selection_fraction
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) || !self.offset.is_finite() {
            return Err(Error::InvalidArgument("alpha and offset must be finite, alpha >= 0".into()));
        }
        if self.map_types.is_empty() {
            return Err(Error::InvalidArgument("at least one map type is required".into()));
        }
        self.sampler.validate()?;
        self.backbone.validate()
    }

    fn negatives_active(&self) -> bool {
        self.mode == Mode::Learned && self.use_negative
    }

    /// `(kind, polarity)` pairs carried in the tracker state, kinds deduplicated and sorted.
    pub fn branches(&self) -> Vec<(MapKind, Polarity)> {
        let mut kinds = self.map_types.clone();
        kinds.sort();
        kinds.dedup();
        let mut out = Vec::new();
        for k in kinds {
            out.push((k, Polarity::Positive));
            if self.negatives_active() {
                out.push((k, Polarity::Negative));
            }
        }
        out
    }
}

/// The two weight generators. `negative` is only needed when negatives are in use.
#[derive(Debug, Clone)]
pub struct WeightNets {
    pub positive: DenseNet,
    pub negative: Option<DenseNet>,
}

#[derive(Debug, Clone)]
pub struct BranchState {
    pub kind: MapKind,
    pub polarity: Polarity,
    pub avg_scores: ScoreVector,
    pub weights: WeightVector,
}

#[derive(Debug, Clone)]
pub struct TrackerState {
    prev_rect: Rect,
    branches: Vec<BranchState>,
    frame_index: usize,
    rng: ChaCha8Rng,
}

impl TrackerState {
    pub fn prev_rect(&self) -> Rect {
        self.prev_rect
    }

    pub fn branches(&self) -> &[BranchState] {
        &self.branches
    }

    pub fn branch(&self, kind: MapKind, polarity: Polarity) -> Option<&BranchState> {
        self.branches.iter().find(|b| b.kind == kind && b.polarity == polarity)
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }
}

/// What happened during one step.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub rect: Rect,
    pub roi: RoiWindow,
    /// The combined map was constant, so the previous rect was kept.
    pub degenerate: bool,
    pub best_confidence: f64,
    /// Rect whose target maps fed the score and weight refresh.
    pub update_rect: Rect,
}

pub struct Tracker {
    cfg: TrackerConfig,
    backbone: Arc<dyn FeatureExtractor>,
    nets: Option<Arc<WeightNets>>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, backbone: Arc<dyn FeatureExtractor>, nets: Option<Arc<WeightNets>>) -> Result<Self> {
        cfg.validate()?;
        let channels = backbone.output_shape().2;
        if cfg.mode == Mode::Learned {
            let n = nets
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("learned mode requires weight networks".into()))?;
            if cfg.use_negative && n.negative.is_none() {
                return Err(Error::InvalidArgument("use_negative requires a negative weight network".into()));
            }
            for net in std::iter::once(&n.positive).chain(n.negative.as_ref()) {
                if net.input_dim() != channels {
                    return Err(Error::shape(format!("{channels}-channel network"), format!("{}-channel network", net.input_dim())));
                }
            }
        }
        Ok(Tracker { cfg, backbone, nets })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    fn resolution(&self) -> (usize, usize) {
        let (r, c, _) = self.backbone.output_shape();
        (r, c)
    }

    fn target_map(&self, kind: MapKind, polarity: Polarity, roi: &RoiWindow, rect: &Rect) -> Result<TargetMap> {
        let m = make_map(kind, roi, rect, self.resolution())?;
        match polarity {
            Polarity::Positive => Ok(m),
            Polarity::Negative => negate(&m),
        }
    }

    fn weights_for(&self, polarity: Polarity, avg: &ScoreVector, current: &ScoreVector) -> Result<WeightVector> {
        match self.cfg.mode {
            Mode::FmstHard => top_fraction_weights(avg, self.cfg.selection_fraction),
            Mode::Learned => {
                let nets = self.nets.as_ref().expect("checked in new");
                let net = match polarity {
                    Polarity::Positive => &nets.positive,
                    Polarity::Negative => nets.negative.as_ref().expect("checked in new"),
                };
                let input = match self.cfg.net_input {
                    NetInput::Average => avg,
                    NetInput::Instant => current,
                };
                net.forward(input)
            }
        }
    }

    pub fn init(&self, frame: &Frame, truth: &Rect) -> Result<TrackerState> {
        truth.validate()?;
        let roi = make_roi(truth, frame.size())?;
        let features = self.backbone.extract(frame, &roi)?;
        let mut branches = Vec::new();
        for (kind, polarity) in self.cfg.branches() {
            let map = self.target_map(kind, polarity, &roi, truth)?;
            let scores = score_channels(&features, &map)?;
            let weights = self.weights_for(polarity, &scores, &scores)?;
            branches.push(BranchState {
                kind,
                polarity,
                avg_scores: scores,
                weights,
            });
        }
        Ok(TrackerState {
            prev_rect: *truth,
            branches,
            frame_index: frame.index,
            rng: ChaCha8Rng::seed_from_u64(self.cfg.sampler.seed),
        })
    }

    /// The normalized map candidates are scored on.
    pub fn combined_map(&self, state: &TrackerState, features: &FeatureMapSet) -> Result<PredictionMap> {
        let mut per_kind = Vec::new();
        for pos in state.branches.iter().filter(|b| b.polarity == Polarity::Positive) {
            let p = normalize01(&prediction_map(features, &pos.weights)?);
            let map = match state.branch(pos.kind, Polarity::Negative) {
                Some(neg) => {
                    let n = normalize01(&prediction_map(features, &neg.weights)?);
                    normalize01(&combine_pos_neg(&p, &n, self.cfg.alpha)?)
                }
                None => p,
            };
            per_kind.push(map);
        }
        Ok(normalize01(&combine_maps(&per_kind)?))
    }

    pub fn step(&self, state: &mut TrackerState, frame: &Frame) -> Result<StepReport> {
        let prev = state.prev_rect;
        let roi = make_roi(&prev, frame.size())?;
        let features = self.backbone.extract(frame, &roi)?;
        let map = self.combined_map(state, &features)?;

        let (rect, degenerate, best_confidence) = if map.is_all_zero() {
            log::warn!("frame {}: prediction map is flat; holding position", frame.index);
            (prev, true, 0.0)
        } else {
            let cands = sample_candidates_with(&prev, &self.cfg.sampler, &mut state.rng)?;
            let evals = rank_candidates(&map, &cands, &prev, &roi, self.cfg.offset, self.cfg.coverage);
            let i = best_index(&evals).expect("at least one candidate");
            (evals[i].rect, false, evals[i].confidence)
        };

        let mut branches = Vec::with_capacity(state.branches.len());
        for b in &state.branches {
            let target = self.target_map(b.kind, b.polarity, &roi, &rect)?;
            let current = score_channels(&features, &target)?;
            let avg = update_avg_scores(&b.avg_scores, &current, self.cfg.eta)?;
            let weights = self.weights_for(b.polarity, &avg, &current)?;
            branches.push(BranchState {
                kind: b.kind,
                polarity: b.polarity,
                avg_scores: avg,
                weights,
            });
        }
        state.branches = branches;
        state.prev_rect = rect;
        state.frame_index = frame.index;

        Ok(StepReport {
            rect,
            roi,
            degenerate,
            best_confidence,
            update_rect: rect,
        })
    }

    /// Initializes on `frames[0]` and returns one estimate per later frame.
    pub fn track_sequence(&self, frames: &[Frame], init_rect: &Rect) -> Result<Vec<Rect>> {
        let (first, rest) = frames
            .split_first()
            .ok_or_else(|| Error::Empty("sequence has no frames".into()))?;
        let mut state = self.init(first, init_rect)?;
        rest.iter().map(|f| self.step(&mut state, f).map(|r| r.rect)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{BackboneSpec, SyntheticBackbone};
    use crate::weightnet::DenseLayer;

    fn scene(frames: usize, dx: f64) -> (Vec<Frame>, Vec<Rect>) {
        let (w, h) = (200u32, 150u32);
        let mut out = Vec::new();
        let mut truths = Vec::new();
        for t in 0..frames {
            let r = Rect::new(80.0 + dx * t as f64, 75.0, 40.0, 30.0).unwrap();
            let mut f = Frame::filled(w, h, [40, 140, 60], t).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                    if cx >= r.left() && cx < r.right() && cy >= r.top() && cy < r.bottom() {
                        let i = (y * w + x) as usize * 3;
                        f.pixels_mut()[i..i + 3].copy_from_slice(&[230, 40, 40]);
                    }
                }
            }
            out.push(f);
            truths.push(r);
        }
        (out, truths)
    }

    fn backbone(channels: usize) -> Arc<dyn FeatureExtractor> {
        Arc::new(
            SyntheticBackbone::new(BackboneSpec {
                out_channels: channels,
                synthetic_seed: 4,
                ..Default::default()
            })
            .unwrap(),
        )
    }

    fn hard_cfg(channels: usize) -> TrackerConfig {
        TrackerConfig {
            mode: Mode::FmstHard,
            backbone: BackboneSpec {
                out_channels: channels,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn init_sets_average_to_first_scores() {
        let (frames, truths) = scene(2, 0.0);
        let bb = backbone(64);
        let tracker = Tracker::new(hard_cfg(64), bb.clone(), None).unwrap();
        let state = tracker.init(&frames[0], &truths[0]).unwrap();
        let roi = make_roi(&truths[0], frames[0].size()).unwrap();
        let f = bb.extract(&frames[0], &roi).unwrap();
        let expected = score_channels(&f, &make_map(MapKind::TypeS, &roi, &truths[0], (14, 14)).unwrap()).unwrap();
        let b = state.branch(MapKind::TypeS, Polarity::Positive).unwrap();
        assert_eq!(b.avg_scores, expected);
        assert_eq!(b.weights.selected().unwrap().len(), 7);
        assert_eq!(state.branches().len(), 1);
    }

    #[test]
    fn hard_mode_selects_68_of_672() {
        let (frames, truths) = scene(1, 0.0);
        let mut cfg = hard_cfg(672);
        cfg.map_types = vec![MapKind::TypeS, MapKind::TypeC];
        let tracker = Tracker::new(cfg, backbone(672), None).unwrap();
        let state = tracker.init(&frames[0], &truths[0]).unwrap();
        assert_eq!(state.branches().len(), 2);
        for b in state.branches() {
            assert_eq!(b.weights.weights().iter().filter(|w| **w != 0.0).count(), 68);
        }
    }

    #[test]
    fn learned_mode_with_zero_nets_gives_zero_weights_and_holds() {
        let (frames, truths) = scene(3, 1.0);
        let nets = Arc::new(WeightNets {
            positive: DenseNet::zeros(&[32, 32, 32]).unwrap(),
            negative: Some(DenseNet::zeros(&[32, 32, 32]).unwrap()),
        });
        let mut cfg = hard_cfg(32);
        cfg.mode = Mode::Learned;
        let tracker = Tracker::new(cfg, backbone(32), Some(nets)).unwrap();
        let mut state = tracker.init(&frames[0], &truths[0]).unwrap();
        assert_eq!(state.branches().len(), 2);
        assert!(state.branches().iter().all(|b| b.weights.weights().iter().all(|w| *w == 0.0)));
        let report = tracker.step(&mut state, &frames[1]).unwrap();
        assert!(report.degenerate);
        assert_eq!(report.rect, truths[0]);
    }

    #[test]
    fn learned_mode_needs_nets() {
        let mut cfg = hard_cfg(8);
        cfg.mode = Mode::Learned;
        assert!(Tracker::new(cfg.clone(), backbone(8), None).is_err());
        let wrong = Arc::new(WeightNets {
            positive: DenseNet::zeros(&[4, 4]).unwrap(),
            negative: Some(DenseNet::zeros(&[4, 4]).unwrap()),
        });
        assert!(Tracker::new(cfg, backbone(8), Some(wrong)).is_err());
    }

    #[test]
    fn frozen_sampler_shrinks_by_size_mean() {
        let (frames, truths) = scene(6, 0.0);
        let mut cfg = hard_cfg(64);
        cfg.sampler.sigma_xy = 0.0;
        cfg.sampler.sigma_wh = 0.0;
        let tracker = Tracker::new(cfg, backbone(64), None).unwrap();
        let out = tracker.track_sequence(&frames, &truths[0]).unwrap();
        assert_eq!(out.len(), 5);
        let mut w = truths[0].w;
        for r in out {
            w *= 0.996;
            assert_eq!((r.x, r.y), (truths[0].x, truths[0].y));
            assert!((r.w - w).abs() < 1e-9 * w);
        }
    }

    #[test]
    fn update_uses_the_selected_rect() {
        let (frames, truths) = scene(3, 2.0);
        let bb = backbone(64);
        let cfg = hard_cfg(64);
        let tracker = Tracker::new(cfg.clone(), bb.clone(), None).unwrap();
        let mut state = tracker.init(&frames[0], &truths[0]).unwrap();
        for frame in &frames[1..] {
            let before = state.branch(MapKind::TypeS, Polarity::Positive).unwrap().avg_scores.clone();
            let prev = state.prev_rect();
            let report = tracker.step(&mut state, frame).unwrap();
            assert_eq!(report.update_rect, report.rect);
            assert_eq!(state.prev_rect(), report.rect);
            assert_eq!(report.roi, make_roi(&prev, frame.size()).unwrap());

            let f = bb.extract(frame, &report.roi).unwrap();
            let m = make_map(MapKind::TypeS, &report.roi, &report.rect, (14, 14)).unwrap();
            let s = score_channels(&f, &m).unwrap();
            let expected = update_avg_scores(&before, &s, cfg.eta).unwrap();
            let b = state.branch(MapKind::TypeS, Polarity::Positive).unwrap();
            assert_eq!(b.avg_scores, expected);
            assert_eq!(b.weights, top_fraction_weights(&expected, 0.1).unwrap());
        }
    }

    #[test]
    fn empty_and_single_frame_sequences() {
        let (frames, truths) = scene(1, 0.0);
        let tracker = Tracker::new(hard_cfg(16), backbone(16), None).unwrap();
        assert!(tracker.track_sequence(&[], &truths[0]).is_err());
        assert!(tracker.track_sequence(&frames, &truths[0]).unwrap().is_empty());
    }

    #[test]
    fn trajectories_are_deterministic_and_keep_aspect() {
        let (frames, truths) = scene(8, 1.0);
        let tracker = Tracker::new(hard_cfg(64), backbone(64), None).unwrap();
        let a = tracker.track_sequence(&frames, &truths[0]).unwrap();
        let b = tracker.track_sequence(&frames, &truths[0]).unwrap();
        assert_eq!(a, b);
        let aspect = truths[0].w / truths[0].h;
        assert!(a.iter().all(|r| (r.w / r.h - aspect).abs() < 1e-9));
    }

    #[test]
    fn hand_set_net_reproduces_hard_mode() {
        let (frames, truths) = scene(6, 1.0);
        let c = 64;
        let bb = backbone(c);
        let hard = Tracker::new(hard_cfg(c), bb.clone(), None).unwrap();
        let selected = hard.init(&frames[0], &truths[0]).unwrap().branches()[0]
            .weights
            .weights()
            .to_vec();

        let mut hidden = DenseLayer::zeros(c, c);
        hidden.bias = selected;
        let mut out = DenseLayer::zeros(c, c);
        for i in 0..c {
            out.weights[i * c + i] = 1.0;
        }
        let nets = Arc::new(WeightNets {
            positive: DenseNet::from_layers(vec![hidden, out]).unwrap(),
            negative: None,
        });
        let mut cfg = hard_cfg(c);
        cfg.mode = Mode::Learned;
        cfg.use_negative = false;
        let learned = Tracker::new(cfg, bb, Some(nets)).unwrap();

        let mut hs = hard.init(&frames[0], &truths[0]).unwrap();
        let mut ls = learned.init(&frames[0], &truths[0]).unwrap();
        for f in &frames[1..] {
            let hr = hard.step(&mut hs, f).unwrap();
            let lr = learned.step(&mut ls, f).unwrap();
            // Only meaningful while the hard selection stays fixed.
            assert_eq!(hs.branches()[0].weights.weights(), ls.branches()[0].weights.weights());
            assert_eq!(hr.rect, lr.rect);
        }
    }
}
