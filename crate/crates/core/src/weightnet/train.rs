use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, AdamParams, DenseNet, TrainPair};
use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, Frame};
use crate::geometry::{make_roi, Rect};
use crate::targetmaps::{make_map, MapKind, Polarity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
    pub validation_fraction: f64,
    /// Hidden layer widths; `None` means one hidden layer as wide as the input.
    pub hidden: Option<Vec<usize>>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 50,
            patience: 20,
            batch_size: 1,
            adam: AdamParams::default(),
            validation_fraction: 0.1,
            hidden: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience >= self.max_epochs {
            return Err(Error::InvalidArgument(format!(
                "patience {} must be below max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "validation_fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        if self.batch_size != 1 {
            return Err(Error::InvalidArgument(format!(
                "only batch_size 1 is supported, got {}",
                self.batch_size
            )));
        }
        if !(self.adam.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument("learning rate must be non-negative".into()));
        }
        Ok(())
    }

    pub fn dims(&self, channels: usize) -> Vec<usize> {
        let hidden = self.hidden.clone().unwrap_or_else(|| vec![channels]);
        std::iter::once(channels).chain(hidden).chain(std::iter::once(channels)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0 is the untrained network.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the lowest validation loss.
    pub net: DenseNet,
    pub initial: DenseNet,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn best_val_loss(&self) -> f64 {
        self.log[self.best_epoch].val_loss
    }
}

struct Sample {
    input: Vec<f64>,
    target: Vec<f64>,
}

fn mean_loss(net: &DenseNet, samples: &[Sample], idx: &[usize]) -> f64 {
    idx.iter()
        .map(|&i| net.backprop(&samples[i].input, &samples[i].target).0)
        .sum::<f64>()
        / idx.len() as f64
}

/// Trains one branch (positive or negative) with per-sample Adam updates and
/// early stopping on mean validation loss.
pub fn train(pairs: &[TrainPair], cfg: &TrainConfig, polarity: Polarity) -> Result<TrainOutcome> {
    cfg.validate()?;
    if pairs.len() < 2 {
        return Err(Error::Empty(format!("need at least 2 training pairs, got {}", pairs.len())));
    }
    let channels = pairs[0].channels();
    let samples = pairs
        .iter()
        .map(|p| {
            if p.channels() != channels {
                return Err(Error::shape(channels, p.channels()));
            }
            let (input, target) = p.sample(polarity)?;
            Ok(Sample {
                input: input.into_inner(),
                target: target.into_inner(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((cfg.validation_fraction * samples.len() as f64).round() as usize).clamp(1, samples.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();

    let mut net = DenseNet::init(&cfg.dims(channels), &mut rng)?;
    let initial = net.clone();
    let mut adam = Adam::new(cfg.adam, &net);

    let mut log = vec![EpochRecord {
        epoch: 0,
        train_loss: mean_loss(&net, &samples, &train_idx),
        val_loss: mean_loss(&net, &samples, &val_idx),
    }];
    let mut best = net.clone();
    let mut best_epoch = 0;
    let mut best_val = log[0].val_loss;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut running = 0.0;
        for &i in &train_idx {
            let (l, g) = net.backprop(&samples[i].input, &samples[i].target);
            running += l;
            adam.step(&mut net, &g);
        }
        let val_loss = mean_loss(&net, &samples, &val_idx);
        log.push(EpochRecord {
            epoch,
            train_loss: running / train_idx.len() as f64,
            val_loss,
        });
        log::debug!("{polarity:?} epoch {epoch}: train {:.6} val {val_loss:.6}", running / train_idx.len() as f64);

        if val_loss < best_val {
            best_val = val_loss;
            best = net.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        net: best,
        initial,
        best_epoch,
        log,
    })
}

/// Consecutive-frame pairs for one sequence. Both feature sets of a pair are
/// cropped with the ROI around the time-`k` ground truth.
pub fn pairs_for_sequence(
    frames: &[Frame],
    truths: &[Rect],
    backbone: &dyn FeatureExtractor,
    kind: MapKind,
) -> Result<Vec<TrainPair>> {
    if frames.len() != truths.len() {
        return Err(Error::shape(format!("{} rects", frames.len()), format!("{} rects", truths.len())));
    }
    let (rows, cols, _) = backbone.output_shape();
    let mut out = Vec::with_capacity(frames.len().saturating_sub(1));
    for k in 0..frames.len().saturating_sub(1) {
        let roi = make_roi(&truths[k], frames[k].size())?;
        let f_k = backbone.extract(&frames[k], &roi)?;
        let f_k1 = backbone.extract(&frames[k + 1], &roi)?;
        let m_k = make_map(kind, &roi, &truths[k], (rows, cols))?;
        let m_k1 = make_map(kind, &roi, &truths[k + 1], (rows, cols))?;
        out.push(TrainPair::new(f_k, m_k, f_k1, m_k1)?);
    }
    Ok(out)
}

/// Pairs from every sequence with at least two frames; shorter ones are
/// skipped with a warning.
pub fn build_dataset(
    sequences: &[(Vec<Frame>, Vec<Rect>)],
    backbone: &dyn FeatureExtractor,
    kind: MapKind,
) -> Result<Vec<TrainPair>> {
    if sequences.is_empty() {
        log::warn!("no training sequences given");
    }
    let mut pairs = Vec::new();
    for (i, (frames, truths)) in sequences.iter().enumerate() {
        if frames.len() < 2 {
            log::warn!("sequence {i} has {} frame(s); skipped", frames.len());
            continue;
        }
        pairs.extend(pairs_for_sequence(frames, truths, backbone, kind)?);
    }
    Ok(pairs)
}
