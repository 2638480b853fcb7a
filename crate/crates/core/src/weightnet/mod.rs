//! Dense network mapping a channel score vector to a channel weight vector.
//!
//! Hidden layers use ReLU and the output layer ReLU6, so every weight lands
//! in `[0, 6]`. Training minimizes `-sum(M̂ ∘ M')`, where `M̂` is the
//! next frame's features combined with the produced weights and `M'` is the
//! next frame's target map.

mod adam;
mod checkpoint;
mod train;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scoring::{score_channels, FeatureMapSet, PredictionMap, ScoreVector, WeightVector, MAX_WEIGHT};
use crate::targetmaps::{negate, Polarity, TargetMap};

pub use adam::{Adam, AdamParams};
pub use checkpoint::{decode_net, encode_net, load_net, save_net};
pub use train::{build_dataset, pairs_for_sequence, train, EpochRecord, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Output width.
    pub rows: usize,
    /// Input width.
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseLayer {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn affine(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x))
            .collect()
    }
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

fn relu6(z: f64) -> f64 {
    z.clamp(0.0, MAX_WEIGHT)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<DenseLayer>,
}

impl DenseNet {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("network needs at least one layer".into()))?;
        for pair in layers.windows(2) {
            if pair[1].cols != pair[0].rows {
                return Err(Error::shape(
                    format!("layer input {}", pair[0].rows),
                    format!("layer input {}", pair[1].cols),
                ));
            }
        }
        for l in &layers {
            if l.rows == 0 || l.cols == 0 || l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(Error::shape(
                    format!("{}x{} layer", l.rows, l.cols),
                    format!("{} weights, {} biases", l.weights.len(), l.bias.len()),
                ));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite network parameter".into()));
            }
        }
        let last = layers.last().expect("non-empty");
        if first.cols != last.rows {
            return Err(Error::shape(
                format!("output width {}", first.cols),
                format!("output width {}", last.rows),
            ));
        }
        Ok(DenseNet { layers })
    }

    /// All-zero parameters for widths `dims = [C, hidden.., C]`.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument("need at least input and output widths".into()));
        }
        DenseNet::from_layers(dims.windows(2).map(|d| DenseLayer::zeros(d[1], d[0])).collect())
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = DenseNet::zeros(dims)?;
        for l in &mut net.layers {
            let limit = (6.0 / (l.rows + l.cols) as f64).sqrt();
            for w in &mut l.weights {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.rows)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(self.param_count(), params.len()));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Pre-activations of every layer for one input.
    pub fn preactivations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut a = input.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let z = l.affine(&a);
            a = if i == last {
                z.iter().copied().map(relu6).collect()
            } else {
                z.iter().copied().map(relu).collect()
            };
            zs.push(z);
        }
        zs
    }

    fn forward_raw(&self, input: &[f64]) -> Vec<f64> {
        let mut a = input.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let z = l.affine(&a);
            a = if i == last {
                z.into_iter().map(relu6).collect()
            } else {
                z.into_iter().map(relu).collect()
            };
        }
        a
    }

    pub fn forward(&self, scores: &ScoreVector) -> Result<WeightVector> {
        if scores.len() != self.input_dim() {
            return Err(Error::shape(
                format!("{} scores", self.input_dim()),
                format!("{} scores", scores.len()),
            ));
        }
        WeightVector::new(self.forward_raw(scores.as_slice()))
    }

    /// Loss and gradients for one precomputed sample, where `target[c]` is
    /// the next-frame score of channel `c` (so `loss = -w · target`).
    pub(crate) fn backprop(&self, input: &[f64], target: &[f64]) -> (f64, NetGradients) {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut zs = Vec::with_capacity(self.layers.len());
        acts.push(input.to_vec());
        for (i, l) in self.layers.iter().enumerate() {
            let z = l.affine(acts.last().expect("input pushed"));
            let a: Vec<f64> = if i == last {
                z.iter().copied().map(relu6).collect()
            } else {
                z.iter().copied().map(relu).collect()
            };
            zs.push(z);
            acts.push(a);
        }
        let out = &acts[self.layers.len()];
        let loss = -out.iter().zip(target).map(|(w, t)| w * t).sum::<f64>();

        let mut grads: Vec<LayerGrad> = self.layers.iter().map(|l| LayerGrad::zeros(l.rows, l.cols)).collect();
        // dL/dz of the output layer; the ReLU6 subgradient is 0 at both kinks.
        let mut delta: Vec<f64> = zs[last]
            .iter()
            .zip(target)
            .map(|(&z, &t)| if z > 0.0 && z < MAX_WEIGHT { -t } else { 0.0 })
            .collect();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let a_prev = &acts[i];
            let g = &mut grads[i];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.bias[r] = d;
                for (gw, &a) in g.weights[r * l.cols..(r + 1) * l.cols].iter_mut().zip(a_prev) {
                    *gw = d * a;
                }
            }
            if i == 0 {
                break;
            }
            let mut next = vec![0.0; l.cols];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (n, &w) in next.iter_mut().zip(&l.weights[r * l.cols..(r + 1) * l.cols]) {
                    *n += w * d;
                }
            }
            for (n, &z) in next.iter_mut().zip(&zs[i - 1]) {
                if z <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
        (loss, NetGradients { layers: grads })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    fn zeros(rows: usize, cols: usize) -> Self {
        LayerGrad {
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }
}

/// Gradients shaped like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradients {
    pub layers: Vec<LayerGrad>,
}

impl NetGradients {
    /// Same ordering as [`DenseNet::params`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }
}

/// `-sum(M̂ ∘ M')`.
pub fn loss(prediction: &PredictionMap, next_target: &TargetMap) -> Result<f64> {
    if (prediction.rows(), prediction.cols()) != (next_target.rows(), next_target.cols()) {
        return Err(Error::shape(
            format!("{}x{}", prediction.rows(), prediction.cols()),
            format!("{}x{}", next_target.rows(), next_target.cols()),
        ));
    }
    Ok(-prediction
        .values()
        .iter()
        .zip(next_target.values())
        .map(|(p, m)| p * m)
        .sum::<f64>())
}

/// One training example: features and ground-truth target map at time `k`,
/// and the same for `k + 1` (features cropped with the time-`k` ROI).
#[derive(Debug, Clone)]
pub struct TrainPair {
    pub f_k: FeatureMapSet,
    pub m_k: TargetMap,
    pub f_k1: FeatureMapSet,
    pub m_k1: TargetMap,
}

impl TrainPair {
    pub fn new(f_k: FeatureMapSet, m_k: TargetMap, f_k1: FeatureMapSet, m_k1: TargetMap) -> Result<Self> {
        let shape = (f_k.rows(), f_k.cols());
        let consistent = shape == (f_k1.rows(), f_k1.cols())
            && f_k.channels() == f_k1.channels()
            && shape == (m_k.rows(), m_k.cols())
            && shape == (m_k1.rows(), m_k1.cols());
        if !consistent {
            return Err(Error::shape(
                format!("{}x{}x{}", f_k.rows(), f_k.cols(), f_k.channels()),
                format!("{}x{}x{} with maps", f_k1.rows(), f_k1.cols(), f_k1.channels()),
            ));
        }
        Ok(TrainPair { f_k, m_k, f_k1, m_k1 })
    }

    pub fn channels(&self) -> usize {
        self.f_k.channels()
    }

    /// Network input and next-frame channel scores for the given polarity.
    /// The negative branch uses the negated target maps.
    pub fn sample(&self, polarity: Polarity) -> Result<(ScoreVector, ScoreVector)> {
        match polarity {
            Polarity::Positive => Ok((score_channels(&self.f_k, &self.m_k)?, score_channels(&self.f_k1, &self.m_k1)?)),
            Polarity::Negative => {
                let (mk, mk1) = (positive(&self.m_k)?, positive(&self.m_k1)?);
                Ok((
                    score_channels(&self.f_k, &negate(&mk)?)?,
                    score_channels(&self.f_k1, &negate(&mk1)?)?,
                ))
            }
        }
    }
}

fn positive(m: &TargetMap) -> Result<TargetMap> {
    match m.polarity() {
        Polarity::Positive => Ok(m.clone()),
        Polarity::Negative => Err(Error::Contract("training pairs hold positive target maps".into())),
    }
}

/// Analytic gradients of the loss for one pair, along with the loss value.
pub fn grad(net: &DenseNet, pair: &TrainPair, polarity: Polarity) -> Result<(f64, NetGradients)> {
    if pair.channels() != net.input_dim() {
        return Err(Error::shape(net.input_dim(), pair.channels()));
    }
    let (input, target) = pair.sample(polarity)?;
    Ok(net.backprop(input.as_slice(), target.as_slice()))
}
