//! Channel scoring, running-average scores, weight vectors and prediction maps.
//!
//! All channel loops accumulate in channel-index order so results are bit-stable.

use crate::error::{Error, Result};
use crate::targetmaps::TargetMap;

/// Upper bound of learned weights (ReLU6 range).
pub const MAX_WEIGHT: f64 = 6.0;

/// `channels` stacked `rows x cols` activation maps, channel-major and
/// row-major within each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapSet {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureMapSet {
    pub fn new(rows: usize, cols: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 || channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "feature set dimensions must be positive, got {rows}x{cols}x{channels}"
            )));
        }
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::InvalidArgument("feature set dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::shape(format!("{expected} values"), format!("{} values", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite activation at index {i}")));
        }
        Ok(FeatureMapSet {
            rows,
            cols,
            channels,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Result<Self> {
        FeatureMapSet::new(rows, cols, channels, vec![0.0; rows * cols * channels])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.cells();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ScoreVector {
    fn from(v: Vec<f64>) -> Self {
        ScoreVector(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    selected: Option<Vec<usize>>,
}

impl WeightVector {
    /// Soft weights, each within `[0, 6]`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(0.0..=MAX_WEIGHT).contains(w)) {
            return Err(Error::InvalidArgument(format!(
                "weight {} at channel {i} outside [0, {MAX_WEIGHT}]",
                weights[i]
            )));
        }
        Ok(WeightVector { weights, selected: None })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Channel indices chosen by hard selection, in ascending order.
    pub fn selected(&self) -> Option<&[usize]> {
        self.selected.as_deref()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    normalized: bool,
}

impl PredictionMap {
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape(format!("{rows}x{cols}"), format!("{} values", values.len())));
        }
        Ok(PredictionMap {
            rows,
            cols,
            values,
            normalized: false,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    fn same_shape(&self, other: &PredictionMap) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::shape(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }
}

/// `scores[c] = sum(F_c ∘ M)`.
pub fn score_channels(features: &FeatureMapSet, map: &TargetMap) -> Result<ScoreVector> {
    if (features.rows, features.cols) != (map.rows(), map.cols()) {
        return Err(Error::shape(
            format!("{}x{}", features.rows, features.cols),
            format!("{}x{}", map.rows(), map.cols()),
        ));
    }
    let m = map.values();
    let scores = (0..features.channels)
        .map(|c| {
            features
                .channel(c)
                .iter()
                .zip(m)
                .fold(0.0, |acc, (&f, &t)| acc + f as f64 * t)
        })
        .collect();
    Ok(ScoreVector(scores))
}

/// Exponential smoothing `eta * avg + (1 - eta) * current`.
pub fn update_avg_scores(avg: &ScoreVector, current: &ScoreVector, eta: f64) -> Result<ScoreVector> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!("smoothing {eta} outside [0, 1]")));
    }
    if avg.len() != current.len() {
        return Err(Error::shape(avg.len(), current.len()));
    }
    Ok(ScoreVector(
        avg.0
            .iter()
            .zip(&current.0)
            .map(|(a, s)| eta * a + (1.0 - eta) * s)
            .collect(),
    ))
}

/// Number of channels kept by a top-fraction selection, `ceil(fraction * C)`.
///
/// Products that land within 1e-9 of an integer are snapped first so that
/// e.g. `0.1 * 30` selects 3 rather than 4.
pub fn selection_count(fraction: f64, channels: usize) -> usize {
    let raw = fraction * channels as f64;
    let k = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    (k as usize).clamp(1, channels)
}

/// Weight 1 on the `ceil(fraction * C)` highest-scoring channels, 0 elsewhere.
/// Ties go to the lower channel index.
pub fn top_fraction_weights(avg: &ScoreVector, fraction: f64) -> Result<WeightVector> {
    if avg.is_empty() {
        return Err(Error::InvalidArgument("empty score vector".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("selection fraction {fraction} outside (0, 1]")));
    }
    let k = selection_count(fraction, avg.len());
    let mut order: Vec<usize> = (0..avg.len()).collect();
    order.sort_by(|&a, &b| avg.0[b].total_cmp(&avg.0[a]).then(a.cmp(&b)));
    let mut selected = order[..k].to_vec();
    selected.sort_unstable();

    let mut weights = vec![0.0; avg.len()];
    for &c in &selected {
        weights[c] = 1.0;
    }
    Ok(WeightVector {
        weights,
        selected: Some(selected),
    })
}

/// `sum_c w_c F_c`, accumulated in channel order.
pub fn prediction_map(features: &FeatureMapSet, weights: &WeightVector) -> Result<PredictionMap> {
    if weights.len() != features.channels {
        return Err(Error::shape(
            format!("{} weights", features.channels),
            format!("{} weights", weights.len()),
        ));
    }
    let mut values = vec![0.0f64; features.cells()];
    for (c, &w) in weights.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (acc, &f) in values.iter_mut().zip(features.channel(c)) {
            *acc += w * f as f64;
        }
    }
    Ok(PredictionMap {
        rows: features.rows,
        cols: features.cols,
        values,
        normalized: false,
    })
}

/// Affine rescale to `[0, 1]`. A constant map becomes all-zero.
pub fn normalize01(map: &PredictionMap) -> PredictionMap {
    let (lo, hi) = map
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let values = if range > 0.0 && range.is_finite() {
        map.values.iter().map(|v| (v - lo) / range).collect()
    } else {
        vec![0.0; map.values.len()]
    };
    PredictionMap {
        values,
        normalized: true,
        ..*map
    }
}

/// `positive - alpha * negative`; both inputs must already be normalized.
pub fn combine_pos_neg(positive: &PredictionMap, negative: &PredictionMap, alpha: f64) -> Result<PredictionMap> {
    positive.same_shape(negative)?;
    if !positive.normalized || !negative.normalized {
        return Err(Error::Contract("positive/negative maps must be normalized before combining".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be finite and non-negative, got {alpha}")));
    }
    Ok(PredictionMap {
        values: positive
            .values
            .iter()
            .zip(&negative.values)
            .map(|(p, n)| p - alpha * n)
            .collect(),
        normalized: false,
        ..*positive
    })
}

/// Elementwise sum of normalized maps.
pub fn combine_maps(maps: &[PredictionMap]) -> Result<PredictionMap> {
    let (first, rest) = maps
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("no maps to combine".into()))?;
    if let Some(m) = maps.iter().find(|m| !m.normalized) {
        return Err(Error::Contract(format!("map {}x{} is not normalized", m.rows, m.cols)));
    }
    let mut out = first.values.clone();
    for m in rest {
        first.same_shape(m)?;
        for (o, v) in out.iter_mut().zip(&m.values) {
            *o += v;
        }
    }
    Ok(PredictionMap {
        values: out,
        normalized: maps.len() == 1,
        ..*first
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_features(rng: &mut impl Rng, rows: usize, cols: usize, channels: usize) -> FeatureMapSet {
        let data = (0..rows * cols * channels).map(|_| rng.random_range(0.0..4.0f32)).collect();
        FeatureMapSet::new(rows, cols, channels, data).unwrap()
    }

    fn map(rows: usize, cols: usize, v: Vec<f64>) -> TargetMap {
        TargetMap::from_values(rows, cols, v)
    }

    #[test]
    fn score_examples() {
        let f = FeatureMapSet::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = score_channels(&f, &map(2, 2, vec![1., 1., -1., -1.])).unwrap();
        assert_eq!(s.as_slice(), &[-4.0]);

        let ones = FeatureMapSet::new(2, 3, 2, vec![1.0; 12]).unwrap();
        let m = map(2, 3, vec![1., 1., 1., -1., -1., 0.]);
        assert_eq!(score_channels(&ones, &m).unwrap().as_slice(), &[1.0, 1.0]);

        assert!(matches!(score_channels(&ones, &map(3, 2, vec![0.0; 6])), Err(Error::Shape { .. })));
    }

    #[test]
    fn feature_set_rejects_bad_input() {
        assert!(FeatureMapSet::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(FeatureMapSet::new(0, 2, 1, vec![]).is_err());
        assert!(FeatureMapSet::new(1, 1, 1, vec![f32::NAN]).is_err());
    }

    #[test]
    fn avg_update_examples() {
        let one = ScoreVector::from(vec![1.0]);
        let zero = ScoreVector::from(vec![0.0]);
        assert_eq!(update_avg_scores(&one, &zero, 0.99).unwrap().as_slice(), &[0.99]);
        assert_eq!(update_avg_scores(&one, &one, 0.99).unwrap(), one);
        assert!(update_avg_scores(&one, &zero, 1.5).is_err());
        assert!(update_avg_scores(&one, &ScoreVector::from(vec![0.0, 1.0]), 0.5).is_err());

        let start = ScoreVector::from(vec![10.0, -3.0]);
        let target = ScoreVector::from(vec![2.0, 2.0]);
        let mut avg = start.clone();
        for _ in 0..500 {
            avg = update_avg_scores(&avg, &target, 0.99).unwrap();
        }
        for i in 0..2 {
            let bound = (start.as_slice()[i] - 2.0).abs() * 0.99f64.powi(500);
            assert!((avg.as_slice()[i] - 2.0).abs() <= bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn top_fraction_examples() {
        let s = ScoreVector::from(vec![5., 1., 3., 2., 4., 0., 6., 8., 7., 9.]);
        let w = top_fraction_weights(&s, 0.1).unwrap();
        assert_eq!(w.selected(), Some(&[9usize][..]));
        assert_eq!(w.weights().iter().sum::<f64>(), 1.0);

        let flat = ScoreVector::from(vec![0.5; 20]);
        assert_eq!(top_fraction_weights(&flat, 0.1).unwrap().selected(), Some(&[0usize, 1][..]));

        assert!(top_fraction_weights(&ScoreVector::default(), 0.1).is_err());
        assert!(top_fraction_weights(&flat, 0.0).is_err());
    }

    #[test]
    fn selection_count_examples() {
        assert_eq!(selection_count(0.1, 672), 68);
        assert_eq!(selection_count(0.1, 1824), 183);
        assert_eq!(selection_count(0.1, 30), 3);
        assert_eq!(selection_count(0.1, 3), 1);
        assert_eq!(selection_count(1.0, 7), 7);
    }

    #[test]
    fn prediction_map_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_features(&mut rng, 3, 4, 5);
        let mut onehot = vec![0.0; 5];
        onehot[2] = 1.0;
        let m = prediction_map(&f, &WeightVector::new(onehot).unwrap()).unwrap();
        let expected: Vec<f64> = f.channel(2).iter().map(|&v| v as f64).collect();
        assert_eq!(m.values(), &expected[..]);

        let zero = prediction_map(&f, &WeightVector::new(vec![0.0; 5]).unwrap()).unwrap();
        assert!(zero.is_all_zero());
        assert!(prediction_map(&f, &WeightVector::new(vec![0.0; 4]).unwrap()).is_err());
        assert!(WeightVector::new(vec![6.5]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let m = PredictionMap::from_values(2, 2, vec![0., 5., 10., 5.]).unwrap();
        let n = normalize01(&m);
        assert_eq!(n.values(), &[0.0, 0.5, 1.0, 0.5]);
        assert!(n.is_normalized());

        let flat = PredictionMap::from_values(1, 3, vec![4.0; 3]).unwrap();
        assert!(normalize01(&flat).is_all_zero());

        let unit = PredictionMap::from_values(1, 3, vec![0.0, 0.3, 1.0]).unwrap();
        assert_eq!(normalize01(&unit).values(), unit.values());
    }

    #[test]
    fn combine_examples() {
        let p = normalize01(&PredictionMap::from_values(1, 3, vec![0.0, 1.0, 2.0]).unwrap());
        let n = normalize01(&PredictionMap::from_values(1, 3, vec![2.0, 1.0, 0.0]).unwrap());
        assert_eq!(combine_pos_neg(&p, &n, 0.0).unwrap().values(), p.values());
        assert_eq!(combine_pos_neg(&p, &p, 0.5).unwrap().values(), &[0.0, 0.25, 0.5]);
        let raw = PredictionMap::from_values(1, 3, vec![0.0; 3]).unwrap();
        assert!(matches!(combine_pos_neg(&raw, &n, 0.5), Err(Error::Contract(_))));

        assert_eq!(combine_maps(std::slice::from_ref(&p)).unwrap().values(), p.values());
        assert_eq!(combine_maps(&[p.clone(), p.clone()]).unwrap().values(), &[0.0, 1.0, 2.0]);
        assert!(combine_maps(&[]).is_err());
        let other = normalize01(&PredictionMap::from_values(3, 1, vec![0.0, 1.0, 2.0]).unwrap());
        assert!(matches!(combine_maps(&[p, other]), Err(Error::Shape { .. })));
    }

    proptest! {
        #[test]
        fn score_is_linear_in_features(seed in any::<u64>(), a in -3i32..4, b in -3i32..4) {
            // Small integer activations keep a*F1 + b*F2 exact in f32.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let int_set = |rng: &mut ChaCha8Rng| {
                let d = (0..4 * 5 * 3).map(|_| rng.random_range(0..8) as f32).collect();
                FeatureMapSet::new(4, 5, 3, d).unwrap()
            };
            let f1 = int_set(&mut rng);
            let f2 = int_set(&mut rng);
            let mix: Vec<f32> = f1.data().iter().zip(f2.data()).map(|(x, y)| a as f32 * x + b as f32 * y).collect();
            let mixed = FeatureMapSet::new(4, 5, 3, mix).unwrap();
            let m = map(4, 5, (0..20).map(|_| rng.random_range(-1..=1) as f64).collect());
            let s1 = score_channels(&f1, &m).unwrap();
            let s2 = score_channels(&f2, &m).unwrap();
            let sm = score_channels(&mixed, &m).unwrap();
            for c in 0..3 {
                let lin = a as f64 * s1.as_slice()[c] + b as f64 * s2.as_slice()[c];
                prop_assert!((sm.as_slice()[c] - lin).abs() < 1e-9);
            }
        }

        #[test]
        fn selection_invariant_under_positive_affine(seed in any::<u64>(), scale in 1i32..8, shift in -50i32..50) {
            // Integer scores and integer affine maps keep ties exact.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..37).map(|_| rng.random_range(-20..20) as f64).collect();
            let moved: Vec<f64> = raw.iter().map(|s| scale as f64 * s + shift as f64).collect();
            let a = top_fraction_weights(&ScoreVector::from(raw), 0.1).unwrap();
            let b = top_fraction_weights(&ScoreVector::from(moved), 0.1).unwrap();
            prop_assert_eq!(a.selected(), b.selected());
        }

        #[test]
        fn prediction_map_is_linear_in_weights(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_features(&mut rng, 3, 3, 6);
            let w1: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..3.0)).collect();
            let w2: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..3.0)).collect();
            let sum: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
            let m1 = prediction_map(&f, &WeightVector::new(w1).unwrap()).unwrap();
            let m2 = prediction_map(&f, &WeightVector::new(w2).unwrap()).unwrap();
            let ms = prediction_map(&f, &WeightVector::new(sum).unwrap()).unwrap();
            for i in 0..9 {
                prop_assert!((ms.values()[i] - m1.values()[i] - m2.values()[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn normalize_is_idempotent(values in proptest::collection::vec(-100.0..100.0f64, 1..30)) {
            let n = values.len();
            let once = normalize01(&PredictionMap::from_values(1, n, values).unwrap());
            let twice = normalize01(&once);
            prop_assert_eq!(once.values(), twice.values());
        }

        #[test]
        fn averaging_contracts_toward_current(
            avg in proptest::collection::vec(-100.0..100.0f64, 5),
            cur in proptest::collection::vec(-100.0..100.0f64, 5),
            eta in 0.0..=1.0f64,
        ) {
            let next = update_avg_scores(&ScoreVector::from(avg.clone()), &ScoreVector::from(cur.clone()), eta).unwrap();
            for i in 0..5 {
                let before = (avg[i] - cur[i]).abs();
                let after = (next.as_slice()[i] - cur[i]).abs();
                prop_assert!(after <= eta * before + 1e-9);
            }
        }
    }
}
