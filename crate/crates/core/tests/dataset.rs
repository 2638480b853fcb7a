use fmst_core::features::{FeatureExtractor, Frame};
use fmst_core::geometry::RoiWindow;
use fmst_core::scoring::FeatureMapSet;
use fmst_core::synthseq::random_scene;
use fmst_core::weightnet::{build_dataset, pairs_for_sequence};
use fmst_core::{MapKind, Rect, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One constant cell per frame; enough to count pairs cheaply.
struct Flat;

impl FeatureExtractor for Flat {
    fn output_shape(&self) -> (usize, usize, usize) {
        (1, 1, 1)
    }

    fn extract(&self, frame: &Frame, _roi: &RoiWindow) -> Result<FeatureMapSet> {
        FeatureMapSet::new(1, 1, 1, vec![frame.index as f32])
    }
}

fn tiny_sequence(len: usize) -> (Vec<Frame>, Vec<Rect>) {
    let frames = (0..len).map(|i| Frame::filled(8, 8, [0, 0, 0], i).unwrap()).collect();
    (frames, vec![Rect::new(4.0, 4.0, 4.0, 4.0).unwrap(); len])
}

#[test]
fn three_frames_give_two_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seq = random_scene(&mut rng, 3).render().unwrap();
    let bb = fmst_core::features::SyntheticBackbone::new(Default::default()).unwrap();
    let pairs = pairs_for_sequence(&seq.frames, &seq.truths, &bb, MapKind::TypeS).unwrap();
    assert_eq!(pairs.len(), 2);
    assert_eq!(pairs[0].channels(), 672);
}

#[test]
fn empty_input_gives_empty_dataset() {
    assert!(build_dataset(&[], &Flat, MapKind::TypeC).unwrap().is_empty());
}

#[test]
fn one_pair_fewer_than_frames_per_task() {
    // 49 tasks, 29,549 frames in total.
    let mut lens = vec![603; 49];
    lens[0] += 29_549 - 603 * 49;
    assert_eq!(lens.iter().sum::<usize>(), 29_549);
    let seqs: Vec<_> = lens.iter().map(|&n| tiny_sequence(n)).collect();
    let pairs = build_dataset(&seqs, &Flat, MapKind::TypeS).unwrap();
    assert_eq!(pairs.len(), 29_500);
}

#[test]
fn single_frame_sequences_are_skipped() {
    let seqs = vec![tiny_sequence(1), tiny_sequence(4)];
    assert_eq!(build_dataset(&seqs, &Flat, MapKind::TypeS).unwrap().len(), 3);
}
