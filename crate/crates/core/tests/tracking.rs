use std::sync::Arc;

use fmst_core::features::{BackboneSpec, FeatureExtractor, SyntheticBackbone};
use fmst_core::geometry::center_distance;
use fmst_core::synthseq::SceneSpec;
use fmst_core::tracker::{Mode, TrackerConfig};
use fmst_core::{Rect, Tracker};

fn hard_tracker(channels: usize) -> Tracker {
    let spec = BackboneSpec {
        out_channels: channels,
        ..Default::default()
    };
    let bb: Arc<dyn FeatureExtractor> = Arc::new(SyntheticBackbone::new(spec.clone()).unwrap());
    let cfg = TrackerConfig {
        mode: Mode::FmstHard,
        backbone: spec,
        ..Default::default()
    };
    Tracker::new(cfg, bb, None).unwrap()
}

fn scene(frames: usize, rect: &str, velocity: [f64; 2]) -> SceneSpec {
    SceneSpec::from_json(&format!(
        r#"{{"width":480,"height":240,"frames":{frames},"seed":9,
            "background":{{"kind":"noise","base":[40,70,50],"amplitude":30}},
            "target":{{"rect":{rect},"color":[250,230,60],
                       "trajectory":{{"velocity":[{},{}]}}}}}}"#,
        velocity[0], velocity[1]
    ))
    .unwrap()
}

#[test]
fn static_bright_target_stays_within_two_pixels() {
    let seq = scene(51, r#"{"x":240,"y":120,"w":50,"h":40}"#, [0.0, 0.0]).render().unwrap();
    let out = hard_tracker(128).track_sequence(&seq.frames, &seq.truths[0]).unwrap();
    assert_eq!(out.len(), 50);
    for (i, (p, t)) in out.iter().zip(&seq.truths[1..]).enumerate() {
        let d = center_distance(p, t);
        assert!(d <= 2.0, "frame {}: center error {d:.2}", i + 1);
    }
}

fn mean_error(rect: &str) -> f64 {
    let seq = scene(100, rect, [2.0, 0.0]).render().unwrap();
    assert_eq!(seq.truths[99].x - seq.truths[0].x, 198.0);
    let out = hard_tracker(128).track_sequence(&seq.frames, &seq.truths[0]).unwrap();
    assert_eq!(out.len(), 99);
    out.iter()
        .zip(&seq.truths[1..])
        .map(|(p, t)| center_distance(p, t))
        .sum::<f64>()
        / out.len() as f64
}

// The confidence discount (1 - d/D) drags the box behind a moving target by
// roughly the map cell width times w/D. A target that is narrow along the
// motion keeps both small while the jitter (set by the long side) still
// reaches 2 px.
#[test]
fn linear_motion_mean_error_below_five_pixels() {
    let mean = mean_error(r#"{"x":60,"y":120,"w":40,"h":160}"#);
    assert!(mean < 5.0, "mean center error {mean:.2}");
}

#[test]
fn square_target_lags_but_stays_within_precision_threshold() {
    let mean = mean_error(r#"{"x":70,"y":120,"w":100,"h":80}"#);
    assert!(mean > 5.0 && mean < 20.0, "mean center error {mean:.2}");
}

#[test]
fn trajectory_is_reproducible_and_keeps_aspect() {
    let seq = scene(30, r#"{"x":100,"y":120,"w":60,"h":30}"#, [1.5, 0.5]).render().unwrap();
    let a = hard_tracker(64).track_sequence(&seq.frames, &seq.truths[0]).unwrap();
    let b = hard_tracker(64).track_sequence(&seq.frames, &seq.truths[0]).unwrap();
    assert_eq!(a, b);
    for r in &a {
        assert!((r.w / r.h - 2.0).abs() < 1e-9);
    }
}

#[test]
fn different_seeds_give_different_trajectories() {
    let seq = scene(20, r#"{"x":100,"y":120,"w":60,"h":30}"#, [1.0, 0.0]).render().unwrap();
    let run = |seed| {
        let spec = BackboneSpec {
            out_channels: 64,
            ..Default::default()
        };
        let mut cfg = TrackerConfig {
            mode: Mode::FmstHard,
            backbone: spec.clone(),
            ..Default::default()
        };
        cfg.sampler.seed = seed;
        let bb: Arc<dyn FeatureExtractor> = Arc::new(SyntheticBackbone::new(spec).unwrap());
        Tracker::new(cfg, bb, None).unwrap().track_sequence(&seq.frames, &seq.truths[0]).unwrap()
    };
    let (a, b): (Vec<Rect>, Vec<Rect>) = (run(1), run(2));
    assert_ne!(a, b);
}
