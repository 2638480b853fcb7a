use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use fmst_core::bench::{
    format_predictions, list_images, parse_rect_line, precision_svg, run_ope, success_svg, OracleRunner,
    SequenceRunner, Task, TaskSource, TrackerRunner,
};
use fmst_core::config::{train_kv, tracker_kv, KvFile, RunManifest};
use fmst_core::features::{Backbone, BackboneKind, FeatureExtractor, Frame};
use fmst_core::synthseq::{random_scene, standard_suite, write_otb, SceneSpec};
use fmst_core::tracker::{Mode, Tracker, TrackerConfig, WeightNets};
use fmst_core::weightnet::{load_net, pairs_for_sequence, save_net, train as train_net, TrainConfig, TrainOutcome};
use fmst_core::{Polarity, Rect};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::overlay::draw_rect;
use crate::{BenchArgs, Common, GenArgs, TrackArgs, TrackerFlags, TrainArgs};

const GROUND_TRUTH: &str = "groundtruth_rect.txt";

/// Bad invocation or unusable input; exits with 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    use fmst_core::Error as E;
    use std::io::ErrorKind;
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Contract(_) => 1,
                E::Io(io) => match io.kind() {
                    ErrorKind::NotFound | ErrorKind::InvalidData | ErrorKind::InvalidInput => 2,
                    _ => 1,
                },
                _ => 2,
            };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            return if io.kind() == ErrorKind::NotFound { 2 } else { 1 };
        }
    }
    1
}

struct Resolved {
    tracker: TrackerConfig,
    train: TrainConfig,
    seed: u64,
}

fn resolve(common: &Common, flags: &TrackerFlags) -> Result<Resolved> {
    let mut tracker = TrackerConfig::default();
    let mut train = TrainConfig::default();
    if let Some(path) = &common.config {
        KvFile::load(path)
            .and_then(|kv| kv.apply(&mut tracker, &mut train))
            .with_context(|| format!("reading config {}", path.display()))?;
    }
    for o in &common.overrides {
        let kv = KvFile::parse(o, Path::new("--set"))
            .ok()
            .filter(|kv| kv.entries().count() == 1)
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {o:?}")))?;
        kv.apply(&mut tracker, &mut train)?;
    }
    if let Some(m) = &flags.mode {
        tracker.mode = m.parse()?;
    }
    if let Some(dir) = &flags.net {
        tracker.net_pos = Some(dir.join("pos.fwn1"));
        tracker.net_neg = Some(dir.join("neg.fwn1"));
    }
    if let Some(b) = &flags.backbone {
        tracker.backbone.kind = b.parse()?;
    }
    if let Some(d) = &flags.tensor_dir {
        tracker.backbone.kind = BackboneKind::File;
        tracker.backbone.tensor_dir = Some(d.clone());
    }
    if let Some(c) = flags.channels {
        tracker.backbone.out_channels = c;
    }
    if let Some(s) = common.seed {
        tracker.sampler.seed = s;
        train.seed = s;
    }
    tracker.validate()?;
    let seed = tracker.sampler.seed;
    Ok(Resolved { tracker, train, seed })
}

fn load_nets(cfg: &TrackerConfig) -> Result<Option<Arc<WeightNets>>> {
    if cfg.mode != Mode::Learned {
        return Ok(None);
    }
    let pos = cfg
        .net_pos
        .as_ref()
        .ok_or_else(|| usage("learned mode needs weight networks: pass --net DIR or set net_pos"))?;
    let positive = load_net(pos).with_context(|| format!("loading {}", pos.display()))?;
    let negative = if cfg.use_negative {
        let neg = cfg
            .net_neg
            .as_ref()
            .ok_or_else(|| usage("use_negative needs a negative network: pass --net DIR or set net_neg"))?;
        Some(load_net(neg).with_context(|| format!("loading {}", neg.display()))?)
    } else {
        None
    };
    Ok(Some(Arc::new(WeightNets { positive, negative })))
}

fn write_manifest(
    subcommand: &str,
    common: &Common,
    seed: u64,
    settings: KvFile,
    timing: Vec<(String, f64)>,
) -> Result<()> {
    let m = RunManifest {
        subcommand: subcommand.into(),
        config_path: common.config.clone(),
        seed,
        output_dir: common.output.clone(),
        timing,
        settings,
    };
    m.write(&common.output)?;
    Ok(())
}

fn dir_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into())
}

fn first_rect(seq: &Path) -> Result<Rect> {
    let gt = seq.join(GROUND_TRUTH);
    let text = fs::read_to_string(&gt).map_err(|_| usage(format!("no initial rect: cannot read {}", gt.display())))?;
    let (n, line) = text
        .lines()
        .enumerate()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| usage(format!("no initial rect: {} is empty", gt.display())))?;
    Ok(parse_rect_line(line, &gt, n + 1)?)
}

fn build_backbone(cfg: &TrackerConfig, task: &str, frames: &[Frame]) -> Result<Arc<dyn FeatureExtractor>> {
    let mut b = cfg.backbone.build(Some(task))?;
    if let Backbone::Tensors(t) = &mut b {
        t.preload(frames.iter().map(|f| f.index))?;
    }
    Ok(Arc::new(b))
}

pub fn track(args: TrackArgs) -> Result<()> {
    let r = resolve(&args.common, &args.tracker)?;
    let init = first_rect(&args.sequence)?;
    let nets = load_nets(&r.tracker)?;
    let name = dir_name(&args.sequence);

    let load_start = Instant::now();
    let images = list_images(&args.sequence)?;
    if images.is_empty() {
        return Err(usage(format!("no frames under {}/img", args.sequence.display())));
    }
    let frames = images
        .iter()
        .enumerate()
        .map(|(i, p)| Frame::load(p, i))
        .collect::<fmst_core::Result<Vec<_>>>()?;
    let backbone = build_backbone(&r.tracker, &name, &frames)?;
    let load_secs = load_start.elapsed().as_secs_f64();

    let tracker = Tracker::new(r.tracker.clone(), backbone, nets)?;
    let start = Instant::now();
    let preds = tracker.track_sequence(&frames, &init)?;
    let track_secs = start.elapsed().as_secs_f64();

    fs::create_dir_all(&args.common.output)?;
    let mut all = vec![init];
    all.extend(preds);
    fs::write(args.common.output.join("predictions.txt"), format_predictions(&all))?;
    if args.overlay {
        let dir = args.common.output.join("overlay");
        fs::create_dir_all(&dir)?;
        for (i, (f, rect)) in frames.iter().zip(&all).enumerate() {
            let mut f = f.clone();
            draw_rect(&mut f, rect, [255, 32, 32]);
            f.to_image().save(dir.join(format!("{:04}.png", i + 1)))?;
        }
    }
    let tracked = frames.len() - 1;
    let fps = tracked as f64 / track_secs.max(1e-9);
    println!("{name}: {tracked} frames tracked, {fps:.1} fps");
    let mut settings = tracker_kv(&r.tracker);
    settings.set("run.input", args.sequence.display());
    write_manifest(
        "track",
        &args.common,
        r.seed,
        settings,
        vec![("load".into(), load_secs), ("track".into(), track_secs)],
    )
}

fn sequence_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(GROUND_TRUTH).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let r = resolve(&args.common, &args.tracker)?;
    let dirs = sequence_dirs(&args.root)?;
    if dirs.is_empty() {
        return Err(usage(format!("no sequences under {}", args.root.display())));
    }
    let runner: Box<dyn SequenceRunner> = if args.oracle {
        Box::new(OracleRunner)
    } else {
        Box::new(TrackerRunner {
            config: r.tracker.clone(),
            nets: load_nets(&r.tracker)?,
            backbone: None,
        })
    };
    let start = Instant::now();
    let report = run_ope(dirs.into_iter().map(TaskSource::Dir).collect(), runner.as_ref(), args.jobs)
        .map_err(|e| usage(format!("no sequence could be evaluated: {e}")))?;
    let wall = start.elapsed().as_secs_f64();

    let out = &args.common.output;
    fs::create_dir_all(out.join("predictions"))?;
    fs::write(out.join("results.json"), report.results_json()?)?;
    fs::write(out.join("timing.json"), report.timing_json()?)?;
    fs::write(out.join("curves.csv"), report.curves_csv())?;
    for t in &report.tasks {
        let mut all = vec![t.init];
        all.extend(t.predictions.iter().copied());
        fs::write(
            out.join("predictions").join(format!("{}.txt", t.result.name)),
            format_predictions(&all),
        )?;
    }
    if args.svg {
        fs::write(out.join("precision.svg"), precision_svg(&[&report.average]))?;
        fs::write(out.join("success.svg"), success_svg(&[&report.average]))?;
    }

    for t in &report.tasks {
        println!(
            "{:24} precision {:6.2}  success {:6.2}",
            t.result.name, t.result.precision_score, t.result.success_score
        );
    }
    println!(
        "average over {} task(s): precision {:.2}  success {:.2}  fps {:.1}",
        report.tasks.len(),
        report.average.precision_score,
        report.average.success_score,
        report.average.fps
    );
    for (task, why) in &report.skipped {
        eprintln!("warning: skipped {task}: {why}");
    }
    if !report.skipped.is_empty() {
        eprintln!("{} warning(s)", report.skipped.len());
    }

    let mut settings = tracker_kv(&r.tracker);
    settings.set("run.input", args.root.display());
    settings.set("run.oracle", args.oracle);
    write_manifest("bench", &args.common, r.seed, settings, vec![("total".into(), wall)])
}

fn write_log(path: &Path, outcomes: &[(&str, &TrainOutcome)]) -> Result<()> {
    let mut text = String::from("branch,epoch,train_loss,val_loss\n");
    for (branch, o) in outcomes {
        for e in &o.log {
            text.push_str(&format!("{branch},{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut r = resolve(&args.common, &args.tracker)?;
    if let Some(e) = args.epochs {
        r.train.max_epochs = e;
    }
    if let Some(p) = args.patience {
        r.train.patience = p;
    }
    if let Some(lr) = args.lr {
        r.train.adam.learning_rate = lr;
    }
    r.train.validate()?;
    let kind = r.tracker.map_types[0];

    let start = Instant::now();
    let mut pairs = Vec::new();
    let mut dirs = Vec::new();
    for root in &args.roots {
        dirs.extend(sequence_dirs(root)?);
    }
    for dir in &dirs {
        let task = match Task::load(dir) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("skipping {}: {e}", dir.display());
                continue;
            }
        };
        let backbone = build_backbone(&r.tracker, &task.name, &task.frames)?;
        pairs.extend(pairs_for_sequence(&task.frames, &task.truths, backbone.as_ref(), kind)?);
    }
    if pairs.len() < 2 {
        return Err(usage(format!("need at least 2 training pairs, found {}", pairs.len())));
    }
    let data_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let (pos, neg) = rayon::join(
        || train_net(&pairs, &r.train, Polarity::Positive),
        || train_net(&pairs, &r.train, Polarity::Negative),
    );
    let (pos, neg) = (pos?, neg?);
    let train_secs = start.elapsed().as_secs_f64();

    let out = &args.common.output;
    fs::create_dir_all(out)?;
    let pos_path = out.join("pos.fwn1");
    let neg_path = out.join("neg.fwn1");
    save_net(&pos_path, &pos.net)?;
    save_net(&neg_path, &neg.net)?;
    write_log(&out.join("train_log.csv"), &[("positive", &pos), ("negative", &neg)])?;
    for (branch, o) in [("positive", &pos), ("negative", &neg)] {
        println!(
            "{branch}: {} pairs, best epoch {} (val {:.6} -> {:.6})",
            pairs.len(),
            o.best_epoch,
            o.log[0].val_loss,
            o.best_val_loss()
        );
    }

    // The manifest doubles as a tracking config pointing at the new checkpoints.
    let mut tracker = r.tracker.clone();
    tracker.net_pos = Some(pos_path);
    tracker.net_neg = Some(neg_path);
    let mut settings = tracker_kv(&tracker);
    settings.merge(&train_kv(&r.train));
    settings.set(
        "run.input",
        args.roots.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","),
    );
    write_manifest(
        "train",
        &args.common,
        r.train.seed,
        settings,
        vec![("data".into(), data_secs), ("train".into(), train_secs)],
    )
}

pub fn gen(args: GenArgs) -> Result<()> {
    let out = &args.common.output;
    let seed = args.common.seed.unwrap_or(0);
    let mut specs: Vec<(String, SceneSpec)> = if let Some(path) = &args.spec {
        let mut spec = SceneSpec::load(path).with_context(|| format!("scene spec {}", path.display()))?;
        if let Some(s) = args.common.seed {
            spec.seed = s;
        }
        let name = args.name.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scene".into())
        });
        vec![(name, spec)]
    } else if args.suite {
        standard_suite(seed)
    } else if let Some(n) = args.random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| (format!("train_{:04}", i + 1), random_scene(&mut rng, args.frames)))
            .collect()
    } else {
        return Err(usage("gen needs one of --spec, --suite or --random N"));
    };
    specs.sort_by(|a, b| a.0.cmp(&b.0));

    let start = Instant::now();
    specs
        .par_iter()
        .map(|(name, spec)| -> Result<()> {
            let seq = spec.render()?;
            write_otb(&seq, out, name)?;
            Ok(())
        })
        .collect::<Result<Vec<_>>>()?;
    fs::write(
        out.join("scenes.json"),
        serde_json::to_string_pretty(&specs.iter().map(|(n, s)| (n, s)).collect::<Vec<_>>())? + "\n",
    )?;
    println!("wrote {} sequence(s) to {}", specs.len(), out.display());

    let mut settings = KvFile::default();
    settings.set("run.scenes", specs.len());
    if let Some(p) = &args.spec {
        settings.set("run.input", p.display());
    }
    write_manifest(
        "gen",
        &args.common,
        seed,
        settings,
        vec![("render".into(), start.elapsed().as_secs_f64())],
    )
}
