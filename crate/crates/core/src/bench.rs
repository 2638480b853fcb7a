//! One-pass evaluation: annotation ingestion, precision and success curves,
//! multi-task averaging and throughput.
//!
//! All percentages are on a 0..100 scale. The first frame of a task is the
//! initialization and never enters a metric.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Backbone, FeatureExtractor, Frame};
use crate::geometry::{center_distance, iou, Rect};
use crate::tracker::{Tracker, TrackerConfig, WeightNets};

pub const PRECISION_THRESHOLDS: usize = 51;
pub const SUCCESS_THRESHOLDS: usize = 21;
pub const PRECISION_AT: usize = 20;

const ANNOTATION_FILE: &str = "groundtruth_rect.txt";
const IMAGE_DIR: &str = "img";

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceAnnotation {
    pub name: String,
    pub truths: Vec<Rect>,
    pub images: Vec<PathBuf>,
}

/// A task held in memory.
#[derive(Debug, Clone)]
pub struct Task {
    pub name: String,
    pub frames: Vec<Frame>,
    pub truths: Vec<Rect>,
}

impl Task {
    pub fn new(name: impl Into<String>, frames: Vec<Frame>, truths: Vec<Rect>) -> Result<Self> {
        let name = name.into();
        if frames.len() != truths.len() {
            return Err(Error::shape(
                format!("{} ground-truth rects in {name}", frames.len()),
                truths.len(),
            ));
        }
        if frames.len() < 2 {
            return Err(Error::Empty(format!("task {name} needs at least 2 frames")));
        }
        Ok(Task { name, frames, truths })
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let ann = load_annotations(dir)?;
        let frames = ann
            .images
            .iter()
            .enumerate()
            .map(|(i, p)| Frame::load(p, i))
            .collect::<Result<Vec<_>>>()?;
        Task::new(ann.name, frames, ann.truths)
    }
}

#[derive(Debug, Clone)]
pub enum TaskSource {
    Dir(PathBuf),
    Loaded(Task),
}

impl TaskSource {
    fn label(&self) -> String {
        match self {
            TaskSource::Dir(d) => dir_name(d),
            TaskSource::Loaded(t) => t.name.clone(),
        }
    }

    fn resolve(self) -> Result<Task> {
        match self {
            TaskSource::Dir(d) => Task::load(d),
            TaskSource::Loaded(t) => Ok(t),
        }
    }
}

fn dir_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn parse_number(field: &str, path: &Path, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("not a number: {field:?}"),
        })
}

/// Parses a top-left `x,y,w,h` line. Commas, tabs and spaces all separate.
pub fn parse_rect_line(text: &str, path: &Path, line: usize) -> Result<Rect> {
    let fields: Vec<&str> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("expected 4 fields, found {}", fields.len()),
        });
    }
    let mut v = [0.0; 4];
    for (slot, f) in v.iter_mut().zip(&fields) {
        *slot = parse_number(f, path, line)?;
    }
    Rect::from_top_left(v[0], v[1], v[2], v[3]).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })
}

pub fn parse_annotations(text: &str, path: &Path) -> Result<Vec<Rect>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_rect_line(l, path, i + 1))
        .collect()
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "jpg" | "jpeg" | "png"))
        .unwrap_or(false)
}

/// Sorted `.jpg`/`.jpeg`/`.png` files under `<dir>/img`.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut images: Vec<PathBuf> = fs::read_dir(dir.as_ref().join(IMAGE_DIR))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| is_image(p))
        .collect();
    images.sort();
    Ok(images)
}

/// Reads `groundtruth_rect.txt` and the sorted frame list under `img/`.
pub fn load_annotations(dir: impl AsRef<Path>) -> Result<SequenceAnnotation> {
    let dir = dir.as_ref();
    let gt = dir.join(ANNOTATION_FILE);
    let truths = parse_annotations(&fs::read_to_string(&gt)?, &gt)?;
    let images = list_images(dir)?;
    if images.len() != truths.len() {
        return Err(Error::shape(
            format!("{} images in {}", truths.len(), dir.display()),
            images.len(),
        ));
    }
    if truths.len() < 2 {
        return Err(Error::Empty(format!("{} has fewer than 2 frames", dir.display())));
    }
    Ok(SequenceAnnotation {
        name: dir_name(dir),
        truths,
        images,
    })
}

fn check_lengths(preds: &[Rect], truths: &[Rect]) -> Result<()> {
    if preds.len() != truths.len() {
        return Err(Error::shape(format!("{} predictions", truths.len()), preds.len()));
    }
    if preds.is_empty() {
        return Err(Error::Empty("no frames to evaluate".into()));
    }
    Ok(())
}

fn percent(hits: usize, n: usize) -> f64 {
    100.0 * hits as f64 / n as f64
}

/// Percentage of frames whose center error is at most `t` px, for t = 0..=50.
/// Returns the curve and its value at 20 px.
pub fn precision_curve(preds: &[Rect], truths: &[Rect]) -> Result<(Vec<f64>, f64)> {
    check_lengths(preds, truths)?;
    let d: Vec<f64> = preds.iter().zip(truths).map(|(p, t)| center_distance(p, t)).collect();
    let curve: Vec<f64> = (0..PRECISION_THRESHOLDS)
        .map(|t| percent(d.iter().filter(|&&x| x <= t as f64).count(), d.len()))
        .collect();
    assert!(curve.windows(2).all(|w| w[0] <= w[1]), "precision curve must not decrease");
    let score = curve[PRECISION_AT];
    Ok((curve, score))
}

pub fn success_threshold(i: usize) -> f64 {
    i as f64 / (SUCCESS_THRESHOLDS - 1) as f64
}

/// Percentage of frames with IoU at least u, for u = 0, 0.05, ..., 1.
/// Returns the curve and its mean (the AUC).
pub fn success_curve(preds: &[Rect], truths: &[Rect]) -> Result<(Vec<f64>, f64)> {
    check_lengths(preds, truths)?;
    let o: Vec<f64> = preds.iter().zip(truths).map(|(p, t)| iou(p, t)).collect();
    let curve: Vec<f64> = (0..SUCCESS_THRESHOLDS)
        .map(|i| percent(o.iter().filter(|&&x| x >= success_threshold(i)).count(), o.len()))
        .collect();
    assert!(curve.windows(2).all(|w| w[0] >= w[1]), "success curve must not increase");
    let auc = curve.iter().sum::<f64>() / curve.len() as f64;
    Ok((curve, auc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub name: String,
    pub frames: usize,
    pub precision_curve: Vec<f64>,
    pub precision_score: f64,
    pub success_curve: Vec<f64>,
    pub success_score: f64,
    /// Frames per second of tracking alone. Not part of `results.json`.
    #[serde(skip)]
    pub fps: f64,
}

impl EvalResult {
    pub fn evaluate(name: impl Into<String>, preds: &[Rect], truths: &[Rect]) -> Result<Self> {
        let (precision_curve, precision_score) = precision_curve(preds, truths)?;
        let (success_curve, success_score) = success_curve(preds, truths)?;
        Ok(EvalResult {
            name: name.into(),
            frames: preds.len(),
            precision_curve,
            precision_score,
            success_curve,
            success_score,
            fps: 0.0,
        })
    }

    /// Uniform mean over tasks; fps is total frames over total tracking time.
    pub fn average(results: &[EvalResult], seconds: &[f64]) -> Result<Self> {
        let n = results.len();
        if n == 0 {
            return Err(Error::Empty("no task results to average".into()));
        }
        let mean_curve = |f: fn(&EvalResult) -> &Vec<f64>| {
            let len = f(&results[0]).len();
            (0..len)
                .map(|i| results.iter().map(|r| f(r)[i]).sum::<f64>() / n as f64)
                .collect::<Vec<f64>>()
        };
        let frames: usize = results.iter().map(|r| r.frames).sum();
        let secs: f64 = seconds.iter().sum();
        Ok(EvalResult {
            name: "average".into(),
            frames,
            precision_curve: mean_curve(|r| &r.precision_curve),
            precision_score: results.iter().map(|r| r.precision_score).sum::<f64>() / n as f64,
            success_curve: mean_curve(|r| &r.success_curve),
            success_score: results.iter().map(|r| r.success_score).sum::<f64>() / n as f64,
            fps: if secs > 0.0 { frames as f64 / secs } else { 0.0 },
        })
    }
}

/// Produces predictions for frames `1..` of a task.
pub trait SequenceRunner: Sync {
    fn run(&self, task: &Task) -> Result<Vec<Rect>>;

    /// Setup that should stay outside the timed region (e.g. reading tensors).
    fn prepare(&self, _task: &Task) -> Result<()> {
        Ok(())
    }
}

/// Returns the ground truth itself.
pub struct OracleRunner;

impl SequenceRunner for OracleRunner {
    fn run(&self, task: &Task) -> Result<Vec<Rect>> {
        Ok(task.truths[1..].to_vec())
    }
}

/// Runs a fresh tracker per task.
pub struct TrackerRunner {
    pub config: TrackerConfig,
    pub nets: Option<Arc<WeightNets>>,
    /// Shared extractor; when absent, one is built from the config per task.
    pub backbone: Option<Arc<dyn FeatureExtractor>>,
}

impl TrackerRunner {
    fn backbone_for(&self, task: &Task) -> Result<Arc<dyn FeatureExtractor>> {
        if let Some(b) = &self.backbone {
            return Ok(b.clone());
        }
        let mut b = self.config.backbone.build(Some(&task.name))?;
        if let Backbone::Tensors(t) = &mut b {
            t.preload(task.frames.iter().map(|f| f.index))?;
        }
        Ok(Arc::new(b))
    }
}

impl SequenceRunner for TrackerRunner {
    fn run(&self, task: &Task) -> Result<Vec<Rect>> {
        let backbone = self.backbone_for(task)?;
        let tracker = Tracker::new(self.config.clone(), backbone, self.nets.clone())?;
        tracker.track_sequence(&task.frames, &task.truths[0])
    }
}

#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub result: EvalResult,
    /// The first-frame rect the run started from.
    pub init: Rect,
    pub predictions: Vec<Rect>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct OpeReport {
    pub tasks: Vec<TaskOutcome>,
    pub average: EvalResult,
    /// `(task, reason)` for every task that could not be evaluated.
    pub skipped: Vec<(String, String)>,
}

fn run_one(source: TaskSource, runner: &dyn SequenceRunner) -> std::result::Result<TaskOutcome, (String, String)> {
    let label = source.label();
    let fail = |e: Error| (label.clone(), e.to_string());
    let task = source.resolve().map_err(fail)?;
    runner.prepare(&task).map_err(fail)?;
    let start = Instant::now();
    let predictions = runner.run(&task).map_err(fail)?;
    let seconds = start.elapsed().as_secs_f64();
    let mut result = EvalResult::evaluate(&task.name, &predictions, &task.truths[1..]).map_err(fail)?;
    result.fps = if seconds > 0.0 {
        result.frames as f64 / seconds
    } else {
        0.0
    };
    Ok(TaskOutcome {
        result,
        init: task.truths[0],
        predictions,
        seconds,
    })
}

/// Evaluates every task, in parallel when `jobs` allows. Tasks that fail to
/// load or run are reported in `skipped`; output order follows input order.
pub fn run_ope(tasks: Vec<TaskSource>, runner: &dyn SequenceRunner, jobs: Option<usize>) -> Result<OpeReport> {
    if tasks.is_empty() {
        return Err(Error::Empty("no tasks".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let outcomes: Vec<_> = pool.install(|| tasks.into_par_iter().map(|t| run_one(t, runner)).collect());

    let mut done = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(t) => done.push(t),
            Err((name, why)) => {
                log::warn!("skipping task {name}: {why}");
                skipped.push((name, why));
            }
        }
    }
    let results: Vec<EvalResult> = done.iter().map(|t| t.result.clone()).collect();
    let seconds: Vec<f64> = done.iter().map(|t| t.seconds).collect();
    let average = EvalResult::average(&results, &seconds)?;
    Ok(OpeReport {
        tasks: done,
        average,
        skipped,
    })
}

#[derive(Serialize)]
struct ResultsFile<'a> {
    tasks: Vec<&'a EvalResult>,
    average: &'a EvalResult,
    skipped: Vec<Skipped<'a>>,
}

#[derive(Serialize)]
struct Skipped<'a> {
    task: &'a str,
    reason: &'a str,
}

#[derive(Serialize)]
struct TimingFile<'a> {
    tasks: Vec<TaskTiming<'a>>,
    average_fps: f64,
}

#[derive(Serialize)]
struct TaskTiming<'a> {
    task: &'a str,
    frames: usize,
    seconds: f64,
    fps: f64,
}

impl OpeReport {
    /// Curves and scores only, so the file is identical across runs.
    pub fn results_json(&self) -> Result<String> {
        let file = ResultsFile {
            tasks: self.tasks.iter().map(|t| &t.result).collect(),
            average: &self.average,
            skipped: self
                .skipped
                .iter()
                .map(|(task, reason)| Skipped { task, reason })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn timing_json(&self) -> Result<String> {
        let file = TimingFile {
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskTiming {
                    task: &t.result.name,
                    frames: t.result.frames,
                    seconds: t.seconds,
                    fps: t.result.fps,
                })
                .collect(),
            average_fps: self.average.fps,
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    /// Rows of `task,curve,threshold,value`.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("task,curve,threshold,value\n");
        for r in self.tasks.iter().map(|t| &t.result).chain([&self.average]) {
            for (i, v) in r.precision_curve.iter().enumerate() {
                writeln!(out, "{},precision,{i},{v}", r.name).expect("string write");
            }
            for (i, v) in r.success_curve.iter().enumerate() {
                writeln!(out, "{},success,{},{v}", r.name, success_threshold(i)).expect("string write");
            }
        }
        out
    }
}

/// One `x,y,w,h` top-left line per rect.
pub fn format_predictions(rects: &[Rect]) -> String {
    let mut out = String::new();
    for r in rects {
        let [x, y, w, h] = r.to_top_left();
        writeln!(out, "{x},{y},{w},{h}").expect("string write");
    }
    out
}

const SVG_W: f64 = 480.0;
const SVG_H: f64 = 360.0;
const MARGIN: f64 = 50.0;

fn plot_svg(title: &str, x_label: &str, x_max: f64, series: &[(&str, Vec<(f64, f64)>)], marker_x: Option<f64>) -> String {
    let pw = SVG_W - 2.0 * MARGIN;
    let ph = SVG_H - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + x / x_max * pw;
    let py = |y: f64| SVG_H - MARGIN - y / 100.0 * ph;
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" font-family="sans-serif" font-size="12">"#
    )
    .expect("string write");
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).expect("string write");
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, SVG_W / 2.0)
        .expect("string write");
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .expect("string write");
    for k in 0..=5 {
        let v = 20.0 * k as f64;
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v}</text>"#, MARGIN - 6.0, py(v) + 4.0)
            .expect("string write");
        let xv = x_max * k as f64 / 5.0;
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(xv),
            SVG_H - MARGIN + 16.0,
            (xv * 100.0).round() / 100.0
        )
        .expect("string write");
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, SVG_W / 2.0, SVG_H - 10.0)
        .expect("string write");
    if let Some(m) = marker_x {
        writeln!(
            s,
            r#"<line x1="{0}" y1="{MARGIN}" x2="{0}" y2="{1}" stroke="red" stroke-dasharray="4 3"/>"#,
            px(m),
            SVG_H - MARGIN
        )
        .expect("string write");
    }
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = palette[i % palette.len()];
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        )
        .expect("string write");
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#,
            MARGIN + 8.0,
            MARGIN + 16.0 + 14.0 * i as f64
        )
        .expect("string write");
    }
    s.push_str("</svg>\n");
    s
}

/// Precision plot with the 20 px threshold marked.
pub fn precision_svg(results: &[&EvalResult]) -> String {
    let series: Vec<(&str, Vec<(f64, f64)>)> = results
        .iter()
        .map(|r| {
            let pts = r.precision_curve.iter().enumerate().map(|(i, v)| (i as f64, *v)).collect();
            (r.name.as_str(), pts)
        })
        .collect();
    plot_svg(
        "Precision",
        "location error threshold (px)",
        (PRECISION_THRESHOLDS - 1) as f64,
        &series,
        Some(PRECISION_AT as f64),
    )
}

pub fn success_svg(results: &[&EvalResult]) -> String {
    let series: Vec<(&str, Vec<(f64, f64)>)> = results
        .iter()
        .map(|r| {
            let pts = r
                .success_curve
                .iter()
                .enumerate()
                .map(|(i, v)| (success_threshold(i), *v))
                .collect();
            (r.name.as_str(), pts)
        })
        .collect();
    plot_svg("Success", "overlap threshold", 1.0, &series, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(x: f64, y: f64, w: f64, h: f64) -> Rect {
        Rect::new(x, y, w, h).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let t = vec![r(10.0, 10.0, 5.0, 5.0), r(20.0, 30.0, 8.0, 4.0)];
        let (p, ps) = precision_curve(&t, &t).unwrap();
        assert!(p.iter().all(|v| *v == 100.0));
        assert_eq!(ps, 100.0);
        let (_, auc) = success_curve(&t, &t).unwrap();
        assert_eq!(auc, 100.0);
    }

    #[test]
    fn fixed_offset_of_25_px() {
        let t: Vec<Rect> = (0..5).map(|i| r(100.0 + i as f64, 50.0, 10.0, 10.0)).collect();
        let p: Vec<Rect> = t.iter().map(|x| x.translated(15.0, 20.0)).collect();
        let (c, score) = precision_curve(&p, &t).unwrap();
        assert_eq!(score, 0.0);
        assert_eq!(c[24], 0.0);
        assert_eq!(c[25], 100.0);
    }

    #[test]
    fn disjoint_predictions() {
        let t = vec![r(10.0, 10.0, 4.0, 4.0); 3];
        let p = vec![r(100.0, 100.0, 4.0, 4.0); 3];
        let (c, auc) = success_curve(&p, &t).unwrap();
        assert_eq!(c[0], 100.0);
        assert!(c[1..].iter().all(|v| *v == 0.0));
        assert!((auc - 100.0 / 21.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_and_empty() {
        let t = vec![r(1.0, 1.0, 1.0, 1.0)];
        assert!(precision_curve(&t, &[]).is_err());
        assert!(success_curve(&[], &[]).is_err());
    }

    #[test]
    fn annotation_lines() {
        let p = Path::new("gt.txt");
        assert_eq!(parse_rect_line("10,20,30,40", p, 1).unwrap(), r(25.0, 40.0, 30.0, 40.0));
        assert_eq!(parse_rect_line("10\t20\t30\t40", p, 1).unwrap(), r(25.0, 40.0, 30.0, 40.0));
        assert_eq!(parse_rect_line(" 10 20 30.5 40 ", p, 1).unwrap(), r(25.25, 40.0, 30.5, 40.0));
        match parse_rect_line("10,20,0,40", p, 7) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        assert!(parse_rect_line("10,20,30", p, 1).is_err());
        assert!(parse_rect_line("10,x,30,40", p, 1).is_err());
        match parse_annotations("1,1,2,2\n\n1,1,2,nan\n", p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn averaging_two_tasks() {
        let t = vec![r(10.0, 10.0, 4.0, 4.0); 2];
        let far = vec![r(200.0, 200.0, 4.0, 4.0); 2];
        let a = EvalResult::evaluate("a", &t, &t).unwrap();
        let b = EvalResult::evaluate("b", &far, &t).unwrap();
        let avg = EvalResult::average(&[a, b], &[1.0, 1.0]).unwrap();
        assert_eq!(avg.precision_score, 50.0);
        assert_eq!(avg.fps, 2.0);
        assert!(EvalResult::average(&[], &[]).is_err());
    }

    #[test]
    fn oracle_runner_scores_perfectly() {
        let frames: Vec<Frame> = (0..4).map(|i| Frame::filled(32, 32, [0, 0, 0], i).unwrap()).collect();
        let truths: Vec<Rect> = (0..4).map(|i| r(10.0 + i as f64, 12.0, 6.0, 6.0)).collect();
        let task = Task::new("t", frames, truths).unwrap();
        let rep = run_ope(vec![TaskSource::Loaded(task)], &OracleRunner, Some(1)).unwrap();
        assert_eq!(rep.average.precision_score, 100.0);
        assert_eq!(rep.average.success_score, 100.0);
        assert_eq!(rep.tasks[0].result.frames, 3);
    }

    #[test]
    fn prediction_lines_are_top_left() {
        assert_eq!(format_predictions(&[r(25.0, 40.0, 30.0, 40.0)]), "10,20,30,40\n");
    }

    fn rect_strategy() -> impl Strategy<Value = Rect> {
        (0.0..200.0f64, 0.0..200.0f64, 1.0..60.0f64, 1.0..60.0f64).prop_map(|(x, y, w, h)| r(x, y, w, h))
    }

    proptest! {
        #[test]
        fn curves_are_symmetric_and_auc_is_the_mean(
            pairs in prop::collection::vec((rect_strategy(), rect_strategy()), 1..30)
        ) {
            let (p, t): (Vec<Rect>, Vec<Rect>) = pairs.into_iter().unzip();
            prop_assert_eq!(precision_curve(&p, &t).unwrap(), precision_curve(&t, &p).unwrap());
            let (c, auc) = success_curve(&p, &t).unwrap();
            prop_assert_eq!((c.clone(), auc), success_curve(&t, &p).unwrap());
            prop_assert!((auc - c.iter().sum::<f64>() / 21.0).abs() < 1e-12);
            prop_assert!(c.iter().all(|v| (0.0..=100.0).contains(v)));
        }
    }
}
