//! Flat `key = value` configuration files and run manifests.
//!
//! Keys mirror config field names, with nested structs joined by dots
//! (`sampler.sigma_xy`, `train.adam.learning_rate`). `#` starts a comment.
//! Keys under `run.` describe a past run and are ignored when applied, so a
//! manifest can be fed back as a config file.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::targetmaps::MapKind;
use crate::tracker::TrackerConfig;
use crate::weightnet::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: BTreeMap<String, String>,
}

impl KvFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(KvFile { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path)?, path)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn merge(&mut self, other: &KvFile) {
        for (k, v) in other.entries() {
            self.set(k, v);
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "{k} = {v}").expect("string write");
        }
        out
    }

    /// Applies every non-`run.` key to the two configs. Unknown keys are errors.
    pub fn apply(&self, tracker: &mut TrackerConfig, train: &mut TrainConfig) -> Result<()> {
        for (k, v) in self.entries() {
            if k.starts_with("run.") {
                continue;
            }
            let handled = if let Some(rest) = k.strip_prefix("train.") {
                set_train(train, rest, v)?
            } else {
                set_tracker(tracker, k, v)?
            };
            if !handled {
                return Err(Error::InvalidArgument(format!("unknown config key {k:?}")));
            }
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("{key} = {value:?}: {e}")))
}

fn parse_opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

fn list<T: Display>(items: &[T]) -> String {
    items.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

fn path_or_none(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into())
}

fn set_tracker(c: &mut TrackerConfig, key: &str, v: &str) -> Result<bool> {
    match key {
        "mode" => c.mode = parse(key, v)?,
        "eta" => c.eta = parse(key, v)?,
        "selection_fraction" => c.selection_fraction = parse(key, v)?,
        "offset" => c.offset = parse(key, v)?,
        "alpha" => c.alpha = parse(key, v)?,
        "map_types" => {
            c.map_types = v
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<MapKind>())
                .collect::<Result<_>>()?
        }
        "use_negative" => c.use_negative = parse(key, v)?,
        "net_input" => c.net_input = parse(key, v)?,
        "coverage" => c.coverage = parse(key, v)?,
        "net_pos" => c.net_pos = parse_opt_path(v),
        "net_neg" => c.net_neg = parse_opt_path(v),
        "sampler.sigma_xy" => c.sampler.sigma_xy = parse(key, v)?,
        "sampler.sigma_wh" => c.sampler.sigma_wh = parse(key, v)?,
        "sampler.num_candidates" => c.sampler.num_candidates = parse(key, v)?,
        "sampler.size_mean" => c.sampler.size_mean = parse(key, v)?,
        "sampler.seed" => c.sampler.seed = parse(key, v)?,
        "backbone.kind" => c.backbone.kind = parse(key, v)?,
        "backbone.out_rows" => c.backbone.out_rows = parse(key, v)?,
        "backbone.out_cols" => c.backbone.out_cols = parse(key, v)?,
        "backbone.out_channels" => c.backbone.out_channels = parse(key, v)?,
        "backbone.synthetic_seed" => c.backbone.synthetic_seed = parse(key, v)?,
        "backbone.input_size" => c.backbone.input_size = parse(key, v)?,
        "backbone.tensor_dir" => c.backbone.tensor_dir = parse_opt_path(v),
        _ => return Ok(false),
    }
    Ok(true)
}

fn set_train(c: &mut TrainConfig, key: &str, v: &str) -> Result<bool> {
    match key {
        "max_epochs" => c.max_epochs = parse(key, v)?,
        "patience" => c.patience = parse(key, v)?,
        "batch_size" => c.batch_size = parse(key, v)?,
        "validation_fraction" => c.validation_fraction = parse(key, v)?,
        "seed" => c.seed = parse(key, v)?,
        "hidden" => {
            c.hidden = if v == "default" {
                None
            } else {
                Some(
                    v.split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| parse(key, s.trim()))
                        .collect::<Result<_>>()?,
                )
            }
        }
        "adam.learning_rate" => c.adam.learning_rate = parse(key, v)?,
        "adam.beta1" => c.adam.beta1 = parse(key, v)?,
        "adam.beta2" => c.adam.beta2 = parse(key, v)?,
        "adam.epsilon" => c.adam.epsilon = parse(key, v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

pub fn tracker_kv(c: &TrackerConfig) -> KvFile {
    let mut kv = KvFile::default();
    kv.set("mode", c.mode);
    kv.set("eta", c.eta);
    kv.set("selection_fraction", c.selection_fraction);
    kv.set("offset", c.offset);
    kv.set("alpha", c.alpha);
    kv.set("map_types", list(&c.map_types));
    kv.set("use_negative", c.use_negative);
    kv.set("net_input", c.net_input);
    kv.set("coverage", c.coverage);
    kv.set("net_pos", path_or_none(&c.net_pos));
    kv.set("net_neg", path_or_none(&c.net_neg));
    kv.set("sampler.sigma_xy", c.sampler.sigma_xy);
    kv.set("sampler.sigma_wh", c.sampler.sigma_wh);
    kv.set("sampler.num_candidates", c.sampler.num_candidates);
    kv.set("sampler.size_mean", c.sampler.size_mean);
    kv.set("sampler.seed", c.sampler.seed);
    kv.set("backbone.kind", c.backbone.kind);
    kv.set("backbone.out_rows", c.backbone.out_rows);
    kv.set("backbone.out_cols", c.backbone.out_cols);
    kv.set("backbone.out_channels", c.backbone.out_channels);
    kv.set("backbone.synthetic_seed", c.backbone.synthetic_seed);
    kv.set("backbone.input_size", c.backbone.input_size);
    kv.set("backbone.tensor_dir", path_or_none(&c.backbone.tensor_dir));
    kv
}

pub fn train_kv(c: &TrainConfig) -> KvFile {
    let mut kv = KvFile::default();
    kv.set("train.max_epochs", c.max_epochs);
    kv.set("train.patience", c.patience);
    kv.set("train.batch_size", c.batch_size);
    kv.set("train.validation_fraction", c.validation_fraction);
    kv.set("train.seed", c.seed);
    kv.set(
        "train.hidden",
        c.hidden.as_ref().map(|h| list(h)).unwrap_or_else(|| "default".into()),
    );
    kv.set("train.adam.learning_rate", c.adam.learning_rate);
    kv.set("train.adam.beta1", c.adam.beta1);
    kv.set("train.adam.beta2", c.adam.beta2);
    kv.set("train.adam.epsilon", c.adam.epsilon);
    kv
}

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TIMING_FILE: &str = "timing.txt";

/// What a run did, with the fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// `(label, seconds)` pairs. Kept out of the manifest itself so that
    /// reruns produce identical manifests.
    pub timing: Vec<(String, f64)>,
    pub settings: KvFile,
}

impl RunManifest {
    pub fn to_kv(&self) -> KvFile {
        let mut kv = self.settings.clone();
        kv.set("run.subcommand", &self.subcommand);
        kv.set("run.config", path_or_none(&self.config_path));
        kv.set("run.seed", self.seed);
        kv.set("run.output", self.output_dir.display());
        kv
    }

    pub fn timing_kv(&self) -> KvFile {
        let mut kv = KvFile::default();
        for (label, secs) in &self.timing {
            kv.set(format!("seconds.{label}"), secs);
        }
        kv
    }

    /// Writes `manifest.txt` and `timing.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST_FILE), self.to_kv().to_text())?;
        fs::write(dir.join(TIMING_FILE), self.timing_kv().to_text())?;
        Ok(())
    }
}
