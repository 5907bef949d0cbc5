//! Experiment configuration files and setting resolution.
//!
//! A config file is a JSON object. Top-level keys apply to every command;
//! an object under a command's name (`"fit": {...}`) overrides them for
//! that command. Flags override both, and built-in defaults fill the rest.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A problem with the configuration itself (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub const COMMANDS: [&str; 7] = ["synth", "patches", "split", "fit", "transform", "train", "eval"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    CspVectors,
    LowVarianceDiscriminant,
    Rank1Planted,
    GaussianBlobs,
    HyperspectralCube,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    PaviaManMade,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitBasis {
    Original,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReducerKind {
    Cmp,
    Mpca,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PhiMeanArg {
    Class,
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Rank1,
    Centroid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    All,
    Train,
    Test,
}

/// Every setting a config file may carry. All optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSettings {
    pub kind: Option<SynthKind>,
    pub synth_params: Option<Value>,
    pub manifest: Option<PathBuf>,
    pub patch_size: Option<usize>,
    pub preset: Option<Preset>,
    pub positive_ids: Option<Vec<u32>>,
    pub archive: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub subset: Option<Subset>,
    pub per_class: Option<usize>,
    pub per_class_basis: Option<SplitBasis>,
    pub seed: Option<u64>,
    pub reducer: Option<ReducerKind>,
    pub k: Option<usize>,
    pub spatial: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub phi_mean: Option<PhiMeanArg>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub epsilon: Option<f64>,
    pub classifier: Option<ClassifierKind>,
    pub lr: Option<f64>,
    pub lambda: Option<f64>,
    pub inner_steps: Option<usize>,
    pub epochs: Option<usize>,
    pub model: Option<PathBuf>,
    pub reducer_model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Settings from `path` as seen by `command`, or empty settings without a
/// file.
pub fn load_settings(path: Option<&Path>, command: &str) -> anyhow::Result<FileSettings> {
    let Some(path) = path else {
        return Ok(FileSettings::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(top) = value else {
        return Err(config_error(format!("config {} must be a JSON object", path.display())));
    };
    let mut merged = Map::new();
    let mut section = None;
    for (key, v) in top {
        if key == command {
            section = Some(v);
        } else if !COMMANDS.contains(&key.as_str()) {
            merged.insert(key, v);
        }
    }
    match section {
        Some(Value::Object(s)) => merged.extend(s),
        Some(_) => return Err(config_error(format!("config section {command:?} must be an object"))),
        None => {}
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| config_error(format!("config {} ({command}): {e}", path.display())))
}

/// Flag, else file value, else `default`.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flag, else file value, else a config error naming the setting.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> anyhow::Result<T> {
    flag.or(file).ok_or_else(|| config_error(format!("missing required setting `{name}` (flag --{})", name.replace('_', "-"))))
}

/// Resolved settings echoed into a report, tagged with the tool version.
#[derive(Serialize)]
pub struct Echo<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(flatten)]
    pub settings: &'a T,
}

pub fn echo<T: Serialize>(command: &'static str, settings: &T) -> Value {
    serde_json::to_value(Echo { tool: "cmp", version: env!("CARGO_PKG_VERSION"), command, settings })
        .expect("settings serialize")
}
