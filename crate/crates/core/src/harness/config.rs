use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::learner::{Ablation, NetConfig, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Everything needed to reproduce a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds network init, exploration, replay sampling and episode resets.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    /// Write a checkpoint every this many episodes; `0` keeps only the final one.
    #[serde(default)]
    pub checkpoint_every: u64,
    pub env: EnvConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub nets: NetConfig,
    #[serde(default)]
    pub ablation: Ablation,
}

fn default_out_dir() -> String {
    "runs/latest".into()
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: default_out_dir(),
            checkpoint_every: 0,
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            nets: NetConfig::default(),
            ablation: Ablation::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        let located = |e: Error, section: &str| match e {
            Error::Config(m) | Error::InvalidArgument(m) | Error::NonFinite(m) => {
                Error::Config(locate(text, section, &m))
            }
            other => other,
        };
        cfg.train.validate().map_err(|e| located(e, "train"))?;
        cfg.nets.validate().map_err(|e| located(e, "nets"))?;
        cfg.env.build().map_err(|e| located(e, "env"))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| prefix_path(e, path))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Theory-lab grid and budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub n: Vec<usize>,
    pub states: usize,
    pub actions: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Largest policy-map count solved exhaustively; bigger cells hill-climb.
    pub exhaustive_budget: usize,
    pub envelope_trials: usize,
    pub envelope_max_len: usize,
    pub out_dir: String,
}

/// Hard cap on `exhaustive_budget`.
pub const MAX_EXHAUSTIVE_BUDGET: usize = 1 << 24;

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            n: vec![1, 2, 3],
            states: 2,
            actions: vec![4, 8],
            trials: 200,
            seed: 0,
            exhaustive_budget: 1 << 16,
            envelope_trials: 1000,
            envelope_max_len: 64,
            out_dir: "runs/lab".into(),
        }
    }
}

impl LabConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        let fail =
            |key: &str, why: &str| Err(Error::Config(locate(text, "", &format!("{key}: {why}"))));
        if cfg.n.is_empty() || cfg.n.contains(&0) {
            return fail("n", "needs at least one agent count, each >= 1");
        }
        if cfg.actions.is_empty() || cfg.actions.iter().any(|&a| a < 2) {
            return fail("actions", "needs at least one action count, each >= 2");
        }
        if cfg.states == 0 {
            return fail("states", "must be >= 1");
        }
        if cfg.trials == 0 {
            return fail("trials", "must be >= 1");
        }
        if cfg.envelope_max_len == 0 {
            return fail("envelope_max_len", "must be >= 1");
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| prefix_path(e, path))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn prefix_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
        Error::Config(format!("line {line}: {}", e.message()))
    })
}

/// Prefixes `message` (shaped `field: reason`) with the line that sets
/// `field` inside `[section]`, or with the section header when the field is
/// absent.
fn locate(text: &str, section: &str, message: &str) -> String {
    let field = message.split(':').next().unwrap_or("").trim();
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current != section {
            continue;
        }
        let key = line.split('=').next().unwrap_or("").trim();
        if !field.is_empty() && key == field {
            return format!(
                "line {}: {section_dot}{message}",
                i + 1,
                section_dot = dotted(section)
            );
        }
    }
    match header {
        Some(l) => format!("line {l}: {}{message}", dotted(section)),
        None => format!("line 1: {}{message}", dotted(section)),
    }
}

fn dotted(section: &str) -> String {
    if section.is_empty() {
        String::new()
    } else {
        format!("{section}.")
    }
}
