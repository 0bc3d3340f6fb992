//! Training configuration: flat `key = value` text files, with every field
//! overridable from the command line.

use std::collections::BTreeMap;
use std::path::Path;

use crate::curriculum::{initial_percentage, PacingConfig, PacingKind};
use crate::model::ModelKind;
use crate::zcount::ZCountTable;
use crate::{Error, Result};

/// The initial fraction: a number in (0, 1] or `auto`, meaning the share of
/// zero-count triples in the difficulty table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda0 {
    Auto,
    Fixed(f64),
}

impl Lambda0 {
    pub fn parse(s: &str) -> Result<Lambda0> {
        if s == "auto" {
            return Ok(Lambda0::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("lambda0: expected a number or 'auto', got '{s}'")))?;
        Ok(Lambda0::Fixed(v))
    }
}

impl std::fmt::Display for Lambda0 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lambda0::Auto => write!(f, "auto"),
            Lambda0::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// Pacing parameters as configured; `resolve` pins `auto` against a count
/// table to produce the concrete [`PacingConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacingSpec {
    pub kind: PacingKind,
    pub lambda0: Lambda0,
    pub t_grow: u32,
    pub p_exponent: f64,
}

impl PacingSpec {
    pub fn resolve(&self, table: &ZCountTable) -> Result<PacingConfig> {
        let lambda0 = match self.lambda0 {
            Lambda0::Auto => initial_percentage(table),
            Lambda0::Fixed(v) => v,
        };
        PacingConfig::new(self.kind, lambda0, self.t_grow, self.p_exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Negatives per positive (K).
    pub negatives: usize,
    /// Self-adversarial temperature in [0, 1].
    pub alpha: f64,
    pub gamma: f64,
    pub max_epochs: u32,
    pub dim: usize,
    pub seed: u64,
    pub pacing: PacingSpec,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Resample negatives that collide with known triples.
    pub filter_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-4,
            batch_size: 512,
            negatives: 64,
            alpha: 1.0,
            gamma: 9.0,
            max_epochs: 100,
            dim: 256,
            seed: 42,
            pacing: PacingSpec {
                kind: PacingKind::Geometric,
                lambda0: Lambda0::Auto,
                t_grow: 50,
                p_exponent: 2.0,
            },
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            filter_negatives: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.negatives == 0 {
            return Err(Error::Config("negatives must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.gamma <= 0.0 {
            return Err(Error::Config("gamma must be > 0".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be >= 1".into()));
        }
        if self.t_grow() < 1 {
            return Err(Error::Config("t_grow must be >= 1".into()));
        }
        if let Lambda0::Fixed(v) = self.pacing.lambda0 {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!(
                    "lambda0 must be in (0, 1] or 'auto', got {v}"
                )));
            }
        }
        if self.pacing.p_exponent < 1.0 {
            return Err(Error::Config("p_exponent must be >= 1".into()));
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0)
            || !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0)
            || self.adam_epsilon <= 0.0
        {
            return Err(Error::Config("adam parameters out of range".into()));
        }
        Ok(())
    }

    fn t_grow(&self) -> u32 {
        self.pacing.t_grow
    }

    /// Key/value view for manifests and logs.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("learning_rate".into(), self.learning_rate.to_string());
        m.insert("batch_size".into(), self.batch_size.to_string());
        m.insert("negatives".into(), self.negatives.to_string());
        m.insert("alpha".into(), self.alpha.to_string());
        m.insert("gamma".into(), self.gamma.to_string());
        m.insert("max_epochs".into(), self.max_epochs.to_string());
        m.insert("dim".into(), self.dim.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("pacing".into(), self.pacing.kind.to_string());
        m.insert("lambda0".into(), self.pacing.lambda0.to_string());
        m.insert("t_grow".into(), self.pacing.t_grow.to_string());
        m.insert("p_exponent".into(), self.pacing.p_exponent.to_string());
        m.insert("adam_beta1".into(), self.adam_beta1.to_string());
        m.insert("adam_beta2".into(), self.adam_beta2.to_string());
        m.insert("adam_epsilon".into(), self.adam_epsilon.to_string());
        m.insert("filter_negatives".into(), self.filter_negatives.to_string());
        m
    }
}

/// A config file: the model choice plus training parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut m = self.train.snapshot();
        m.insert("model".into(), self.model.name().to_string());
        m
    }

    /// Apply one `key = value` assignment; shared by the file parser and
    /// CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |k: &str, v: &str| Error::Config(format!("{k}: cannot parse '{v}'"));
        match key {
            "model" => self.model = ModelKind::parse(value)?,
            "learning_rate" => {
                self.train.learning_rate = value.parse().map_err(|_| bad(key, value))?
            }
            "batch_size" => self.train.batch_size = value.parse().map_err(|_| bad(key, value))?,
            "negatives" => self.train.negatives = value.parse().map_err(|_| bad(key, value))?,
            "alpha" => self.train.alpha = value.parse().map_err(|_| bad(key, value))?,
            "gamma" => self.train.gamma = value.parse().map_err(|_| bad(key, value))?,
            "max_epochs" => self.train.max_epochs = value.parse().map_err(|_| bad(key, value))?,
            "dim" => self.train.dim = value.parse().map_err(|_| bad(key, value))?,
            "seed" => self.train.seed = value.parse().map_err(|_| bad(key, value))?,
            "pacing" => self.train.pacing.kind = value.parse()?,
            "lambda0" => self.train.pacing.lambda0 = Lambda0::parse(value)?,
            "t_grow" => self.train.pacing.t_grow = value.parse().map_err(|_| bad(key, value))?,
            "p_exponent" => {
                self.train.pacing.p_exponent = value.parse().map_err(|_| bad(key, value))?
            }
            "adam_beta1" => self.train.adam_beta1 = value.parse().map_err(|_| bad(key, value))?,
            "adam_beta2" => self.train.adam_beta2 = value.parse().map_err(|_| bad(key, value))?,
            "adam_epsilon" => {
                self.train.adam_epsilon = value.parse().map_err(|_| bad(key, value))?
            }
            "filter_negatives" => {
                self.train.filter_negatives = value.parse().map_err(|_| bad(key, value))?
            }
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::TransEL2,
            train: TrainConfig::default(),
        }
    }
}

/// Parse `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = match raw_line.split_once('#') {
            Some((before, _)) => before.trim(),
            None => raw_line.trim(),
        };
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value'", idx + 1))
        })?;
        cfg.set(key.trim(), value.trim())?;
    }
    cfg.train.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
