//! Run configuration: defaults, overridden by a TOML file, overridden by
//! `key=value` flags. Keys are namespaced per module; unknown keys are errors.

use std::path::Path;

use crate::align::TrainConfig;
use crate::error::{Error, Result};
use crate::foveation::FoveationConfig;
use crate::retrieval::Metric;
use crate::sas::SamplingConfig;

/// Every key accepted by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "seed",
    "jobs",
    "sampling.k",
    "sampling.tau",
    "sampling.gamma",
    "sampling.strategy",
    "foveation.bg_sigma",
    "foveation.sigma_max",
    "foveation.r_max",
    "foveation.pyramid_levels",
    "manifold.curvature",
    "train.learning_rate",
    "train.weight_decay",
    "train.epochs",
    "train.batch_size",
    "train.t",
    "embedding.dim",
    "retrieval.metric",
    "retrieval.ks",
    "dissociation.tau_lo",
    "dissociation.tau_hi",
    "synth.count",
    "synth.width",
    "synth.height",
    "synth.max_blobs",
    "synth.pairs",
    "synth.holdout",
    "synth.pair_dim",
    "synth.noise",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub max_blobs: usize,
    pub pairs: usize,
    pub holdout: usize,
    pub pair_dim: usize,
    pub noise: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            count: 20,
            width: 64,
            height: 64,
            max_blobs: 3,
            pairs: 200,
            holdout: 50,
            pair_dim: 16,
            noise: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 means one per logical core.
    pub jobs: usize,
    pub sampling: SamplingConfig,
    pub foveation: FoveationConfig,
    pub curvature: f64,
    pub train: TrainConfig,
    /// Toy encoder output dimension (a perfect square).
    pub embedding_dim: usize,
    pub metric: Metric,
    pub ks: Vec<usize>,
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub synth: SynthSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            sampling: SamplingConfig::default(),
            foveation: FoveationConfig::default(),
            curvature: 1.0,
            train: TrainConfig::default(),
            embedding_dim: 64,
            metric: Metric::Hyperbolic { curvature: 1.0 },
            ks: vec![1, 5],
            tau_lo: 0.3,
            tau_hi: 0.7,
            synth: SynthSettings::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

impl RunConfig {
    /// Builds a configuration from an optional TOML file and `key=value` overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply_toml(&text)?;
        }
        for item in overrides {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{item}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let mut flat = Vec::new();
        flatten("", &toml::Value::Table(table), &mut flat)?;
        for (k, v) in flat {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => {
                self.seed = parse(key, value)?;
                self.sampling.rng_seed = self.seed;
                self.train.rng_seed = self.seed;
            }
            "jobs" => self.jobs = parse(key, value)?,
            "sampling.k" => self.sampling.k = parse(key, value)?,
            "sampling.tau" => self.sampling.tau = parse(key, value)?,
            "sampling.gamma" => self.sampling.gamma = parse(key, value)?,
            "sampling.strategy" => self.sampling.strategy = value.parse()?,
            "foveation.bg_sigma" => self.foveation.bg_sigma = parse(key, value)?,
            "foveation.sigma_max" => self.foveation.sigma_max = parse(key, value)?,
            "foveation.r_max" => {
                self.foveation.r_max = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "foveation.pyramid_levels" => self.foveation.pyramid_levels = parse(key, value)?,
            "manifold.curvature" => {
                self.curvature = parse(key, value)?;
                if let Metric::Hyperbolic { curvature } = &mut self.metric {
                    *curvature = self.curvature;
                }
            }
            "train.learning_rate" => self.train.learning_rate = parse(key, value)?,
            "train.weight_decay" => self.train.weight_decay = parse(key, value)?,
            "train.epochs" => self.train.epochs = parse(key, value)?,
            "train.batch_size" => self.train.batch_size = parse(key, value)?,
            "train.t" => self.train.t = parse(key, value)?,
            "embedding.dim" => self.embedding_dim = parse(key, value)?,
            "retrieval.metric" => {
                self.metric = match value.parse::<Metric>()? {
                    Metric::Hyperbolic { .. } => Metric::Hyperbolic {
                        curvature: self.curvature,
                    },
                    m => m,
                }
            }
            "retrieval.ks" => {
                self.ks = value
                    .split(',')
                    .map(|s| parse(key, s))
                    .collect::<Result<Vec<usize>>>()?
            }
            "dissociation.tau_lo" => self.tau_lo = parse(key, value)?,
            "dissociation.tau_hi" => self.tau_hi = parse(key, value)?,
            "synth.count" => self.synth.count = parse(key, value)?,
            "synth.width" => self.synth.width = parse(key, value)?,
            "synth.height" => self.synth.height = parse(key, value)?,
            "synth.max_blobs" => self.synth.max_blobs = parse(key, value)?,
            "synth.pairs" => self.synth.pairs = parse(key, value)?,
            "synth.holdout" => self.synth.holdout = parse(key, value)?,
            "synth.pair_dim" => self.synth.pair_dim = parse(key, value)?,
            "synth.noise" => self.synth.noise = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        self.foveation.validate()?;
        self.train.validate()?;
        if !(self.curvature > 0.0) || !self.curvature.is_finite() {
            return Err(Error::Config("manifold.curvature must be > 0".into()));
        }
        let g = (self.embedding_dim as f64).sqrt().round() as usize;
        if self.embedding_dim == 0 || g * g != self.embedding_dim {
            return Err(Error::Config("embedding.dim must be a positive perfect square".into()));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::Config("retrieval.ks must list cutoffs >= 1".into()));
        }
        if !(0.0 <= self.tau_lo && self.tau_lo < self.tau_hi && self.tau_hi <= 1.0) {
            return Err(Error::Config("need 0 <= dissociation.tau_lo < dissociation.tau_hi <= 1".into()));
        }
        if self.synth.width == 0 || self.synth.height == 0 || self.synth.max_blobs == 0 {
            return Err(Error::Config("synth sizes must be >= 1".into()));
        }
        if self.synth.pair_dim == 0 || !(self.synth.noise >= 0.0) {
            return Err(Error::Config("synth.pair_dim must be >= 1 and synth.noise >= 0".into()));
        }
        Ok(())
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) -> Result<()> {
    let text = match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out)?;
            }
            return Ok(());
        }
        toml::Value::Array(items) => items
            .iter()
            .map(|v| match v {
                toml::Value::Integer(i) => Ok(i.to_string()),
                _ => Err(Error::Config(format!("{prefix} must be a list of integers"))),
            })
            .collect::<Result<Vec<_>>>()?
            .join(","),
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Datetime(_) => {
            return Err(Error::Config(format!("{prefix}: datetimes are not accepted")));
        }
    };
    out.push((prefix.to_string(), text));
    Ok(())
}
