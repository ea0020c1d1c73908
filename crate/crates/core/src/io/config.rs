//! Flat `key=value` configuration text with dotted section prefixes, e.g.
//!
//! ```text
//! # comments and blank lines are ignored
//! unit.kind=proedgeshuffle
//! unit.ratio=4
//! backbone.kind=edgeconv_stack
//! train.steps=200
//! ```
//!
//! List values are comma-separated. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pipeline::{
    synthetic_dataset, BackboneKind, BackboneSpec, ModelSpec, Sample, SyntheticShape, TrainConfig,
};
use crate::tensor::AdamConfig;
use crate::units::{ExpansionSpec, IndexMode, RegressionMode, UnitKind};

pub const MODEL_KEYS: &[&str] = &[
    "backbone.kind",
    "backbone.depth",
    "backbone.width",
    "unit.kind",
    "unit.ratio",
    "unit.width",
    "unit.k",
    "unit.index_mode",
    "unit.regression",
    "unit.branch_hidden",
    "unit.branch_out",
    "unit.edge_depth",
];

pub const TRAIN_KEYS: &[&str] = &[
    "train.steps",
    "train.batch",
    "train.seed",
    "train.lr",
    "train.beta1",
    "train.beta2",
    "train.eps",
];

pub const DATA_KEYS: &[&str] = &[
    "data.shapes",
    "data.n",
    "data.train_per_shape",
    "data.test_per_shape",
    "data.seed",
    "data.test_seed",
];

pub const COMPARE_KEYS: &[&str] = &[
    "compare.units",
    "compare.backbones",
    "compare.index_modes",
    "compare.regression_modes",
    "compare.seeds",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(err("empty key".into()));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(err(format!("duplicate key `{k}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parsed value of `key`, if present.
    pub fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::invalid(format!("`{key}`: cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn value_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.value(key)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.value(key)?
            .ok_or_else(|| Error::invalid(format!("missing required key `{key}`")))
    }

    /// Comma-separated list value of `key`, if present.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        let Some(v) = self.get(key) else { return Ok(None) };
        let items = v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| Error::invalid(format!("`{key}`: cannot parse `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if items.is_empty() {
            return Err(Error::invalid(format!("`{key}` is an empty list")));
        }
        Ok(Some(items))
    }

    /// Fails on the first key not listed in any of `allowed`.
    pub fn reject_unknown(&self, allowed: &[&[&str]]) -> Result<()> {
        for k in self.keys() {
            if !allowed.iter().any(|set| set.contains(&k)) {
                return Err(Error::invalid(format!("unknown config key `{k}`")));
            }
        }
        Ok(())
    }

    /// Canonical text: one `key=value` per line in key order.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

pub fn model_spec_to_kv(spec: &ModelSpec, out: &mut KvConfig) {
    let (b, u) = (&spec.backbone, &spec.unit);
    out.set("backbone.kind", b.kind);
    out.set("backbone.depth", b.depth);
    out.set("backbone.width", b.width);
    out.set("unit.kind", u.kind);
    out.set("unit.ratio", u.ratio);
    out.set("unit.width", u.width);
    out.set("unit.k", u.k);
    out.set("unit.index_mode", u.index_mode);
    out.set("unit.regression", u.regression_mode);
    out.set("unit.branch_hidden", u.branch_hidden);
    out.set("unit.branch_out", u.branch_out);
    out.set("unit.edge_depth", u.edge_depth);
}

/// Reads `backbone.*` and `unit.*`. `unit.kind` and `unit.ratio` are
/// required; everything else falls back to the documented defaults.
pub fn model_spec_from_kv(cfg: &KvConfig) -> Result<ModelSpec> {
    let kind: UnitKind = cfg.required("unit.kind")?;
    let width = cfg.value_or("backbone.width", 32)?;
    let mut unit = ExpansionSpec::new(kind, cfg.required("unit.ratio")?, cfg.value_or("unit.width", width)?, cfg.value_or("unit.k", 8)?);
    unit.index_mode = cfg.value_or("unit.index_mode", unit.index_mode)?;
    unit.regression_mode = cfg.value_or("unit.regression", unit.regression_mode)?;
    unit.branch_hidden = cfg.value_or("unit.branch_hidden", unit.width)?;
    unit.branch_out = cfg.value_or("unit.branch_out", unit.width)?;
    unit.edge_depth = cfg.value_or("unit.edge_depth", 1)?;
    let spec = ModelSpec {
        backbone: BackboneSpec {
            kind: cfg.value_or("backbone.kind", BackboneKind::EdgeConvStack)?,
            depth: cfg.value_or("backbone.depth", 2)?,
            width,
        },
        unit,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn train_config_to_kv(cfg: &TrainConfig, out: &mut KvConfig) {
    model_spec_to_kv(&cfg.model, out);
    out.set("train.steps", cfg.steps);
    out.set("train.batch", cfg.batch_size);
    out.set("train.seed", cfg.seed);
    out.set("train.lr", cfg.adam.lr);
    out.set("train.beta1", cfg.adam.beta1);
    out.set("train.beta2", cfg.adam.beta2);
    out.set("train.eps", cfg.adam.eps);
}

pub fn train_config_from_kv(cfg: &KvConfig) -> Result<TrainConfig> {
    let d = AdamConfig::default();
    let out = TrainConfig {
        model: model_spec_from_kv(cfg)?,
        steps: cfg.value_or("train.steps", 500)?,
        batch_size: cfg.value_or("train.batch", 1)?,
        seed: cfg.value_or("train.seed", 1)?,
        adam: AdamConfig {
            lr: cfg.value_or("train.lr", d.lr)?,
            beta1: cfg.value_or("train.beta1", d.beta1)?,
            beta2: cfg.value_or("train.beta2", d.beta2)?,
            eps: cfg.value_or("train.eps", d.eps)?,
        },
    };
    out.validate()?;
    Ok(out)
}

/// Synthetic train/test split.
#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub shapes: Vec<SyntheticShape>,
    /// Input points per sample.
    pub n: usize,
    pub train_per_shape: usize,
    pub test_per_shape: usize,
    pub seed: u64,
    pub test_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            shapes: SyntheticShape::standard_set(),
            n: 64,
            train_per_shape: 1,
            test_per_shape: 1,
            seed: 0,
            test_seed: 1,
        }
    }
}

impl DataConfig {
    pub fn from_kv(cfg: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let seed = cfg.value_or("data.seed", d.seed)?;
        Ok(Self {
            shapes: cfg.list("data.shapes")?.unwrap_or(d.shapes),
            n: cfg.value_or("data.n", d.n)?,
            train_per_shape: cfg.value_or("data.train_per_shape", d.train_per_shape)?,
            test_per_shape: cfg.value_or("data.test_per_shape", d.test_per_shape)?,
            seed,
            test_seed: cfg.value_or("data.test_seed", seed.wrapping_add(1))?,
        })
    }

    pub fn to_kv(&self, out: &mut KvConfig) {
        let names: Vec<_> = self.shapes.iter().map(|s| s.name()).collect();
        out.set("data.shapes", names.join(","));
        out.set("data.n", self.n);
        out.set("data.train_per_shape", self.train_per_shape);
        out.set("data.test_per_shape", self.test_per_shape);
        out.set("data.seed", self.seed);
        out.set("data.test_seed", self.test_seed);
    }

    pub fn build(&self, ratio: usize) -> Result<(Vec<Sample>, Vec<Sample>)> {
        if self.shapes.is_empty() || self.train_per_shape == 0 || self.test_per_shape == 0 {
            return Err(Error::invalid("dataset needs at least one shape and one sample per split"));
        }
        Ok((
            synthetic_dataset(&self.shapes, self.train_per_shape, self.n, ratio, self.seed)?,
            synthetic_dataset(&self.shapes, self.test_per_shape, self.n, ratio, self.test_seed)?,
        ))
    }
}

/// A comparison matrix: every combination of backbone, unit, index mode
/// and regression mode, trained on a shared budget and seed list.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareConfig {
    /// Shared model/training settings; kind and ablation fields are overridden per cell.
    pub base: TrainConfig,
    pub backbones: Vec<BackboneKind>,
    pub units: Vec<UnitKind>,
    pub index_modes: Vec<IndexMode>,
    /// `None` means each unit's own default regression.
    pub regression_modes: Vec<Option<RegressionMode>>,
    pub seeds: Vec<u64>,
    pub data: DataConfig,
}

fn regression_choice(s: &str) -> Result<Option<RegressionMode>> {
    if s == "default" {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

impl CompareConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvConfig::parse(text)?)
    }

    pub fn from_kv(cfg: &KvConfig) -> Result<Self> {
        cfg.reject_unknown(&[MODEL_KEYS, TRAIN_KEYS, DATA_KEYS, COMPARE_KEYS])?;
        let units: Vec<UnitKind> = cfg
            .list("compare.units")?
            .ok_or_else(|| Error::invalid("missing required key `compare.units`"))?;
        // the base spec is validated with the first unit filled in
        let mut base_kv = cfg.clone();
        base_kv.set("unit.kind", units[0]);
        let base = train_config_from_kv(&base_kv)?;
        let regression_modes = match cfg.get("compare.regression_modes") {
            None => vec![cfg.value::<RegressionMode>("unit.regression")?],
            Some(v) => v
                .split(',')
                .map(|s| regression_choice(s.trim()))
                .collect::<Result<_>>()?,
        };
        Ok(Self {
            backbones: cfg.list("compare.backbones")?.unwrap_or(vec![base.model.backbone.kind]),
            index_modes: cfg.list("compare.index_modes")?.unwrap_or(vec![base.model.unit.index_mode]),
            seeds: cfg.list("compare.seeds")?.unwrap_or(vec![base.seed]),
            units,
            regression_modes,
            data: DataConfig::from_kv(cfg)?,
            base,
        })
    }

    /// Resolved settings, including every default.
    pub fn to_kv(&self) -> KvConfig {
        let mut out = KvConfig::new();
        train_config_to_kv(&self.base, &mut out);
        self.data.to_kv(&mut out);
        let join = |v: Vec<String>| v.join(",");
        out.set("compare.backbones", join(self.backbones.iter().map(|b| b.to_string()).collect()));
        out.set("compare.units", join(self.units.iter().map(|u| u.to_string()).collect()));
        out.set("compare.index_modes", join(self.index_modes.iter().map(|m| m.to_string()).collect()));
        out.set(
            "compare.regression_modes",
            join(
                self.regression_modes
                    .iter()
                    .map(|m| m.map_or("default".to_string(), |m| m.to_string()))
                    .collect(),
            ),
        );
        out.set("compare.seeds", join(self.seeds.iter().map(|s| s.to_string()).collect()));
        out
    }

    /// One training config per matrix cell, backbone-major.
    pub fn configs(&self) -> Result<Vec<TrainConfig>> {
        let mut out = Vec::new();
        for &backbone in &self.backbones {
            for &unit in &self.units {
                for &index_mode in &self.index_modes {
                    for &regression in &self.regression_modes {
                        let mut c = self.base.clone();
                        c.model.backbone.kind = backbone;
                        c.model.unit.kind = unit;
                        c.model.unit.index_mode = index_mode;
                        c.model.unit.regression_mode = regression.unwrap_or(unit.default_regression());
                        c.validate()?;
                        out.push(c);
                    }
                }
            }
        }
        Ok(out)
    }
}
