//! Sweep configuration file.
//!
//! ```toml
//! [dataset]
//! kind = "blobs"          # blobs | moons | spiral | csv
//! n_per_split = 200       # samples in each of the train and test pools
//! classes = 2
//! noise = 1.0
//! seed = 0
//! shift = "rotate"        # rotate | translate | feature_noise | scale; optional
//! # train_path / test_path for kind = "csv"
//!
//! [model]
//! hidden_widths = [16]
//! dropout = 0.0
//! activation = "relu"     # relu | tanh
//! init = "he_normal"      # he_normal | xavier_uniform | zeros
//! bias = true
//!
//! [train]
//! optimizer = "sgd"       # sgd | rmsprop | adam
//! learning_rate = 0.1
//! batch_size = 32
//! weight_decay = 0.0
//! epochs = 20
//! seed = 0
//!
//! [grid.axes]             # values are strings or integers, never floats
//! learning_rate = ["0.1", "0.03"]
//! seed = [0, 1, 2]
//!
//! [measures]              # see MeasureConfig
//! [stats]                 # see StatsConfig
//! ```
//!
//! Grid axes override the matching `[model]`/`[train]` value. Known axes are
//! `learning_rate`, `batch_size`, `weight_decay`, `optimizer`, `seed`,
//! `dropout`, `depth`, `width` and `epochs`; `depth`/`width` rebuild
//! `hidden_widths` as `depth` layers of `width` units.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::{expand_grid, Assignment, HyperGrid};
use crate::error::{Error, Result};
use crate::measures::MeasureConfig;
use crate::sandbox::{
    make_dataset, Activation, DatasetBundle, DatasetKind, InitScheme, LabeledBatch, ModelSpec, OptimizerKind,
    ShiftKind, TrainConfig,
};
use crate::stats::StatsConfig;

pub const KNOWN_AXES: [&str; 9] =
    ["learning_rate", "batch_size", "weight_decay", "optimizer", "seed", "dropout", "depth", "width", "epochs"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainDefaults,
    pub grid: GridConfig,
    #[serde(default)]
    pub measures: MeasureConfig,
    #[serde(default)]
    pub stats: StatsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: String,
    pub n_per_split: usize,
    pub classes: usize,
    pub noise: f64,
    pub seed: u64,
    pub shift: Option<String>,
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: "blobs".into(),
            n_per_split: 200,
            classes: 2,
            noise: 1.0,
            seed: 0,
            shift: None,
            train_path: None,
            test_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_widths: Vec<usize>,
    pub dropout: f64,
    pub activation: Activation,
    pub init: InitScheme,
    pub bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_widths: vec![16],
            dropout: 0.0,
            activation: Activation::default(),
            init: InitScheme::default(),
            bias: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainDefaults {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainDefaults {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.1,
            batch_size: 32,
            weight_decay: 0.0,
            epochs: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub axes: BTreeMap<String, Vec<toml::Value>>,
}

fn token(axis: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Err(Error::Config(format!(
            "axis `{axis}` value {f} is a float; write it as a string such as \"{f}\" so the token is exact"
        ))),
        other => Err(Error::Config(format!("axis `{axis}` value {other} must be a string or integer"))),
    }
}

fn parse_token<T: FromStr>(axis: &str, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Config(format!("axis `{axis}` token `{tok}` does not parse")))
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Read, resolve CSV paths against the file's directory, and validate.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset.train_path, &mut cfg.dataset.test_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<HyperGrid> {
        let axes = self
            .grid
            .axes
            .iter()
            .map(|(name, vals)| {
                if !KNOWN_AXES.contains(&name.as_str()) {
                    return Err(Error::Config(format!("unknown grid axis `{name}`; known: {}", KNOWN_AXES.join(", "))));
                }
                Ok((name.clone(), vals.iter().map(|v| token(name, v)).collect::<Result<Vec<_>>>()?))
            })
            .collect::<Result<Vec<_>>>()?;
        HyperGrid::new(axes)
    }

    /// Every grid point resolves to a valid model and training config.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.measures.validate()?;
        let (input_dim, classes) = self.dataset_dims()?;
        for a in expand_grid(&grid) {
            let (m, t) = self.resolve(&a, 0, input_dim, classes)?;
            m.validate().map_err(|e| Error::Config(e.to_string()))?;
            t.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn dataset_kind(&self) -> Result<Option<DatasetKind>> {
        match self.dataset.kind.as_str() {
            "csv" => Ok(None),
            k => k.parse().map(Some).map_err(|e: Error| Error::Config(e.to_string())),
        }
    }

    fn dataset_dims(&self) -> Result<(usize, usize)> {
        match self.dataset_kind()? {
            Some(_) => Ok((2, self.dataset.classes)),
            None => {
                let ds = self.build_dataset()?;
                Ok((ds.input_dim(), ds.classes()))
            }
        }
    }

    pub fn build_dataset(&self) -> Result<DatasetBundle> {
        let d = &self.dataset;
        let bundle = match self.dataset_kind()? {
            Some(kind) => make_dataset(kind, d.n_per_split, d.classes, d.noise, d.seed)?,
            None => {
                let read = |p: &Option<PathBuf>, what: &str| -> Result<LabeledBatch> {
                    let p = p.as_ref().ok_or_else(|| Error::Config(format!("csv dataset needs {what}")))?;
                    let f = File::open(p).map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())))?;
                    LabeledBatch::read_csv(f, Some(d.classes))
                };
                DatasetBundle::from_pools(read(&d.train_path, "train_path")?, read(&d.test_path, "test_path")?, d.seed)?
            }
        };
        match &d.shift {
            Some(s) => bundle.with_shift(s.parse::<ShiftKind>().map_err(|e| Error::Config(e.to_string()))?),
            None => Ok(bundle),
        }
    }

    /// Model and training config of one grid point. `seed_offset` is added
    /// to the training seed.
    pub fn resolve(
        &self,
        assignment: &Assignment,
        seed_offset: u64,
        input_dim: usize,
        classes: usize,
    ) -> Result<(ModelSpec, TrainConfig)> {
        let t = &self.train;
        let mut train = TrainConfig {
            optimizer: t.optimizer,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            weight_decay: t.weight_decay,
            epochs: t.epochs,
            seed: t.seed,
        };
        let m = &self.model;
        let mut widths = m.hidden_widths.clone();
        let mut depth: Option<usize> = None;
        let mut width: Option<usize> = None;
        let mut dropout = m.dropout;
        for (axis, tok) in assignment {
            match axis.as_str() {
                "learning_rate" => train.learning_rate = parse_token(axis, tok)?,
                "batch_size" => train.batch_size = parse_token(axis, tok)?,
                "weight_decay" => train.weight_decay = parse_token(axis, tok)?,
                "optimizer" => train.optimizer = tok.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
                "seed" => train.seed = parse_token(axis, tok)?,
                "dropout" => dropout = parse_token(axis, tok)?,
                "depth" => depth = Some(parse_token(axis, tok)?),
                "width" => width = Some(parse_token(axis, tok)?),
                "epochs" => train.epochs = parse_token(axis, tok)?,
                other => return Err(Error::Config(format!("unknown grid axis `{other}`"))),
            }
        }
        if depth.is_some() || width.is_some() {
            let d = depth.unwrap_or(widths.len());
            let w = width.unwrap_or_else(|| widths.first().copied().unwrap_or(16));
            widths = vec![w; d];
        }
        train.seed = train.seed.wrapping_add(seed_offset);
        let spec = ModelSpec {
            input_dim,
            hidden_widths: widths,
            classes,
            dropout_p: dropout,
            init: m.init,
            activation: m.activation,
            bias: m.bias,
        };
        Ok((spec, train))
    }
}
