//! Flat `key=value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, lists are comma separated.
//! Keys that are absent keep their defaults; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corruption::CorruptionSpec;
use crate::error::{Error, Result};
use crate::training::{FineTuneConfig, PretrainSettings, SgdConfig, StackConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridTarget {
    /// Grid over pretraining SGD, scored by validation relative CE.
    Pretrain,
    /// Grid over fine-tuning SGD, scored by validation classification error.
    Finetune,
}

impl GridTarget {
    fn as_str(self) -> &'static str {
        match self {
            GridTarget::Pretrain => "pretrain",
            GridTarget::Finetune => "finetune",
        }
    }
}

impl FromStr for GridTarget {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "pretrain" => Ok(GridTarget::Pretrain),
            "finetune" => Ok(GridTarget::Finetune),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Class-uniform subset of the training file; `None` = all of it.
    pub train_size: Option<usize>,
    /// Class-uniform subset of the test file; `None` = all of it.
    pub test_size: Option<usize>,
    pub hidden_sizes: Vec<usize>,
    pub stage1_epochs: usize,
    /// Budget `N` for each stage after the first.
    pub stage_budget: usize,
    pub f_values: Vec<f64>,
    pub corruption_rate: f64,
    pub pretrain: SgdConfig,
    pub finetune: SgdConfig,
    pub patience: usize,
    pub max_finetune_epochs: usize,
    pub n_splits: usize,
    pub validation_fraction: f64,
    pub train_sizes: Vec<usize>,
    pub seed: u64,
    pub grid_target: GridTarget,
    pub grid_learning_rate: Vec<f64>,
    pub grid_batch_size: Vec<usize>,
    pub grid_momentum: Vec<f64>,
    pub grid_weight_decay: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            images: None,
            labels: None,
            test_images: None,
            test_labels: None,
            train_size: None,
            test_size: None,
            hidden_sizes: vec![1000, 1000],
            stage1_epochs: 50,
            stage_budget: 80,
            f_values: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            corruption_rate: 0.15,
            pretrain: SgdConfig {
                learning_rate: 0.01,
                momentum: 0.9,
                weight_decay: 0.0,
                batch_size: 20,
            },
            finetune: SgdConfig {
                learning_rate: 0.05,
                momentum: 0.9,
                weight_decay: 0.0,
                batch_size: 20,
            },
            patience: 35,
            max_finetune_epochs: 500,
            n_splits: 3,
            validation_fraction: 0.1,
            train_sizes: vec![1000, 2000, 5000, 10000, 20000, 50000],
            seed: 0,
            grid_target: GridTarget::Pretrain,
            grid_learning_rate: Vec::new(),
            grid_batch_size: Vec::new(),
            grid_momentum: Vec::new(),
            grid_weight_decay: Vec::new(),
        }
    }
}

fn parse_one<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::BadValue {
        line,
        key: key.into(),
        value: value.into(),
    })
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_one(line, key, v)).collect()
}

fn parse_optional_size(line: usize, key: &str, value: &str) -> Result<Option<usize>> {
    if value.trim() == "all" {
        Ok(None)
    } else {
        parse_one(line, key, value).map(Some)
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn out_of_range(name: &str, value: impl ToString, expected: &'static str) -> Error {
    Error::OutOfRange {
        name: name.into(),
        value: value.to_string(),
        expected,
    }
}

impl ExperimentConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Syntax {
                    line,
                    text: raw.into(),
                });
            };
            cfg.set(line, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "images" => self.images = Some(PathBuf::from(value)),
            "labels" => self.labels = Some(PathBuf::from(value)),
            "test_images" => self.test_images = Some(PathBuf::from(value)),
            "test_labels" => self.test_labels = Some(PathBuf::from(value)),
            "train_size" => self.train_size = parse_optional_size(line, key, value)?,
            "test_size" => self.test_size = parse_optional_size(line, key, value)?,
            "hidden_sizes" => self.hidden_sizes = parse_list(line, key, value)?,
            "stage1_epochs" => self.stage1_epochs = parse_one(line, key, value)?,
            "stage_budget" => self.stage_budget = parse_one(line, key, value)?,
            "f_values" => self.f_values = parse_list(line, key, value)?,
            "corruption_rate" => self.corruption_rate = parse_one(line, key, value)?,
            "learning_rate" => self.pretrain.learning_rate = parse_one(line, key, value)?,
            "batch_size" => self.pretrain.batch_size = parse_one(line, key, value)?,
            "momentum" => self.pretrain.momentum = parse_one(line, key, value)?,
            "weight_decay" => self.pretrain.weight_decay = parse_one(line, key, value)?,
            "finetune_learning_rate" => self.finetune.learning_rate = parse_one(line, key, value)?,
            "finetune_batch_size" => self.finetune.batch_size = parse_one(line, key, value)?,
            "finetune_momentum" => self.finetune.momentum = parse_one(line, key, value)?,
            "finetune_weight_decay" => self.finetune.weight_decay = parse_one(line, key, value)?,
            "patience" => self.patience = parse_one(line, key, value)?,
            "max_finetune_epochs" => self.max_finetune_epochs = parse_one(line, key, value)?,
            "n_splits" => self.n_splits = parse_one(line, key, value)?,
            "validation_fraction" => self.validation_fraction = parse_one(line, key, value)?,
            "train_sizes" => self.train_sizes = parse_list(line, key, value)?,
            "seed" => self.seed = parse_one(line, key, value)?,
            "grid_target" => {
                self.grid_target = value.parse().map_err(|_| Error::BadValue {
                    line,
                    key: key.into(),
                    value: value.into(),
                })?
            }
            "grid_learning_rate" => self.grid_learning_rate = parse_list(line, key, value)?,
            "grid_batch_size" => self.grid_batch_size = parse_list(line, key, value)?,
            "grid_momentum" => self.grid_momentum = parse_list(line, key, value)?,
            "grid_weight_decay" => self.grid_weight_decay = parse_list(line, key, value)?,
            _ => {
                return Err(Error::UnknownKey {
                    line,
                    key: key.into(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        CorruptionSpec::masking(self.corruption_rate)?;
        self.pretrain.validate()?;
        self.finetune.validate()?;
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(out_of_range("hidden_sizes", join(&self.hidden_sizes), "non-empty, all >= 1"));
        }
        if let Some(f) = self.f_values.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(out_of_range("f_values", f, "0 <= f <= 1"));
        }
        if self.n_splits == 0 {
            return Err(out_of_range("n_splits", 0, ">= 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(out_of_range("validation_fraction", self.validation_fraction, "0 < vf < 1"));
        }
        if self.train_sizes.contains(&0) {
            return Err(out_of_range("train_sizes", join(&self.train_sizes), "all >= 1"));
        }
        let base = self.pretrain;
        for &learning_rate in &self.grid_learning_rate {
            SgdConfig { learning_rate, ..base }.validate()?;
        }
        for &batch_size in &self.grid_batch_size {
            SgdConfig { batch_size, ..base }.validate()?;
        }
        for &momentum in &self.grid_momentum {
            SgdConfig { momentum, ..base }.validate()?;
        }
        for &weight_decay in &self.grid_weight_decay {
            SgdConfig { weight_decay, ..base }.validate()?;
        }
        Ok(())
    }

    pub fn parse_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    /// Serializes every setting; `parse_str` of the result gives back `self`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        for (key, path) in [
            ("images", &self.images),
            ("labels", &self.labels),
            ("test_images", &self.test_images),
            ("test_labels", &self.test_labels),
        ] {
            if let Some(p) = path {
                put(key, p.display().to_string());
            }
        }
        let size = |s: Option<usize>| s.map_or("all".to_string(), |n| n.to_string());
        put("train_size", size(self.train_size));
        put("test_size", size(self.test_size));
        put("hidden_sizes", join(&self.hidden_sizes));
        put("stage1_epochs", self.stage1_epochs.to_string());
        put("stage_budget", self.stage_budget.to_string());
        put("f_values", join(&self.f_values));
        put("corruption_rate", self.corruption_rate.to_string());
        put("learning_rate", self.pretrain.learning_rate.to_string());
        put("batch_size", self.pretrain.batch_size.to_string());
        put("momentum", self.pretrain.momentum.to_string());
        put("weight_decay", self.pretrain.weight_decay.to_string());
        put("finetune_learning_rate", self.finetune.learning_rate.to_string());
        put("finetune_batch_size", self.finetune.batch_size.to_string());
        put("finetune_momentum", self.finetune.momentum.to_string());
        put("finetune_weight_decay", self.finetune.weight_decay.to_string());
        put("patience", self.patience.to_string());
        put("max_finetune_epochs", self.max_finetune_epochs.to_string());
        put("n_splits", self.n_splits.to_string());
        put("validation_fraction", self.validation_fraction.to_string());
        put("train_sizes", join(&self.train_sizes));
        put("seed", self.seed.to_string());
        put("grid_target", self.grid_target.as_str().to_string());
        put("grid_learning_rate", join(&self.grid_learning_rate));
        put("grid_batch_size", join(&self.grid_batch_size));
        put("grid_momentum", join(&self.grid_momentum));
        put("grid_weight_decay", join(&self.grid_weight_decay));
        out
    }

    pub fn train_paths(&self) -> Result<(&Path, &Path)> {
        Ok((
            self.images.as_deref().ok_or(Error::MissingDatasetPath("images"))?,
            self.labels.as_deref().ok_or(Error::MissingDatasetPath("labels"))?,
        ))
    }

    pub fn test_paths(&self) -> Result<(&Path, &Path)> {
        Ok((
            self.test_images.as_deref().ok_or(Error::MissingDatasetPath("test_images"))?,
            self.test_labels.as_deref().ok_or(Error::MissingDatasetPath("test_labels"))?,
        ))
    }

    pub fn corruption(&self) -> CorruptionSpec {
        CorruptionSpec::masking(self.corruption_rate).expect("validated")
    }

    pub fn stack_config(&self, fraction: f64) -> StackConfig {
        StackConfig {
            hidden_sizes: self.hidden_sizes.clone(),
            first_stage_epochs: self.stage1_epochs,
            stage_budget: self.stage_budget,
            fraction,
            settings: PretrainSettings {
                corruption: self.corruption(),
                sgd: self.pretrain,
            },
        }
    }

    pub fn finetune_config(&self) -> FineTuneConfig {
        FineTuneConfig {
            sgd: self.finetune,
            patience: self.patience,
            max_epochs: self.max_finetune_epochs,
        }
    }
}
