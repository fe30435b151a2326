//! Exhaustive search over SGD hyperparameters on a single inner holdout.

use crate::data::{make_split, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, GridTarget};
use crate::harness::records::ResultRecord;
use crate::harness::sweep::Progress;
use crate::model::{relative_ce, EncoderStack};
use crate::numerics::{derive_seed, SeededRng};
use crate::training::{fine_tune, pretrain_stack, FineTuneConfig, SgdConfig};

const STREAM_GRID: u64 = 6;

/// Cartesian product of the configured grid lists, learning rate varying
/// slowest. An empty list pins that field to the base value.
pub fn grid_points(config: &ExperimentConfig) -> Vec<SgdConfig> {
    let base = match config.grid_target {
        GridTarget::Pretrain => config.pretrain,
        GridTarget::Finetune => config.finetune,
    };
    let or_base = |list: &[f64], v: f64| if list.is_empty() { vec![v] } else { list.to_vec() };
    let lrs = or_base(&config.grid_learning_rate, base.learning_rate);
    let moms = or_base(&config.grid_momentum, base.momentum);
    let wds = or_base(&config.grid_weight_decay, base.weight_decay);
    let bss = if config.grid_batch_size.is_empty() {
        vec![base.batch_size]
    } else {
        config.grid_batch_size.clone()
    };
    let mut points = Vec::new();
    for &learning_rate in &lrs {
        for &batch_size in &bss {
            for &momentum in &moms {
                for &weight_decay in &wds {
                    points.push(SgdConfig {
                        learning_rate,
                        momentum,
                        weight_decay,
                        batch_size,
                    });
                }
            }
        }
    }
    points
}

#[derive(Clone, Debug)]
pub struct GridReport {
    /// Every point with its holdout score, in grid order.
    pub scores: Vec<(SgdConfig, f64)>,
    pub best_index: usize,
}

impl GridReport {
    pub fn best(&self) -> (SgdConfig, f64) {
        self.scores[self.best_index]
    }

    pub fn records(&self, seed: u64) -> Vec<ResultRecord> {
        let mut out = Vec::new();
        for (i, (p, score)) in self.scores.iter().enumerate() {
            let run_id = if i == self.best_index { format!("grid-{i}-best") } else { format!("grid-{i}") };
            for (metric, value) in [
                ("learning_rate", p.learning_rate),
                ("batch_size", p.batch_size as f64),
                ("momentum", p.momentum),
                ("weight_decay", p.weight_decay),
                ("holdout_score", *score),
            ] {
                out.push(ResultRecord {
                    run_id: run_id.clone(),
                    phase: "grid".into(),
                    f: None,
                    train_size: None,
                    split: Some(0),
                    seed: Some(seed),
                    epoch: None,
                    metric: metric.into(),
                    value,
                });
            }
        }
        out
    }
}

/// Scores every point and picks the lowest score; ties go to the earlier
/// point.
pub fn grid_search_with(
    points: &[SgdConfig],
    mut score: impl FnMut(&SgdConfig) -> Result<f64>,
) -> Result<GridReport> {
    if points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut scores = Vec::with_capacity(points.len());
    let mut best_index = 0;
    for (i, p) in points.iter().enumerate() {
        p.validate()?;
        let s = score(p)?;
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("grid score at point {i}")));
        }
        if s < scores.get(best_index).map_or(f64::INFINITY, |&(_, b)| b) {
            best_index = i;
        }
        scores.push((*p, s));
    }
    Ok(GridReport { scores, best_index })
}

/// Grid search on `config.train_size` samples of `train` with one holdout
/// split. Pretraining points are scored by holdout relative cross-entropy
/// of the stack built with the first configured `f`; fine-tuning points by
/// holdout classification error.
pub fn grid_search(config: &ExperimentConfig, train: &Dataset, progress: &mut Progress<'_>) -> Result<GridReport> {
    config.validate()?;
    let points = grid_points(config);
    let grid_seed = derive_seed(config.seed, STREAM_GRID);
    let data = match config.train_size {
        Some(n) if n != train.len() => {
            crate::data::uniform_subset(train, n, &mut SeededRng::new(derive_seed(grid_seed, 0)))?
        }
        _ => train.clone(),
    };
    let spec = SplitSpec {
        n_splits: 1,
        validation_fraction: config.validation_fraction,
        seed: derive_seed(grid_seed, 1),
    };
    let split = make_split(&data, &spec, 0)?;
    let f = config.f_values.first().copied().unwrap_or(0.0);
    let corruption = config.corruption();

    let pretrained: Option<EncoderStack> = match config.grid_target {
        GridTarget::Pretrain => None,
        GridTarget::Finetune => {
            let mut rng = SeededRng::new(derive_seed(grid_seed, 2));
            Some(pretrain_stack(&config.stack_config(f), &split.train.inputs, &mut rng)?.encoder)
        }
    };

    let mut index = 0;
    grid_search_with(&points, |p| {
        let mut rng = SeededRng::new(derive_seed(grid_seed, 3));
        let score = match &pretrained {
            None => {
                let mut cfg = config.stack_config(f);
                cfg.settings.sgd = *p;
                let stack = pretrain_stack(&cfg, &split.train.inputs, &mut rng)?;
                relative_ce(&stack.encoder, &stack.decoder, &split.validation.inputs, &corruption, &mut rng)?
            }
            Some(enc) => {
                let ft = FineTuneConfig {
                    sgd: *p,
                    ..config.finetune_config()
                };
                fine_tune(enc.clone(), &split.train, &split.validation, &ft, &mut rng)?.best_metric
            }
        };
        progress(&format!("grid point {index}: {p:?} -> {score:.6}"));
        index += 1;
        Ok(score)
    })
}
