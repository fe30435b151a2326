//! The two experiment sweeps: reconstruction quality against the
//! stacked fraction `f`, and classification error against training-set size.

use crate::data::{make_splits, uniform_subset, Dataset, Split, SplitSpec};
use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::records::{improvement_pct, mean_and_se, ResultRecord};
use crate::model::{classification_error, relative_ce};
use crate::numerics::{derive_seed, SeededRng};
use crate::training::{extend_stack, fine_tune, pretrain_first_stage, EpochRecord, PretrainedStack};

/// Receives one line per finished run.
pub type Progress<'a> = dyn FnMut(&str) + 'a;

/// Fractions compared by the training-set-size sweep.
pub const SIZE_SWEEP_FRACTIONS: [f64; 2] = [0.0, 1.0];

const STREAM_TRAIN_SUBSET: u64 = 1;
const STREAM_TEST_SUBSET: u64 = 2;
const STREAM_SPLITS: u64 = 3;
const STREAM_RUN: u64 = 4;
const STREAM_EVAL: u64 = 5;

/// Class-uniform subset when `size` is set and differs from the data size.
fn maybe_subset(ds: &Dataset, size: Option<usize>, seed: u64) -> Result<Dataset> {
    match size {
        Some(n) if n != ds.len() => uniform_subset(ds, n, &mut SeededRng::new(seed)),
        _ => Ok(ds.clone()),
    }
}

pub fn test_subset(config: &ExperimentConfig, test: &Dataset) -> Result<Dataset> {
    maybe_subset(test, config.test_size, derive_seed(config.seed, STREAM_TEST_SUBSET))
}

fn splits_for(config: &ExperimentConfig, train: &Dataset, size: Option<usize>) -> Result<Vec<Split>> {
    let size_key = size.map_or(u64::MAX, |s| s as u64);
    let subset_seed = derive_seed(derive_seed(config.seed, STREAM_TRAIN_SUBSET), size_key);
    let subset = maybe_subset(train, size, subset_seed)?;
    let spec = SplitSpec {
        n_splits: config.n_splits,
        validation_fraction: config.validation_fraction,
        seed: derive_seed(derive_seed(config.seed, STREAM_SPLITS), size_key),
    };
    make_splits(&subset, &spec)
}

fn run_seed(config: &ExperimentConfig, size: usize, split: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(config.seed, STREAM_RUN), size as u64), split as u64)
}

struct RunKey<'a> {
    run_id: &'a str,
    f: f64,
    train_size: usize,
    split: usize,
    seed: u64,
}

impl RunKey<'_> {
    fn record(&self, phase: &str, epoch: Option<usize>, metric: &str, value: f64) -> ResultRecord {
        ResultRecord {
            run_id: self.run_id.to_string(),
            phase: phase.to_string(),
            f: Some(self.f),
            train_size: Some(self.train_size),
            split: Some(self.split),
            seed: Some(self.seed),
            epoch,
            metric: metric.to_string(),
            value,
        }
    }

    fn pretrain_records(&self, stack: &PretrainedStack, out: &mut Vec<ResultRecord>) {
        for report in &stack.stages {
            let phase = format!("pretrain_stage{}", report.plan.stage);
            for metric in ["stacked_epochs", "gradual_epochs", "units_consumed"] {
                let value = match metric {
                    "stacked_epochs" => report.plan.stacked_epochs,
                    "gradual_epochs" => report.plan.gradual_epochs,
                    _ => report.ledger.consumed(),
                };
                out.push(self.record(&phase, None, metric, value as f64));
            }
            for e in &report.curve {
                out.push(self.epoch_record(&phase, e));
            }
        }
    }

    fn epoch_record(&self, phase: &str, e: &EpochRecord) -> ResultRecord {
        self.record(phase, Some(e.epoch), &format!("train_ce_{}", e.kind.as_str()), e.train_loss)
    }
}

fn summary(config: &ExperimentConfig, f: f64, size: usize, metric: &str, value: f64) -> ResultRecord {
    ResultRecord {
        run_id: "summary".into(),
        phase: "summary".into(),
        f: Some(f),
        train_size: Some(size),
        split: None,
        seed: Some(config.seed),
        epoch: None,
        metric: metric.into(),
        value,
    }
}

/// Mean and standard error of one metric across splits.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub f: f64,
    pub train_size: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    pub se: f64,
}

impl CellSummary {
    fn new(f: f64, train_size: usize, values: Vec<f64>) -> Self {
        let (mean, se) = mean_and_se(&values);
        CellSummary {
            f,
            train_size,
            values,
            mean,
            se,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepFOutput {
    pub records: Vec<ResultRecord>,
    /// Test relative cross-entropy per entry of `f_values`.
    pub summaries: Vec<CellSummary>,
}

/// Pretrains one stack per (split, f) and scores it by relative
/// cross-entropy on the test set. Stage 1 does not depend on `f`, so it is
/// trained once per split and shared.
pub fn sweep_f(
    config: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    progress: &mut Progress<'_>,
) -> Result<SweepFOutput> {
    config.validate()?;
    let test = test_subset(config, test)?;
    let splits = splits_for(config, train, config.train_size)?;
    let size = splits[0].train.len() + splits[0].validation.len();
    let corruption = config.corruption();

    let mut per_run: Vec<Vec<Vec<ResultRecord>>> = vec![vec![Vec::new(); splits.len()]; config.f_values.len()];
    let mut scores = vec![vec![0.0; splits.len()]; config.f_values.len()];
    for split in &splits {
        let seed = run_seed(config, size, split.index);
        let mut rng = SeededRng::new(seed);
        let base_cfg = config.stack_config(config.f_values.first().copied().unwrap_or(0.0));
        let first = pretrain_first_stage(&base_cfg, &split.train.inputs, &mut rng, &mut |_, _| {})?;
        for (fi, &f) in config.f_values.iter().enumerate() {
            let mut run_rng = rng.clone();
            let stack = extend_stack(first.clone(), &config.stack_config(f), &split.train.inputs, &mut run_rng, &mut |_, _| {})?;
            let mut eval_rng = SeededRng::new(derive_seed(seed, STREAM_EVAL));
            let test_rce = relative_ce(&stack.encoder, &stack.decoder, &test.inputs, &corruption, &mut eval_rng)?;
            let val_rce =
                relative_ce(&stack.encoder, &stack.decoder, &split.validation.inputs, &corruption, &mut eval_rng)?;

            let run_id = format!("n{size}-f{f}-s{}", split.index);
            let key = RunKey {
                run_id: &run_id,
                f,
                train_size: size,
                split: split.index,
                seed,
            };
            let out = &mut per_run[fi][split.index];
            key.pretrain_records(&stack, out);
            out.push(key.record("eval", None, "val_relative_ce", val_rce));
            out.push(key.record("eval", None, "test_relative_ce", test_rce));
            scores[fi][split.index] = test_rce;
            progress(&format!("{run_id}: test relative CE {test_rce:.6}"));
        }
    }

    let mut records: Vec<ResultRecord> = per_run.into_iter().flatten().flatten().collect();
    let mut summaries = Vec::new();
    for (fi, &f) in config.f_values.iter().enumerate() {
        let cell = CellSummary::new(f, size, scores[fi].clone());
        records.push(summary(config, f, size, "test_relative_ce_mean", cell.mean));
        records.push(summary(config, f, size, "test_relative_ce_se", cell.se));
        summaries.push(cell);
    }
    Ok(SweepFOutput { records, summaries })
}

#[derive(Clone, Debug)]
pub struct SweepSizeOutput {
    pub records: Vec<ResultRecord>,
    /// Test classification error per (size, f), sizes in config order, f in
    /// [`SIZE_SWEEP_FRACTIONS`] order.
    pub summaries: Vec<CellSummary>,
    /// `(size, improvement %)` of f = 0 over f = 1.
    pub improvements: Vec<(usize, f64)>,
}

/// For every training-set size, pretrains with f = 0 and f = 1, fine-tunes
/// with early stopping on the validation split and reports test error.
pub fn sweep_train_size(
    config: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    progress: &mut Progress<'_>,
) -> Result<SweepSizeOutput> {
    config.validate()?;
    let test = test_subset(config, test)?;
    let ft_cfg = config.finetune_config();
    let mut records = Vec::new();
    let mut summary_records = Vec::new();
    let mut summaries = Vec::new();
    let mut improvements = Vec::new();

    for &size in &config.train_sizes {
        let splits = splits_for(config, train, Some(size))?;
        let mut per_f: Vec<Vec<Vec<ResultRecord>>> =
            vec![vec![Vec::new(); splits.len()]; SIZE_SWEEP_FRACTIONS.len()];
        let mut errors = vec![vec![0.0; splits.len()]; SIZE_SWEEP_FRACTIONS.len()];
        for split in &splits {
            let seed = run_seed(config, size, split.index);
            let mut rng = SeededRng::new(seed);
            let first =
                pretrain_first_stage(&config.stack_config(0.0), &split.train.inputs, &mut rng, &mut |_, _| {})?;
            for (fi, &f) in SIZE_SWEEP_FRACTIONS.iter().enumerate() {
                let mut run_rng = rng.clone();
                let stack =
                    extend_stack(first.clone(), &config.stack_config(f), &split.train.inputs, &mut run_rng, &mut |_, _| {})?;
                let tuned = fine_tune(stack.encoder.clone(), &split.train, &split.validation, &ft_cfg, &mut run_rng)?;
                let test_error = classification_error(&tuned.net, &test.inputs, &test.labels)?;

                let run_id = format!("n{size}-f{f}-s{}", split.index);
                let key = RunKey {
                    run_id: &run_id,
                    f,
                    train_size: size,
                    split: split.index,
                    seed,
                };
                let out = &mut per_f[fi][split.index];
                key.pretrain_records(&stack, out);
                for e in &tuned.curve {
                    out.push(key.record("finetune", Some(e.epoch), "train_nll", e.train_loss));
                    out.push(key.record("finetune", Some(e.epoch), "val_error", e.val_metric));
                }
                out.push(key.record("finetune", None, "best_epoch", tuned.best_epoch as f64));
                out.push(key.record("finetune", None, "best_val_error", tuned.best_metric));
                out.push(key.record("eval", None, "test_error", test_error));
                errors[fi][split.index] = test_error;
                progress(&format!(
                    "{run_id}: test error {test_error:.4} (best epoch {} of {})",
                    tuned.best_epoch, tuned.epochs_run
                ));
            }
        }
        records.extend(per_f.into_iter().flatten().flatten());

        let cells: Vec<CellSummary> = SIZE_SWEEP_FRACTIONS
            .iter()
            .zip(errors)
            .map(|(&f, errs)| CellSummary::new(f, size, errs))
            .collect();
        for cell in &cells {
            summary_records.push(summary(config, cell.f, size, "test_error_mean", cell.mean));
            summary_records.push(summary(config, cell.f, size, "test_error_se", cell.se));
        }
        let (f0, f1) = (cells[0].mean, cells[1].mean);
        if f1 > 0.0 {
            let pct = improvement_pct(f1, f0);
            let mut row = summary(config, 0.0, size, "improvement_pct", pct);
            row.f = None;
            summary_records.push(row);
            improvements.push((size, pct));
        }
        summaries.extend(cells);
    }
    records.extend(summary_records);
    Ok(SweepSizeOutput {
        records,
        summaries,
        improvements,
    })
}
