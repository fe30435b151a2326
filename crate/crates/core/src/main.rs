use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gradual_dae::data::{load_mnist_idx, Dataset};
use gradual_dae::harness::{
    grid_search, sweep_f, sweep_train_size, test_subset, write_csv, ExperimentConfig, ModelFile, ResultRecord,
};
use gradual_dae::model::{entropy_floor, relative_ce};
use gradual_dae::numerics::{derive_seed, SeededRng};
use gradual_dae::training::pretrain_stack_observed;
use gradual_dae::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Denoising autoencoder stacks pretrained with stacked, gradual or hybrid schedules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain one stack on the training file and write its learning curve.
    Pretrain {
        #[command(flatten)]
        common: CommonArgs,
        /// Stacked fraction for every stage after the first; defaults to the
        /// first configured value.
        #[arg(long)]
        f: Option<f64>,
        /// Where to save the trained encoder and decoder head (JSON).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Test relative cross-entropy for every configured f.
    SweepF(CommonArgs),
    /// Test classification error for f = 0 and f = 1 at every training size.
    SweepSize(CommonArgs),
    /// Hyperparameter grid search on an inner holdout of the training file.
    GridSearch(CommonArgs),
    /// Relative cross-entropy of a saved model on the test file.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// key=value experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    test_images: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::parse_file(path)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            (&self.images, &mut cfg.images),
            (&self.labels, &mut cfg.labels),
            (&self.test_images, &mut cfg.test_images),
            (&self.test_labels, &mut cfg.test_labels),
        ];
        for (arg, slot) in overrides {
            if arg.is_some() {
                slot.clone_from(arg);
            }
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn emit(&self, records: &[ResultRecord]) -> Result<()> {
        match &self.out {
            Some(path) => {
                let file = std::fs::File::create(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                write_csv(records, std::io::BufWriter::new(file))
            }
            None => write_csv(records, std::io::stdout().lock()),
        }
    }
}

fn load_train(cfg: &ExperimentConfig) -> Result<Dataset> {
    let (images, labels) = cfg.train_paths()?;
    load_mnist_idx(images, labels)
}

fn load_test(cfg: &ExperimentConfig) -> Result<Dataset> {
    let (images, labels) = cfg.test_paths()?;
    load_mnist_idx(images, labels)
}

fn log(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pretrain { common, f, model } => {
            let cfg = common.config()?;
            let train = load_train(&cfg)?;
            let train = match cfg.train_size {
                Some(n) if n != train.len() => gradual_dae::data::uniform_subset(
                    &train,
                    n,
                    &mut SeededRng::new(derive_seed(cfg.seed, 1)),
                )?,
                _ => train,
            };
            let f = f.or(cfg.f_values.first().copied()).unwrap_or(0.0);
            let stack_cfg = cfg.stack_config(f);
            let mut rng = SeededRng::new(cfg.seed);
            let mut records = Vec::new();
            let stack = pretrain_stack_observed(&stack_cfg, &train.inputs, &mut rng, &mut |e, _| {
                log(&format!("stage {} epoch {} ({}): {:.6}", e.stage, e.epoch, e.kind.as_str(), e.train_loss));
                records.push(ResultRecord {
                    run_id: format!("pretrain-f{f}"),
                    phase: format!("pretrain_stage{}", e.stage),
                    f: Some(f),
                    train_size: Some(train.len()),
                    split: None,
                    seed: Some(cfg.seed),
                    epoch: Some(e.epoch),
                    metric: format!("train_ce_{}", e.kind.as_str()),
                    value: e.train_loss,
                });
            })?;
            if let Some(path) = model {
                ModelFile {
                    encoder: stack.encoder,
                    decoder: stack.decoder,
                }
                .save(path)?;
            }
            common.emit(&records)
        }
        Command::SweepF(common) => {
            let cfg = common.config()?;
            let out = sweep_f(&cfg, &load_train(&cfg)?, &load_test(&cfg)?, &mut log)?;
            for s in &out.summaries {
                log(&format!("f = {}: relative CE {:.6} ± {:.6}", s.f, s.mean, s.se));
            }
            common.emit(&out.records)
        }
        Command::SweepSize(common) => {
            let cfg = common.config()?;
            let out = sweep_train_size(&cfg, &load_train(&cfg)?, &load_test(&cfg)?, &mut log)?;
            for s in &out.summaries {
                log(&format!("n = {} f = {}: test error {:.4} ± {:.4}", s.train_size, s.f, s.mean, s.se));
            }
            for (size, pct) in &out.improvements {
                log(&format!("n = {size}: improvement {pct:.2}%"));
            }
            common.emit(&out.records)
        }
        Command::GridSearch(common) => {
            let cfg = common.config()?;
            let report = grid_search(&cfg, &load_train(&cfg)?, &mut log)?;
            let (best, score) = report.best();
            log(&format!("best: {best:?} -> {score:.6}"));
            common.emit(&report.records(cfg.seed))
        }
        Command::Eval { common, model } => {
            let cfg = common.config()?;
            let model = ModelFile::load(model)?;
            let test = test_subset(&cfg, &load_test(&cfg)?)?;
            let mut rng = SeededRng::new(derive_seed(cfg.seed, 5));
            let rce = relative_ce(&model.encoder, &model.decoder, &test.inputs, &cfg.corruption(), &mut rng)?;
            let row = |metric: &str, value: f64| ResultRecord {
                run_id: "eval".into(),
                phase: "eval".into(),
                f: None,
                train_size: None,
                split: None,
                seed: Some(cfg.seed),
                epoch: None,
                metric: metric.into(),
                value,
            };
            common.emit(&[row("test_relative_ce", rce), row("entropy_floor", entropy_floor(&test.inputs)?)])
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log(&format!("error: {e}"));
            ExitCode::FAILURE
        }
    }
}
