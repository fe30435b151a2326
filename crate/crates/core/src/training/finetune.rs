use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{classification_error, classifier_loss_and_grad, ClassifierNet, EncoderStack};
use crate::numerics::SeededRng;
use crate::training::early_stop::{EarlyStopState, StopDecision};
use crate::training::optimizer::{sgd_step, OptimizerState, SgdConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineTuneConfig {
    pub sgd: SgdConfig,
    pub patience: usize,
    /// Hard cap on training epochs.
    pub max_epochs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineTuneEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
}

#[derive(Clone, Debug)]
pub struct FineTuneOutcome {
    /// Best network seen, by validation metric.
    pub net: ClassifierNet,
    /// Validation metric of the freshly initialized network.
    pub baseline_metric: f64,
    pub best_metric: f64,
    /// Epoch of the returned snapshot; 0 means the initial network.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub curve: Vec<FineTuneEpoch>,
}

/// Supervised training of `enc` plus a new output layer, early-stopped on
/// validation classification error.
pub fn fine_tune(
    enc: EncoderStack,
    train: &Dataset,
    validation: &Dataset,
    cfg: &FineTuneConfig,
    rng: &mut SeededRng,
) -> Result<FineTuneOutcome> {
    if validation.classes != train.classes {
        return Err(Error::InvalidArgument(format!(
            "class count mismatch: train {} vs validation {}",
            train.classes, validation.classes
        )));
    }
    fine_tune_with(enc, train, cfg, rng, |net| {
        classification_error(net, &validation.inputs, &validation.labels)
    })
}

/// [`fine_tune`] with an arbitrary lower-is-better validation score.
pub fn fine_tune_with(
    enc: EncoderStack,
    train: &Dataset,
    cfg: &FineTuneConfig,
    rng: &mut SeededRng,
    mut score: impl FnMut(&ClassifierNet) -> Result<f64>,
) -> Result<FineTuneOutcome> {
    if train.is_empty() {
        return Err(Error::EmptyData);
    }
    if train.dim() != enc.input_dim() {
        return Err(Error::shape("fine_tune input", enc.input_dim(), train.dim()));
    }
    let mut net = ClassifierNet::from_encoder(enc, train.classes, rng)?;
    let mut opt = {
        let mut params: Vec<&_> = net.encoder.layers().iter().collect();
        params.push(&net.output);
        OptimizerState::new(cfg.sgd, &params)?
    };

    let baseline = checked(score(&net)?)?;
    let mut state = EarlyStopState::new(cfg.patience, baseline, net.clone());
    let mut curve = Vec::new();
    let mut stopped_early = state.should_stop();

    if !stopped_early {
        for epoch in 1..=cfg.max_epochs {
            let order = rng.permutation(train.len());
            let mut loss_sum = 0.0;
            for batch in order.chunks(cfg.sgd.batch_size) {
                let x = train.inputs.select_rows(batch);
                let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
                let (loss, grads) = classifier_loss_and_grad(&net, &x, &labels)?;
                loss_sum += loss * batch.len() as f64;
                sgd_step(&mut net.parameters_mut(), &grads, &mut opt)?;
            }
            let train_loss = checked(loss_sum / train.len() as f64)?;
            let val_metric = checked(score(&net)?)?;
            curve.push(FineTuneEpoch {
                epoch,
                train_loss,
                val_metric,
            });
            if state.update(val_metric, || net.clone()) == StopDecision::Stop {
                stopped_early = true;
                break;
            }
        }
    }

    Ok(FineTuneOutcome {
        baseline_metric: baseline,
        best_metric: state.best_metric(),
        best_epoch: state.best_update(),
        epochs_run: curve.len(),
        stopped_early,
        curve,
        net: state.into_best(),
    })
}

fn checked(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("fine-tuning metric".into()))
    }
}
