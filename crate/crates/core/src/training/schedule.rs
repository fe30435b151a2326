//! Layer-wise pretraining schedules.
//!
//! Stage `k` appends a fresh layer to the encoder and trains it behind a fresh
//! decoder head. Its epochs come from a [`PhasePlan`]: first `s` stacked-type
//! epochs (layers `1..k-1` frozen), then `g` gradual-type epochs (all layers
//! train). Both kinds corrupt the raw input and reconstruct the clean input.

use serde::{Deserialize, Serialize};

use crate::corruption::CorruptionSpec;
use crate::error::{Error, Result};
use crate::model::{dae_backward, dae_forward, dae_loss, dae_parameters_mut, DecoderHead, EncoderStack, FreezeMask};
use crate::numerics::{init_dense, Matrix, SeededRng};
use crate::training::budget::{allocate_stage_budget, BudgetLedger, EpochKind, PhasePlan};
use crate::training::optimizer::{sgd_step, OptimizerState, SgdConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainSettings {
    pub corruption: CorruptionSpec,
    pub sgd: SgdConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: usize,
    /// 1-based within the stage.
    pub epoch: usize,
    pub kind: EpochKind,
    pub units: usize,
    /// Mean reconstruction cross-entropy over the epoch's minibatches.
    pub train_loss: f64,
}

#[derive(Clone, Debug)]
pub struct StageOutcome {
    pub decoder: DecoderHead,
    pub curve: Vec<EpochRecord>,
}

/// Called after every epoch with the epoch's record and the encoder state.
pub type EpochObserver<'a> = dyn FnMut(&EpochRecord, &EncoderStack) + 'a;

/// Trains stage `plan.stage` of `enc`, whose top layer is the new one.
pub fn pretrain_stage(
    enc: &mut EncoderStack,
    plan: &PhasePlan,
    data: &Matrix,
    settings: &PretrainSettings,
    ledger: &mut BudgetLedger,
    rng: &mut SeededRng,
    observer: &mut EpochObserver<'_>,
) -> Result<StageOutcome> {
    if data.rows() == 0 {
        return Err(Error::EmptyData);
    }
    if enc.depth() != plan.stage {
        return Err(Error::shape("pretrain_stage depth", plan.stage, enc.depth()));
    }
    if data.cols() != enc.input_dim() {
        return Err(Error::shape("pretrain_stage input", enc.input_dim(), data.cols()));
    }
    if plan.total_units() > ledger.remaining() {
        return Err(Error::BudgetOverflow {
            requested: plan.total_units(),
            remaining: ledger.remaining(),
        });
    }
    settings.corruption.validate()?;

    let mut decoder = DecoderHead::init(enc.output_dim(), data.cols(), rng)?;
    let mut opt = {
        let mut params: Vec<&_> = enc.layers().iter().collect();
        params.push(&decoder.layer);
        OptimizerState::new(settings.sgd, &params)?
    };

    let depth = enc.depth();
    let phases = [
        (EpochKind::Stacked, plan.stacked_epochs, FreezeMask::lower_frozen(depth), 1),
        (EpochKind::Gradual, plan.gradual_epochs, FreezeMask::none(depth), plan.gradual_cost()),
    ];
    let mut curve = Vec::with_capacity(plan.stacked_epochs + plan.gradual_epochs);
    for (kind, epochs, mask, units) in phases {
        for _ in 0..epochs {
            let train_loss = run_epoch(enc, &mut decoder, data, settings, &mask, &mut opt, rng)?;
            ledger.charge(kind, units)?;
            let record = EpochRecord {
                stage: plan.stage,
                epoch: curve.len() + 1,
                kind,
                units,
                train_loss,
            };
            observer(&record, enc);
            curve.push(record);
        }
    }
    Ok(StageOutcome { decoder, curve })
}

fn run_epoch(
    enc: &mut EncoderStack,
    decoder: &mut DecoderHead,
    data: &Matrix,
    settings: &PretrainSettings,
    mask: &FreezeMask,
    opt: &mut OptimizerState,
    rng: &mut SeededRng,
) -> Result<f64> {
    let order = rng.permutation(data.rows());
    let mut loss_sum = 0.0;
    for batch in order.chunks(settings.sgd.batch_size) {
        let clean = data.select_rows(batch);
        let noisy = settings.corruption.apply(&clean, rng)?;
        let trace = dae_forward(enc, decoder, &noisy)?;
        loss_sum += dae_loss(&trace, &clean)? * batch.len() as f64;
        let grads = dae_backward(&trace, &clean, enc, decoder, mask)?;
        sgd_step(&mut dae_parameters_mut(enc, decoder), &grads, opt)?;
    }
    let loss = loss_sum / data.rows() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("train_loss".into()));
    }
    Ok(loss)
}

/// Full layer-wise pretraining setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub hidden_sizes: Vec<usize>,
    /// Plain epochs for the first layer.
    pub first_stage_epochs: usize,
    /// Budget `N` (in layer-update units) for every later stage.
    pub stage_budget: usize,
    /// Stacked-vs-gradual fraction for every later stage.
    pub fraction: f64,
    pub settings: PretrainSettings,
}

#[derive(Clone, Debug)]
pub struct StageReport {
    pub plan: PhasePlan,
    pub ledger: BudgetLedger,
    pub curve: Vec<EpochRecord>,
}

/// Encoder after pretraining, with the decoder head of its final stage.
#[derive(Clone, Debug)]
pub struct PretrainedStack {
    pub encoder: EncoderStack,
    pub decoder: DecoderHead,
    pub stages: Vec<StageReport>,
}

impl PretrainedStack {
    pub fn curve(&self) -> impl Iterator<Item = &EpochRecord> {
        self.stages.iter().flat_map(|s| s.curve.iter())
    }
}

fn run_stage(
    enc: &mut EncoderStack,
    plan: PhasePlan,
    data: &Matrix,
    settings: &PretrainSettings,
    rng: &mut SeededRng,
    observer: &mut EpochObserver<'_>,
) -> Result<(DecoderHead, StageReport)> {
    let mut ledger = BudgetLedger::new(plan.total_units());
    let outcome = pretrain_stage(enc, &plan, data, settings, &mut ledger, rng, observer)?;
    debug_assert!(ledger.is_exhausted());
    Ok((
        outcome.decoder,
        StageReport {
            plan,
            ledger,
            curve: outcome.curve,
        },
    ))
}

/// Stage 1 only. At depth one stacked and gradual training coincide, so
/// the result does not depend on `cfg.fraction`.
pub fn pretrain_first_stage(
    cfg: &StackConfig,
    data: &Matrix,
    rng: &mut SeededRng,
    observer: &mut EpochObserver<'_>,
) -> Result<PretrainedStack> {
    let Some(&first) = cfg.hidden_sizes.first() else {
        return Err(Error::InvalidArgument("no hidden layers configured".into()));
    };
    if data.rows() == 0 {
        return Err(Error::EmptyData);
    }
    let mut encoder = EncoderStack::new(vec![init_dense(data.cols(), first, rng)?])?;
    let plan = PhasePlan::first_stage(cfg.first_stage_epochs);
    let (decoder, report) = run_stage(&mut encoder, plan, data, &cfg.settings, rng, observer)?;
    Ok(PretrainedStack {
        encoder,
        decoder,
        stages: vec![report],
    })
}

/// Runs the remaining stages on top of an already pretrained prefix.
pub fn extend_stack(
    mut stack: PretrainedStack,
    cfg: &StackConfig,
    data: &Matrix,
    rng: &mut SeededRng,
    observer: &mut EpochObserver<'_>,
) -> Result<PretrainedStack> {
    while stack.encoder.depth() < cfg.hidden_sizes.len() {
        let stage = stack.encoder.depth() + 1;
        let plan = allocate_stage_budget(stage, cfg.stage_budget, cfg.fraction)?;
        let layer = init_dense(stack.encoder.output_dim(), cfg.hidden_sizes[stage - 1], rng)?;
        stack.encoder.push(layer)?;
        let (decoder, report) = run_stage(&mut stack.encoder, plan, data, &cfg.settings, rng, observer)?;
        stack.decoder = decoder;
        stack.stages.push(report);
    }
    Ok(stack)
}

pub fn pretrain_stack(cfg: &StackConfig, data: &Matrix, rng: &mut SeededRng) -> Result<PretrainedStack> {
    pretrain_stack_observed(cfg, data, rng, &mut |_, _| {})
}

pub fn pretrain_stack_observed(
    cfg: &StackConfig,
    data: &Matrix,
    rng: &mut SeededRng,
    observer: &mut EpochObserver<'_>,
) -> Result<PretrainedStack> {
    let first = pretrain_first_stage(cfg, data, rng, observer)?;
    extend_stack(first, cfg, data, rng, observer)
}
