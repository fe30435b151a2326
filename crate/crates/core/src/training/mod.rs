//! SGD, early stopping, update-budget accounting, pretraining schedules and
//! supervised fine-tuning.

pub mod budget;
pub mod early_stop;
pub mod finetune;
pub mod optimizer;
pub mod schedule;

pub use budget::{allocate_budget, allocate_stage_budget, BudgetLedger, EpochKind, LedgerEntry, PhasePlan};
pub use early_stop::{EarlyStopState, StopDecision};
pub use finetune::{fine_tune, fine_tune_with, FineTuneConfig, FineTuneEpoch, FineTuneOutcome};
pub use optimizer::{sgd_step, OptimizerState, SgdConfig};
pub use schedule::{
    extend_stack, pretrain_first_stage, pretrain_stack, pretrain_stack_observed, pretrain_stage, EpochObserver,
    EpochRecord, PretrainSettings, PretrainedStack, StackConfig, StageOutcome, StageReport,
};
