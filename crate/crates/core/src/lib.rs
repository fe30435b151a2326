//! Layer-wise pretraining of deep denoising autoencoders under a matched
//! weight-update budget.
//!
//! Three schedules are compared for every stage after the first:
//!
//! - *stacked*: lower layers frozen, only the new layer (and its decoder) train;
//! - *gradual*: every layer keeps training while the new one is added;
//! - *hybrid*: a fraction `f` of the budget spent stacked, the rest gradual.
//!
//! The budget unit is one epoch of updates to one encoder layer, so a gradual
//! epoch at depth two costs as much as two stacked epochs. The [`harness`]
//! module reproduces the f-sweep and train-size sweep experiments and writes
//! long-format CSV.

pub mod corruption;
pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
