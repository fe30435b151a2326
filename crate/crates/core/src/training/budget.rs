//! Update-budget accounting.
//!
//! One budget unit is one epoch of updates to one encoder layer. A
//! stacked-type epoch at stage `k` trains only the newest layer and costs 1
//! unit; a gradual-type epoch trains all `k` layers and costs `k`. Decoder
//! updates are not charged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EpochKind {
    /// Lower layers frozen, only the newest layer trains.
    Stacked,
    /// Every encoder layer trains.
    Gradual,
}

impl EpochKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EpochKind::Stacked => "stacked",
            EpochKind::Gradual => "gradual",
        }
    }
}

/// Epoch split of one pretraining stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    /// 1-based encoder depth after this stage.
    pub stage: usize,
    pub stacked_epochs: usize,
    pub gradual_epochs: usize,
    pub budget: usize,
    /// Realized fraction `stacked_epochs / budget`.
    pub fraction: f64,
}

impl PhasePlan {
    /// Units charged per gradual-type epoch.
    pub fn gradual_cost(&self) -> usize {
        self.stage
    }

    pub fn total_units(&self) -> usize {
        self.stacked_epochs + self.stage * self.gradual_epochs
    }

    /// Stage 1 has no lower layers, so its epochs are charged one unit each
    /// and recorded as stacked-type.
    pub fn first_stage(epochs: usize) -> Self {
        PhasePlan {
            stage: 1,
            stacked_epochs: epochs,
            gradual_epochs: 0,
            budget: epochs,
            fraction: 1.0,
        }
    }
}

/// Plan for the second stage: `s + 2g = N`.
pub fn allocate_budget(budget: usize, fraction: f64) -> Result<PhasePlan> {
    allocate_stage_budget(2, budget, fraction)
}

/// Plan for stage `k ≥ 2` satisfying `s + k·g = N` exactly.
///
/// `s = round(f·N)`, then decremented (at most `k-1` times) until `N - s` is
/// divisible by `k`.
pub fn allocate_stage_budget(stage: usize, budget: usize, fraction: f64) -> Result<PhasePlan> {
    if stage < 2 {
        return Err(Error::InvalidArgument(format!(
            "stage {stage} has no stacked/gradual split"
        )));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::OutOfRange {
            name: "f".into(),
            value: fraction.to_string(),
            expected: "0 <= f <= 1",
        });
    }
    let infeasible = || Error::InfeasibleBudget {
        budget,
        fraction,
        stage,
    };
    let mut stacked = (fraction * budget as f64).round() as usize;
    let mut adjustments = 0;
    while !(budget - stacked).is_multiple_of(stage) {
        if stacked == 0 || adjustments + 1 >= stage {
            return Err(infeasible());
        }
        stacked -= 1;
        adjustments += 1;
    }
    let gradual = (budget - stacked) / stage;
    let realized = if budget == 0 {
        fraction
    } else {
        stacked as f64 / budget as f64
    };
    Ok(PhasePlan {
        stage,
        stacked_epochs: stacked,
        gradual_epochs: gradual,
        budget,
        fraction: realized,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub kind: EpochKind,
    pub units: usize,
}

/// Running tally of charged units against a fixed total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    total: usize,
    consumed: usize,
    entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    pub fn new(total: usize) -> Self {
        BudgetLedger {
            total,
            consumed: 0,
            entries: Vec::new(),
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn remaining(&self) -> usize {
        self.total - self.consumed
    }

    pub fn is_exhausted(&self) -> bool {
        self.consumed == self.total
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn units_of(&self, kind: EpochKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).map(|e| e.units).sum()
    }

    pub fn charge(&mut self, kind: EpochKind, units: usize) -> Result<()> {
        if units > self.remaining() {
            return Err(Error::BudgetOverflow {
                requested: units,
                remaining: self.remaining(),
            });
        }
        self.consumed += units;
        self.entries.push(LedgerEntry { kind, units });
        Ok(())
    }
}
