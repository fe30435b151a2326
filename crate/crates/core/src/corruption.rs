//! Input corruption for denoising training.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorruptionKind {
    /// Zero each component independently.
    Masking,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub rate: f64,
}

impl CorruptionSpec {
    pub fn masking(rate: f64) -> Result<Self> {
        let spec = CorruptionSpec {
            kind: CorruptionKind::Masking,
            rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none() -> Self {
        CorruptionSpec {
            kind: CorruptionKind::Masking,
            rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::OutOfRange {
                name: "corruption rate".into(),
                value: self.rate.to_string(),
                expected: "0 <= rate <= 1",
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &Matrix, rng: &mut SeededRng) -> Result<Matrix> {
        match self.kind {
            CorruptionKind::Masking => apply_masking(x, self, rng),
        }
    }
}

/// Sets each component of `x` to zero with probability `spec.rate`; the rest
/// are copied unchanged. Draws one uniform per component, in row-major order.
pub fn apply_masking(x: &Matrix, spec: &CorruptionSpec, rng: &mut SeededRng) -> Result<Matrix> {
    spec.validate()?;
    let mut out = x.clone();
    for v in out.as_mut_slice() {
        if rng.uniform() < spec.rate {
            *v = 0.0;
        }
    }
    Ok(out)
}
