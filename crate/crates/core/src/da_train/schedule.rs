use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Coefficient of the gradient-reversal layer over training progress.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaSchedule {
    Constant { value: f64 },
    /// `max * (2 / (1 + exp(-10 p)) - 1)`, rising from 0 to almost `max`.
    Annealed {
        #[serde(default = "one")]
        max: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        Self::annealed()
    }
}

impl LambdaSchedule {
    pub fn annealed() -> Self {
        LambdaSchedule::Annealed { max: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LambdaSchedule::Constant { value: v } | LambdaSchedule::Annealed { max: v } if !(v >= 0.0 && v.is_finite()) => {
                Err(config_err!("lambda must be finite and >= 0, got {v}"))
            }
            _ => Ok(()),
        }
    }
}

/// `progress` is clamped to `[0, 1]`.
pub fn lambda_schedule(progress: f64, schedule: LambdaSchedule) -> f64 {
    match schedule {
        LambdaSchedule::Constant { value } => value,
        LambdaSchedule::Annealed { max } => {
            let p = progress.clamp(0.0, 1.0);
            max * (2.0 / (1.0 + (-10.0 * p).exp()) - 1.0)
        }
    }
}
