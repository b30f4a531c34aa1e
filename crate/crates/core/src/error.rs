// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MfgError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("matrix exponential failed (1-norm condition estimate {condition:.3e}): {reason}")]
    Expm { condition: f64, reason: String },

    #[error("singular resolvent nI - A at n = {n}")]
    SingularResolvent { n: f64 },

    #[error("{kind} Riccati solution blew up at t = {time:.6} (norm {norm:.3e})")]
    BlowUp {
        kind: String,
        time: f64,
        norm: f64,
    },

    #[error("noise tree needs {required} leaves, cap is {cap}; use a coarser grid or fewer common modes")]
    TreeTooLarge { required: u128, cap: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("decoupling construction requires deterministic common-noise diffusion (D0 = 0 and F0 = 0): {0}")]
    DetDiffViolated(String),

    #[error("Picard iteration did not reach tolerance after {iterations} iterations (last residual {last_residual:.3e})")]
    PicardNotConverged {
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("non-finite state in replica {replica} at step {step}")]
    NonFiniteState { replica: usize, step: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MfgError {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MfgError::Expm { .. }
                | MfgError::SingularResolvent { .. }
                | MfgError::BlowUp { .. }
                | MfgError::TreeTooLarge { .. }
                | MfgError::DetDiffViolated(_)
                | MfgError::PicardNotConverged { .. }
                | MfgError::NonFiniteState { .. }
        )
    }
}

pub type Result<T, E = MfgError> = std::result::Result<T, E>;
