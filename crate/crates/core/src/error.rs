// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the simulator and its analysis layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spin index {index} out of range for {n_spins} spins")]
    SiteOutOfRange { index: usize, n_spins: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("{n_dark} dark spins exceeds the exact-simulation cap of {cap}")]
    DimensionCap { n_dark: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schedule and waveform are inconsistent: {0}")]
    Inconsistent(String),

    #[error("degenerate field step: {0}")]
    DegenerateStep(String),

    #[error("zero slope: the protocol has no first-order field response")]
    ZeroSlope,

    #[error("unknown builtin schedule `{0}`")]
    UnknownSchedule(String),

    #[error(transparent)]
    Parse(#[from] crate::seqlang::ParseError),
}

pub type Result<T> = std::result::Result<T, Error>;
