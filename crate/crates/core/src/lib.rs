// SPDX-License-Identifier: Apache-2.0

//! Exact simulation of a central sensor spin coupled to a bath of dark
//! spins, the pulse sequences that turn the bath into a field amplifier,
//! and closed-form predictors to check them against.

pub mod analysis;
pub mod error;
pub mod model;
pub mod protocol;
pub mod quantum;
pub mod seeds;
pub mod seqlang;

pub use error::{Error, Result};
pub use model::{DarkFrame, FieldWaveform, Geometry, SpinSystem};
pub use protocol::{ProtocolResult, ProtocolSpec};
pub use quantum::{Axis, OperatorMatrix, StateVector, Target, C64};
pub use seqlang::{PulseEvent, Schedule};
