//! AC power flow on radial topologies and voltage-magnitude sensitivities.
//!
//! The plant model is a backward/forward sweep on each energized tree.
//! Buses without a closed path to a slack bus are de-energized: they are
//! reported with zero voltage and take no part in the sensitivities.

mod sensitivity;
mod sweep;

pub use sensitivity::{compute_sensitivities, finite_difference_sensitivities, SensitivityMatrices};
pub use sweep::{solve_ac_power_flow, solve_ac_power_flow_with, BranchFlow, PowerFlowOptions, PowerFlowState};

use thiserror::Error;

use crate::netmodel::NetworkError;

#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error("closed lines {lines:?} form a loop among energized buses")]
    NotRadial { lines: Vec<usize> },
    #[error("power flow did not converge after {iterations} iterations (last |dV| = {mismatch:e})")]
    Diverged { iterations: usize, mismatch: f64 },
    #[error("expected {expected} values, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("singular power-flow Jacobian")]
    SingularJacobian,
    #[error(transparent)]
    Network(#[from] NetworkError),
}
