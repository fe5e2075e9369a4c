//! Optimization models: a solver-neutral LP/MILP layer, polygonal
//! linearization of disc constraints, and the day-ahead reconfiguration
//! problem.

mod dayahead;
pub mod lp;
mod polygon;
mod search;

pub use dayahead::{
    build_day_ahead_model, build_fixed_topology_model, compute_big_m, plan_day_ahead, solve_by_enumeration,
    solve_day_ahead, BigM, DayAheadConfig, DayAheadMethod, DayAheadModel, DayAheadSolution, EXTRA_OBJECTIVE_FACTOR,
};
pub use lp::{Backend, LinearModel, LpSolution, SolveOptions, SolveStatus};
pub use polygon::{polygonize_quadratic, HalfPlane};
pub use search::{search_day_ahead, SEARCH_MAX_SWITCHES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::RadialityViolation;

/// What makes a day-ahead problem infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfeasibilityCause {
    /// Some radial configuration exists, but none keeps voltages inside
    /// the limits even with full curtailment.
    VoltageLimits,
    /// No radial configuration exists at all.
    Radiality,
}

#[derive(Debug, Error)]
pub enum OptError {
    #[error("infeasible model{}", match .0 {
        Some(InfeasibilityCause::VoltageLimits) => ": voltage limits cannot be met by any radial topology",
        Some(InfeasibilityCause::Radiality) => ": no radial topology exists",
        None => "",
    })]
    Infeasible(Option<InfeasibilityCause>),
    #[error("unbounded model")]
    Unbounded,
    #[error("solver stopped without a feasible solution ({0})")]
    NoIncumbent(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario data: {0}")]
    Scenario(String),
    #[error("network: {0}")]
    Network(String),
    #[error("solution is not radial: {0}")]
    NotRadial(RadialityViolation),
    #[error("i/o: {0}")]
    Io(String),
}
