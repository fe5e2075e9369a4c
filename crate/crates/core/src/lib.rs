//! Day-ahead topology reconfiguration and real-time voltage control for
//! fair PV curtailment in radial distribution networks.
//!
//! The crate is organized along the control loop:
//!
//! * [`netmodel`] — case files, PV placement, topology and radiality checks;
//! * [`powerflow`] — AC plant model and voltage sensitivity coefficients;
//! * [`optmodel`] — the day-ahead mixed-integer reconfiguration model;
//! * [`rtcontrol`] — the 15-minute linearized control problem;
//! * [`fairness`] — curtailment ledger, Jain index and weight policies;
//! * [`scenario`] — forecast/realization profiles;
//! * [`sim`] — the multi-day closed loop and its report.

pub mod fairness;
pub mod netmodel;
pub mod optmodel;
pub mod powerflow;
pub mod rtcontrol;
pub mod scenario;
pub mod sim;
