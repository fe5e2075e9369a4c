//! Network data model: buses, lines, PV plants and the switchable topology.
//!
//! All quantities are stored in per-unit on the case's own bases. Bus and line
//! references inside a [`Network`] are positional indices into `buses` and
//! `lines`; the original case-file bus numbers live in [`Bus::id`] and are only
//! used at the I/O boundary.

mod admittance;
mod case;
mod config;
mod topology;

pub use admittance::build_admittance;
pub use case::{parse_matpower_case, write_matpower_case, ParseOptions};
pub use config::{load_network, NetworkConfig, PvPlacement};
pub use topology::{enumerate_radial_topologies, validate_radiality, RadialityViolation, Topology};
pub(crate) use topology::bfs_tree as topology_tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default system base power, MVA.
pub const DEFAULT_BASE_MVA: f64 = 10.0;
/// Default minimum PV power factor.
pub const DEFAULT_PF_MIN: f64 = 0.95;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("case parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown bus id {0}")]
    UnknownBus(usize),
    #[error("bus {0} already hosts a PV plant")]
    DuplicatePlant(usize),
    #[error("invalid PV capacity {capacity} at bus {bus}")]
    InvalidCapacity { bus: usize, capacity: f64 },
    #[error("line {0} has zero impedance")]
    DegenerateLine(usize),
    #[error("line index {0} out of range")]
    UnknownLine(usize),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// Bus number as written in the case file.
    pub id: usize,
    /// Nominal active load, p.u.
    pub load_p: f64,
    /// Nominal reactive load, p.u.
    pub load_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    /// Index of the `from` bus.
    pub from: usize,
    /// Index of the `to` bus.
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, split half to each end.
    pub b: f64,
    pub switchable: bool,
    /// Status column from the case file. Kept for reporting the base
    /// configuration; the optimizer decides the actual topology.
    pub in_service: bool,
    /// Ampacity in p.u. current; `f64::INFINITY` for unrated lines.
    pub i_max: f64,
    pub p_max: f64,
    pub q_max: f64,
}

impl Line {
    pub fn impedance_norm(&self) -> f64 {
        self.r.hypot(self.x)
    }

    /// The bus on the other side of `bus`.
    pub fn other(&self, bus: usize) -> usize {
        if self.from == bus {
            self.to
        } else {
            self.from
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvPlant {
    /// Index of the hosting bus.
    pub bus: usize,
    /// Converter apparent-power capacity, p.u.
    pub s_max: f64,
    pub pf_min: f64,
}

impl PvPlant {
    /// Ratio |q|/p allowed by the minimum power factor.
    pub fn zeta(&self) -> f64 {
        ((1.0 - self.pf_min * self.pf_min) / (self.pf_min * self.pf_min)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    /// Base power, MVA.
    pub base_mva: f64,
    /// Base voltage, kV.
    pub base_kv: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub pv_plants: Vec<PvPlant>,
    /// Indices of slack buses, sorted ascending.
    pub slack_buses: Vec<usize>,
}

impl Network {
    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn is_slack(&self, bus: usize) -> bool {
        self.slack_buses.binary_search(&bus).is_ok()
    }

    pub fn switchable_lines(&self) -> Vec<usize> {
        (0..self.lines.len())
            .filter(|&e| self.lines[e].switchable)
            .collect()
    }

    /// Lines incident to each bus.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.buses.len()];
        for (e, line) in self.lines.iter().enumerate() {
            inc[line.from].push(e);
            inc[line.to].push(e);
        }
        inc
    }

    /// Index of the PV plant at `bus`, if any.
    pub fn plant_at(&self, bus: usize) -> Option<usize> {
        self.pv_plants.iter().position(|p| p.bus == bus)
    }

    /// Checks the structural invariants that every constructor is expected to uphold.
    pub fn check(&self) -> Result<(), NetworkError> {
        if !(self.base_mva > 0.0) {
            return Err(NetworkError::Invalid(format!(
                "base power must be positive, got {}",
                self.base_mva
            )));
        }
        let n = self.buses.len();
        let mut ids: Vec<usize> = self.buses.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(NetworkError::Invalid("duplicate bus id".into()));
        }
        for bus in &self.buses {
            if !bus.load_p.is_finite() || !bus.load_q.is_finite() {
                return Err(NetworkError::Invalid(format!(
                    "bus {} has a non-finite load",
                    bus.id
                )));
            }
        }
        if self.slack_buses.is_empty() {
            return Err(NetworkError::Invalid("no slack bus".into()));
        }
        for (e, line) in self.lines.iter().enumerate() {
            if line.from >= n || line.to >= n {
                return Err(NetworkError::UnknownLine(e));
            }
            if line.r < 0.0 {
                return Err(NetworkError::Invalid(format!(
                    "line {e} has negative resistance"
                )));
            }
            if line.impedance_norm() == 0.0 {
                return Err(NetworkError::DegenerateLine(e));
            }
            if !(line.i_max > 0.0 && line.p_max > 0.0 && line.q_max > 0.0) {
                return Err(NetworkError::Invalid(format!(
                    "line {e} needs positive ampacity and flow bounds"
                )));
            }
        }
        for plant in &self.pv_plants {
            if !(plant.s_max > 0.0) || !(plant.pf_min > 0.0 && plant.pf_min <= 1.0) {
                return Err(NetworkError::InvalidCapacity {
                    bus: self.buses[plant.bus].id,
                    capacity: plant.s_max,
                });
            }
        }
        Ok(())
    }
}

/// Adds PV plants at the given `(bus id, capacity p.u.)` placements.
///
/// Loads and lines are left untouched. Every plant gets [`DEFAULT_PF_MIN`];
/// use [`augment_pv_with_pf`] to choose another power-factor limit.
pub fn augment_pv(net: &Network, placements: &[(usize, f64)]) -> Result<Network, NetworkError> {
    augment_pv_with_pf(net, placements, DEFAULT_PF_MIN)
}

pub fn augment_pv_with_pf(
    net: &Network,
    placements: &[(usize, f64)],
    pf_min: f64,
) -> Result<Network, NetworkError> {
    let mut out = net.clone();
    for &(id, capacity) in placements {
        let bus = net.bus_index(id).ok_or(NetworkError::UnknownBus(id))?;
        if !(capacity > 0.0) || !capacity.is_finite() {
            return Err(NetworkError::InvalidCapacity { bus: id, capacity });
        }
        if out.plant_at(bus).is_some() {
            return Err(NetworkError::DuplicatePlant(id));
        }
        out.pv_plants.push(PvPlant {
            bus,
            s_max: capacity,
            pf_min,
        });
    }
    Ok(out)
}
