//! Report directory: `report.json`, `per_day.csv`, `per_plant.csv`,
//! `switch_status.csv`, `rt_trace.csv`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ControlMode, DayResult, PlantMode, SimError, SimulationConfig};
use crate::fairness::{cumulative_generation, jfi, CurtailmentLedger, FairnessError, WeightPolicy};
use crate::netmodel::Network;
use crate::rtcontrol::write_trace;

/// Jain index with the all-zero case counted as perfectly even.
pub(crate) fn jfi_even(g: &[f64]) -> f64 {
    match jfi(g) {
        Ok(v) => v,
        Err(FairnessError::AllZero) => 1.0,
        Err(_) => unreachable!("jfi only fails on all-zero input"),
    }
}

/// Normalized generation of one day; plants with nothing available count as
/// uncurtailed.
fn day_generation(r: &DayResult) -> Vec<f64> {
    r.realized
        .iter()
        .zip(&r.mpp)
        .map(|(&e, &m)| if m > 0.0 { (e / m).clamp(0.0, 1.0) } else { 1.0 })
        .collect()
}

/// One row of `per_day.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day: usize,
    /// 1-based rows of the open lines, `;`-separated.
    pub open_lines: String,
    pub jfi_day: f64,
    pub jfi_cumulative: f64,
    pub curtailment_day: f64,
    pub curtailment_cumulative: f64,
    pub da_objective: Option<f64>,
    pub da_gap: Option<f64>,
    pub da_ac_violation: Option<f64>,
    pub v_max: f64,
    pub v_min: f64,
    pub max_violation: f64,
    pub emergencies: usize,
    pub night_setpoints: usize,
}

#[derive(Debug, Serialize)]
struct PlantRecord {
    day: usize,
    plant: usize,
    bus: usize,
    lambda: f64,
    mpp: f64,
    realized: f64,
    /// Curtailed share on this day.
    e_day: f64,
    /// Curtailed share over days 1..=day.
    e_cumulative: f64,
}

/// Totals, written as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub label: String,
    pub mode: ControlMode,
    pub policy: WeightPolicy,
    pub plant_mode: PlantMode,
    pub network: String,
    pub days: usize,
    /// Bus ids (as in the case file) of the plants.
    pub plant_buses: Vec<usize>,
    pub final_jfi: f64,
    /// Curtailed share of all available PV energy.
    pub total_curtailment: f64,
    /// Available and realized PV energy, p.u.·h.
    pub total_mpp: f64,
    pub total_realized: f64,
    /// Per-plant curtailed share over the whole horizon.
    pub plant_curtailment: Vec<f64>,
    /// Distinct open-line sets in order of first use.
    pub topologies_visited: Vec<Vec<usize>>,
    pub topology_changes: usize,
    pub max_violation: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub max_day_ahead_ac_violation: Option<f64>,
    pub emergencies: usize,
    pub night_setpoints: usize,
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub summary: SimulationSummary,
    pub records: Vec<DayRecord>,
    pub days: Vec<DayResult>,
    pub ledger: CurtailmentLedger,
    /// 1-based rows of the switchable lines.
    pub switchable: Vec<usize>,
}

impl SimulationReport {
    pub(super) fn build(
        cfg: &SimulationConfig,
        net: &Network,
        days: Vec<DayResult>,
        ledger: CurtailmentLedger,
    ) -> Result<Self, SimError> {
        let mut records = Vec::with_capacity(days.len());
        let mut visited: Vec<Vec<usize>> = Vec::new();
        let mut changes = 0;
        for (i, r) in days.iter().enumerate() {
            let g = cumulative_generation(&ledger, r.day)?;
            if !visited.contains(&r.open_lines) {
                visited.push(r.open_lines.clone());
            }
            if i > 0 && days[i - 1].open_lines != r.open_lines {
                changes += 1;
            }
            records.push(DayRecord {
                day: r.day,
                open_lines: super::join(&r.open_lines),
                jfi_day: jfi_even(&day_generation(r)),
                jfi_cumulative: jfi_even(&g),
                curtailment_day: ledger.day_curtailment(r.day),
                curtailment_cumulative: ledger.total_curtailment(r.day),
                da_objective: r.day_ahead.as_ref().map(|d| d.objective),
                da_gap: r.day_ahead.as_ref().map(|d| d.mip_gap),
                da_ac_violation: r.day_ahead.as_ref().map(|d| d.ac_violation),
                v_max: r.v_max,
                v_min: r.v_min,
                max_violation: r.max_violation,
                emergencies: r.emergencies,
                night_setpoints: r.night_setpoints,
            });
        }
        let n = days.len();
        let g = cumulative_generation(&ledger, n)?;
        let fold = |f: fn(&DayResult) -> f64, init: f64, op: fn(f64, f64) -> f64| days.iter().map(f).fold(init, op);
        let summary = SimulationSummary {
            label: cfg.label(),
            mode: cfg.mode,
            policy: cfg.policy,
            plant_mode: cfg.plant_mode,
            network: net.name.clone(),
            days: n,
            plant_buses: net.pv_plants.iter().map(|p| net.buses[p.bus].id).collect(),
            final_jfi: jfi_even(&g),
            total_curtailment: if n > 0 { ledger.total_curtailment(n) } else { 0.0 },
            total_mpp: days.iter().flat_map(|d| &d.mpp).sum(),
            total_realized: days.iter().flat_map(|d| &d.realized).sum(),
            plant_curtailment: g.iter().map(|x| 1.0 - x).collect(),
            topologies_visited: visited,
            topology_changes: changes,
            max_violation: fold(|d| d.max_violation, 0.0, f64::max),
            v_max: fold(|d| d.v_max, f64::NEG_INFINITY, f64::max),
            v_min: fold(|d| d.v_min, f64::INFINITY, f64::min),
            max_day_ahead_ac_violation: days
                .iter()
                .filter_map(|d| d.day_ahead.as_ref().map(|s| s.ac_violation))
                .reduce(f64::max),
            emergencies: days.iter().map(|d| d.emergencies).sum(),
            night_setpoints: days.iter().map(|d| d.night_setpoints).sum(),
        };
        Ok(Self {
            summary,
            records,
            days,
            ledger,
            switchable: net.switchable_lines().iter().map(|e| e + 1).collect(),
        })
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes the report directory, creating it if needed.
pub fn write_report(report: &SimulationReport, dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let json = serde_json::to_string_pretty(&report.summary).map_err(|e| io_err(dir, e))?;
    let path = dir.join("report.json");
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;

    write_csv(&dir.join("per_day.csv"), &report.records)?;

    let mut plants = Vec::new();
    for r in &report.days {
        let g = cumulative_generation(&report.ledger, r.day)?;
        let gd = day_generation(r);
        for (k, bus) in report.summary.plant_buses.iter().enumerate() {
            plants.push(PlantRecord {
                day: r.day,
                plant: k,
                bus: *bus,
                lambda: r.weights.lambda[k],
                mpp: r.mpp[k],
                realized: r.realized[k],
                e_day: 1.0 - gd[k],
                e_cumulative: 1.0 - g[k],
            });
        }
    }
    write_csv(&dir.join("per_plant.csv"), &plants)?;

    // one column per switchable line, 1 = closed
    let path = dir.join("switch_status.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    let mut header = vec!["day".to_string()];
    header.extend(report.switchable.iter().map(|l| format!("line_{l}")));
    w.write_record(&header).map_err(|e| io_err(&path, e))?;
    for r in &report.days {
        let mut row = vec![r.day.to_string()];
        row.extend(
            report
                .switchable
                .iter()
                .map(|&l| (r.topology.is_closed(l - 1) as u8).to_string()),
        );
        w.write_record(&row).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let path = dir.join("rt_trace.csv");
    let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let rows: Vec<_> = report.days.iter().flat_map(|d| d.trace.iter().cloned()).collect();
    write_trace(std::io::BufWriter::new(file), &rows).map_err(|e| io_err(&path, e))?;
    Ok(())
}

/// Reads the totals of a written report directory.
pub fn read_summary(dir: &Path) -> Result<SimulationSummary, SimError> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(&path, e))
}
