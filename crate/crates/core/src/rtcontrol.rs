//! Real-time voltage control: a small LP over PV set-points, solved every
//! 15 minutes on the day's fixed topology with voltages predicted from
//! sensitivity coefficients around the last operating point.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fairness::FairnessWeights;
use crate::netmodel::{Network, Topology};
use crate::optmodel::lp::{solve, LinearModel, SolveOptions};
use crate::optmodel::{polygonize_quadratic, OptError, EXTRA_OBJECTIVE_FACTOR};
use crate::powerflow::{compute_sensitivities, PowerFlowError, PowerFlowState, SensitivityMatrices};

const INF: f64 = f64::INFINITY;
/// Voltages within this distance of a limit count as binding.
const BINDING_TOL: f64 = 1e-7;
const SNAP_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum RtError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("voltage limits unreachable with the available set-points")]
    Infeasible,
    #[error("negative PV forecast {value} for plant {plant}")]
    NegativeForecast { plant: usize, value: f64 },
    #[error(transparent)]
    Solver(#[from] OptError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtStepInput {
    pub topology: Topology,
    /// Converged AC state of the previous step.
    pub prev_state: PowerFlowState,
    /// Set-points applied in the previous step, per plant.
    pub prev_p: Vec<f64>,
    pub prev_q: Vec<f64>,
    /// Available PV power for this step, per plant.
    pub mpp_forecast: Vec<f64>,
    /// Load for this step, per bus.
    pub load_forecast: Vec<Complex64>,
    pub weights: FairnessWeights,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RtConfig {
    pub polygon_segments: usize,
    /// Relative slack on the optimal objective allowed in the tie-breaking pass.
    pub tie_tolerance: f64,
    /// Adds a dominant term minimizing the largest normalized curtailment
    /// of any plant (comparison scheme).
    pub fairness_term: bool,
}

impl Default for RtConfig {
    fn default() -> Self {
        Self {
            polygon_segments: 12,
            tie_tolerance: 1e-9,
            fairness_term: false,
        }
    }
}

/// Emergency mode: limits could not be met; the set-points minimize the
/// largest predicted violation instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emergency {
    pub violating_buses: Vec<usize>,
    pub worst_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtSetpoint {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Linearized voltage prediction per bus (0 on de-energized buses).
    pub predicted_v: Vec<f64>,
    /// `p_hat - p` per plant.
    pub curtailed: Vec<f64>,
    /// Buses whose predicted voltage sits at a limit.
    pub binding_buses: Vec<usize>,
    /// Weighted curtailment.
    pub objective: f64,
    /// True when no PV was available and no LP was solved.
    pub skipped: bool,
    pub emergency: Option<Emergency>,
}

/// The step LP together with what is needed to read its solution.
#[derive(Debug, Clone)]
pub struct RtModel {
    pub lp: LinearModel,
    p: Vec<usize>,
    q: Vec<usize>,
    /// Voltage rows: bus and its prediction `base + Σ k·x` as column terms.
    voltage: Vec<(usize, f64, Vec<(usize, f64)>)>,
    p_hat: Vec<f64>,
    lambda: Vec<f64>,
    n: usize,
    v_min: f64,
    v_max: f64,
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), RtError> {
    if expected == found {
        Ok(())
    } else {
        Err(RtError::Dimension { what, expected, found })
    }
}

/// Net injection of every PV plant per bus for the given set-points.
fn pv_injection(net: &Network, p: &[f64], q: &[f64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); net.bus_count()];
    for (k, pl) in net.pv_plants.iter().enumerate() {
        out[pl.bus] += Complex64::new(p[k], q[k]);
    }
    out
}

/// Voltage prediction of every energized non-slack bus as a constant plus
/// linear terms in the plant set-points. Besides the set-point change, the
/// constant carries the effect of the load change since the previous step.
fn predictions(
    net: &Network,
    input: &RtStepInput,
    sens: &SensitivityMatrices,
    p_cols: &[usize],
    q_cols: &[usize],
) -> Vec<(usize, f64, Vec<(usize, f64)>)> {
    let n = net.bus_count();
    let prev_pv = pv_injection(net, &input.prev_p, &input.prev_q);
    // previous load = PV - net injection
    let d_load: Vec<Complex64> = (0..n)
        .map(|b| {
            if net.is_slack(b) {
                Complex64::new(0.0, 0.0)
            } else {
                input.load_forecast[b] - (prev_pv[b] - input.prev_state.s_inj[b])
            }
        })
        .collect();
    (0..n)
        .filter(|&m| input.prev_state.energized[m] && !net.is_slack(m))
        .map(|m| {
            let mut base = input.prev_state.v[m];
            for b in 0..n {
                base -= sens.kp[(m, b)] * d_load[b].re + sens.kq[(m, b)] * d_load[b].im;
            }
            let mut terms = Vec::with_capacity(2 * net.pv_plants.len());
            for (k, pl) in net.pv_plants.iter().enumerate() {
                let (kp, kq) = (sens.kp[(m, pl.bus)], sens.kq[(m, pl.bus)]);
                base -= kp * input.prev_p[k] + kq * input.prev_q[k];
                terms.push((p_cols[k], kp));
                terms.push((q_cols[k], kq));
            }
            (m, base, terms)
        })
        .collect()
}

/// Linearized voltages for given set-points, without solving anything.
pub fn predict_voltages(
    net: &Network,
    input: &RtStepInput,
    sens: &SensitivityMatrices,
    p: &[f64],
    q: &[f64],
) -> Vec<f64> {
    let k = net.pv_plants.len();
    let p_cols: Vec<usize> = (0..k).map(|i| 2 * i).collect();
    let q_cols: Vec<usize> = (0..k).map(|i| 2 * i + 1).collect();
    let x: Vec<f64> = (0..k).flat_map(|i| [p[i], q[i]]).collect();
    let mut v = vec![0.0; net.bus_count()];
    for b in &net.slack_buses {
        v[*b] = input.prev_state.v[*b];
    }
    for (m, base, terms) in predictions(net, input, sens, &p_cols, &q_cols) {
        v[m] = base + terms.iter().map(|&(c, s)| s * x[c]).sum::<f64>();
    }
    v
}

pub fn build_rt_step(
    net: &Network,
    input: &RtStepInput,
    sens: &SensitivityMatrices,
    cfg: &RtConfig,
) -> Result<RtModel, RtError> {
    let n = net.bus_count();
    let plants = net.pv_plants.len();
    check_len("sensitivity rows", n, sens.kp.nrows())?;
    check_len("sensitivity columns", n, sens.kp.ncols())?;
    check_len("reactive sensitivity rows", n, sens.kq.nrows())?;
    check_len("reactive sensitivity columns", n, sens.kq.ncols())?;
    check_len("previous state", n, input.prev_state.v.len())?;
    check_len("load forecast", n, input.load_forecast.len())?;
    check_len("PV forecast", plants, input.mpp_forecast.len())?;
    check_len("previous active set-points", plants, input.prev_p.len())?;
    check_len("previous reactive set-points", plants, input.prev_q.len())?;
    check_len("weights", plants, input.weights.lambda.len())?;
    if let Some((plant, &value)) = input.mpp_forecast.iter().enumerate().find(|(_, &v)| !(v >= 0.0)) {
        return Err(RtError::NegativeForecast { plant, value });
    }

    let mut lp = LinearModel::new("rt_step");
    let mut p_cols = Vec::with_capacity(plants);
    let mut q_cols = Vec::with_capacity(plants);
    for (k, pl) in net.pv_plants.iter().enumerate() {
        let p_hat = input.mpp_forecast[k];
        let lam = input.weights.lambda[k];
        let z = pl.zeta();
        let p = lp.add_var(format!("p_{k}"), 0.0, p_hat, -lam);
        lp.offset += lam * p_hat;
        let q = lp.add_var(format!("q_{k}"), -z * p_hat, z * p_hat, 0.0);
        lp.add_row(format!("pf_hi_{k}"), vec![(q, 1.0), (p, -z)], -INF, 0.0);
        lp.add_row(format!("pf_lo_{k}"), vec![(q, 1.0), (p, z)], 0.0, INF);
        if p_hat > 0.0 && pl.s_max < p_hat * (1.0 + z * z).sqrt() {
            let polygon = polygonize_quadratic(pl.s_max, cfg.polygon_segments)?;
            for (i, hp) in polygon.iter().enumerate() {
                lp.add_row(format!("cap_{k}_{i}"), vec![(p, hp.normal[0]), (q, hp.normal[1])], -INF, hp.rhs);
            }
        }
        p_cols.push(p);
        q_cols.push(q);
    }
    if cfg.fairness_term {
        let weighted: f64 = input.weights.lambda.iter().zip(&input.mpp_forecast).map(|(l, h)| l * h).sum();
        let z = lp.add_var("max_share", 0.0, 1.0, EXTRA_OBJECTIVE_FACTOR * weighted);
        for (k, (&p, &h)) in p_cols.iter().zip(&input.mpp_forecast).enumerate() {
            if h > 0.0 {
                // (p_hat - p) / p_hat <= z
                lp.add_row(format!("share_{k}"), vec![(p, 1.0), (z, h)], h, INF);
            }
        }
    }
    let voltage = predictions(net, input, sens, &p_cols, &q_cols);
    for (m, base, terms) in &voltage {
        lp.add_row(format!("v_{}", net.buses[*m].id), terms.clone(), input.v_min - base, input.v_max - base);
    }
    Ok(RtModel {
        lp,
        p: p_cols,
        q: q_cols,
        voltage,
        p_hat: input.mpp_forecast.clone(),
        lambda: input.weights.lambda.clone(),
        n,
        v_min: input.v_min,
        v_max: input.v_max,
    })
}

impl RtModel {
    fn predicted(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        for (m, base, terms) in &self.voltage {
            v[*m] = base + terms.iter().map(|&(c, k)| k * x[c]).sum::<f64>();
        }
        v
    }

    fn setpoint(&self, x: &[f64], emergency: Option<Emergency>) -> RtSetpoint {
        // solver tolerances leave uncurtailed plants a hair below their bound
        let p: Vec<f64> = self
            .p
            .iter()
            .zip(&self.p_hat)
            .map(|(&c, &h)| if h - x[c] < SNAP_TOL { h } else { x[c].max(0.0) })
            .collect();
        let q: Vec<f64> = self.q.iter().map(|&c| x[c]).collect();
        let curtailed: Vec<f64> = self.p_hat.iter().zip(&p).map(|(h, v)| (h - v).max(0.0)).collect();
        let predicted_v = self.predicted(x);
        let binding_buses = self
            .voltage
            .iter()
            .map(|(m, _, _)| *m)
            .filter(|&m| {
                (predicted_v[m] - self.v_max).abs() <= BINDING_TOL || (predicted_v[m] - self.v_min).abs() <= BINDING_TOL
            })
            .collect();
        let objective = self.lambda.iter().zip(&curtailed).map(|(l, c)| l * c).sum();
        RtSetpoint {
            p,
            q,
            predicted_v,
            curtailed,
            binding_buses,
            objective,
            skipped: false,
            emergency,
        }
    }

    /// Rows `τ ≥ p_hat - p` for every plant, returning `τ`.
    fn add_max_curtailment(lp: &mut LinearModel, p: &[usize], p_hat: &[f64]) -> usize {
        let tau = lp.add_var("max_curtailment", 0.0, INF, 1.0);
        for (k, (&c, &h)) in p.iter().zip(p_hat).enumerate() {
            lp.add_row(format!("tau_{k}"), vec![(tau, 1.0), (c, 1.0)], h, INF);
        }
        tau
    }

    /// Keeps the first-pass objective of `lp` at most `bound`, then clears it.
    fn cap_objective(lp: &mut LinearModel, bound: f64) {
        let coeffs: Vec<(usize, f64)> = lp
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.cost != 0.0)
            .map(|(j, c)| (j, c.cost))
            .collect();
        let rhs = bound - lp.offset;
        lp.add_row("objective_cap", coeffs, -INF, rhs);
        for c in lp.columns.iter_mut() {
            c.cost = 0.0;
        }
        lp.offset = 0.0;
    }
}

fn tolerance(value: f64, rel: f64) -> f64 {
    rel * value.abs().max(1.0) + 1e-12
}

/// Solves the step LP: weighted curtailment first, then the largest single
/// curtailment among the optimal solutions.
pub fn solve_rt_step(model: &RtModel, cfg: &RtConfig, opts: &SolveOptions) -> Result<RtSetpoint, RtError> {
    let first = match solve(&model.lp, opts) {
        Ok(s) => s,
        Err(OptError::Infeasible(_)) => return Err(RtError::Infeasible),
        Err(e) => return Err(e.into()),
    };
    let mut lp = model.lp.clone();
    RtModel::cap_objective(&mut lp, first.objective + tolerance(first.objective, cfg.tie_tolerance));
    RtModel::add_max_curtailment(&mut lp, &model.p, &model.p_hat);
    let second = solve(&lp, opts)?;
    Ok(model.setpoint(&second.x, None))
}

/// Fallback when the limits are unreachable: minimize the worst predicted
/// violation, then the weighted curtailment at that violation level.
pub fn solve_emergency(model: &RtModel, cfg: &RtConfig, opts: &SolveOptions) -> Result<RtSetpoint, RtError> {
    let mut lp = model.lp.clone();
    let objective: Vec<f64> = lp.columns.iter().map(|c| c.cost).collect();
    let offset = lp.offset;
    for c in lp.columns.iter_mut() {
        c.cost = 0.0;
    }
    lp.offset = 0.0;
    let sigma = lp.add_var("violation", 0.0, INF, 1.0);
    // the voltage box is replaced by one widened by sigma on both sides
    for row in lp.rows.iter_mut().filter(|r| r.name.starts_with("v_")) {
        row.lb = -INF;
        row.ub = INF;
    }
    for (m, base, terms) in &model.voltage {
        let mut hi = terms.clone();
        hi.push((sigma, -1.0));
        lp.add_row(format!("vs_hi_{m}"), hi, -INF, model.v_max - base);
        let mut lo = terms.clone();
        lo.push((sigma, 1.0));
        lp.add_row(format!("vs_lo_{m}"), lo, model.v_min - base, INF);
    }
    let first = solve(&lp, opts)?;
    let worst = first.x[sigma];
    lp.columns[sigma].ub = worst + tolerance(worst, cfg.tie_tolerance);
    lp.columns[sigma].cost = 0.0;
    for (c, cost) in lp.columns.iter_mut().zip(&objective) {
        c.cost = *cost;
    }
    lp.offset = offset;
    let second = solve(&lp, opts)?;
    let mut sp = model.setpoint(&second.x, None);
    let violating_buses = model
        .voltage
        .iter()
        .map(|(m, _, _)| *m)
        .filter(|&m| sp.predicted_v[m] > model.v_max + 1e-9 || sp.predicted_v[m] < model.v_min - 1e-9)
        .collect();
    sp.emergency = Some(Emergency {
        violating_buses,
        worst_violation: worst,
    });
    Ok(sp)
}

/// One controller step: skips steps without PV, otherwise linearizes at the
/// previous state, solves, and falls back to the emergency LP if needed.
pub fn control_step(
    net: &Network,
    input: &RtStepInput,
    cfg: &RtConfig,
    opts: &SolveOptions,
) -> Result<RtSetpoint, RtError> {
    let plants = net.pv_plants.len();
    check_len("PV forecast", plants, input.mpp_forecast.len())?;
    if input.mpp_forecast.iter().all(|&v| v <= 0.0) {
        return Ok(RtSetpoint {
            p: vec![0.0; plants],
            q: vec![0.0; plants],
            predicted_v: input.prev_state.v.clone(),
            curtailed: vec![0.0; plants],
            binding_buses: Vec::new(),
            objective: 0.0,
            skipped: true,
            emergency: None,
        });
    }
    let sens = compute_sensitivities(net, &input.topology, &input.prev_state)?;
    let model = build_rt_step(net, input, &sens, cfg)?;
    match solve_rt_step(&model, cfg, opts) {
        Err(RtError::Infeasible) => {
            let sp = solve_emergency(&model, cfg, opts)?;
            if let Some(e) = &sp.emergency {
                log::warn!(
                    "real-time limits unreachable; worst predicted violation {:.4} p.u. at buses {:?}",
                    e.worst_violation,
                    e.violating_buses.iter().map(|&b| net.buses[b].id).collect::<Vec<_>>()
                );
            }
            Ok(sp)
        }
        other => other,
    }
}

/// One line of the optional per-step trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub day: usize,
    pub timestep: usize,
    pub plant: usize,
    pub p_hat: f64,
    pub p: f64,
    pub q: f64,
    /// Case-file ids of binding buses, `;`-separated.
    pub binding_buses: String,
}

pub fn trace_rows(net: &Network, day: usize, timestep: usize, p_hat: &[f64], sp: &RtSetpoint) -> Vec<TraceRow> {
    let binding = sp
        .binding_buses
        .iter()
        .map(|&b| net.buses[b].id.to_string())
        .collect::<Vec<_>>()
        .join(";");
    (0..sp.p.len())
        .map(|k| TraceRow {
            day,
            timestep,
            plant: k,
            p_hat: p_hat[k],
            p: sp.p[k],
            q: sp.q[k],
            binding_buses: binding.clone(),
        })
        .collect()
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, rows: &[TraceRow]) -> Result<(), csv::Error> {
    write_trace(std::fs::File::create(path)?, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::{WeightParams, WeightPolicy};
    use crate::netmodel::fixtures::{case33, chain};
    use crate::netmodel::{augment_pv, augment_pv_with_pf, Line};
    use crate::powerflow::solve_ac_power_flow;

    const R: f64 = 0.01;
    const X: f64 = 0.02;

    fn weights(lambda: Vec<f64>) -> FairnessWeights {
        FairnessWeights {
            lambda,
            policy: WeightPolicy::Uniform,
            params: WeightParams::default(),
        }
    }

    /// Input linearized at zero PV output and the given per-bus load.
    fn input(net: &Network, p_hat: Vec<f64>, load: Vec<Complex64>, v_min: f64, v_max: f64) -> RtStepInput {
        let topology = Topology::base(net);
        let inj: Vec<Complex64> = load.iter().map(|l| -l).collect();
        let prev_state = solve_ac_power_flow(net, &topology, &inj).unwrap();
        let k = net.pv_plants.len();
        RtStepInput {
            topology,
            prev_state,
            prev_p: vec![0.0; k],
            prev_q: vec![0.0; k],
            mpp_forecast: p_hat,
            load_forecast: load,
            weights: weights(vec![1.0; k]),
            v_min,
            v_max,
        }
    }

    fn two_bus() -> Network {
        augment_pv(&chain(2, R, X), &[(2, 1.0)]).unwrap()
    }

    fn zeta() -> f64 {
        (1.0f64 / 0.95 / 0.95 - 1.0).sqrt()
    }

    fn run(net: &Network, inp: &RtStepInput) -> RtSetpoint {
        control_step(net, inp, &RtConfig::default(), &SolveOptions::default()).unwrap()
    }

    #[test]
    fn no_violation_keeps_full_output() {
        let net = two_bus();
        let inp = input(&net, vec![0.3], vec![Complex64::new(0.0, 0.0); 2], 0.95, 1.05);
        let sp = run(&net, &inp);
        assert_eq!(sp.p[0], 0.3);
        assert_eq!(sp.curtailed, vec![0.0]);
        assert_eq!(sp.objective, 0.0);
        assert!(sp.emergency.is_none() && !sp.skipped);
    }

    #[test]
    fn single_plant_curtails_to_the_limit() {
        // At a flat, unloaded two-bus state dv/dp = r and dv/dq = x, and the
        // plant absorbs reactive power at its power-factor bound first.
        let net = two_bus();
        let v_max = 1.001;
        let inp = input(&net, vec![0.8], vec![Complex64::new(0.0, 0.0); 2], 0.95, v_max);
        let sp = run(&net, &inp);
        let z = zeta();
        let p_star = (v_max - 1.0) / (R - z * X);
        assert!(p_star < 0.8);
        assert!((sp.p[0] - p_star).abs() < 1e-6, "{} vs {p_star}", sp.p[0]);
        assert!((sp.q[0] + z * p_star).abs() < 1e-6);
        assert!((sp.predicted_v[1] - v_max).abs() < 1e-9);
        assert_eq!(sp.binding_buses, vec![1]);
    }

    #[test]
    fn uniform_weight_scaling_keeps_setpoints() {
        let net = augment_pv(&chain(4, R, X), &[(2, 0.5), (4, 0.5)]).unwrap();
        let load = vec![Complex64::new(0.0, 0.0); 4];
        let mut inp = input(&net, vec![0.4, 0.4], load, 0.95, 1.004);
        let a = run(&net, &inp);
        inp.weights = weights(vec![2.0, 2.0]);
        let b = run(&net, &inp);
        for k in 0..2 {
            assert!((a.p[k] - b.p[k]).abs() < 1e-9);
            assert!((a.q[k] - b.q[k]).abs() < 1e-9);
        }
        assert!(a.curtailed.iter().sum::<f64>() > 1e-4);
    }

    /// Hub bus fed from the slack, with two identical purely reactive spurs
    /// each hosting one plant. Absorbing plants pull the spurs below the
    /// hub, so the hub binds and only the total output is determined.
    fn symmetric_star() -> Network {
        let mut net = chain(2, R, X);
        for id in [3, 4] {
            net.buses.push(crate::netmodel::Bus {
                id,
                load_p: 0.0,
                load_q: 0.0,
            });
            net.lines.push(Line {
                from: 1,
                to: id - 1,
                r: 0.0,
                x: 0.01,
                ..net.lines[0].clone()
            });
        }
        augment_pv(&net, &[(3, 0.5), (4, 0.5)]).unwrap()
    }

    #[test]
    fn symmetric_plants_share_curtailment() {
        let net = symmetric_star();
        let inp = input(&net, vec![0.4, 0.4], vec![Complex64::new(0.0, 0.0); 4], 0.95, 1.002);
        let sp = run(&net, &inp);
        // hand solution: hub prediction 1 + (R - zX) (p1 + p2) at the limit
        let total = (1.002 - 1.0) / (R - zeta() * X);
        assert!(total < 0.8);
        assert!((sp.p[0] + sp.p[1] - total).abs() < 1e-6);
        assert!(sp.curtailed[0] > 1e-3);
        assert!((sp.curtailed[0] - sp.curtailed[1]).abs() < 1e-7, "{:?}", sp.curtailed);
        assert_eq!(sp.binding_buses, vec![1]);
    }

    #[test]
    fn night_step_is_skipped() {
        let net = two_bus();
        let inp = input(&net, vec![0.0], vec![Complex64::new(0.1, 0.02), Complex64::new(0.1, 0.02)], 0.95, 1.05);
        let sp = run(&net, &inp);
        assert!(sp.skipped);
        assert_eq!(sp.p, vec![0.0]);
        assert_eq!(sp.q, vec![0.0]);
    }

    #[test]
    fn zero_forecast_forces_zero_reactive_power() {
        let net = augment_pv(&chain(3, R, X), &[(2, 0.5), (3, 0.5)]).unwrap();
        let inp = input(&net, vec![0.0, 0.2], vec![Complex64::new(0.0, 0.0); 3], 0.95, 1.05);
        let sp = run(&net, &inp);
        assert_eq!((sp.p[0], sp.q[0]), (0.0, 0.0));
    }

    #[test]
    fn reactive_power_alone_removes_violation() {
        let net = two_bus();
        let p_hat = 0.5;
        // reachable with q = -zeta p_hat / 2 and no curtailment
        let v_max = 1.0 + R * p_hat - 0.5 * X * zeta() * p_hat;
        let inp = input(&net, vec![p_hat], vec![Complex64::new(0.0, 0.0); 2], 0.95, v_max);
        let sp = run(&net, &inp);
        assert!(sp.curtailed[0].abs() < 1e-9);
        assert!(sp.q[0] < 0.0);
    }

    #[test]
    fn unreachable_limits_fall_back_to_emergency() {
        let net = two_bus();
        let inp = input(&net, vec![0.8], vec![Complex64::new(0.0, 0.0); 2], 1.05, 1.1);
        let model = build_rt_step(&net, &inp, &compute_sensitivities(&net, &inp.topology, &inp.prev_state).unwrap(), &RtConfig::default()).unwrap();
        assert!(matches!(
            solve_rt_step(&model, &RtConfig::default(), &SolveOptions::default()),
            Err(RtError::Infeasible)
        ));
        let sp = run(&net, &inp);
        let e = sp.emergency.as_ref().expect("emergency");
        assert_eq!(e.violating_buses, vec![1]);
        // best effort: full output with reactive injection
        let highest = 1.0 + R * 0.8 + X * zeta() * 0.8;
        assert!((e.worst_violation - (1.05 - highest)).abs() < 1e-6);
        assert!((sp.p[0] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = two_bus();
        let inp = input(&net, vec![0.3], vec![Complex64::new(0.0, 0.0); 2], 0.95, 1.05);
        let sens = SensitivityMatrices::zeros(3);
        assert!(matches!(
            build_rt_step(&net, &inp, &sens, &RtConfig::default()),
            Err(RtError::Dimension { .. })
        ));
        let mut bad = inp.clone();
        bad.mpp_forecast = vec![-0.1];
        let sens = compute_sensitivities(&net, &bad.topology, &bad.prev_state).unwrap();
        assert!(matches!(
            build_rt_step(&net, &bad, &sens, &RtConfig::default()),
            Err(RtError::NegativeForecast { plant: 0, .. })
        ));
    }

    #[test]
    fn repeated_solves_are_identical() {
        let net = augment_pv(&chain(4, R, X), &[(2, 0.5), (3, 0.5), (4, 0.5)]).unwrap();
        let inp = input(&net, vec![0.4, 0.3, 0.4], vec![Complex64::new(0.01, 0.0); 4], 0.95, 1.004);
        assert_eq!(run(&net, &inp), run(&net, &inp));
    }

    #[test]
    fn capacity_polygon_limits_output() {
        let net = augment_pv_with_pf(&chain(2, R, X), &[(2, 0.5)], 0.8).unwrap();
        let inp = input(&net, vec![0.5], vec![Complex64::new(0.0, 0.0); 2], 0.95, 1.0);
        let sp = run(&net, &inp);
        let hp = polygonize_quadratic(0.5, 12).unwrap();
        assert!(hp.iter().all(|h| h.contains(sp.p[0], sp.q[0], 1e-9)));
        assert!(sp.q[0].abs() <= 0.75 * sp.p[0] + 1e-9);
    }

    #[test]
    fn closed_loop_case33_stays_within_limits() {
        let base = case33();
        let net = augment_pv(&base, &[(18, 0.25), (33, 0.25), (25, 0.2)]).unwrap();
        let topo = Topology::base(&net);
        let load: Vec<Complex64> = net.buses.iter().map(|b| Complex64::new(b.load_p, b.load_q) * 0.3).collect();
        let v_max = 1.03;
        let mut inp = input(&net, vec![0.25, 0.25, 0.2], load.clone(), 0.9, v_max);
        // apply, re-linearize, apply again: realized voltages must settle
        for _ in 0..3 {
            let sp = run(&net, &inp);
            let pv = pv_injection(&net, &sp.p, &sp.q);
            let inj: Vec<Complex64> = (0..net.bus_count()).map(|b| pv[b] - load[b]).collect();
            let state = solve_ac_power_flow(&net, &topo, &inj).unwrap();
            let worst = state.v.iter().cloned().fold(0.0, f64::max);
            assert!(worst <= v_max + 0.005, "realized {worst}");
            inp.prev_state = state;
            inp.prev_p = sp.p;
            inp.prev_q = sp.q;
        }
    }
}
