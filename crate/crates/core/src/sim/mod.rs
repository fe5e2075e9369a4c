//! Multi-day closed loop: day-ahead reconfiguration, 15-minute control on
//! the realization, plant feedback and the fairness ledger.

mod report;

pub use report::{read_summary, write_report, DayRecord, SimulationReport, SimulationSummary};

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fairness::{compute_weights, CurtailmentLedger, FairnessError, FairnessWeights, WeightParams, WeightPolicy};
use crate::netmodel::{load_network, validate_radiality, Network, NetworkError, RadialityViolation, Topology};
use crate::optmodel::{plan_day_ahead, DayAheadConfig, DayAheadSolution, OptError, SolveOptions};
use crate::powerflow::{compute_sensitivities, solve_ac_power_flow, PowerFlowError, PowerFlowState};
use crate::rtcontrol::{control_step, predict_voltages, trace_rows, RtConfig, RtError, RtStepInput, TraceRow};
use crate::scenario::{load_profile_manifest, synth_profiles, Profile, ScenarioError, ScenarioSet, RT_STEP_MINUTES};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error("fixed topology is not radial: {0}")]
    NotRadial(RadialityViolation),
    #[error("day {day}: day-ahead: {source}")]
    DayAhead { day: usize, source: OptError },
    #[error("day {day}, step {step}: real-time: {source}")]
    RealTime { day: usize, step: usize, source: RtError },
    #[error("day {day}, step {step}: power flow: {source}")]
    PowerFlow {
        day: usize,
        step: usize,
        source: PowerFlowError,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// How the topology is chosen each day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Day-ahead reconfiguration with fairness weights.
    #[default]
    Reconfigure,
    /// Hold one topology for the whole horizon.
    Fixed,
    /// Comparison scheme: uniform weights plus a term minimizing the largest
    /// normalized curtailment, in both the day-ahead and real-time problems.
    ExtraObjective,
}

impl ControlMode {
    pub fn name(self) -> &'static str {
        match self {
            ControlMode::Reconfigure => "reconfigure",
            ControlMode::Fixed => "fixed",
            ControlMode::ExtraObjective => "extra-objective",
        }
    }
}

/// What stands in for the physical grid in the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PlantMode {
    /// Full AC power flow.
    #[default]
    Ac,
    /// The controller's own linearization fed back as the next state.
    Linear,
}

impl std::str::FromStr for PlantMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ac" => Ok(PlantMode::Ac),
            "linear" | "linear-self-feedback" => Ok(PlantMode::Linear),
            other => Err(SimError::Config(format!("unknown plant mode {other:?} (ac | linear)"))),
        }
    }
}

/// A held topology: the case file's base configuration or an explicit list
/// of open lines (1-based branch rows).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixedTopology {
    Named(String),
    Open(Vec<usize>),
}

impl FixedTopology {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("base") {
            return Ok(FixedTopology::Named("base".into()));
        }
        t.split([',', ';', ' '])
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| SimError::Config(format!("bad line number {s:?} in fixed topology")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(FixedTopology::Open)
    }

    pub fn resolve(&self, net: &Network) -> Result<Topology, SimError> {
        let topo = match self {
            FixedTopology::Named(n) if n.eq_ignore_ascii_case("base") => Topology::base(net),
            FixedTopology::Named(n) => {
                return Err(SimError::Config(format!("unknown named topology {n:?} (only \"base\")")))
            }
            FixedTopology::Open(rows) => {
                let mut closed = vec![true; net.line_count()];
                for &r in rows {
                    if r == 0 || r > net.line_count() {
                        return Err(SimError::Config(format!("line {r} out of range")));
                    }
                    closed[r - 1] = false;
                }
                Topology::from_closed(net, closed)
            }
        };
        validate_radiality(net, &topo).map_err(SimError::NotRadial)?;
        Ok(topo)
    }

    pub fn label(&self) -> String {
        match self {
            FixedTopology::Named(n) => n.clone(),
            FixedTopology::Open(rows) => format!("open {}", join(rows)),
        }
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Forecast/realization source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScenarioSource {
    /// One profile manifest repeated every day.
    Fixture {
        manifest: PathBuf,
        #[serde(default = "one")]
        load_scale: f64,
    },
    /// Seeded synthetic days; the realized load is the scenario mean.
    Synthetic {
        #[serde(default = "default_cloudiness")]
        cloudiness: f64,
        #[serde(default = "one")]
        load_scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_cloudiness() -> f64 {
    crate::scenario::DEFAULT_CLOUDINESS
}

fn default_days() -> usize {
    30
}

fn default_policy() -> WeightPolicy {
    WeightPolicy::Inverse
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mip_rel_gap: f64,
    /// Seconds per day-ahead solve.
    pub time_limit: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            mip_rel_gap: d.mip_rel_gap,
            time_limit: d.time_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Network side-car config, relative to this file.
    pub network: PathBuf,
    pub scenarios: ScenarioSource,
    #[serde(default = "default_days")]
    pub days: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_policy")]
    pub policy: WeightPolicy,
    #[serde(default)]
    pub weights: WeightParams,
    #[serde(default)]
    pub mode: ControlMode,
    /// Required in fixed mode.
    #[serde(default)]
    pub fixed_topology: Option<FixedTopology>,
    #[serde(default)]
    pub plant_mode: PlantMode,
    #[serde(default)]
    pub day_ahead: DayAheadConfig,
    #[serde(default)]
    pub real_time: RtConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Directory against which relative paths resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SimulationConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, SimError> {
        let mut cfg: SimulationConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text, path.parent().unwrap_or_else(|| Path::new(".")))
    }

    pub fn check(&self) -> Result<(), SimError> {
        if self.days == 0 {
            return Err(SimError::Config("days must be at least 1".into()));
        }
        if self.mode == ControlMode::Fixed && self.fixed_topology.is_none() {
            return Err(SimError::Config("fixed mode needs fixed_topology".into()));
        }
        let scale = match &self.scenarios {
            ScenarioSource::Fixture { load_scale, .. } | ScenarioSource::Synthetic { load_scale, .. } => *load_scale,
        };
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(SimError::Config(format!("load_scale must be non-negative, got {scale}")));
        }
        self.day_ahead.check().map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Short description used in reports and comparison tables.
    pub fn label(&self) -> String {
        match self.mode {
            ControlMode::Reconfigure => format!("reconfiguration ({})", self.policy),
            ControlMode::Fixed => format!(
                "fixed topology ({})",
                self.fixed_topology.as_ref().map_or_else(String::new, FixedTopology::label)
            ),
            ControlMode::ExtraObjective => "extra objective".to_string(),
        }
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            mip_rel_gap: self.solver.mip_rel_gap,
            time_limit: self.solver.time_limit,
            ..SolveOptions::default()
        }
    }
}

/// Network plus the scenario set of every simulated day.
#[derive(Debug, Clone)]
pub struct SimulationInputs {
    pub net: Network,
    pub days: Vec<ScenarioSet>,
    /// Days sharing an index here have identical scenario data.
    pub day_keys: Vec<usize>,
}

fn scale_load(p: &mut Profile, k: f64) {
    p.load_p.iter_mut().for_each(|x| *x *= k);
    p.load_q.iter_mut().for_each(|x| *x *= k);
}

pub fn load_inputs(cfg: &SimulationConfig) -> Result<SimulationInputs, SimError> {
    let net = load_network(&cfg.resolve(&cfg.network))?;
    let (days, day_keys) = match &cfg.scenarios {
        ScenarioSource::Fixture { manifest, load_scale } => {
            let mut set = load_profile_manifest(&cfg.resolve(manifest))?;
            set.scenarios.iter_mut().for_each(|s| scale_load(s, *load_scale));
            scale_load(&mut set.realization, *load_scale);
            (vec![set; cfg.days], vec![0; cfg.days])
        }
        ScenarioSource::Synthetic { cloudiness, load_scale } => {
            let mut sets = synth_profiles(cfg.seed, cfg.days, *cloudiness);
            for set in sets.iter_mut() {
                set.scenarios.iter_mut().for_each(|s| scale_load(s, *load_scale));
                // no load measurements: the realized load is the forecast mean
                let mean = set
                    .mean_scenario()
                    .resample(set.timestep_minutes, set.realization_timestep_minutes)?;
                set.realization.load_p = mean.load_p;
                set.realization.load_q = mean.load_q;
            }
            (sets, (0..cfg.days).collect())
        }
    };
    Ok(SimulationInputs { net, days, day_keys })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayAheadSummary {
    pub objective: f64,
    pub mip_gap: f64,
    /// Planned curtailed energy per plant, averaged over scenarios, p.u.·h.
    pub planned_curtailment: Vec<f64>,
    /// Largest AC voltage excursion beyond the limits when the plan is
    /// replayed through the power flow, per scenario and modeled step.
    pub ac_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayResult {
    pub day: usize,
    pub topology: Topology,
    /// 1-based rows of open lines.
    pub open_lines: Vec<usize>,
    pub weights: FairnessWeights,
    pub day_ahead: Option<DayAheadSummary>,
    /// Energy per plant, p.u.·h.
    pub realized: Vec<f64>,
    pub mpp: Vec<f64>,
    /// Extremes of the realized voltage over energized buses and all steps.
    pub v_max: f64,
    pub v_min: f64,
    /// Largest realized excursion beyond the limits.
    pub max_violation: f64,
    pub emergencies: usize,
    /// Steps with no PV available anywhere.
    pub night_steps: usize,
    /// Night steps with a nonzero set-point (should stay zero).
    pub night_setpoints: usize,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

fn open_lines(topo: &Topology) -> Vec<usize> {
    (0..topo.closed().len()).filter(|&e| !topo.is_closed(e)).map(|e| e + 1).collect()
}

type DayAheadCache = HashMap<(usize, Vec<u64>), DayAheadSolution>;

/// Runs day `day` (1-based) and appends it to the ledger.
pub fn run_day(
    day: usize,
    net: &Network,
    scen: &ScenarioSet,
    ledger: &mut CurtailmentLedger,
    cfg: &SimulationConfig,
) -> Result<DayResult, SimError> {
    run_day_inner(day, net, scen, ledger, cfg, None, None)
}

fn day_weights(day: usize, ledger: &CurtailmentLedger, cfg: &SimulationConfig) -> Result<FairnessWeights, SimError> {
    // Weights come out of the day-ahead stage; without reconfiguration there
    // is none to feed back through.
    let policy = match cfg.mode {
        ControlMode::Reconfigure => cfg.policy,
        ControlMode::Fixed | ControlMode::ExtraObjective => WeightPolicy::Uniform,
    };
    Ok(compute_weights(policy, ledger, day - 1, None, &cfg.weights)?)
}

fn injections(net: &Network, load: &[Complex64], p: &[f64], q: &[f64]) -> Vec<Complex64> {
    let mut inj: Vec<Complex64> = load.iter().map(|l| -l).collect();
    for (k, pl) in net.pv_plants.iter().enumerate() {
        inj[pl.bus] += Complex64::new(p[k], q[k]);
    }
    inj
}

fn bus_load(net: &Network, prof: &Profile, t: usize) -> Vec<Complex64> {
    net.buses
        .iter()
        .map(|b| Complex64::new(b.load_p * prof.load_p[t], b.load_q * prof.load_q[t]))
        .collect()
}

fn excursion(state: &PowerFlowState, v_min: f64, v_max: f64) -> f64 {
    state.max_violation(v_min, v_max)
}

/// Replays the day-ahead set-points through the AC power flow.
fn replay_plan(
    net: &Network,
    scen: &ScenarioSet,
    sol: &DayAheadSolution,
    cfg: &SimulationConfig,
) -> Result<f64, PowerFlowError> {
    let mut worst: f64 = 0.0;
    for (w, prof) in scen.scenarios.iter().enumerate() {
        let prof = prof
            .resample(scen.timestep_minutes, cfg.day_ahead.timestep_minutes)
            .expect("scenario set validated by the day-ahead model");
        for (i, &t) in sol.steps.iter().enumerate() {
            let inj = injections(net, &bus_load(net, &prof, t), &sol.p[w][i], &sol.q[w][i]);
            let state = solve_ac_power_flow(net, &sol.topology, &inj)?;
            worst = worst.max(excursion(&state, cfg.day_ahead.v_min, cfg.day_ahead.v_max));
        }
    }
    Ok(worst)
}

fn run_day_inner(
    day: usize,
    net: &Network,
    scen: &ScenarioSet,
    ledger: &mut CurtailmentLedger,
    cfg: &SimulationConfig,
    fixed: Option<&Topology>,
    cache: Option<(&mut DayAheadCache, usize)>,
) -> Result<DayResult, SimError> {
    let weights = day_weights(day, ledger, cfg)?;
    let started = std::time::Instant::now();
    let opts = cfg.solve_options();
    let da_cfg = DayAheadConfig {
        extra_objective: cfg.mode == ControlMode::ExtraObjective,
        ..cfg.day_ahead.clone()
    };

    let (topology, day_ahead) = match fixed {
        Some(t) => (t.clone(), None),
        None => {
            let key = weights.lambda.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            let cached = cache.as_ref().and_then(|(c, k)| c.get(&(*k, key.clone())).cloned());
            let sol = match cached {
                Some(s) => s,
                None => {
                    let s = plan_day_ahead(net, scen, &weights, &da_cfg, None, &opts)
                        .map_err(|source| SimError::DayAhead { day, source })?;
                    if let Some((c, k)) = cache {
                        c.insert((k, key), s.clone());
                    }
                    s
                }
            };
            let ac_violation =
                replay_plan(net, scen, &sol, cfg).map_err(|source| SimError::PowerFlow { day, step: 0, source })?;
            let hours = da_cfg.timestep_minutes as f64 / 60.0;
            let scenarios = sol.curtailment.first().map_or(1, Vec::len).max(1) as f64;
            let summary = DayAheadSummary {
                objective: sol.objective,
                mip_gap: sol.mip_gap,
                planned_curtailment: sol
                    .curtailment
                    .iter()
                    .map(|per_w| per_w.iter().sum::<f64>() * hours / scenarios)
                    .collect(),
                ac_violation,
            };
            (sol.topology.clone(), Some(summary))
        }
    };

    log::debug!("day {day}: day-ahead {:.1?}", started.elapsed());
    let started = std::time::Instant::now();
    let rt_cfg = RtConfig {
        fairness_term: cfg.mode == ControlMode::ExtraObjective,
        ..cfg.real_time
    };
    let real = &scen.realization;
    let dt = scen.realization_timestep_minutes as f64 / 60.0;
    if scen.realization_timestep_minutes != RT_STEP_MINUTES {
        return Err(SimError::Config(format!(
            "realization must be on the {RT_STEP_MINUTES}-minute grid, got {} minutes",
            scen.realization_timestep_minutes
        )));
    }
    let plants = net.pv_plants.len();
    let (v_lo, v_hi) = (cfg.day_ahead.v_min, cfg.day_ahead.v_max);

    let load0 = bus_load(net, real, 0);
    let mut state = solve_ac_power_flow(net, &topology, &injections(net, &load0, &vec![0.0; plants], &vec![0.0; plants]))
        .map_err(|source| SimError::PowerFlow { day, step: 0, source })?;
    let (mut prev_p, mut prev_q) = (vec![0.0; plants], vec![0.0; plants]);
    let mut realized = vec![0.0; plants];
    let mut mpp = vec![0.0; plants];
    let mut result = DayResult {
        day,
        open_lines: open_lines(&topology),
        topology: topology.clone(),
        weights: weights.clone(),
        day_ahead,
        realized: Vec::new(),
        mpp: Vec::new(),
        v_max: f64::NEG_INFINITY,
        v_min: f64::INFINITY,
        max_violation: 0.0,
        emergencies: 0,
        night_steps: 0,
        night_setpoints: 0,
        trace: Vec::new(),
    };

    for t in 0..real.len() {
        let p_hat: Vec<f64> = net.pv_plants.iter().map(|pl| real.pv[t] * pl.s_max).collect();
        let next_load = bus_load(net, real, t);
        let input = RtStepInput {
            topology: topology.clone(),
            prev_state: state.clone(),
            prev_p: prev_p.clone(),
            prev_q: prev_q.clone(),
            mpp_forecast: p_hat.clone(),
            load_forecast: next_load.clone(),
            weights: weights.clone(),
            v_min: v_lo,
            v_max: v_hi,
        };
        let sp = control_step(net, &input, &rt_cfg, &opts).map_err(|source| SimError::RealTime { day, step: t, source })?;
        if sp.skipped {
            result.night_steps += 1;
            if sp.p.iter().chain(&sp.q).any(|&x| x != 0.0) {
                result.night_setpoints += 1;
            }
        } else {
            result.trace.extend(trace_rows(net, day, t, &p_hat, &sp));
        }
        if sp.emergency.is_some() {
            result.emergencies += 1;
        }

        state = match cfg.plant_mode {
            PlantMode::Ac => solve_ac_power_flow(net, &topology, &injections(net, &next_load, &sp.p, &sp.q))
                .map_err(|source| SimError::PowerFlow { day, step: t, source })?,
            PlantMode::Linear => {
                let sens = compute_sensitivities(net, &topology, &state)
                    .map_err(|source| SimError::PowerFlow { day, step: t, source })?;
                let mut next = state.clone();
                next.v = predict_voltages(net, &input, &sens, &sp.p, &sp.q);
                let inj = injections(net, &next_load, &sp.p, &sp.q);
                for b in 0..net.bus_count() {
                    if !net.is_slack(b) {
                        next.s_inj[b] = inj[b];
                    }
                }
                next
            }
        };

        for (k, pl) in net.pv_plants.iter().enumerate() {
            mpp[k] += p_hat[k] * dt;
            if state.energized[pl.bus] {
                realized[k] += sp.p[k] * dt;
            }
        }
        for b in (0..net.bus_count()).filter(|&b| state.energized[b]) {
            result.v_max = result.v_max.max(state.v[b]);
            result.v_min = result.v_min.min(state.v[b]);
        }
        result.max_violation = result.max_violation.max(excursion(&state, v_lo, v_hi));
        prev_p = sp.p;
        prev_q = sp.q;
    }
    log::debug!("day {day}: real-time {:.1?}", started.elapsed());
    ledger.push_day(&realized, &mpp)?;
    result.realized = realized;
    result.mpp = mpp;
    Ok(result)
}

/// Runs the whole horizon from a loaded configuration.
pub fn run_horizon(cfg: &SimulationConfig) -> Result<SimulationReport, SimError> {
    let inputs = load_inputs(cfg)?;
    run_with_inputs(cfg, &inputs)
}

/// Same as [`run_horizon`] with network and scenarios already in memory.
/// Day-ahead solutions are reused when a day repeats the scenario data and
/// weights of an earlier one.
pub fn run_with_inputs(cfg: &SimulationConfig, inputs: &SimulationInputs) -> Result<SimulationReport, SimError> {
    cfg.check()?;
    let net = &inputs.net;
    if inputs.days.len() < cfg.days {
        return Err(SimError::Config(format!(
            "{} days requested but only {} scenario days available",
            cfg.days,
            inputs.days.len()
        )));
    }
    let fixed = match cfg.mode {
        ControlMode::Fixed => Some(
            cfg.fixed_topology
                .as_ref()
                .ok_or_else(|| SimError::Config("fixed mode needs fixed_topology".into()))?
                .resolve(net)?,
        ),
        _ => None,
    };
    let mut ledger = CurtailmentLedger::new(net.pv_plants.len());
    let mut cache = DayAheadCache::new();
    let mut days = Vec::with_capacity(cfg.days);
    for d in 1..=cfg.days {
        let key = inputs.day_keys.get(d - 1).copied().unwrap_or(d - 1);
        let r = run_day_inner(
            d,
            net,
            &inputs.days[d - 1],
            &mut ledger,
            cfg,
            fixed.as_ref(),
            Some((&mut cache, key)),
        )?;
        log::info!("day {d}: open {:?}", r.open_lines);
        days.push(r);
    }
    SimulationReport::build(cfg, net, days, ledger)
}
