//! Day-ahead reconfiguration MILP over forecast scenarios.
//!
//! Per scenario and time step the grid follows the linearized branch-flow
//! model in squared voltages, with one signed active/reactive flow pair per
//! line. Voltage coupling across a switchable line is relaxed by a big-M
//! term when the line is open. The topology is shared by all snapshots and
//! kept radial by orientation variables (every non-slack bus fed by exactly
//! one line) plus a single-commodity connectivity flow from the slacks.
//! Inverter capability and line loading use circumscribed polygons; losses
//! use tangent cuts of `r P²` and `r Q²`.

use serde::{Deserialize, Serialize};

use super::lp::{solve, LinearModel, SolveOptions, SolveStatus};
use super::polygon::unit_normals;
use super::search::{search_day_ahead, SEARCH_MAX_SWITCHES};
use super::{InfeasibilityCause, OptError};
use crate::fairness::FairnessWeights;
use crate::netmodel::{enumerate_radial_topologies, validate_radiality, Network, Topology};
use crate::scenario::{Profile, ScenarioSet};

const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BigM {
    Value(f64),
    #[serde(with = "auto_tag")]
    Auto,
}

mod auto_tag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(())
        } else {
            Err(serde::de::Error::custom(format!("expected \"auto\" or a number, got {s}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DayAheadConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub big_m: BigM,
    pub polygon_segments: usize,
    /// Day-ahead time step; scenarios are resampled to it.
    pub timestep_minutes: u32,
    pub loss_weight: f64,
    /// Tangent points per flow variable in the loss epigraph.
    pub loss_segments: usize,
    /// Adds a term minimizing the largest normalized curtailment of any
    /// plant in each scenario (comparison scheme).
    pub extra_objective: bool,
    /// Steps without PV in any scenario only constrain the topology through
    /// load; keep just the most loaded one of them.
    pub collapse_idle_steps: bool,
    pub method: DayAheadMethod,
}

/// How the topology decision is solved. Both are exact up to the relative
/// gap; the search only applies to the separable objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DayAheadMethod {
    /// Search when the objective is separable and the switch count small,
    /// MIP otherwise.
    #[default]
    Auto,
    Mip,
    Search,
}

impl Default for DayAheadConfig {
    fn default() -> Self {
        Self {
            v_min: 0.95,
            v_max: 1.05,
            big_m: BigM::Auto,
            polygon_segments: 12,
            timestep_minutes: 60,
            loss_weight: 1.0,
            loss_segments: 3,
            extra_objective: false,
            collapse_idle_steps: true,
            method: DayAheadMethod::Auto,
        }
    }
}

impl DayAheadConfig {
    pub fn check(&self) -> Result<(), OptError> {
        if !(self.v_min > 0.0 && self.v_min < self.v_max) {
            return Err(OptError::Config(format!(
                "voltage limits must satisfy 0 < v_min < v_max, got {} / {}",
                self.v_min, self.v_max
            )));
        }
        if self.polygon_segments < 3 {
            return Err(OptError::Config("polygon_segments must be at least 3".into()));
        }
        if self.timestep_minutes == 0 {
            return Err(OptError::Config("timestep_minutes must be positive".into()));
        }
        if self.loss_weight < 0.0 {
            return Err(OptError::Config("loss_weight must be non-negative".into()));
        }
        if let BigM::Value(m) = self.big_m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(OptError::Config(format!("big_m must be positive, got {m}")));
            }
        }
        Ok(())
    }
}

/// Weight of the max-normalized-curtailment term relative to the total
/// weighted available energy.
pub const EXTRA_OBJECTIVE_FACTOR: f64 = 10.0;

/// Smallest constant that switches off the voltage coupling of any open line.
pub fn compute_big_m(net: &Network, cfg: &DayAheadConfig) -> Result<f64, OptError> {
    if let BigM::Value(m) = cfg.big_m {
        return Ok(m);
    }
    let mut worst: f64 = 0.0;
    for (e, l) in net.lines.iter().enumerate() {
        if !(l.p_max.is_finite() && l.q_max.is_finite()) {
            return Err(OptError::Config(format!("line {e} has no finite flow bound")));
        }
        worst = worst.max(2.0 * l.r.abs() * l.p_max + 2.0 * l.x.abs() * l.q_max);
    }
    Ok(cfg.v_max * cfg.v_max - cfg.v_min * cfg.v_min + worst)
}

/// Column indices of one snapshot (scenario, step).
#[derive(Debug, Clone)]
struct Snapshot {
    p: Vec<usize>,
    q: Vec<usize>,
    w: Vec<usize>,
    flow_p: Vec<usize>,
    flow_q: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DayAheadModel {
    pub lp: LinearModel,
    /// `xi[e]`: switch column of switchable lines.
    pub xi: Vec<Option<usize>>,
    /// Orientation columns `[d_ft, d_tf]` per line.
    pub d: Vec<[usize; 2]>,
    snapshots: Vec<Vec<Snapshot>>,
    /// Step indices represented in the model (shared by all scenarios).
    pub steps: Vec<usize>,
    /// Available PV power per scenario, modeled step, plant.
    pub p_hat: Vec<Vec<Vec<f64>>>,
    pub timestep_minutes: u32,
    pub fixed: Option<Topology>,
    horizon: usize,
    switchable: Vec<bool>,
    lines: Vec<(usize, usize)>,
}

impl DayAheadModel {
    pub fn scenario_count(&self) -> usize {
        self.snapshots.len()
    }

    /// Steps of the day-ahead grid, including collapsed idle ones.
    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

pub fn build_day_ahead_model(
    net: &Network,
    scen: &ScenarioSet,
    weights: &FairnessWeights,
    cfg: &DayAheadConfig,
) -> Result<DayAheadModel, OptError> {
    build_model(net, scen, weights, cfg, None)
}

/// Same model with every switch fixed to `topo` (no integer decisions).
pub fn build_fixed_topology_model(
    net: &Network,
    scen: &ScenarioSet,
    weights: &FairnessWeights,
    cfg: &DayAheadConfig,
    topo: &Topology,
) -> Result<DayAheadModel, OptError> {
    build_model(net, scen, weights, cfg, Some(topo))
}

pub(super) fn scenario_profiles(scen: &ScenarioSet, cfg: &DayAheadConfig) -> Result<Vec<Profile>, OptError> {
    scen.validate().map_err(|e| OptError::Scenario(e.to_string()))?;
    scen.scenarios
        .iter()
        .map(|s| {
            s.resample(scen.timestep_minutes, cfg.timestep_minutes)
                .map_err(|e| OptError::Scenario(e.to_string()))
        })
        .collect()
}

fn build_model(
    net: &Network,
    scen: &ScenarioSet,
    weights: &FairnessWeights,
    cfg: &DayAheadConfig,
    fixed: Option<&Topology>,
) -> Result<DayAheadModel, OptError> {
    cfg.check()?;
    net.check().map_err(|e| OptError::Network(e.to_string()))?;
    let plants = &net.pv_plants;
    if weights.lambda.len() != plants.len() {
        return Err(OptError::Config(format!(
            "{} weights for {} PV plants",
            weights.lambda.len(),
            plants.len()
        )));
    }
    if let Some(t) = fixed {
        validate_radiality(net, t).map_err(OptError::NotRadial)?;
    }
    let profiles = scenario_profiles(scen, cfg)?;
    let horizon = profiles.first().map_or(0, Profile::len);
    let steps = modeled_steps(&profiles, cfg.collapse_idle_steps);
    Ok(assemble(net, &profiles, steps, horizon, weights, cfg, fixed, false))
}

/// Builds the model over the given (already resampled) profiles and steps.
/// Inputs are assumed checked.
pub(super) fn assemble(
    net: &Network,
    profiles: &[Profile],
    steps: Vec<usize>,
    horizon: usize,
    weights: &FairnessWeights,
    cfg: &DayAheadConfig,
    fixed: Option<&Topology>,
    compact: bool,
) -> DayAheadModel {
    let plants = &net.pv_plants;
    // Flows are gated to zero on open lines, so the coupling only has to
    // absorb the spread of the squared-voltage box.
    let big_m = match cfg.big_m {
        BigM::Value(m) => m,
        BigM::Auto => cfg.v_max * cfg.v_max - cfg.v_min * cfg.v_min,
    };
    let n = net.bus_count();
    let normals = unit_normals(cfg.polygon_segments);
    let (w_lo, w_hi) = (cfg.v_min * cfg.v_min, cfg.v_max * cfg.v_max);

    let mut lp = LinearModel::new(&format!("dayahead_{}", net.name));

    // Topology shared across snapshots.
    let mut xi = vec![None; net.line_count()];
    let mut d = Vec::with_capacity(net.line_count());
    let mut commodity = Vec::with_capacity(net.line_count());
    let cap = (n - net.slack_buses.len()) as f64;
    // A fixed topology only needs its closed lines (compact form, no
    // topology columns).
    let open = |e: usize| compact && fixed.is_some_and(|t| !t.is_closed(e));
    if !compact {
        for (e, l) in net.lines.iter().enumerate() {
            let status = if l.switchable {
                let c = lp.add_binary(format!("xi_{e}"), 0.0);
                if let Some(t) = fixed {
                    lp.fix(c, if t.is_closed(e) { 1.0 } else { 0.0 });
                    lp.columns[c].integer = false;
                }
                xi[e] = Some(c);
                Some(c)
            } else {
                None
            };
            let into_to = if net.is_slack(l.to) { 0.0 } else { 1.0 };
            let into_from = if net.is_slack(l.from) { 0.0 } else { 1.0 };
            let dft = lp.add_var(format!("d_{e}_ft"), 0.0, into_to, 0.0);
            let dtf = lp.add_var(format!("d_{e}_tf"), 0.0, into_from, 0.0);
            match status {
                Some(c) => lp.add_row(format!("orient_{e}"), vec![(dft, 1.0), (dtf, 1.0), (c, -1.0)], 0.0, 0.0),
                None => lp.add_row(format!("orient_{e}"), vec![(dft, 1.0), (dtf, 1.0)], 1.0, 1.0),
            };
            d.push([dft, dtf]);
            let f = lp.add_var(format!("conn_{e}"), -cap, cap, 0.0);
            if let Some(c) = status {
                lp.add_row(format!("conn_hi_{e}"), vec![(f, 1.0), (c, -cap)], -INF, 0.0);
                lp.add_row(format!("conn_lo_{e}"), vec![(f, 1.0), (c, cap)], 0.0, INF);
            }
            commodity.push(f);
        }
        for b in 0..n {
            if net.is_slack(b) {
                continue;
            }
            let mut feed = Vec::new();
            let mut conn = Vec::new();
            for (e, l) in net.lines.iter().enumerate() {
                if l.to == b {
                    feed.push((d[e][0], 1.0));
                    conn.push((commodity[e], 1.0));
                } else if l.from == b {
                    feed.push((d[e][1], 1.0));
                    conn.push((commodity[e], -1.0));
                }
            }
            lp.add_row(format!("feed_{}", net.buses[b].id), feed, 1.0, 1.0);
            lp.add_row(format!("conn_bal_{}", net.buses[b].id), conn, 1.0, 1.0);
        }

    }

    // Every independent cycle needs an open switch. Implied by the integer
    // model, but cuts off many fractional points of the relaxation.
    if fixed.is_none() && !compact {
        for (i, cycle) in fundamental_cycles(net).into_iter().enumerate() {
            let sw: Vec<(usize, f64)> = cycle.iter().filter_map(|&e| xi[e].map(|c| (c, 1.0))).collect();
            let ub = sw.len() as f64 - 1.0;
            lp.add_row(format!("loop_{i}"), sw, -INF, ub);
        }
    }

    // Per snapshot.
    let mut snapshots = Vec::with_capacity(profiles.len());
    let mut p_hat_all = Vec::with_capacity(profiles.len());
    let total_weighted: f64 = profiles
        .iter()
        .flat_map(|s| s.pv.iter())
        .map(|f| {
            plants
                .iter()
                .zip(&weights.lambda)
                .map(|(pl, lam)| lam * f * pl.s_max)
                .sum::<f64>()
        })
        .sum();
    for (w_idx, prof) in profiles.iter().enumerate() {
        let mut snaps = Vec::with_capacity(steps.len());
        let mut p_hat_s = Vec::with_capacity(steps.len());
        for &t in &steps {
            let tag = format!("{}_{}", w_idx + 1, t);
            let p_hat: Vec<f64> = plants.iter().map(|pl| prof.pv[t] * pl.s_max).collect();
            let mut p_cols = Vec::with_capacity(plants.len());
            let mut q_cols = Vec::with_capacity(plants.len());
            for (k, pl) in plants.iter().enumerate() {
                let lam = weights.lambda[k];
                let p = lp.add_var(format!("p_{k}_{tag}"), 0.0, p_hat[k], -lam);
                lp.offset += lam * p_hat[k];
                let zq = pl.zeta() * p_hat[k];
                let q = lp.add_var(format!("q_{k}_{tag}"), -zq, zq, 0.0);
                let z = pl.zeta();
                lp.add_row(format!("pf_hi_{k}_{tag}"), vec![(q, 1.0), (p, -z)], -INF, 0.0);
                lp.add_row(format!("pf_lo_{k}_{tag}"), vec![(q, 1.0), (p, z)], 0.0, INF);
                if pl.s_max < p_hat[k] * (1.0 + z * z).sqrt() {
                    for (i, nv) in normals.iter().enumerate() {
                        lp.add_row(
                            format!("cap_{k}_{i}_{tag}"),
                            vec![(p, nv[0]), (q, nv[1])],
                            -INF,
                            pl.s_max,
                        );
                    }
                }
                p_cols.push(p);
                q_cols.push(q);
            }
            let w: Vec<usize> = (0..n)
                .map(|b| {
                    let c = lp.add_var(format!("w_{}_{tag}", net.buses[b].id), w_lo, w_hi, 0.0);
                    if net.is_slack(b) {
                        lp.fix(c, 1.0);
                    }
                    c
                })
                .collect();
            // no line can carry more than everything injected or drawn
            let total_p = net.buses.iter().map(|b| (b.load_p * prof.load_p[t]).abs()).sum::<f64>()
                + p_hat.iter().sum::<f64>();
            let total_q = net.buses.iter().map(|b| (b.load_q * prof.load_q[t]).abs()).sum::<f64>()
                + plants.iter().zip(&p_hat).map(|(pl, ph)| pl.zeta() * ph).sum::<f64>();
            let mut fp = Vec::with_capacity(net.line_count());
            let mut fq = Vec::with_capacity(net.line_count());
            for (e, l) in net.lines.iter().enumerate() {
                if open(e) {
                    fp.push(lp.add_var(format!("P_{e}_{tag}"), 0.0, 0.0, 0.0));
                    fq.push(lp.add_var(format!("Q_{e}_{tag}"), 0.0, 0.0, 0.0));
                    continue;
                }
                let (p_max, q_max) = (l.p_max.min(total_p), l.q_max.min(total_q));
                let pc = lp.add_var(format!("P_{e}_{tag}"), -p_max, p_max, 0.0);
                let qc = lp.add_var(format!("Q_{e}_{tag}"), -q_max, q_max, 0.0);
                let coupling = vec![(w[l.to], 1.0), (w[l.from], -1.0), (pc, 2.0 * l.r), (qc, 2.0 * l.x)];
                match xi[e] {
                    Some(c) => {
                        for (col, bound) in [(pc, p_max), (qc, q_max)] {
                            lp.add_row(format!("gate_hi_{e}_{col}"), vec![(col, 1.0), (c, -bound)], -INF, 0.0);
                            lp.add_row(format!("gate_lo_{e}_{col}"), vec![(col, 1.0), (c, bound)], 0.0, INF);
                        }
                        let mut hi = coupling.clone();
                        hi.push((c, big_m));
                        lp.add_row(format!("volt_hi_{e}_{tag}"), hi, -INF, big_m);
                        let mut lo = coupling;
                        lo.push((c, -big_m));
                        lp.add_row(format!("volt_lo_{e}_{tag}"), lo, -big_m, INF);
                    }
                    None => {
                        lp.add_row(format!("volt_{e}_{tag}"), coupling, 0.0, 0.0);
                    }
                }
                if l.i_max.is_finite() {
                    let s = lp.add_var(format!("S_{e}_{tag}"), 0.0, cfg.v_min * l.i_max, 0.0);
                    for (i, nv) in normals.iter().enumerate() {
                        lp.add_row(
                            format!("gauge_{e}_{i}_{tag}"),
                            vec![(pc, nv[0]), (qc, nv[1]), (s, -1.0)],
                            -INF,
                            0.0,
                        );
                    }
                }
                if cfg.loss_weight > 0.0 && l.r > 0.0 {
                    // separable epigraph of r P^2 and r Q^2, tangents spread over the flow range
                    let segs = cfg.loss_segments.max(1);
                    for (col, bound, kind) in [(pc, p_max, "P"), (qc, q_max, "Q")] {
                        let loss = lp.add_var(format!("L{kind}_{e}_{tag}"), 0.0, INF, cfg.loss_weight);
                        for j in 1..=segs {
                            let a = bound * j as f64 / segs as f64;
                            for (side, sign) in [("hi", 1.0), ("lo", -1.0)] {
                                lp.add_row(
                                    format!("loss{kind}_{side}_{e}_{j}_{tag}"),
                                    vec![(loss, 1.0), (col, -2.0 * l.r * a * sign)],
                                    -l.r * a * a,
                                    INF,
                                );
                            }
                        }
                    }
                }
                fp.push(pc);
                fq.push(qc);
            }
            for b in 0..n {
                if net.is_slack(b) {
                    continue;
                }
                let mut rp = Vec::new();
                let mut rq = Vec::new();
                for (e, l) in net.lines.iter().enumerate() {
                    let sign = if l.to == b {
                        1.0
                    } else if l.from == b {
                        -1.0
                    } else {
                        continue;
                    };
                    rp.push((fp[e], sign));
                    rq.push((fq[e], sign));
                }
                for (k, pl) in plants.iter().enumerate() {
                    if pl.bus == b {
                        rp.push((p_cols[k], 1.0));
                        rq.push((q_cols[k], 1.0));
                    }
                }
                let id = net.buses[b].id;
                let lp_b = net.buses[b].load_p * prof.load_p[t];
                let lq_b = net.buses[b].load_q * prof.load_q[t];
                lp.add_row(format!("bal_p_{id}_{tag}"), rp, lp_b, lp_b);
                lp.add_row(format!("bal_q_{id}_{tag}"), rq, lq_b, lq_b);
            }
            snaps.push(Snapshot {
                p: p_cols,
                q: q_cols,
                w,
                flow_p: fp,
                flow_q: fq,
            });
            p_hat_s.push(p_hat);
        }
        if cfg.extra_objective {
            let weight = EXTRA_OBJECTIVE_FACTOR * total_weighted.max(1e-9);
            let z = lp.add_var(format!("maxcurt_{}", w_idx + 1), 0.0, 1.0, weight);
            for k in 0..plants.len() {
                let avail: f64 = p_hat_s.iter().map(|ph| ph[k]).sum();
                if avail <= 0.0 {
                    continue;
                }
                // sum_t (p_hat - p) / avail <= z
                let mut coeffs: Vec<(usize, f64)> = snaps.iter().map(|s| (s.p[k], 1.0 / avail)).collect();
                coeffs.push((z, 1.0));
                lp.add_row(format!("maxcurt_{}_{k}", w_idx + 1), coeffs, 1.0, INF);
            }
        }
        snapshots.push(snaps);
        p_hat_all.push(p_hat_s);
    }

    DayAheadModel {
        lp,
        xi,
        d,
        snapshots,
        steps,
        p_hat: p_hat_all,
        timestep_minutes: cfg.timestep_minutes,
        fixed: fixed.cloned(),
        horizon,
        switchable: net.lines.iter().map(|l| l.switchable).collect(),
        lines: net.lines.iter().map(|l| (l.from, l.to)).collect(),
    }
}

/// Line sets of the fundamental cycles of the network graph with all
/// slack buses merged into one node. The spanning forest prefers
/// non-switchable lines, so every cycle holds at least one switch unless the
/// network cannot be radial at all.
fn fundamental_cycles(net: &Network) -> Vec<Vec<usize>> {
    let n = net.bus_count();
    let root = net.slack_buses.first().copied().unwrap_or(0);
    let node = |b: usize| if net.is_slack(b) { root } else { b };
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let mut order: Vec<usize> = (0..net.line_count()).collect();
    order.sort_by_key(|&e| net.lines[e].switchable);
    let mut tree_adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut chords = Vec::new();
    for e in order {
        let (a, b) = (node(net.lines[e].from), node(net.lines[e].to));
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            chords.push(e);
        } else {
            parent[ra] = rb;
            tree_adj[a].push((b, e));
            tree_adj[b].push((a, e));
        }
    }
    chords
        .into_iter()
        .map(|e| {
            let (a, b) = (node(net.lines[e].from), node(net.lines[e].to));
            // tree path from a to b
            let mut via = vec![None; n];
            let mut seen = vec![false; n];
            let mut queue = std::collections::VecDeque::from([a]);
            seen[a] = true;
            while let Some(u) = queue.pop_front() {
                if u == b {
                    break;
                }
                for &(v, le) in &tree_adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        via[v] = Some((u, le));
                        queue.push_back(v);
                    }
                }
            }
            let mut cycle = vec![e];
            let mut u = b;
            while let Some((prev, le)) = via[u] {
                cycle.push(le);
                u = prev;
            }
            cycle
        })
        .collect()
}

/// Steps that enter the model. With `collapse`, steps where no scenario has
/// PV are replaced by the single most loaded one (lowest index on ties).
pub(super) fn modeled_steps(profiles: &[Profile], collapse: bool) -> Vec<usize> {
    let horizon = profiles.first().map_or(0, Profile::len);
    if !collapse {
        return (0..horizon).collect();
    }
    let idle = |t: usize| profiles.iter().all(|p| p.pv[t] <= 0.0);
    let load = |t: usize| profiles.iter().map(|p| p.load_p[t]).fold(f64::NEG_INFINITY, f64::max);
    let mut heaviest: Option<usize> = None;
    for t in (0..horizon).filter(|&t| idle(t)) {
        if heaviest.is_none_or(|h| load(t) > load(h)) {
            heaviest = Some(t);
        }
    }
    (0..horizon).filter(|&t| !idle(t) || Some(t) == heaviest).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayAheadSolution {
    pub topology: Topology,
    /// Day-ahead step of each entry along the step axis below.
    pub steps: Vec<usize>,
    /// Active set-points per scenario, modeled step, plant.
    pub p: Vec<Vec<Vec<f64>>>,
    pub q: Vec<Vec<Vec<f64>>>,
    /// Voltage magnitudes of the linear model per scenario, step, bus.
    pub v: Vec<Vec<Vec<f64>>>,
    /// Line flows of the linear model per scenario, step, line.
    pub flow_p: Vec<Vec<Vec<f64>>>,
    pub flow_q: Vec<Vec<Vec<f64>>>,
    /// Curtailed energy (sum over steps of `p_hat - p`) per plant, scenario.
    pub curtailment: Vec<Vec<f64>>,
    pub objective: f64,
    pub mip_gap: f64,
    pub status: SolveStatus,
    /// Largest distance of any orientation variable from {0, 1}.
    pub orientation_integrality: f64,
}

pub fn solve_day_ahead(model: &DayAheadModel, opts: &SolveOptions) -> Result<DayAheadSolution, OptError> {
    let sol = solve(&model.lp, opts)?;
    let x = &sol.x;
    let mut closed = Vec::with_capacity(model.lines.len());
    let mut orientation = Vec::with_capacity(model.lines.len());
    let mut integrality: f64 = 0.0;
    for e in 0..model.lines.len() {
        let c = match model.xi[e] {
            Some(col) => x[col] > 0.5,
            None => true,
        };
        let dv = [x[model.d[e][0]], x[model.d[e][1]]];
        for v in dv {
            integrality = integrality.max(v.min(1.0 - v).max(0.0));
        }
        closed.push(c);
        orientation.push([(dv[0] > 0.5) as u8 as f64, (dv[1] > 0.5) as u8 as f64]);
    }
    let topology = Topology::from_parts(closed, orientation);
    let get = |f: &dyn Fn(&Snapshot) -> &Vec<usize>| -> Vec<Vec<Vec<f64>>> {
        model
            .snapshots
            .iter()
            .map(|s| s.iter().map(|st| f(st).iter().map(|&c| x[c]).collect()).collect())
            .collect()
    };
    let p = get(&|s| &s.p);
    let curtailment = (0..model.p_hat.first().and_then(|s| s.first()).map_or(0, Vec::len))
        .map(|k| {
            model
                .p_hat
                .iter()
                .zip(&p)
                .map(|(ph, ps)| ph.iter().zip(ps).map(|(a, b)| (a[k] - b[k]).max(0.0)).sum())
                .collect()
        })
        .collect();
    let v = get(&|s| &s.w)
        .into_iter()
        .map(|s| s.into_iter().map(|w| w.into_iter().map(|x| x.max(0.0).sqrt()).collect()).collect())
        .collect();
    Ok(DayAheadSolution {
        topology,
        steps: model.steps.clone(),
        q: get(&|s| &s.q),
        v,
        flow_p: get(&|s| &s.flow_p),
        flow_q: get(&|s| &s.flow_q),
        p,
        curtailment,
        objective: sol.objective,
        mip_gap: sol.mip_gap,
        status: sol.status,
        orientation_integrality: integrality,
    })
}

/// Builds, solves and checks the day-ahead problem. An infeasible model is
/// diagnosed by re-solving with the voltage box removed.
pub fn plan_day_ahead(
    net: &Network,
    scen: &ScenarioSet,
    weights: &FairnessWeights,
    cfg: &DayAheadConfig,
    fixed: Option<&Topology>,
    opts: &SolveOptions,
) -> Result<DayAheadSolution, OptError> {
    if fixed.is_none() {
        let search = match cfg.method {
            DayAheadMethod::Mip => false,
            DayAheadMethod::Search => true,
            DayAheadMethod::Auto => {
                !cfg.extra_objective && net.switchable_lines().len() <= SEARCH_MAX_SWITCHES
            }
        };
        if search {
            return match search_day_ahead(net, scen, weights, cfg, opts) {
                Ok(sol) => {
                    validate_radiality(net, &sol.topology).map_err(OptError::NotRadial)?;
                    Ok(sol)
                }
                Err(OptError::Infeasible(_)) => {
                    Err(OptError::Infeasible(Some(diagnose(net, scen, weights, cfg, fixed, opts))))
                }
                Err(e) => Err(e),
            };
        }
    }
    let model = build_model(net, scen, weights, cfg, fixed)?;
    match solve_day_ahead(&model, opts) {
        Ok(sol) => {
            validate_radiality(net, &sol.topology).map_err(OptError::NotRadial)?;
            Ok(sol)
        }
        Err(OptError::Infeasible(_)) => Err(OptError::Infeasible(Some(diagnose(net, scen, weights, cfg, fixed, opts)))),
        Err(e) => Err(e),
    }
}

fn diagnose(
    net: &Network,
    scen: &ScenarioSet,
    weights: &FairnessWeights,
    cfg: &DayAheadConfig,
    fixed: Option<&Topology>,
    opts: &SolveOptions,
) -> InfeasibilityCause {
    let relaxed = DayAheadConfig {
        v_min: 1e-3,
        v_max: 1e3,
        big_m: BigM::Auto,
        ..cfg.clone()
    };
    let Ok(model) = build_model(net, scen, weights, &relaxed, fixed) else {
        return InfeasibilityCause::Radiality;
    };
    match solve(&model.lp, opts) {
        Ok(_) => InfeasibilityCause::VoltageLimits,
        Err(_) => InfeasibilityCause::Radiality,
    }
}

/// Exhaustive oracle: solves the fixed-topology problem for every radial
/// configuration and returns the best one.
pub fn solve_by_enumeration(
    net: &Network,
    scen: &ScenarioSet,
    weights: &FairnessWeights,
    cfg: &DayAheadConfig,
    opts: &SolveOptions,
) -> Result<(Topology, f64), OptError> {
    let mut best: Option<(Topology, f64)> = None;
    for topo in enumerate_radial_topologies(net) {
        let model = build_fixed_topology_model(net, scen, weights, cfg, &topo)?;
        match solve(&model.lp, opts) {
            Ok(sol) => {
                if best.as_ref().is_none_or(|(_, b)| sol.objective < *b) {
                    best = Some((topo, sol.objective));
                }
            }
            Err(OptError::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    best.ok_or(OptError::Infeasible(Some(InfeasibilityCause::VoltageLimits)))
}

impl DayAheadModel {
    /// Number of binary decisions left in the model.
    pub fn binary_count(&self) -> usize {
        self.lp.columns.iter().filter(|c| c.integer).count()
    }

    pub fn is_switchable(&self, line: usize) -> bool {
        self.switchable[line]
    }
}
