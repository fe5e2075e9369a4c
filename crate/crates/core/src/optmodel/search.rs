//! Exact best-first search over radial topologies.
//!
//! With the topology fixed the day-ahead problem splits into one small LP
//! per (scenario, step) snapshot, each with a non-negative cost. A topology's
//! cost is bounded below by the snapshots evaluated so far plus, for the rest,
//! the optimum of that snapshot's own continuous relaxation (switches
//! fractional). Topologies are expanded cheapest bound first, one snapshot at
//! a time; the first fully evaluated topology popped is optimal.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::dayahead::{assemble, modeled_steps, scenario_profiles, solve_day_ahead, DayAheadConfig, DayAheadSolution};
use super::lp::{solve, SolveOptions};
use super::{InfeasibilityCause, OptError};
use crate::fairness::FairnessWeights;
use crate::netmodel::{enumerate_radial_topologies, Network, Topology};
use crate::scenario::{Profile, ScenarioSet};

/// Largest switch count for which the search is chosen automatically.
pub const SEARCH_MAX_SWITCHES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

struct Snapshots<'a> {
    net: &'a Network,
    profiles: Vec<Profile>,
    /// (scenario, step)
    list: Vec<(usize, usize)>,
    horizon: usize,
    weights: &'a FairnessWeights,
    cfg: &'a DayAheadConfig,
    opts: SolveOptions,
}

impl Snapshots<'_> {
    /// Cost of snapshot `s`; `None` topology relaxes the switches.
    /// Infeasible snapshots cost +inf.
    fn cost(&self, s: usize, topo: Option<&Topology>) -> Result<f64, OptError> {
        let (w, t) = self.list[s];
        let mut model = assemble(
            self.net,
            std::slice::from_ref(&self.profiles[w]),
            vec![t],
            self.horizon,
            self.weights,
            self.cfg,
            topo,
            topo.is_some(),
        );
        model.lp.columns.iter_mut().for_each(|c| c.integer = false);
        match solve(&model.lp, &self.opts) {
            Ok(sol) => Ok(sol.objective),
            Err(OptError::Infeasible(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }
}

/// Optimal topology for a separable objective (no extra fairness term).
/// The returned solution comes from the full fixed-topology model of the
/// winner; `mip_gap` holds the search's final relative gap.
pub fn search_day_ahead(
    net: &Network,
    scen: &ScenarioSet,
    weights: &FairnessWeights,
    cfg: &DayAheadConfig,
    opts: &SolveOptions,
) -> Result<DayAheadSolution, OptError> {
    if cfg.extra_objective {
        return Err(OptError::Config(
            "topology search needs a separable objective; use the MIP with extra_objective".into(),
        ));
    }
    cfg.check()?;
    net.check().map_err(|e| OptError::Network(e.to_string()))?;
    if weights.lambda.len() != net.pv_plants.len() {
        return Err(OptError::Config(format!(
            "{} weights for {} PV plants",
            weights.lambda.len(),
            net.pv_plants.len()
        )));
    }
    let profiles = scenario_profiles(scen, cfg)?;
    let horizon = profiles.first().map_or(0, Profile::len);
    let steps = modeled_steps(&profiles, cfg.collapse_idle_steps);
    let list: Vec<(usize, usize)> = (0..profiles.len())
        .flat_map(|w| steps.iter().map(move |&t| (w, t)))
        .collect();
    let snaps = Snapshots {
        net,
        profiles,
        list,
        horizon,
        weights,
        cfg,
        opts: opts.clone(),
    };
    let topologies = enumerate_radial_topologies(net);
    if topologies.is_empty() {
        return Err(OptError::Infeasible(Some(InfeasibilityCause::Radiality)));
    }

    let m = snaps.list.len();
    let mut relaxed = Vec::with_capacity(m);
    for s in 0..m {
        let h = snaps.cost(s, None)?;
        if h.is_infinite() {
            return Err(OptError::Infeasible(Some(InfeasibilityCause::VoltageLimits)));
        }
        relaxed.push(h);
    }

    // Evaluate the base topology (or the first radial one) in full and visit
    // snapshots where its cost sits furthest above the relaxation first.
    let base = Topology::base(net);
    let start = topologies
        .iter()
        .position(|t| t.closed() == base.closed())
        .unwrap_or(0);
    let mut start_cost = Vec::with_capacity(m);
    for s in 0..m {
        start_cost.push(snaps.cost(s, Some(&topologies[start]))?);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        let ga = start_cost[a] - relaxed[a];
        let gb = start_cost[b] - relaxed[b];
        gb.total_cmp(&ga).then(a.cmp(&b))
    });
    // suffix[i]: relaxation bound of the snapshots from position i on
    let mut suffix = vec![0.0; m + 1];
    for i in (0..m).rev() {
        suffix[i] = suffix[i + 1] + relaxed[order[i]];
    }

    let mut done = vec![0usize; topologies.len()];
    let mut partial = vec![0.0f64; topologies.len()];
    let mut heap = BinaryHeap::new();
    for (k, _) in topologies.iter().enumerate() {
        if k == start {
            partial[k] = start_cost.iter().sum();
            done[k] = m;
            if partial[k].is_finite() {
                heap.push(Reverse(Key(partial[k], k)));
            }
        } else {
            heap.push(Reverse(Key(suffix[0], k)));
        }
    }

    let mut best: Option<(f64, usize)> = start_cost
        .iter()
        .all(|c| c.is_finite())
        .then(|| (partial[start], start));
    let mut evaluations = m;
    let (winner, gap) = loop {
        let Some(Reverse(Key(bound, k))) = heap.pop() else {
            match best {
                Some((_, k)) => break (k, 0.0),
                None => return Err(OptError::Infeasible(Some(InfeasibilityCause::VoltageLimits))),
            }
        };
        if let Some((ub, kb)) = best {
            let gap = (ub - bound) / ub.abs().max(1e-9);
            if gap <= opts.mip_rel_gap || done[k] == m {
                break (kb, gap.max(0.0));
            }
        }
        if done[k] == m {
            break (k, 0.0);
        }
        let c = snaps.cost(order[done[k]], Some(&topologies[k]))?;
        evaluations += 1;
        if c.is_infinite() {
            continue;
        }
        partial[k] += c;
        done[k] += 1;
        if done[k] == m && best.is_none_or(|(ub, _)| partial[k] < ub) {
            best = Some((partial[k], k));
        }
        heap.push(Reverse(Key(partial[k] + suffix[done[k]], k)));
    };
    log::debug!(
        "topology search: {} topologies, {} snapshots, {} snapshot LPs",
        topologies.len(),
        m,
        evaluations + m
    );

    let model = assemble(
        net,
        &snaps.profiles,
        steps,
        horizon,
        weights,
        cfg,
        Some(&topologies[winner]),
        false,
    );
    let mut sol = solve_day_ahead(&model, opts)?;
    sol.mip_gap = gap;
    Ok(sol)
}
