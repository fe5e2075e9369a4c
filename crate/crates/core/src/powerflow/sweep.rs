use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PowerFlowError;
use crate::netmodel::topology_tree;
use crate::netmodel::{Network, Topology};

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowOptions {
    /// Stop when the largest voltage update falls below this, p.u.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
        }
    }
}

/// Complex power entering the line at each of its ends, p.u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchFlow {
    pub from: Complex64,
    pub to: Complex64,
}

impl BranchFlow {
    pub fn loss(&self) -> Complex64 {
        self.from + self.to
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowState {
    /// Voltage magnitude per bus; 0 on de-energized buses.
    pub v: Vec<f64>,
    /// Voltage angle per bus, rad.
    pub theta: Vec<f64>,
    /// Net complex injection per bus (generation positive), including the
    /// power delivered by the slack buses.
    pub s_inj: Vec<Complex64>,
    pub branch_flows: Vec<BranchFlow>,
    pub energized: Vec<bool>,
    pub iterations: usize,
}

impl PowerFlowState {
    pub fn voltage(&self, bus: usize) -> Complex64 {
        Complex64::from_polar(self.v[bus], self.theta[bus])
    }

    pub fn total_loss(&self) -> Complex64 {
        self.branch_flows.iter().map(BranchFlow::loss).sum()
    }

    /// Largest excursion of any energized bus outside `[v_min, v_max]`; zero when inside.
    pub fn max_violation(&self, v_min: f64, v_max: f64) -> f64 {
        self.v
            .iter()
            .zip(&self.energized)
            .filter(|(_, &e)| e)
            .map(|(&v, _)| (v - v_max).max(v_min - v).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Solves the AC power flow with [`PowerFlowOptions::default`].
///
/// `injections` holds one complex injection per bus, generation positive;
/// entries for slack buses are ignored.
pub fn solve_ac_power_flow(
    net: &Network,
    topo: &Topology,
    injections: &[Complex64],
) -> Result<PowerFlowState, PowerFlowError> {
    solve_ac_power_flow_with(net, topo, injections, &PowerFlowOptions::default())
}

pub fn solve_ac_power_flow_with(
    net: &Network,
    topo: &Topology,
    injections: &[Complex64],
    opts: &PowerFlowOptions,
) -> Result<PowerFlowState, PowerFlowError> {
    let n = net.bus_count();
    if injections.len() != n {
        return Err(PowerFlowError::Dimension {
            expected: n,
            found: injections.len(),
        });
    }
    if topo.closed().len() != net.line_count() {
        return Err(PowerFlowError::Dimension {
            expected: net.line_count(),
            found: topo.closed().len(),
        });
    }

    let tree = topology_tree(net, topo.closed());
    let mut energized = vec![false; n];
    let mut parent = vec![usize::MAX; n];
    let mut tree_line = vec![false; net.line_count()];
    for &s in &net.slack_buses {
        energized[s] = true;
    }
    for &(node, e) in &tree {
        energized[node] = true;
        parent[node] = net.lines[e].other(node);
        tree_line[e] = true;
    }
    let loops: Vec<usize> = (0..net.line_count())
        .filter(|&e| {
            let l = &net.lines[e];
            topo.is_closed(e) && !tree_line[e] && energized[l.from] && energized[l.to]
        })
        .collect();
    if !loops.is_empty() {
        return Err(PowerFlowError::NotRadial { lines: loops });
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut y_shunt = vec![zero; n];
    for (e, line) in net.lines.iter().enumerate() {
        if tree_line[e] {
            let half = Complex64::new(0.0, line.b / 2.0);
            y_shunt[line.from] += half;
            y_shunt[line.to] += half;
        }
    }
    let z: Vec<Complex64> = net
        .lines
        .iter()
        .map(|l| Complex64::new(l.r, l.x))
        .collect();

    let mut v: Vec<Complex64> = energized
        .iter()
        .map(|&e| if e { Complex64::new(1.0, 0.0) } else { zero })
        .collect();
    // Series current flowing from the parent into each node.
    let mut current = vec![zero; n];

    let backward = |v: &[Complex64], current: &mut [Complex64]| {
        current.iter_mut().for_each(|c| *c = zero);
        for &(node, _) in tree.iter().rev() {
            let injected = (injections[node] / v[node]).conj() - y_shunt[node] * v[node];
            current[node] -= injected;
            let up = current[node];
            let p = parent[node];
            if !net.is_slack(p) {
                current[p] += up;
            }
        }
    };

    let mut iterations = 0;
    let mut mismatch = f64::INFINITY;
    while iterations < opts.max_iterations {
        iterations += 1;
        backward(&v, &mut current);
        mismatch = 0.0;
        for &(node, e) in &tree {
            let updated = v[parent[node]] - z[e] * current[node];
            mismatch = f64::max(mismatch, (updated - v[node]).norm());
            v[node] = updated;
        }
        if !mismatch.is_finite() {
            break;
        }
        if mismatch < opts.tolerance {
            break;
        }
    }
    if !(mismatch < opts.tolerance) {
        return Err(PowerFlowError::Diverged {
            iterations,
            mismatch,
        });
    }
    backward(&v, &mut current);

    let mut s_inj = vec![zero; n];
    for (b, s) in s_inj.iter_mut().enumerate() {
        if energized[b] && !net.is_slack(b) {
            *s = injections[b];
        }
    }
    let mut branch_flows = vec![BranchFlow { from: zero, to: zero }; net.line_count()];
    let mut slack_current = vec![zero; n];
    for &s in &net.slack_buses {
        slack_current[s] = y_shunt[s] * v[s];
    }
    for &(node, e) in &tree {
        let p = parent[node];
        let half = Complex64::new(0.0, net.lines[e].b / 2.0);
        let at_parent = v[p] * (current[node] + half * v[p]).conj();
        let at_child = v[node] * (-current[node] + half * v[node]).conj();
        branch_flows[e] = if net.lines[e].from == p {
            BranchFlow {
                from: at_parent,
                to: at_child,
            }
        } else {
            BranchFlow {
                from: at_child,
                to: at_parent,
            }
        };
        if net.is_slack(p) {
            slack_current[p] += current[node];
        }
    }
    for &s in &net.slack_buses {
        s_inj[s] = v[s] * slack_current[s].conj();
    }

    Ok(PowerFlowState {
        v: v.iter().map(|c| c.norm()).collect(),
        theta: v.iter().map(|c| if c.norm() > 0.0 { c.arg() } else { 0.0 }).collect(),
        s_inj,
        branch_flows,
        energized,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures::{case33, chain};
    use crate::netmodel::validate_radiality;

    fn loads_as_injections(net: &Network) -> Vec<Complex64> {
        net.buses
            .iter()
            .map(|b| -Complex64::new(b.load_p, b.load_q))
            .collect()
    }

    #[test]
    fn flat_no_load() {
        let net = case33();
        let topo = Topology::base(&net);
        let st = solve_ac_power_flow(&net, &topo, &vec![Complex64::new(0.0, 0.0); 33]).unwrap();
        assert!(st.v.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(st.branch_flows.iter().all(|f| f.from.norm() < 1e-12 && f.to.norm() < 1e-12));
    }

    #[test]
    fn two_bus_closed_form() {
        let (r, x, p, q) = (0.01, 0.01, 0.1, 0.05);
        let net = chain(2, r, x);
        let topo = Topology::base(&net);
        let st = solve_ac_power_flow(
            &net,
            &topo,
            &[Complex64::new(0.0, 0.0), Complex64::new(-p, -q)],
        )
        .unwrap();
        // |V2|^4 + (2(rP + xQ) - 1)|V2|^2 + |z|^2 (P^2 + Q^2) = 0, larger root.
        let b = 2.0 * (r * p + x * q) - 1.0;
        let c = (r * r + x * x) * (p * p + q * q);
        let v2 = ((-b + (b * b - 4.0 * c).sqrt()) / 2.0).sqrt();
        assert!((st.v[1] - v2).abs() < 1e-8, "{} vs {v2}", st.v[1]);
    }

    #[test]
    fn case33_matches_reference_solution() {
        let net = case33();
        let topo = Topology::base(&net);
        let st = solve_ac_power_flow(&net, &topo, &loads_as_injections(&net)).unwrap();
        let reference = include_str!("../../../../data/fixtures/case33bw_base_pf.csv");
        let mut checked = 0;
        for row in reference.lines().skip(1) {
            let cols: Vec<f64> = row.split(',').map(|c| c.trim().parse().unwrap()).collect();
            let bus = net.bus_index(cols[0] as usize).unwrap();
            assert!((st.v[bus] - cols[1]).abs() < 1e-6, "bus {}: {} vs {}", cols[0], st.v[bus], cols[1]);
            assert!((st.theta[bus] - cols[2]).abs() < 1e-6);
            checked += 1;
        }
        assert_eq!(checked, 33);
    }

    #[test]
    fn energy_balance() {
        let mut net = case33();
        for (e, line) in net.lines.iter_mut().enumerate() {
            line.b = 2e-4 * (e % 4) as f64;
        }
        let topo = Topology::base(&net);
        let mut inj = loads_as_injections(&net);
        inj[17] += Complex64::new(0.2, 0.05);
        inj[32] += Complex64::new(0.15, -0.02);
        let st = solve_ac_power_flow(&net, &topo, &inj).unwrap();
        let total_inj: Complex64 = st.s_inj.iter().sum();
        assert!((total_inj - st.total_loss()).norm() < 1e-8);
        // slack supplies load minus PV plus losses
        let load: Complex64 = net.buses.iter().map(|b| Complex64::new(b.load_p, b.load_q)).sum();
        let pv = Complex64::new(0.35, 0.03);
        assert!((st.s_inj[0] - (load - pv + st.total_loss())).norm() < 1e-8);
    }

    #[test]
    fn voltage_decreases_along_paths_without_generation() {
        let net = case33();
        let topo = Topology::base(&net);
        let st = solve_ac_power_flow(&net, &topo, &loads_as_injections(&net)).unwrap();
        for (node, e) in topology_tree(&net, topo.closed()) {
            let parent = net.lines[e].other(node);
            assert!(st.v[node] <= st.v[parent] + 1e-12);
        }
    }

    #[test]
    fn island_is_de_energized() {
        let mut net = case33();
        net.lines[31].switchable = true;
        let mut closed = Topology::base(&net).closed().to_vec();
        closed[31] = false;
        let topo = Topology::from_closed(&net, closed);
        assert!(validate_radiality(&net, &topo).is_err());
        let st = solve_ac_power_flow(&net, &topo, &loads_as_injections(&net)).unwrap();
        assert!(!st.energized[32]);
        assert_eq!(st.v[32], 0.0);
        assert!(st.energized[31]);
    }

    #[test]
    fn loop_is_rejected() {
        let net = case33();
        let topo = Topology::from_closed(&net, vec![true; 37]);
        assert!(matches!(
            solve_ac_power_flow(&net, &topo, &loads_as_injections(&net)),
            Err(PowerFlowError::NotRadial { .. })
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let net = chain(2, 0.5, 0.5);
        let topo = Topology::base(&net);
        let res = solve_ac_power_flow(
            &net,
            &topo,
            &[Complex64::new(0.0, 0.0), Complex64::new(-5.0, -5.0)],
        );
        assert!(matches!(res, Err(PowerFlowError::Diverged { .. })));
    }
}
