use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Network;

/// Tolerance used when checking orientation values for integrality.
const ORIENTATION_TOL: f64 = 1e-6;

/// Open/closed status of every line plus the orientation variables.
///
/// `orientation[e] = [d_ft, d_tf]` where `d_ft = 1` means the `from` bus of
/// line `e` feeds its `to` bus. For a closed line exactly one entry is 1 at a
/// valid radial configuration; for an open line both are 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    closed: Vec<bool>,
    orientation: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadialityViolation {
    /// Closed lines forming a loop (or joining two slack buses).
    Cycle { lines: Vec<usize> },
    /// Buses (case ids) not connected to any slack bus.
    Island { buses: Vec<usize> },
    /// `d_ft + d_tf` differs from the line's switch status.
    OrientationMismatch { line: usize, sum: f64, expected: f64 },
    /// A non-slack bus (case id) without exactly one feeding line.
    OrientationCount { bus: usize, count: f64 },
    /// A slack bus (case id) that is fed by a line.
    SlackInflow { bus: usize, line: usize },
    /// An orientation variable away from {0, 1}.
    FractionalOrientation { line: usize, value: f64 },
    /// The topology vectors do not match the network's line count.
    Dimension { expected: usize, found: usize },
}

impl fmt::Display for RadialityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cycle { lines } => write!(f, "closed lines {lines:?} form a cycle"),
            Self::Island { buses } => write!(f, "buses {buses:?} are not supplied by a slack bus"),
            Self::OrientationMismatch {
                line,
                sum,
                expected,
            } => write!(f, "line {line}: orientation sum {sum} but status {expected}"),
            Self::OrientationCount { bus, count } => {
                write!(f, "bus {bus} is fed by {count} lines instead of one")
            }
            Self::SlackInflow { bus, line } => write!(f, "slack bus {bus} is fed through line {line}"),
            Self::FractionalOrientation { line, value } => {
                write!(f, "line {line} has fractional orientation {value}")
            }
            Self::Dimension { expected, found } => {
                write!(f, "topology covers {found} lines, network has {expected}")
            }
        }
    }
}

impl std::error::Error for RadialityViolation {}

impl Topology {
    /// Builds a topology from line statuses, orienting closed lines away
    /// from the slack buses. Lines that a breadth-first search from the slacks
    /// does not traverse (loop-closing lines, islands) get zero orientation.
    pub fn from_closed(net: &Network, closed: Vec<bool>) -> Self {
        let mut orientation = vec![[0.0, 0.0]; net.lines.len()];
        if closed.len() == net.lines.len() {
            for (node, parent_line) in bfs_tree(net, &closed) {
                let line = &net.lines[parent_line];
                if line.to == node {
                    orientation[parent_line][0] = 1.0;
                } else {
                    orientation[parent_line][1] = 1.0;
                }
            }
        }
        Self {
            closed,
            orientation,
        }
    }

    /// The configuration given by the case file's status column.
    pub fn base(net: &Network) -> Self {
        Self::from_closed(net, net.lines.iter().map(|l| l.in_service).collect())
    }

    /// Closes every non-switchable line and the listed switchable ones.
    pub fn with_switches(net: &Network, closed_switches: &[usize]) -> Self {
        let mut closed: Vec<bool> = net.lines.iter().map(|l| !l.switchable).collect();
        for &e in closed_switches {
            closed[e] = true;
        }
        Self::from_closed(net, closed)
    }

    pub fn from_parts(closed: Vec<bool>, orientation: Vec<[f64; 2]>) -> Self {
        Self {
            closed,
            orientation,
        }
    }

    pub fn is_closed(&self, line: usize) -> bool {
        self.closed[line]
    }

    pub fn closed(&self) -> &[bool] {
        &self.closed
    }

    pub fn orientation(&self, line: usize) -> [f64; 2] {
        self.orientation[line]
    }

    pub fn closed_count(&self) -> usize {
        self.closed.iter().filter(|&&c| c).count()
    }

    /// Status of each switchable line, in line order.
    pub fn switch_states(&self, net: &Network) -> Vec<bool> {
        net.lines
            .iter()
            .zip(&self.closed)
            .filter(|(l, _)| l.switchable)
            .map(|(_, &c)| c)
            .collect()
    }
}

/// For every bus reachable from a slack through closed lines, the bus and the
/// line that feeds it, in breadth-first order. Slack buses are not listed.
pub(crate) fn bfs_tree(net: &Network, closed: &[bool]) -> Vec<(usize, usize)> {
    let inc = net.incidence();
    let mut seen = vec![false; net.bus_count()];
    let mut order = Vec::with_capacity(net.bus_count());
    let mut queue = VecDeque::new();
    for &s in &net.slack_buses {
        seen[s] = true;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        for &e in &inc[u] {
            if !closed[e] {
                continue;
            }
            let v = net.lines[e].other(u);
            if !seen[v] {
                seen[v] = true;
                order.push((v, e));
                queue.push_back(v);
            }
        }
    }
    order
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Lines on the path between `a` and `b` using only `forest` lines.
fn forest_path(net: &Network, forest: &[bool], a: usize, b: usize) -> Vec<usize> {
    let inc = net.incidence();
    let mut via = vec![None; net.bus_count()];
    let mut seen = vec![false; net.bus_count()];
    let mut queue = VecDeque::from([a]);
    seen[a] = true;
    while let Some(u) = queue.pop_front() {
        if u == b {
            break;
        }
        for &e in &inc[u] {
            let v = net.lines[e].other(u);
            if forest[e] && !seen[v] {
                seen[v] = true;
                via[v] = Some(e);
                queue.push_back(v);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = b;
    while let Some(e) = via[cur] {
        path.push(e);
        cur = net.lines[e].other(cur);
    }
    path
}

/// Checks that the closed lines form a spanning forest with one slack bus per
/// tree and that the orientation variables describe that forest.
pub fn validate_radiality(net: &Network, topo: &Topology) -> Result<(), RadialityViolation> {
    let m = net.line_count();
    if topo.closed.len() != m || topo.orientation.len() != m {
        return Err(RadialityViolation::Dimension {
            expected: m,
            found: topo.closed.len(),
        });
    }

    // Cycles, counting a path between two slack buses as one.
    let mut dsu = DisjointSet::new(net.bus_count());
    for w in net.slack_buses.windows(2) {
        dsu.union(w[0], w[1]);
    }
    let mut forest = vec![false; m];
    for (e, line) in net.lines.iter().enumerate() {
        if !topo.closed[e] {
            continue;
        }
        if !dsu.union(line.from, line.to) {
            let mut lines = forest_path(net, &forest, line.from, line.to);
            lines.push(e);
            lines.sort_unstable();
            return Err(RadialityViolation::Cycle { lines });
        }
        forest[e] = true;
    }

    let reached = bfs_tree(net, &topo.closed);
    let mut supplied = vec![false; net.bus_count()];
    for &s in &net.slack_buses {
        supplied[s] = true;
    }
    for &(v, _) in &reached {
        supplied[v] = true;
    }
    let islands: Vec<usize> = (0..net.bus_count())
        .filter(|&b| !supplied[b])
        .map(|b| net.buses[b].id)
        .collect();
    if !islands.is_empty() {
        return Err(RadialityViolation::Island { buses: islands });
    }

    let mut inflow = vec![0.0; net.bus_count()];
    for (e, line) in net.lines.iter().enumerate() {
        let [d_ft, d_tf] = topo.orientation[e];
        for value in [d_ft, d_tf] {
            if value.min((1.0 - value).abs()) > ORIENTATION_TOL {
                return Err(RadialityViolation::FractionalOrientation { line: e, value });
            }
        }
        let expected = if topo.closed[e] { 1.0 } else { 0.0 };
        let sum = d_ft + d_tf;
        if (sum - expected).abs() > ORIENTATION_TOL || (!line.switchable && !topo.closed[e]) {
            return Err(RadialityViolation::OrientationMismatch {
                line: e,
                sum,
                expected: if line.switchable { expected } else { 1.0 },
            });
        }
        if net.is_slack(line.to) && d_ft > ORIENTATION_TOL {
            return Err(RadialityViolation::SlackInflow {
                bus: net.buses[line.to].id,
                line: e,
            });
        }
        if net.is_slack(line.from) && d_tf > ORIENTATION_TOL {
            return Err(RadialityViolation::SlackInflow {
                bus: net.buses[line.from].id,
                line: e,
            });
        }
        inflow[line.to] += d_ft;
        inflow[line.from] += d_tf;
    }
    for (b, &count) in inflow.iter().enumerate() {
        if !net.is_slack(b) && (count - 1.0).abs() > ORIENTATION_TOL {
            return Err(RadialityViolation::OrientationCount {
                bus: net.buses[b].id,
                count,
            });
        }
    }
    Ok(())
}

/// Every radial configuration reachable by operating the switchable lines,
/// with all other lines closed. Exponential in the number of switches.
pub fn enumerate_radial_topologies(net: &Network) -> Vec<Topology> {
    let switches = net.switchable_lines();
    assert!(switches.len() <= 24, "too many switches to enumerate");
    let fixed_closed = net.lines.len() - switches.len();
    let target = net.bus_count() - net.slack_buses.len();
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << switches.len()) {
        if fixed_closed + mask.count_ones() as usize != target {
            continue;
        }
        let closed_switches: Vec<usize> = switches
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &e)| e)
            .collect();
        let topo = Topology::with_switches(net, &closed_switches);
        if validate_radiality(net, &topo).is_ok() {
            out.push(topo);
        }
    }
    out
}
