//! A solver-neutral linear / mixed-integer model (minimization) with an
//! MPS writer and two backends: the in-process HiGHS binding and an
//! external solver driven through MPS and solution files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use highs::{HighsModelStatus, RowProblem, Sense};
use serde::{Deserialize, Serialize};

use super::OptError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub cost: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub coeffs: Vec<(usize, f64)>,
}

/// `min cost·x + offset` subject to row and column bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Constraint>,
    pub offset: f64,
}

impl LinearModel {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64, cost: f64) -> usize {
        self.columns.push(Column {
            name: name.into(),
            lb,
            ub,
            cost,
            integer: false,
        });
        self.columns.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> usize {
        let j = self.add_var(name, 0.0, 1.0, cost);
        self.columns[j].integer = true;
        j
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, lb: f64, ub: f64) -> usize {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.columns.len()));
        self.rows.push(Constraint {
            name: name.into(),
            lb,
            ub,
            coeffs,
        });
        self.rows.len() - 1
    }

    pub fn fix(&mut self, col: usize, value: f64) {
        self.columns[col].lb = value;
        self.columns[col].ub = value;
    }

    pub fn integer_count(&self) -> usize {
        self.columns.iter().filter(|c| c.integer).count()
    }

    pub fn is_mip(&self) -> bool {
        self.columns.iter().any(|c| c.integer && c.lb != c.ub)
    }

    /// Objective value of `x`, offset included.
    pub fn objective_of(&self, x: &[f64]) -> f64 {
        self.offset + self.columns.iter().zip(x).map(|(c, v)| c.cost * v).sum::<f64>()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, &v) in self.columns.iter().zip(x) {
            worst = worst.max(c.lb - v).max(v - c.ub);
        }
        for r in &self.rows {
            let a: f64 = r.coeffs.iter().map(|&(j, k)| k * x[j]).sum();
            worst = worst.max(r.lb - a).max(a - r.ub);
        }
        worst
    }

    /// Free-format MPS. The objective constant is written as the negated
    /// right-hand side of the objective row.
    pub fn to_mps(&self) -> String {
        let mut out = String::new();
        let name = if self.name.is_empty() { "model" } else { &self.name };
        let _ = writeln!(out, "NAME {}", mps_name(name));
        out.push_str("OBJSENSE\n    MIN\nROWS\n N  obj\n");
        for r in &self.rows {
            let kind = match (r.lb.is_finite(), r.ub.is_finite()) {
                (true, true) if r.lb == r.ub => "E",
                (true, _) => "G",
                (false, true) => "L",
                (false, false) => "N",
            };
            let _ = writeln!(out, " {kind}  {}", mps_name(&r.name));
        }
        let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.columns.len()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, k) in &r.coeffs {
                by_col[j].push((i, k));
            }
        }
        out.push_str("COLUMNS\n");
        let mut in_int = false;
        for (j, c) in self.columns.iter().enumerate() {
            if c.integer != in_int {
                let tag = if c.integer { "INTORG" } else { "INTEND" };
                let _ = writeln!(out, "    MARKER 'MARKER' '{tag}'");
                in_int = c.integer;
            }
            let cname = mps_name(&c.name);
            if c.cost != 0.0 || by_col[j].is_empty() {
                let _ = writeln!(out, "    {cname} obj {:?}", c.cost);
            }
            for &(i, k) in &by_col[j] {
                let _ = writeln!(out, "    {cname} {} {k:?}", mps_name(&self.rows[i].name));
            }
        }
        if in_int {
            out.push_str("    MARKER 'MARKER' 'INTEND'\n");
        }
        out.push_str("RHS\n");
        if self.offset != 0.0 {
            let _ = writeln!(out, "    rhs obj {:?}", -self.offset);
        }
        let mut ranges = String::new();
        for r in &self.rows {
            let rname = mps_name(&r.name);
            let rhs = match (r.lb.is_finite(), r.ub.is_finite()) {
                (true, true) if r.lb == r.ub => Some(r.lb),
                (true, true) => {
                    let _ = writeln!(ranges, "    rng {rname} {:?}", r.ub - r.lb);
                    Some(r.lb)
                }
                (true, false) => Some(r.lb),
                (false, true) => Some(r.ub),
                (false, false) => None,
            };
            if let Some(v) = rhs.filter(|v| *v != 0.0) {
                let _ = writeln!(out, "    rhs {rname} {v:?}");
            }
        }
        if !ranges.is_empty() {
            out.push_str("RANGES\n");
            out.push_str(&ranges);
        }
        out.push_str("BOUNDS\n");
        for c in &self.columns {
            let n = mps_name(&c.name);
            match (c.lb, c.ub) {
                (lb, ub) if c.integer && lb == 0.0 && ub == 1.0 => {
                    let _ = writeln!(out, " BV bnd {n}");
                }
                (lb, ub) if lb == ub => {
                    let _ = writeln!(out, " FX bnd {n} {lb:?}");
                }
                (lb, ub) if lb == f64::NEG_INFINITY && ub == f64::INFINITY => {
                    let _ = writeln!(out, " FR bnd {n}");
                }
                (lb, ub) => {
                    if lb == f64::NEG_INFINITY {
                        let _ = writeln!(out, " MI bnd {n}");
                    } else if lb != 0.0 || c.integer {
                        let _ = writeln!(out, " LO bnd {n} {lb:?}");
                    }
                    if ub != f64::INFINITY {
                        let _ = writeln!(out, " UP bnd {n} {ub:?}");
                    }
                }
            }
        }
        out.push_str("ENDATA\n");
        out
    }

    /// JSON map from MPS names to column / row indices and model names.
    pub fn name_map_json(&self) -> String {
        #[derive(Serialize)]
        struct Entry<'a> {
            index: usize,
            mps: String,
            name: &'a str,
            integer: bool,
        }
        #[derive(Serialize)]
        struct Map<'a> {
            columns: Vec<Entry<'a>>,
            rows: Vec<Entry<'a>>,
        }
        let map = Map {
            columns: self
                .columns
                .iter()
                .enumerate()
                .map(|(i, c)| Entry {
                    index: i,
                    mps: mps_name(&c.name),
                    name: &c.name,
                    integer: c.integer,
                })
                .collect(),
            rows: self
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| Entry {
                    index: i,
                    mps: mps_name(&r.name),
                    name: &r.name,
                    integer: false,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&map).expect("name map serializes")
    }

    /// Writes `<stem>.mps` and `<stem>.names.json` into `dir`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf), OptError> {
        let mps = dir.join(format!("{stem}.mps"));
        let map = dir.join(format!("{stem}.names.json"));
        std::fs::write(&mps, self.to_mps()).map_err(|e| OptError::Io(e.to_string()))?;
        std::fs::write(&map, self.name_map_json()).map_err(|e| OptError::Io(e.to_string()))?;
        Ok((mps, map))
    }
}

/// Names may not contain whitespace in free MPS.
fn mps_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Backend {
    Highs,
    /// External solver. `{model}` and `{solution}` in the arguments are
    /// replaced by the MPS path and the expected HiGHS-style solution path.
    Subprocess { program: String, args: Vec<String> },
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Highs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub mip_rel_gap: f64,
    /// Seconds; `None` for no limit.
    pub time_limit: Option<f64>,
    pub backend: Backend,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            mip_rel_gap: 1e-4,
            time_limit: None,
            backend: Backend::Highs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// Stopped by a limit with an incumbent.
    Feasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub mip_gap: f64,
}

pub fn solve(model: &LinearModel, opts: &SolveOptions) -> Result<LpSolution, OptError> {
    match &opts.backend {
        Backend::Highs => solve_highs(model, opts),
        Backend::Subprocess { program, args } => solve_subprocess(model, program, args),
    }
}

fn solve_highs(model: &LinearModel, opts: &SolveOptions) -> Result<LpSolution, OptError> {
    let mut pb = RowProblem::default();
    let cols: Vec<_> = model
        .columns
        .iter()
        .map(|c| {
            if c.integer && c.lb != c.ub {
                pb.add_integer_column(c.cost, c.lb..=c.ub)
            } else {
                pb.add_column(c.cost, c.lb..=c.ub)
            }
        })
        .collect();
    for r in &model.rows {
        let coeffs: Vec<_> = r.coeffs.iter().map(|&(j, k)| (cols[j], k)).collect();
        pb.add_row(r.lb..=r.ub, &coeffs);
    }
    let mut m = pb.optimise(Sense::Minimise);
    // PVFAIR_SOLVER_LOG=1 shows the HiGHS log on stdout.
    if std::env::var_os("PVFAIR_SOLVER_LOG").is_none() {
        m.make_quiet();
    } else {
        m.set_option("output_flag", true);
        m.set_option("log_to_console", true);
    }
    m.set_option("threads", 1);
    m.set_option("mip_rel_gap", opts.mip_rel_gap);
    if let Some(t) = opts.time_limit {
        m.set_option("time_limit", t);
    }
    let solved = m.try_solve().map_err(|e| OptError::Solver(format!("{e:?}")))?;
    let status = solved.status();
    let has_incumbent = matches!(
        solved.primal_solution_status(),
        highs::HighsSolutionStatus::Feasible
    );
    let st = match status {
        HighsModelStatus::Optimal => SolveStatus::Optimal,
        HighsModelStatus::Infeasible => return Err(OptError::Infeasible(None)),
        HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
            return Err(OptError::Unbounded)
        }
        HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
        HighsModelStatus::ReachedTimeLimit
        | HighsModelStatus::ReachedIterationLimit
        | HighsModelStatus::ReachedSolutionLimit
        | HighsModelStatus::ReachedInterrupt => {
            if has_incumbent {
                SolveStatus::Feasible
            } else {
                return Err(OptError::NoIncumbent(format!("{status:?}")));
            }
        }
        other => return Err(OptError::Solver(format!("HiGHS status {other:?}"))),
    };
    let x = solved.get_solution().columns().to_vec();
    let mip_gap = if model.is_mip() { solved.mip_gap() } else { 0.0 };
    Ok(LpSolution {
        status: st,
        objective: model.objective_of(&x),
        x,
        mip_gap,
    })
}

fn solve_subprocess(model: &LinearModel, program: &str, args: &[String]) -> Result<LpSolution, OptError> {
    let dir = tempfile::tempdir().map_err(|e| OptError::Io(e.to_string()))?;
    let mps = dir.path().join("model.mps");
    let sol = dir.path().join("model.sol");
    std::fs::File::create(&mps)
        .and_then(|mut f| f.write_all(model.to_mps().as_bytes()))
        .map_err(|e| OptError::Io(e.to_string()))?;
    let args: Vec<String> = args
        .iter()
        .map(|a| {
            a.replace("{model}", &mps.to_string_lossy())
                .replace("{solution}", &sol.to_string_lossy())
        })
        .collect();
    let out = Command::new(program)
        .args(&args)
        .output()
        .map_err(|e| OptError::Solver(format!("cannot run {program}: {e}")))?;
    if !out.status.success() {
        return Err(OptError::Solver(format!(
            "{program} exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let text = std::fs::read_to_string(&sol).map_err(|e| OptError::Io(format!("{}: {e}", sol.display())))?;
    parse_solution_file(model, &text)
}

/// Parses the HiGHS text solution format (`Model status` block followed by
/// `# Columns N` and `name value` lines).
pub fn parse_solution_file(model: &LinearModel, text: &str) -> Result<LpSolution, OptError> {
    let mut lines = text.lines().map(str::trim);
    let mut status = None;
    let mut values = std::collections::HashMap::new();
    while let Some(line) = lines.next() {
        if line == "Model status" {
            status = lines.next().map(str::to_string);
        } else if let Some(n) = line.strip_prefix("# Columns ") {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| OptError::Solver(format!("bad column count `{n}`")))?;
            for _ in 0..n {
                let l = lines
                    .next()
                    .ok_or_else(|| OptError::Solver("truncated solution file".into()))?;
                let mut it = l.split_whitespace();
                let (Some(name), Some(v)) = (it.next(), it.next()) else {
                    return Err(OptError::Solver(format!("bad solution line `{l}`")));
                };
                let v: f64 = v
                    .parse()
                    .map_err(|_| OptError::Solver(format!("bad value in `{l}`")))?;
                values.insert(name.to_string(), v);
            }
            break;
        }
    }
    let st = match status.as_deref() {
        Some("Optimal") => SolveStatus::Optimal,
        Some("Infeasible") => return Err(OptError::Infeasible(None)),
        Some(s) if s.contains("nbounded") => return Err(OptError::Unbounded),
        Some(s) if s.contains("limit") && !values.is_empty() => SolveStatus::Feasible,
        Some(s) => return Err(OptError::NoIncumbent(s.to_string())),
        None => return Err(OptError::Solver("solution file has no model status".into())),
    };
    let x = model
        .columns
        .iter()
        .map(|c| {
            values
                .get(&mps_name(&c.name))
                .copied()
                .ok_or_else(|| OptError::Solver(format!("solution misses column {}", c.name)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LpSolution {
        status: st,
        objective: model.objective_of(&x),
        x,
        mip_gap: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knapsack() -> LinearModel {
        // max x + 2y + z  ->  min -(x + 2y + z) + 10, with y integer
        let mut m = LinearModel::new("small");
        let x = m.add_var("x", 0.0, f64::INFINITY, -1.0);
        let y = m.add_var("y", 0.0, 2.5, -2.0);
        m.columns[y].integer = true;
        let z = m.add_var("z", f64::NEG_INFINITY, 4.0, -1.0);
        m.add_row("c1", vec![(x, 3.0), (y, 1.0)], f64::NEG_INFINITY, 6.0);
        m.add_row("c2", vec![(y, 1.0), (z, 2.0)], 1.0, 7.0);
        m.add_row("c3", vec![(z, 1.0), (x, -1.0)], -5.0, f64::INFINITY);
        m.offset = 10.0;
        m
    }

    #[test]
    fn highs_solves_small_mip() {
        let m = knapsack();
        let s = solve(&m, &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.x[1] - 2.0).abs() < 1e-9);
        assert!(m.max_violation(&s.x) < 1e-9);
        // y = 2, x = 4/3, z = 2.5: objective 10 - (4/3 + 4 + 2.5)
        assert!((s.objective - (10.0 - (4.0 / 3.0 + 4.0 + 2.5))).abs() < 1e-9);
    }

    #[test]
    fn infeasible_is_reported() {
        let mut m = LinearModel::new("bad");
        let x = m.add_var("x", 0.0, 1.0, 1.0);
        m.add_row("r", vec![(x, 1.0)], 2.0, 3.0);
        assert!(matches!(
            solve(&m, &SolveOptions::default()),
            Err(OptError::Infeasible(_))
        ));
    }

    #[test]
    fn mps_has_sections_and_markers() {
        let text = knapsack().to_mps();
        for s in ["NAME small", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA", "'INTORG'", "'INTEND'"] {
            assert!(text.contains(s), "missing {s}");
        }
        assert!(text.contains(" MI bnd z"));
        assert!(text.contains("    rhs obj -10.0"));
        let json: serde_json::Value = serde_json::from_str(&knapsack().name_map_json()).unwrap();
        assert_eq!(json["columns"][1]["name"], "y");
        assert_eq!(json["columns"][1]["integer"], true);
    }

    #[test]
    fn parse_highs_solution_text() {
        let m = knapsack();
        let text = "Model status\nOptimal\n\n# Primal solution values\nFeasible\nObjective 2.1\n# Columns 3\nx 1.3333333333333333\ny 2\nz 2.5\n# Rows 3\n";
        let s = parse_solution_file(&m, text).unwrap();
        assert_eq!(s.x, vec![4.0 / 3.0, 2.0, 2.5]);
        assert!(parse_solution_file(&m, "Model status\nInfeasible\n").is_err());
    }
}
