//! Reader and writer for the matrix-style (MATPOWER) case text format.
//!
//! Only the pieces a balanced distribution study needs are read: `baseMVA`,
//! the bus table (id, type, Pd, Qd, baseKV) and the branch table
//! (from, to, r, x, b, rateA, status). Two unit-conversion statements that the
//! distribution cases commonly carry at the bottom of the file are recognized
//! and applied: impedances given in ohms and loads given in kW.

use std::fmt::Write as _;

use super::{Bus, Line, Network, NetworkError, DEFAULT_BASE_MVA};

const BUS_ID: usize = 0;
const BUS_TYPE: usize = 1;
const BUS_PD: usize = 2;
const BUS_QD: usize = 3;
const BUS_BASE_KV: usize = 9;
const BUS_SLACK_TYPE: f64 = 3.0;

const BR_FROM: usize = 0;
const BR_TO: usize = 1;
const BR_R: usize = 2;
const BR_X: usize = 3;
const BR_B: usize = 4;
const BR_RATE_A: usize = 5;
const BR_STATUS: usize = 10;

const OHM_DIRECTIVE: &str = "mpc.branch(:,[BR_RBR_X])=mpc.branch(:,[BR_RBR_X])/(Vbase^2/Sbase);";
const KW_DIRECTIVE: &str = "mpc.bus(:,[PD,QD])=mpc.bus(:,[PD,QD])/1e3;";

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOptions {
    /// Active/reactive flow bound (p.u.) given to lines whose rating is zero,
    /// which the case format uses for "unlimited".
    pub default_flow_bound: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            default_flow_bound: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Token {
    value: f64,
    line: usize,
    column: usize,
}

#[derive(Debug)]
struct Table {
    rows: Vec<Vec<Token>>,
    /// Line where the table starts; used for errors about the table as a whole.
    line: usize,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> NetworkError {
    NetworkError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Splits `text` (starting at byte offset `offset` of source line `line_no`)
/// into numeric tokens, pushing completed rows at every `;`.
fn tokenize_row_text(
    text: &str,
    offset: usize,
    line_no: usize,
    current: &mut Vec<Token>,
    rows: &mut Vec<Vec<Token>>,
) -> Result<(), NetworkError> {
    let mut start: Option<usize> = None;
    let bytes = text.as_bytes();
    let flush = |start: &mut Option<usize>, end: usize, current: &mut Vec<Token>| {
        if let Some(s) = start.take() {
            let raw = &text[s..end];
            let value: f64 = raw.parse().map_err(|_| {
                parse_error(line_no, offset + s + 1, format!("non-numeric field `{raw}`"))
            })?;
            current.push(Token {
                value,
                line: line_no,
                column: offset + s + 1,
            });
        }
        Ok::<(), NetworkError>(())
    };
    for (i, &c) in bytes.iter().enumerate() {
        match c {
            b' ' | b'\t' | b',' | b'\r' => flush(&mut start, i, current)?,
            b';' => {
                flush(&mut start, i, current)?;
                if !current.is_empty() {
                    rows.push(std::mem::take(current));
                }
            }
            _ => {
                if start.is_none() {
                    start = Some(i);
                }
            }
        }
    }
    flush(&mut start, bytes.len(), current)?;
    // A newline also terminates a row.
    if !current.is_empty() {
        rows.push(std::mem::take(current));
    }
    Ok(())
}

struct RawCase {
    base_mva: Option<f64>,
    bus: Option<Table>,
    branch: Option<Table>,
    ohms: bool,
    kilowatts: bool,
    last_line: usize,
}

fn scan(text: &str) -> Result<RawCase, NetworkError> {
    let mut raw = RawCase {
        base_mva: None,
        bus: None,
        branch: None,
        ohms: false,
        kilowatts: false,
        last_line: 0,
    };
    let mut open: Option<(String, Table)> = None;
    let mut current = Vec::new();

    for (i, full_line) in text.lines().enumerate() {
        let line_no = i + 1;
        raw.last_line = line_no;
        let line = strip_comment(full_line);

        if let Some((name, mut table)) = open.take() {
            if let Some(end) = line.find(']') {
                tokenize_row_text(&line[..end], 0, line_no, &mut current, &mut table.rows)?;
                match name.as_str() {
                    "bus" => raw.bus = Some(table),
                    "branch" => raw.branch = Some(table),
                    _ => {}
                }
            } else {
                tokenize_row_text(line, 0, line_no, &mut current, &mut table.rows)?;
                open = Some((name, table));
            }
            continue;
        }

        let compact: String = line.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            continue;
        }
        if compact == OHM_DIRECTIVE {
            raw.ohms = true;
            continue;
        }
        if compact == KW_DIRECTIVE {
            raw.kilowatts = true;
            continue;
        }
        let Some(rest) = compact.strip_prefix("mpc.") else {
            continue;
        };
        let Some((name, rhs)) = rest.split_once('=') else {
            continue;
        };
        if name == "baseMVA" {
            let value = rhs.trim_end_matches(';');
            let column = full_line.find('=').map_or(1, |c| c + 2);
            raw.base_mva = Some(value.parse().map_err(|_| {
                parse_error(line_no, column, format!("non-numeric baseMVA `{value}`"))
            })?);
        } else if rhs.starts_with('[') && !name.contains('(') {
            let bracket = line.find('[').expect("compact form contains `[`");
            let mut table = Table {
                rows: Vec::new(),
                line: line_no,
            };
            let body = &line[bracket + 1..];
            if let Some(end) = body.find(']') {
                tokenize_row_text(&body[..end], bracket + 1, line_no, &mut current, &mut table.rows)?;
                match name {
                    "bus" => raw.bus = Some(table),
                    "branch" => raw.branch = Some(table),
                    _ => {}
                }
            } else {
                tokenize_row_text(body, bracket + 1, line_no, &mut current, &mut table.rows)?;
                open = Some((name.to_string(), table));
            }
        }
    }
    if let Some((name, table)) = open {
        return Err(parse_error(
            table.line,
            1,
            format!("table `mpc.{name}` is never closed"),
        ));
    }
    Ok(raw)
}

fn field(row: &[Token], col: usize, what: &str) -> Result<f64, NetworkError> {
    row.get(col).map(|t| t.value).ok_or_else(|| {
        let last = row.last().expect("rows are never empty");
        parse_error(
            last.line,
            last.column,
            format!("row has {} columns, missing {what} (column {})", row.len(), col + 1),
        )
    })
}

/// Parses a case file using [`ParseOptions::default`].
pub fn parse_matpower_case(text: &str) -> Result<Network, NetworkError> {
    parse_matpower_case_with(text, &ParseOptions::default())
}

pub fn parse_matpower_case_with(text: &str, opts: &ParseOptions) -> Result<Network, NetworkError> {
    let raw = scan(text)?;
    let eof = raw.last_line + 1;
    let base_mva = raw
        .base_mva
        .ok_or_else(|| parse_error(eof, 1, "missing `mpc.baseMVA` entry"))?;
    if !(base_mva > 0.0) {
        return Err(parse_error(eof, 1, "baseMVA must be positive"));
    }
    let bus_table = raw
        .bus
        .ok_or_else(|| parse_error(eof, 1, "missing `mpc.bus` table"))?;
    let branch_table = raw
        .branch
        .ok_or_else(|| parse_error(eof, 1, "missing `mpc.branch` table"))?;
    if bus_table.rows.is_empty() {
        return Err(parse_error(bus_table.line, 1, "bus table is empty"));
    }

    let load_scale = if raw.kilowatts { 1e-3 } else { 1.0 } / base_mva;
    let base_kv = bus_table.rows[0]
        .get(BUS_BASE_KV)
        .map_or(0.0, |t| t.value);

    let mut buses = Vec::with_capacity(bus_table.rows.len());
    let mut slack_buses = Vec::new();
    for row in &bus_table.rows {
        let id_tok = row[BUS_ID];
        if id_tok.value < 0.0 || id_tok.value.fract() != 0.0 {
            return Err(parse_error(id_tok.line, id_tok.column, "bus id must be a non-negative integer"));
        }
        let id = id_tok.value as usize;
        if buses.iter().any(|b: &Bus| b.id == id) {
            return Err(parse_error(id_tok.line, id_tok.column, format!("duplicate bus id {id}")));
        }
        if field(row, BUS_TYPE, "bus type")? == BUS_SLACK_TYPE {
            slack_buses.push(buses.len());
        }
        buses.push(Bus {
            id,
            load_p: field(row, BUS_PD, "Pd")? * load_scale,
            load_q: field(row, BUS_QD, "Qd")? * load_scale,
        });
    }
    if slack_buses.is_empty() {
        return Err(parse_error(bus_table.line, 1, "no slack (type 3) bus"));
    }

    let z_scale = if raw.ohms {
        if !(base_kv > 0.0) {
            return Err(parse_error(bus_table.line, 1, "ohmic impedances need a positive baseKV"));
        }
        base_mva / (base_kv * base_kv)
    } else {
        1.0
    };

    let index_of = |tok: Token| -> Result<usize, NetworkError> {
        buses
            .iter()
            .position(|b| b.id as f64 == tok.value)
            .ok_or_else(|| parse_error(tok.line, tok.column, format!("branch references unknown bus {}", tok.value)))
    };

    let mut lines = Vec::with_capacity(branch_table.rows.len());
    for row in &branch_table.rows {
        field(row, BR_TO, "to bus")?;
        let from = index_of(row[BR_FROM])?;
        let to = index_of(row[BR_TO])?;
        let r = field(row, BR_R, "r")? * z_scale;
        let x = field(row, BR_X, "x")? * z_scale;
        if r == 0.0 && x == 0.0 {
            let tok = row[BR_R];
            return Err(parse_error(tok.line, tok.column, "branch has zero impedance"));
        }
        let rate = row.get(BR_RATE_A).map_or(0.0, |t| t.value) / base_mva;
        let (i_max, flow) = if rate > 0.0 {
            (rate, rate)
        } else {
            (f64::INFINITY, opts.default_flow_bound)
        };
        lines.push(Line {
            from,
            to,
            r,
            x,
            b: field(row, BR_B, "b")?,
            switchable: false,
            in_service: row.get(BR_STATUS).map_or(true, |t| t.value != 0.0),
            i_max,
            p_max: flow,
            q_max: flow,
        });
    }

    let net = Network {
        name: "case".into(),
        base_mva,
        base_kv,
        buses,
        lines,
        pv_plants: Vec::new(),
        slack_buses,
    };
    net.check()?;
    Ok(net)
}

/// Serializes the bus and branch data of `net` in per-unit impedances and MW
/// loads. PV plants and switchability are not part of the case format.
pub fn write_matpower_case(net: &Network) -> String {
    let base = if net.base_mva > 0.0 { net.base_mva } else { DEFAULT_BASE_MVA };
    let mut out = String::new();
    let fname = net.name.replace(|c: char| !c.is_ascii_alphanumeric() && c != '_', "_");
    let _ = writeln!(out, "function mpc = {fname}");
    let _ = writeln!(out, "mpc.version = '2';");
    let _ = writeln!(out, "mpc.baseMVA = {base};");
    let _ = writeln!(out);
    let _ = writeln!(out, "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin");
    let _ = writeln!(out, "mpc.bus = [");
    for (i, bus) in net.buses.iter().enumerate() {
        let kind = if net.is_slack(i) { 3 } else { 1 };
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t0\t0\t1\t1\t0\t{}\t1\t1.1\t0.9;",
            bus.id,
            kind,
            bus.load_p * base,
            bus.load_q * base,
            net.base_kv
        );
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out);
    let _ = writeln!(out, "mpc.gen = [");
    for &s in &net.slack_buses {
        let _ = writeln!(out, "\t{}\t0\t0\t10\t-10\t1\t100\t1\t10\t0;", net.buses[s].id);
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out);
    let _ = writeln!(out, "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax");
    let _ = writeln!(out, "mpc.branch = [");
    for line in &net.lines {
        let rate = if line.i_max.is_finite() { line.i_max * base } else { 0.0 };
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t0\t0\t0\t0\t{}\t-360\t360;",
            net.buses[line.from].id,
            net.buses[line.to].id,
            line.r,
            line.x,
            line.b,
            rate,
            u8::from(line.in_service)
        );
    }
    let _ = writeln!(out, "];");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TINY: &str = "\
function mpc = tiny
mpc.baseMVA = 10;
mpc.bus = [
\t1\t3\t0\t0\t0\t0\t1\t1\t0\t12.66\t1\t1\t1;
\t2\t1\t1.0\t0.5\t0\t0\t1\t1\t0\t12.66\t1\t1.1\t0.9;
\t3\t1\t2.0\t1.0\t0\t0\t1\t1\t0\t12.66\t1\t1.1\t0.9;
];
mpc.branch = [
\t1\t2\t0.01\t0.02\t0\t0\t0\t0\t0\t0\t1\t-360\t360;
\t2\t3\t0.01\t0.02\t0\t5\t0\t0\t0\t0\t0\t-360\t360;
];
";

    #[test]
    fn tiny_case() {
        let net = parse_matpower_case(TINY).unwrap();
        assert_eq!(net.bus_count(), 3);
        assert_eq!(net.line_count(), 2);
        assert_eq!(net.slack_buses, vec![0]);
        assert_eq!(net.buses[1].load_p, 0.1);
        assert_eq!(net.lines[0].i_max, f64::INFINITY);
        assert_eq!(net.lines[1].i_max, 0.5);
        assert!(!net.lines[1].in_service);
    }

    #[test]
    fn case33bw_counts_and_units() {
        let net = parse_matpower_case(include_str!("../../../../data/case33bw.m")).unwrap();
        assert_eq!(net.bus_count(), 33);
        assert_eq!(net.line_count(), 37);
        assert_eq!(net.slack_buses.len(), 1);
        assert_eq!(net.lines.iter().filter(|l| l.in_service).count(), 32);
        // 100 kW on a 10 MVA base
        assert!((net.buses[1].load_p - 0.01).abs() < 1e-15);
        // 0.0922 ohm on Zbase = 12.66^2 / 10
        let zb = 12.66 * 12.66 / 10.0;
        assert!((net.lines[0].r - 0.0922 / zb).abs() < 1e-15);
        let total: f64 = net.buses.iter().map(|b| b.load_p).sum();
        assert!((total - 0.3715).abs() < 1e-12);
    }

    #[test]
    fn missing_base_mva() {
        let text = TINY.replace("mpc.baseMVA = 10;", "");
        match parse_matpower_case(&text) {
            Err(NetworkError::Parse { message, .. }) => assert!(message.contains("baseMVA")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_reports_position() {
        let text = TINY.replace("0.01\t0.02\t0\t5", "0.01\tabc\t0\t5");
        match parse_matpower_case(&text) {
            Err(NetworkError::Parse { line, column, .. }) => {
                assert_eq!(line, 10);
                assert_eq!(column, 11);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn dangling_bus_reference() {
        let text = TINY.replace("\t2\t3\t0.01", "\t2\t7\t0.01");
        match parse_matpower_case(&text) {
            Err(NetworkError::Parse { line, message, .. }) => {
                assert_eq!(line, 10);
                assert!(message.contains("unknown bus"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_branch_table() {
        let end = TINY.find("mpc.branch").unwrap();
        assert!(matches!(
            parse_matpower_case(&TINY[..end]),
            Err(NetworkError::Parse { .. })
        ));
    }

    fn close(a: f64, b: f64) -> bool {
        a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
    }

    fn assert_same(a: &Network, b: &Network) {
        assert_eq!(a.base_mva, b.base_mva);
        assert_eq!(a.slack_buses, b.slack_buses);
        assert_eq!(a.buses.len(), b.buses.len());
        for (x, y) in a.buses.iter().zip(&b.buses) {
            assert_eq!(x.id, y.id);
            assert!(close(x.load_p, y.load_p) && close(x.load_q, y.load_q));
        }
        assert_eq!(a.lines.len(), b.lines.len());
        for (x, y) in a.lines.iter().zip(&b.lines) {
            assert_eq!((x.from, x.to, x.in_service), (y.from, y.to, y.in_service));
            assert!(close(x.r, y.r) && close(x.x, y.x) && close(x.b, y.b));
            assert!(close(x.i_max, y.i_max) && close(x.p_max, y.p_max));
        }
    }

    #[test]
    fn case33_round_trip() {
        let net = parse_matpower_case(include_str!("../../../../data/case33bw.m")).unwrap();
        let again = parse_matpower_case(&write_matpower_case(&net)).unwrap();
        assert_same(&net, &again);
    }

    proptest! {
        #[test]
        fn random_chain_round_trip(
            loads in proptest::collection::vec((0.0f64..5.0, -2.0f64..2.0), 2..12),
            imp in proptest::collection::vec((0.001f64..2.0, -1.0f64..1.0, 0.0f64..0.01, 0.0f64..20.0), 12),
        ) {
            let n = loads.len();
            let mut text = String::from("mpc.baseMVA = 10;\nmpc.bus = [\n");
            for (i, (p, q)) in loads.iter().enumerate() {
                let kind = if i == 0 { 3 } else { 1 };
                text += &format!("{} {} {} {} 0 0 1 1 0 12.66 1 1.1 0.9;\n", i + 1, kind, p, q);
            }
            text += "];\nmpc.branch = [\n";
            for i in 1..n {
                let (r, x, b, rate) = imp[i];
                text += &format!("{} {} {} {} {} {} 0 0 0 0 1 -360 360;\n", i, i + 1, r, x, b, rate);
            }
            text += "];\n";
            let net = parse_matpower_case(&text).unwrap();
            let again = parse_matpower_case(&write_matpower_case(&net)).unwrap();
            assert_same(&net, &again);
        }
    }
}
