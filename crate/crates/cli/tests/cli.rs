use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use pvfair::sim::{read_summary, ControlMode};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn pvfair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvfair"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// One-day run of the deterministic case into `dir`.
fn run_one_day(dir: &Path, extra: &[&str]) {
    let config = data("deterministic.toml");
    let mut args = vec![
        "run",
        "--config",
        config.to_str().unwrap(),
        "--days",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = pvfair(&args);
    assert!(o.status.success(), "run failed: {}", stderr(&o));
}

/// Four finished reports: reconfiguration plus three held topologies.
fn reports() -> &'static (tempfile::TempDir, Vec<PathBuf>) {
    static REPORTS: OnceLock<(tempfile::TempDir, Vec<PathBuf>)> = OnceLock::new();
    REPORTS.get_or_init(|| {
        let root = tempfile::tempdir().unwrap();
        let cases: [(&str, &[&str]); 4] = [
            ("base", &["--fixed-topology", "base"]),
            ("reconf", &[]),
            ("a", &["--fixed-topology", "9,14,33,36,37"]),
            ("b", &["--fixed-topology", "9,14,25,33,36"]),
        ];
        let dirs = cases
            .iter()
            .map(|(name, extra)| {
                let dir = root.path().join(name);
                run_one_day(&dir, extra);
                dir
            })
            .collect();
        (root, dirs)
    })
}

#[test]
fn missing_config_exits_2_and_names_it() {
    let o = pvfair(&["run", "--config", "/no/such/sim.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/sim.toml"), "{}", stderr(&o));
}

#[test]
fn validate_reports_the_network() {
    let o = pvfair(&["validate", "--config", data("deterministic.toml").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("33 buses"), "{out}");
    assert!(out.contains("13 switchable"), "{out}");
    assert!(out.trim_end().ends_with("ok"));
}

#[test]
fn non_radial_fixed_topology_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = data("deterministic.toml");
    // opening the substation line islands the whole feeder
    let o = pvfair(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--days",
        "1",
        "--fixed-topology",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn fixed_base_report_is_tagged() {
    let (_, dirs) = reports();
    let s = read_summary(&dirs[0]).unwrap();
    assert_eq!(s.mode, ControlMode::Fixed);
    assert_eq!(s.label, "fixed topology (base)");
    assert_eq!(s.days, 1);
    assert_eq!(s.topologies_visited, vec![vec![33, 34, 35, 36, 37]]);
    for f in ["per_day.csv", "per_plant.csv", "switch_status.csv", "rt_trace.csv"] {
        assert!(dirs[0].join(f).is_file(), "{f} missing");
    }
    let switches = std::fs::read_to_string(dirs[0].join("switch_status.csv")).unwrap();
    assert_eq!(switches.lines().count(), 2);
}

#[test]
fn compare_flags_reconfiguration() {
    let (root, dirs) = reports();
    let csv_path = root.path().join("table.csv");
    let mut args = vec!["compare".to_string()];
    args.extend(dirs.iter().map(|d| d.display().to_string()));
    args.extend(["--csv".to_string(), csv_path.display().to_string()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = pvfair(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 5, "{out}");
    let flagged: Vec<&&str> = lines.iter().filter(|l| l.contains("<- reconfiguration")).collect();
    assert_eq!(flagged.len(), 1);
    assert!(flagged[0].starts_with("reconfiguration"));

    let mut r = csv::Reader::from_path(&csv_path).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|row| &row[3] == "true").count(), 1);
    for (row, dir) in rows.iter().zip(dirs) {
        let s = read_summary(dir).unwrap();
        assert_eq!(row[1].parse::<f64>().unwrap(), s.final_jfi);
        assert_eq!(row[2].parse::<f64>().unwrap(), s.total_curtailment);
    }
}

#[test]
fn identical_reports_give_identical_rows() {
    let (_, dirs) = reports();
    let o = pvfair(&["compare", dirs[0].to_str().unwrap(), dirs[0].to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], rows[1]);
}

#[test]
fn compare_needs_two_reports() {
    let o = pvfair(&["compare", "somewhere"]);
    assert_eq!(o.status.code(), Some(2));
    let o = pvfair(&["compare", "/no/such/a", "/no/such/b"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/a"));
}
