use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pvfair::fairness::WeightPolicy;
use pvfair::netmodel::{validate_radiality, Topology};
use pvfair::sim::{
    load_inputs, read_summary, run_with_inputs, write_report, ControlMode, FixedTopology, PlantMode, SimulationConfig,
    SimulationSummary,
};

#[derive(Parser)]
#[command(name = "pvfair", version, about = "Fair PV curtailment through daily reconfiguration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-day simulation and write its report directory.
    Run(RunArgs),
    /// Tabulate final JFI and curtailment of finished runs.
    Compare(CompareArgs),
    /// Parse a config and check the network and topology without solving.
    Validate(ConfigArg),
}

#[derive(Args)]
struct ConfigArg {
    /// Simulation config (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Report directory.
    #[arg(long, default_value = "report")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// uniform | inverse | shrinking | rolling | logarithmic | difference
    #[arg(long)]
    policy: Option<WeightPolicy>,
    /// Hold one topology: `base` or comma-separated open lines (1-based rows).
    #[arg(long)]
    fixed_topology: Option<String>,
    /// Comparison scheme with a max-curtailment term instead of reconfiguration.
    #[arg(long, conflicts_with = "fixed_topology")]
    extra_objective: bool,
    #[arg(long)]
    days: Option<usize>,
    /// ac | linear
    #[arg(long)]
    plant_mode: Option<PlantMode>,
}

#[derive(Args)]
struct CompareArgs {
    /// Report directories written by `run`.
    #[arg(required = true, num_args = 2..)]
    reports: Vec<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Errors that should exit with status 2 (bad invocation rather than a
/// failed run).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn load_config(path: &Path) -> Result<SimulationConfig> {
    if !path.is_file() {
        return Err(Usage(format!("config file not found: {}", path.display())).into());
    }
    SimulationConfig::from_file(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.config.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(p) = args.policy {
        cfg.policy = p;
    }
    if let Some(d) = args.days {
        cfg.days = d;
    }
    if let Some(m) = args.plant_mode {
        cfg.plant_mode = m;
    }
    if let Some(t) = &args.fixed_topology {
        cfg.mode = ControlMode::Fixed;
        cfg.fixed_topology = Some(FixedTopology::parse(t)?);
    }
    if args.extra_objective {
        cfg.mode = ControlMode::ExtraObjective;
    }
    cfg.check()?;

    let inputs = load_inputs(&cfg)?;
    log::info!("{}: {} days, {}", inputs.net.name, cfg.days, cfg.label());
    let report = run_with_inputs(&cfg, &inputs)?;
    write_report(&report, &args.out)?;
    let s = &report.summary;
    println!("{}", s.label);
    println!("final JFI          {:.4}", s.final_jfi);
    println!("total curtailment  {:.4}", s.total_curtailment);
    println!("report             {}", args.out.display());
    Ok(())
}

fn cmd_validate(args: ConfigArg) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let inputs = load_inputs(&cfg)?;
    let net = &inputs.net;
    let base = Topology::base(net);
    validate_radiality(net, &base).map_err(|v| anyhow::anyhow!("base topology is not radial: {v}"))?;
    if let Some(t) = &cfg.fixed_topology {
        t.resolve(net)?;
    }
    println!(
        "{}: {} buses, {} lines ({} switchable), {} PV plants, {} scenario days",
        net.name,
        net.bus_count(),
        net.line_count(),
        net.switchable_lines().len(),
        net.pv_plants.len(),
        inputs.days.len()
    );
    println!("ok");
    Ok(())
}

/// (case, JFI, PV curtailed) with two decimals.
fn compare_rows(summaries: &[(PathBuf, SimulationSummary)]) -> Vec<[String; 3]> {
    summaries
        .iter()
        .map(|(_, s)| {
            [
                s.label.clone(),
                format!("{:.2}", s.final_jfi),
                format!("{:.2}", s.total_curtailment),
            ]
        })
        .collect()
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let mut summaries = Vec::new();
    for dir in &args.reports {
        if !dir.is_dir() {
            bail!("report directory not found: {}", dir.display());
        }
        summaries.push((dir.clone(), read_summary(dir)?));
    }
    let rows = compare_rows(&summaries);
    let width = rows.iter().map(|r| r[0].len()).max().unwrap_or(4).max(4);
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<width$}  {:>5}  {:>12}", "case", "JFI", "PV curtailed")?;
    for (r, (_, s)) in rows.iter().zip(&summaries) {
        let mark = if s.mode == ControlMode::Reconfigure { "  <- reconfiguration" } else { "" };
        writeln!(out, "{:<width$}  {:>5}  {:>12}{mark}", r[0], r[1], r[2])?;
    }
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["case", "jfi", "pv_curtailed", "reconfiguration", "report"])?;
        for (r, (dir, s)) in rows.iter().zip(&summaries) {
            let reconf = (s.mode == ControlMode::Reconfigure).to_string();
            w.write_record([
                r[0].as_str(),
                &s.final_jfi.to_string(),
                &s.total_curtailment.to_string(),
                &reconf,
                &dir.display().to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    // HiGHS reports tiny but harmless row bounds (loss tangents) as warnings
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,highs=error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
