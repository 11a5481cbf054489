//! Subcommands of the `prosumer` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use prosumer_core::simulation::{run_day, run_sweep, SimulationResult, SweepParam, SweepValue};
use prosumer_core::synthetic::{residential_day, ResidentialProfile};

use crate::report::{write_run, Report, SweepReport};
use crate::scenario_file::{parse_policy, LoadedScenario, ScenarioFile};
use crate::series_file::SeriesFile;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "prosumer", version, about = "Prosumer arbitrage under voltage-dependent inverter rules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one day and write a report, per-node traces and the schedule.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// none | prc | anrc | hybrid; overrides the scenario file.
        #[arg(long)]
        policy: Option<String>,
        /// Active household node; overrides the scenario file.
        #[arg(long)]
        node: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeat the simulation over values of one parameter.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// kappa | inverter_kva | flex_pct | node | policy
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        node: Option<usize>,
    },
    /// Write synthetic daily series files.
    GenSynthetic {
        #[arg(long, default_value_t = 1)]
        days: u32,
        #[arg(long, value_enum, default_value_t = Profile::Residential)]
        profile: Profile,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    Residential,
}

/// Run a parsed command and return the text for stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate { scenario, policy, node, out, seed } => simulate(&scenario, policy.as_deref(), node, seed, &out),
        Command::Sweep { scenario, param, values, out, policy, node } => {
            sweep(&scenario, &param, &values, policy.as_deref(), node, &out)
        }
        Command::GenSynthetic { days, profile, out, seed } => gen_synthetic(days, profile, seed, &out),
    }
}

fn load_with_overrides(
    path: &Path,
    policy: Option<&str>,
    node: Option<usize>,
    seed: Option<u64>,
) -> Result<LoadedScenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read scenario {}: {e}", path.display())))?;
    let mut file = ScenarioFile::parse(&text)?;
    if let Some(p) = policy {
        file.policy = parse_policy(p)?.to_string();
    }
    if let Some(n) = node {
        file.active_node = n;
    }
    if let Some(s) = seed {
        file.seed = s;
    }
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    file.with_series_from(&base_dir)
}

fn active_b0(loaded: &LoadedScenario, node: usize) -> f64 {
    let scn_node = loaded.file.prosumers.iter().find(|p| p.node == node);
    scn_node.map_or(0.0, |p| p.battery.initial_kwh.unwrap_or(p.battery.capacity_kwh / 2.0))
}

fn summary_line(res: &SimulationResult<f64>) -> String {
    let m = &res.metrics;
    let mut s = format!(
        "policy={} node={} cost_wic={:.4} cost_inv={:.4}",
        res.policy, res.active_node, m.cost_wic, m.cost_inv
    );
    if let Some(p) = m.lcg_pct {
        let _ = write!(s, " lcg_pct={p:.4}");
    }
    let _ = write!(s, " tce={:.4} cvc={:.4} vci={:?}", m.tce, m.cvc, m.vci);
    s
}

pub fn simulate(
    scenario: &Path,
    policy: Option<&str>,
    node: Option<usize>,
    seed: Option<u64>,
    out: &Path,
) -> Result<String, CliError> {
    let loaded = load_with_overrides(scenario, policy, node, seed)?;
    let scn = loaded.to_scenario()?;
    let res = run_day(&scn)?;
    let report = Report::new(loaded.file.clone(), loaded.hash()?, &res, None);
    write_run(out, &report, &res, active_b0(&loaded, res.active_node))?;
    Ok(summary_line(&res))
}

pub const SWEEP_SUMMARY_HEADER: &str = "value,cost,lcg_pct,tce,cvc";

pub fn sweep(
    scenario: &Path,
    param: &str,
    values: &[String],
    policy: Option<&str>,
    node: Option<usize>,
    out: &Path,
) -> Result<String, CliError> {
    let param: SweepParam = param.parse().map_err(CliError::Validation)?;
    if values.is_empty() {
        return Err(CliError::Validation("no sweep values given".into()));
    }
    let values = values
        .iter()
        .map(|v| SweepValue::<f64>::parse(param, v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Validation)?;
    let loaded = load_with_overrides(scenario, policy, node, None)?;
    let base = loaded.to_scenario()?;
    let hash = loaded.hash()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;

    let mut csv = String::from(SWEEP_SUMMARY_HEADER);
    csv.push('\n');
    let mut first_err = None;
    let mut ok = 0usize;
    for point in run_sweep(&base, param, &values) {
        let label = point.value.to_string();
        match point.result {
            Ok(res) => {
                let mut file = loaded.file.clone();
                file.policy = res.policy.to_string();
                file.active_node = res.active_node;
                let tag = SweepReport { param: param_name(param).into(), value: label.clone() };
                let report = Report::new(file, hash.clone(), &res, Some(tag));
                let dir = out.join(format!("{}_{label}", param_name(param)));
                write_run(&dir, &report, &res, active_b0(&loaded, res.active_node))?;
                let m = &res.metrics;
                let lcg = m.lcg_pct.map(|v| v.to_string()).unwrap_or_default();
                let _ = writeln!(csv, "{label},{},{lcg},{},{}", m.cost_inv, m.tce, m.cvc);
                ok += 1;
            }
            Err(e) => {
                let e = CliError::from(e);
                eprintln!("{}={label}: {e}", param_name(param));
                let _ = writeln!(csv, "{label},,,,");
                first_err.get_or_insert(e);
            }
        }
    }
    let path = out.join("summary.csv");
    std::fs::write(&path, csv).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    match first_err {
        Some(e) if ok == 0 => Err(e),
        _ => Ok(format!(
            "sweep param={} points={} ok={ok} failed={} out={}",
            param_name(param),
            values.len(),
            values.len() - ok,
            out.display()
        )),
    }
}

fn param_name(p: SweepParam) -> &'static str {
    match p {
        SweepParam::Kappa => "kappa",
        SweepParam::InverterKva => "inverter_kva",
        SweepParam::FlexPct => "flex_pct",
        SweepParam::Node => "node",
        SweepParam::Policy => "policy",
    }
}

fn profile_stem(profile: Profile) -> &'static str {
    match profile {
        Profile::Residential => "residential",
    }
}

/// File name of generated day `day` out of `days`.
pub fn synthetic_file_name(profile: Profile, days: u32, day: u32) -> String {
    let stem = profile_stem(profile);
    if days > 1 {
        format!("{stem}_day{day}.csv")
    } else {
        format!("{stem}.csv")
    }
}

pub fn gen_synthetic(days: u32, profile: Profile, seed: u64, out: &Path) -> Result<String, CliError> {
    if days == 0 {
        return Err(CliError::Validation("--days must be at least 1".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let prof = match profile {
        Profile::Residential => ResidentialProfile::default(),
    };
    for day in 0..days {
        let series = SeriesFile::from(&residential_day(&prof, seed, u64::from(day)));
        series.validate().map_err(CliError::Numerical)?;
        let path = out.join(synthetic_file_name(profile, days, day));
        series.save(&path)?;
    }
    Ok(format!("wrote {days} day(s) of {} series to {}", profile_stem(profile), out.display()))
}
