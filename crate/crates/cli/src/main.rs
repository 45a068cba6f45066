use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ewsim_core::metrics::compare_runs;
use ewsim_core::reserves::MileageMode;
use ewsim_core::scenario::{ForecastConfig, Mode};
use ewsim_core::sim::{
    load_series, load_summary, render_summary, run_pair, simulate, write_report, SimConfig, SimError,
};
use ewsim_core::{canonical_fixture, load_scenario, write_scenario, Scenario};

/// Multi-timescale grid operations simulator with water and CO₂ accounting.
#[derive(Parser, Debug)]
#[command(name = "ewsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct RunOpts {
    /// Forecast seed (defaults to the scenario's own)
    #[arg(long)]
    seed: Option<u64>,
    /// Simulate only the first D days
    #[arg(long)]
    days: Option<u32>,
    /// Replace every forecast with the actual profile
    #[arg(long)]
    exact_forecasts: bool,
    #[arg(long, value_enum, default_value_t = MileageArg::Energy)]
    mileage: MileageArg,
    /// Also write the LP text of every day-ahead program under lp/
    #[arg(long)]
    dump_lp: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and check a scenario directory
    Validate { dir: PathBuf },
    /// Simulate one operating mode
    Run {
        dir: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Simulate both modes and write the delta report
    RunPair {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Delta report of two finished runs (either order)
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Where to write delta_report.csv/.txt
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the summary of a finished run
    Report { run: PathBuf },
    /// Write the bundled three-zone scenario
    GenFixture { dir: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Conventional,
    Flexible,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Conventional => Mode::Conventional,
            ModeArg::Flexible => Mode::Flexible,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MileageArg {
    Energy,
    Movement,
}

enum Failure {
    Validation(String),
    Infeasible(String),
    Other(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else if e.is_infeasibility() {
            Failure::Infeasible(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

fn load(dir: &Path) -> Result<Scenario, Failure> {
    let s = load_scenario(dir).map_err(|e| Failure::Validation(e.to_string()))?;
    s.validate().map_err(|errs| Failure::Validation(errs.join("\n")))?;
    Ok(s)
}

fn config(opts: &RunOpts) -> SimConfig {
    SimConfig {
        seed: opts.seed,
        days: opts.days,
        mileage: match opts.mileage {
            MileageArg::Energy => MileageMode::Energy,
            MileageArg::Movement => MileageMode::Movement,
        },
        dump_lp: opts.dump_lp,
        ..SimConfig::default()
    }
}

fn scenario_for(dir: &Path, opts: &RunOpts) -> Result<Scenario, Failure> {
    let mut s = load(dir)?;
    if opts.exact_forecasts {
        s.forecast = ForecastConfig::exact();
    }
    Ok(s)
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Validate { dir } => {
            let s = load(&dir)?;
            println!(
                "{}: ok ({} zones, {} pipes, {} generators, {} storage, {} water loads, {} days)",
                s.name,
                s.zones.len(),
                s.pipes.len(),
                s.generators.len(),
                s.storage_units.len(),
                s.water_loads.len(),
                s.days()
            );
        }
        Command::Run { dir, mode, out, opts } => {
            let s = scenario_for(&dir, &opts)?;
            let run = simulate(&s, mode.into(), &config(&opts))?;
            let art = run.write(&out)?;
            println!("{} written to {} in {:.1} s", art.run_id, out.display(), art.wall_clock_seconds);
        }
        Command::RunPair { dir, out, opts } => {
            let s = scenario_for(&dir, &opts)?;
            let pair = run_pair(&s, &config(&opts))?;
            pair.write(&out)?;
            print!("{}", pair.report.render());
        }
        Command::Compare { run_a, run_b, out } => {
            let (a, b) = (load_summary(&run_a)?, load_summary(&run_b)?);
            let (flex, conv) = if a.mode == Mode::Conventional && b.mode == Mode::Flexible {
                (&run_b, &run_a)
            } else {
                (&run_a, &run_b)
            };
            let report = compare_runs(&load_series(flex)?, &load_series(conv)?).map_err(SimError::from)?;
            if let Some(dir) = out {
                write_report(&report, &dir)?;
            }
            print!("{}", report.render());
        }
        Command::Report { run } => print!("{}", render_summary(&load_summary(&run)?)),
        Command::GenFixture { dir } => {
            let path = write_scenario(&canonical_fixture(), &dir).map_err(|e| Failure::Other(e.to_string()))?;
            println!("fixture written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("validation failed: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(m)) => {
            eprintln!("infeasible: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
