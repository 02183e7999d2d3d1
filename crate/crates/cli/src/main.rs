use std::path::PathBuf;
use std::process::ExitCode;

use aquobs::error::{Error, ErrorClass};
use aquobs::observability::Measure;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod inputs;
mod output;

#[derive(Parser, Debug)]
#[command(name = "aquobs", version, about = "Water-quality observability and sensor placement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one scenario and write its trajectory and a summary.
    Simulate {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, value_enum, default_value_t = TrajectoryFormat::Csv)]
        format: TrajectoryFormat,
    },
    /// Robust greedy sensor placement over all scenarios.
    Place {
        #[command(flatten)]
        inputs: InputArgs,
        #[command(flatten)]
        placement: PlacementArgs,
        /// Also solve every hydraulic step separately and write the
        /// node × step selection matrix.
        #[arg(long)]
        per_step: bool,
        /// Write the Gramian atom factors as CSV.
        #[arg(long)]
        export_atoms: bool,
    },
    /// Compare greedy against exhaustive enumeration.
    Oracle {
        #[command(flatten)]
        inputs: InputArgs,
        #[command(flatten)]
        placement: PlacementArgs,
        /// Largest number of subsets to enumerate.
        #[arg(long, default_value_t = 2_000_000)]
        oracle_cap: u128,
        /// Diminishing-returns probe trials (0 disables the probe).
        #[arg(long, default_value_t = 0)]
        probe: usize,
    },
    /// Evaluate the observability measures of a given sensor set.
    Measure {
        #[command(flatten)]
        inputs: InputArgs,
        /// Sensor node ids; may be repeated.
        #[arg(long = "sensor", required = true)]
        sensors: Vec<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum, default_value_t = Measured::Chlorine)]
        measure_species: Measured,
    },
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Network description (.json, or .inp for EPANET topology).
    #[arg(long)]
    pub network: PathBuf,
    /// Hydraulic profile CSV, used by scenarios that do not name their own.
    #[arg(long)]
    pub hydraulics: Option<PathBuf>,
    /// Scenario JSON file; may be repeated.
    #[arg(long = "scenario", required = true)]
    pub scenarios: Vec<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed for every randomized step.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct PlacementArgs {
    #[arg(long, value_enum, default_value_t = Objective::Logdet)]
    pub objective: Objective,
    /// Sensor budget r, pinned sensors included.
    #[arg(long = "sensors")]
    pub budget: usize,
    /// Sensor that must be part of the placement; may be repeated.
    #[arg(long = "pin")]
    pub pins: Vec<String>,
    /// Logdet regularization; defaults to a scale-aware value.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Which species the sensors read.
    #[arg(long, value_enum, default_value_t = Measured::Chlorine)]
    pub measure_species: Measured,
    /// Use lazy gain evaluation.
    #[arg(long)]
    pub lazy: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Objective {
    Trace,
    Logdet,
}

impl From<Objective> for Measure {
    fn from(o: Objective) -> Measure {
        match o {
            Objective::Trace => Measure::Trace,
            Objective::Logdet => Measure::Logdet,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Measured {
    Chlorine,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryFormat {
    Csv,
    Binary,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.class() {
                ErrorClass::Io => 1,
                ErrorClass::Validation => 2,
                ErrorClass::ResourceCap => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("AQUOBS_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::validation(format!("AQUOBS_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Error::validation("AQUOBS_THREADS must be >= 1").into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Simulate { inputs, format } => commands::simulate(&inputs, format),
        Command::Place {
            inputs,
            placement,
            per_step,
            export_atoms,
        } => commands::place(&inputs, &placement, per_step, export_atoms),
        Command::Oracle {
            inputs,
            placement,
            oracle_cap,
            probe,
        } => commands::oracle(&inputs, &placement, oracle_cap, probe),
        Command::Measure {
            inputs,
            sensors,
            epsilon,
            measure_species,
        } => commands::measure(&inputs, &sensors, epsilon, measure_species),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
