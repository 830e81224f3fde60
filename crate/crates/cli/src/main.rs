//! `aloha`: command-line front end for slotted Aloha capture-network analysis.
//!
//! Exit codes: 0 success, 1 the analysis answered "empty", "unstable" or a
//! verification failed, 2 bad arguments or input files, 3 internal failure.

mod args;
mod commands;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::{
    parse_count, parse_list, GroupingArg, InnerSearchArgs, NumList, SearchArgs, SimArgs, SolverArgs, SourceArgs,
    TrafficArgs,
};

#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// Empty region, unstable point or failed verification.
    Negative,
}

#[derive(Debug, Parser)]
#[command(name = "aloha", version, about = "Steady state, operating regions and simulation of slotted Aloha capture networks")]
struct Cli {
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit the timestamp line so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true, env = "ALOHA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a topology file from a preset or a random generator.
    GenTopology(GenTopologyArgs),
    /// Solve for the steady-state success probabilities.
    SteadyState {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        traffic: TrafficArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// List every consistent attracting state instead of the first.
        #[arg(long)]
        all_states: bool,
    },
    /// Boundaries of the transmission-probability region keeping every queue unsaturated.
    RegionUnsat {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, value_parser = parse_list)]
        lambda: NumList,
        #[arg(long, value_enum, default_value = "identity")]
        grouping: GroupingArg,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Maximal stable input rates, or a membership check with --lambda.
    RegionStability {
        #[command(flatten)]
        source: SourceArgs,
        /// Check this input-rate vector instead of computing the boundary.
        #[arg(long, value_parser = parse_list)]
        lambda: Option<NumList>,
        #[arg(long, value_enum, default_value = "identity")]
        grouping: GroupingArg,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        inner: InnerSearchArgs,
    },
    /// CSV grid of region membership and success probabilities over q.
    RegionGrid {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, value_parser = parse_list)]
        lambda: NumList,
        #[arg(long, value_enum, default_value = "uniform")]
        grouping: GroupingArg,
        /// `lo:hi:n` per decision coordinate; one axis is reused for all.
        #[arg(long, required = true)]
        axis: Vec<String>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Slot-level Monte-Carlo simulation.
    Simulate {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        traffic: TrafficArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Keep every queue backlogged.
        #[arg(long)]
        saturated: bool,
        /// Queue-length trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_parser = parse_count)]
        trace_every: Option<u64>,
    },
    /// Compare the analysis with a simulation; exits 1 on mismatch.
    Verify(VerifyArgs),
    /// Figure-reproduction sweeps.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, clap::Args)]
pub struct GenTopologyArgs {
    #[arg(long, conflicts_with_all = ["ppp_density", "uniform"])]
    pub preset: Option<String>,
    /// Poisson point process intensity, per square metre.
    #[arg(long)]
    pub ppp_density: Option<f64>,
    /// Fixed number of uniformly placed transmitters.
    #[arg(long, conflicts_with = "ppp_density")]
    pub uniform: Option<usize>,
    /// Square side length in metres.
    #[arg(long, default_value_t = 300.0)]
    pub side: f64,
    /// Dedicated receiver per transmitter at this distance.
    #[arg(long, conflicts_with = "cellular")]
    pub bipolar: Option<f64>,
    /// Number of uniformly placed base stations.
    #[arg(long)]
    pub cellular: Option<usize>,
    /// Power control: own-link mean SNR at the serving BS, dB.
    #[arg(long, requires = "cellular", allow_hyphen_values = true)]
    pub target_snr_db: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 17.0, allow_hyphen_values = true)]
    pub power_dbm: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta_db: f64,
    #[arg(long, default_value_t = -90.0, allow_hyphen_values = true)]
    pub noise_dbm: f64,
    #[arg(long, default_value_t = 3.8)]
    pub alpha: f64,
}

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    /// Preset name, or `all` for every preset.
    #[arg(long, conflicts_with = "topology")]
    pub preset: Option<String>,
    #[arg(long)]
    pub topology: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub topology_seed: u64,
    /// Input rates; by default a fraction of the fully saturated service rate.
    #[arg(long, value_parser = parse_list)]
    pub lambda: Option<NumList>,
    /// Transmission probabilities (default 1/K each).
    #[arg(long, value_parser = parse_list)]
    pub q: Option<NumList>,
    /// Default input rate as a fraction of q times the all-saturated success probability.
    #[arg(long, default_value_t = 0.5)]
    pub load_fraction: f64,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Absolute tolerance on success probabilities.
    #[arg(long, default_value_t = 0.02)]
    pub p_tol: f64,
    /// Relative tolerance on throughput.
    #[arg(long, default_value_t = 0.05)]
    pub throughput_tol: f64,
    /// Do not require simulated stability verdicts to match the analysis.
    #[arg(long)]
    pub no_state_match: bool,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Percentage of stable transmitters in bipolar networks of growing size.
    PercentStable {
        #[arg(long, default_value_t = 1e-4)]
        density: f64,
        #[arg(long, value_parser = parse_list, default_value = "300,600,900")]
        sides: NumList,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 25.0)]
        tr_distance: f64,
        #[arg(long, default_value_t = 0.2)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Closed-form q interval and largest input rate for identical pairs.
    Symmetric {
        #[arg(long, default_value_t = 25)]
        k: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        theta_db: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        rho_db: f64,
        #[arg(long, value_parser = parse_list, default_value = "0.005,0.01,0.015,0.02,0.025")]
        lambda: NumList,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use aloha_core::Error as E;
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::InvalidParameter(_)
            | E::Dimension { .. }
            | E::Domain { .. }
            | E::Parse(_)
            | E::Topology(_)
            | E::Io(_)
            | E::EmptyTopology,
        ) => 2,
        Some(E::EmptyRegion | E::NoFeasiblePoint { .. } | E::NoUnsaturatedPoint | E::NoSteadyStateFound) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    let sink = output::Sink {
        out: cli.out,
        deterministic: cli.deterministic,
    };
    match commands::run(cli.command, &sink) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
