//! `qdrom`: DNS, POD training, reduced solves, error sweeps and timing runs driven by
//! scenario files.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |---|---|
//! | 0 | success |
//! | 2 | command-line usage error |
//! | 3 | scenario or configuration error |
//! | 4 | file I/O or malformed artifact |
//! | 5 | assembly or eigensolver failure |
//! | 6 | invalid input (mode counts, dimensions, unsupported basis) |
//!
//! `QDROM_THREADS` sets the worker thread count.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qdrom::rom::KineticRoute;
use qdrom::Error;

#[derive(Parser, Debug)]
#[command(name = "qdrom", version, about = "Reduced-order Schrödinger solver for quantum-dot arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full-grid eigensolve at one parameter point.
    Dns(DnsArgs),
    /// Collect training snapshots, compute the POD basis and the reduced matrices.
    Train(TrainArgs),
    /// Reduced-order solve with a trained basis.
    Solve(SolveArgs),
    /// Error table against DNS over a range of mode counts.
    Sweep(SweepArgs),
    /// Time DNS against the reduced solve and the reconstruction.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct Point {
    /// Parameter values, e.g. `Ex=25,Ey=-10`; unlisted parameters are zero.
    #[arg(long, conflicts_with = "test")]
    params: Option<String>,
    /// Named test point from the scenario file (`test.<label>`).
    #[arg(long)]
    test: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kinetic {
    Stiffness,
    Gradient,
}

impl From<Kinetic> for KineticRoute {
    fn from(k: Kinetic) -> Self {
        match k {
            Kinetic::Stiffness => KineticRoute::Stiffness,
            Kinetic::Gradient => KineticRoute::Gradient,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Baseline {
    Pod,
    Fpw,
}

#[derive(Args, Debug)]
struct DnsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    point: Point,
    /// Number of states (default: the scenario's `report_states`).
    #[arg(long)]
    states: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Kinetic matrix evaluation for the stored reduced model.
    #[arg(long, value_enum, default_value = "stiffness")]
    kinetic: Kinetic,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    point: Point,
    /// Basis file written by `train`.
    #[arg(long)]
    basis: PathBuf,
    /// Cached reduced matrices written by `train`; assembled from the basis if omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of modes M.
    #[arg(long)]
    modes: usize,
    #[arg(long)]
    states: Option<usize>,
    /// Reconstruct on every k-th grid point in each direction.
    #[arg(long, default_value_t = 1)]
    coarse_output: usize,
    #[arg(long, value_enum, default_value = "stiffness")]
    kinetic: Kinetic,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    point: Point,
    /// Basis file written by `train` (POD baseline only).
    #[arg(long)]
    basis: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pod")]
    baseline: Baseline,
    /// Mode counts: comma list of values and inclusive `lo:hi` ranges, e.g. `1:20,40`.
    #[arg(long)]
    modes: String,
    #[arg(long)]
    states: Option<usize>,
    /// Reuse a DNS dump from `dns` instead of solving again.
    #[arg(long)]
    dns: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "stiffness")]
    kinetic: Kinetic,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    point: Point,
    #[arg(long)]
    basis: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    modes: usize,
    /// States computed by both solvers.
    #[arg(long, default_value_t = 8)]
    states: usize,
    #[arg(long, default_value_t = 4)]
    coarse_output: usize,
    /// Repetitions of the reduced solve used for its mean time.
    #[arg(long, default_value_t = 200)]
    repeat: usize,
    #[arg(long, value_enum, default_value = "stiffness")]
    kinetic: Kinetic,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 3,
        Error::Io(_) | Error::Format(_) => 4,
        Error::Assembly(_) | Error::NoConvergence { .. } | Error::Training { .. } => 5,
        Error::Invalid(_) | Error::Dimension(_) => 6,
    }
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("QDROM_THREADS") {
        let n: usize =
            v.parse().map_err(|_| Error::Config(format!("QDROM_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<(), Error> {
        configure_threads()?;
        match cli.command {
            Command::Dns(a) => commands::dns(a),
            Command::Train(a) => commands::train(a),
            Command::Solve(a) => commands::solve(a),
            Command::Sweep(a) => commands::sweep(a),
            Command::Bench(a) => commands::bench(a),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
