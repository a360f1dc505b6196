//! `sticky`: compute sticky-sphere landscapes, rates, and simulations from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod failure;
mod manifest;
mod plot;

#[derive(Parser, Debug)]
#[command(name = "sticky", version, about = "Geometric free-energy landscapes of sticky hard spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for tracing and replicas (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Trace all rigid, one- and two-dimensional modes and write their tables.
    Landscape(LandscapeArgs),
    /// Leading-order transition rates between rigid clusters.
    Rates(RatesArgs),
    /// Brownian dynamics run with online mode classification.
    Simulate(SimulateArgs),
    /// Compare a simulation against a computed landscape.
    Compare(CompareArgs),
    /// Enumerate rigid clusters from scratch and write a catalog file.
    Enumerate(EnumerateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Multiplicity {
    /// n!/|G| with G the full point group.
    Table,
    /// C0 n!/sigma with sigma the proper rotations.
    Formula,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Convention {
    Leading,
    Restricted,
}

#[derive(Args, Debug)]
struct CatalogArgs {
    /// Number of spheres.
    #[arg(long)]
    n: usize,
    /// Rigid catalog file; defaults to the shipped catalog for n = 5..8.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Arc-length step along lines.
    #[arg(long, default_value_t = 0.01)]
    line_ds: f64,
}

#[derive(Args, Debug)]
struct LandscapeArgs {
    #[command(flatten)]
    catalog: CatalogArgs,
    /// Sample spacing on faces.
    #[arg(long, default_value_t = 0.05)]
    ds: f64,
    /// Require every face mesh to reach the minimum triangle quality.
    #[arg(long)]
    strict: bool,
    /// Stop after the lines.
    #[arg(long)]
    no_faces: bool,
    #[arg(long, value_enum, default_value_t = Multiplicity::Table)]
    multiplicity: Multiplicity,
    /// Sticky parameter for the free-energy column.
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Args, Debug)]
struct RatesArgs {
    #[command(flatten)]
    catalog: CatalogArgs,
    /// Sticky parameter; `inf` gives the pure geometric matrix.
    #[arg(long, default_value = "inf", value_parser = positive_kappa)]
    kappa: f64,
    #[arg(long, value_enum, default_value_t = Convention::Leading)]
    convention: Convention,
    /// Run length for expected transition counts.
    #[arg(long)]
    duration: Option<f64>,
    /// Merge rigid clusters joined by lines shorter than this.
    #[arg(long)]
    group: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Run file with key = value lines.
    #[arg(long)]
    config: PathBuf,
    /// Directory written by `landscape`, used for classification.
    #[arg(long)]
    landscape: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Directory written by `landscape` (and optionally `rates`).
    #[arg(long)]
    theory: PathBuf,
    /// Directory written by `simulate`.
    #[arg(long)]
    sim: PathBuf,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[arg(long)]
    n: usize,
    /// Random restarts per candidate graph.
    #[arg(long, default_value_t = sticky_landscape::clusters::MAX_RESTARTS)]
    restarts: usize,
}

fn positive_kappa(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(k) if k > 0.0 => Ok(k),
        Ok(_) => Err("kappa must be positive".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Landscape(a) => commands::landscape(a, &cli.out),
        Command::Rates(a) => commands::rates(a, &cli.out),
        Command::Simulate(a) => commands::simulate(a, &cli.out),
        Command::Compare(a) => commands::compare(a, &cli.out),
        Command::Enumerate(a) => commands::enumerate(a, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
