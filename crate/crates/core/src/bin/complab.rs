use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use complab::harness::{self, ExperimentKind, RunConfig};
use complab::Error;

#[derive(Parser)]
#[command(version, about = "Competition, Richardson and voter simulations on Z^d")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run competition, Richardson or voter replicates, with optional snapshots
    Simulate(Common),
    /// Estimate the Richardson limit shape
    Shape(Common),
    /// Probe the curvature of a planar shape
    Curvature(Common),
    /// Annular-sector stabilization experiment
    Stabilize(Common),
    /// Nested-sector monitor from a sliced Richardson shape
    Nested(Common),
    /// Coexistence batch statistics
    Coexist(Common),
    /// Dual random-walk invasion probabilities on a torus
    Dual(Common),
    /// Compare engines with the exact law on a tiny graph
    OracleCheck(Common),
    /// First-passage deviation frequencies
    FppDev(Common),
    /// One-dimensional interface statistics
    Oned(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides the config and COMPETITION_LAB_WORKERS
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; overrides the config (default: out/<experiment>)
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BOX: u8 = 3;

fn split(c: Command) -> (ExperimentKind, Common) {
    match c {
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Shape(a) => (ExperimentKind::Shape, a),
        Command::Curvature(a) => (ExperimentKind::Curvature, a),
        Command::Stabilize(a) => (ExperimentKind::Stabilize, a),
        Command::Nested(a) => (ExperimentKind::Nested, a),
        Command::Coexist(a) => (ExperimentKind::Coexist, a),
        Command::Dual(a) => (ExperimentKind::Dual, a),
        Command::OracleCheck(a) => (ExperimentKind::OracleCheck, a),
        Command::FppDev(a) => (ExperimentKind::FppDev, a),
        Command::Oned(a) => (ExperimentKind::Oned, a),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(match e {
        Error::Config { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = split(cli.command);
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut cfg = match RunConfig::parse(&text, Some(kind)) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let workers = match harness::resolve_workers(args.workers, &cfg) {
        Ok(k) => k,
        Err(e) => return fail(&e),
    };
    let out = args
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    let outcome = match harness::run(&cfg, &out, workers) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    let frac = outcome.box_hit_fraction();
    if frac > cfg.box_hit_tolerance {
        eprintln!(
            "error: {} of {} replicates hit the box ({frac:.3} > tolerance {})",
            outcome.box_hits, outcome.replicates, cfg.box_hit_tolerance
        );
        return ExitCode::from(EXIT_BOX);
    }
    ExitCode::SUCCESS
}
