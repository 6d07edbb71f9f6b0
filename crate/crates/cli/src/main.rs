mod commands;
mod config;
mod output;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "nblab", version, about = "Experiments for the heat equation with nonlinear nonlocal flux")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; NBLAB_OUT takes precedence when set.
    #[arg(long, global = true, default_value = "nblab-out")]
    out: PathBuf,
    /// Omit the timestamp comment from SVG files.
    #[arg(long, global = true)]
    reproducible: bool,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Reserved; no command uses randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the problem and estimate the blow-up time.
    Solve,
    /// Evaluate every analytic criterion that applies to the problem.
    Criteria,
    /// Map criteria and simulated verdicts over a parameter grid.
    Sweep,
    /// Check a supersolution family or a closed-form candidate.
    VerifySuper(VerifyArgs),
    /// Boundedness criteria for the heat equation with flux g(t).
    BoundednessCheck,
    /// Boundary localization of blow-up for p <= 1 < l.
    Localize,
    /// Compare the mass with the comparison ODE.
    OdeCompare,
    /// Window integrals of the spiked flux counterexample.
    Counterexample,
}

#[derive(Args, Clone, Debug, Default, serde::Serialize)]
pub struct VerifyArgs {
    /// SMALL_EXP, SUPERLINEAR, P1_EXP, P1_BOUNDED or L1_PG1.
    #[arg(long, required_unless_present = "expr", conflicts_with = "expr")]
    pub family: Option<String>,
    /// Closed-form candidate u(x, t).
    #[arg(long)]
    pub expr: Option<String>,
    /// Override a family parameter, as name=value (repeatable).
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Shrink the parameters to the edge of admissibility.
    #[arg(long)]
    pub tighten: bool,
    /// Perturb each constrained parameter by 5% in its violating direction.
    #[arg(long)]
    pub perturb: bool,
}

/// How a command ended, mapped to the exit code.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Numeric(anyhow::Error),
}

pub trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn numeric(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn numeric(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Numeric(e.into()))
    }
}

pub enum Status {
    Ok,
    /// The command ran but its check failed (verify-super).
    CheckFailed,
}

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub reproducible: bool,
    pub workers: Option<usize>,
}

fn run(cli: Cli) -> Result<Status, Failure> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).config()?,
        None => RunConfig::default(),
    };
    let out = std::env::var_os("NBLAB_OUT").map(PathBuf::from).unwrap_or(cli.out);
    let _ = cli.seed;
    let ctx = Context {
        cfg,
        out,
        reproducible: cli.reproducible,
        workers: cli.workers,
    };
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Criteria => commands::criteria(&ctx),
        Command::Sweep => sweep::sweep(&ctx),
        Command::VerifySuper(args) => commands::verify_super(&ctx, &args),
        Command::BoundednessCheck => commands::boundedness(&ctx),
        Command::Localize => commands::localize(&ctx),
        Command::OdeCompare => commands::ode_compare(&ctx),
        Command::Counterexample => commands::counterexample(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(3)
        }
    }
}
