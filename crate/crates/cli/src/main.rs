//! `ncsdp`: solve, compare and verify from the command line.
//!
//! Exit codes: 0 converged (or all checks passed), 1 error, 2 partial
//! progress, 3 failed verification checks.

mod commands;
mod config;
mod instance;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{
    CompareOpts, FileConfig, Layers, OutputOpts, ProblemOpts, RunConfig, ScheduleOpts, SolverOpts,
    VerifyOpts,
};

#[derive(Parser)]
#[command(name = "ncsdp", version, about = "Negative-curvature interior-point solver for nonlinear SDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemOpts,
    #[command(flatten)]
    solver: SolverOpts,
    #[command(flatten)]
    schedule: ScheduleOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method and write its trace and summary.
    Solve(Common),
    /// Run several methods over several PSF seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        compare: CompareOpts,
    },
    /// Run the derivative, bound and decrease checks.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        verify: VerifyOpts,
    },
}

fn resolve(common: Common, compare: CompareOpts, verify: VerifyOpts) -> anyhow::Result<RunConfig> {
    let file = FileConfig::load(common.config.as_deref())?;
    RunConfig::resolve(
        Layers {
            problem: common.problem,
            solver: common.solver,
            schedule: common.schedule,
            output: common.output,
            compare,
            verify,
        },
        file,
    )
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Solve(common) => commands::solve(&resolve(common, Default::default(), Default::default())?),
        Command::Compare { common, compare } => {
            commands::compare(&resolve(common, compare, Default::default())?)
        }
        Command::Verify { common, verify } => {
            commands::verify(&resolve(common, Default::default(), verify)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
