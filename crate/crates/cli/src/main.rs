use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use torus_normal_form::harness::{
    cmd_growth, cmd_propagate, cmd_reduce, cmd_verify_calculus, parse_config_with, CommandOutcome,
    Overrides,
};
use torus_normal_form::{Error, Result};

/// Worker threads for independent time samples; unset means one.
const THREADS_VAR: &str = "TORUS_NF_THREADS";

#[derive(Parser)]
#[command(name = "torus-nf", version, about = "Normal-form reduction and propagation on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seeded property checks of the Fourier layer and the symbol calculus.
    VerifyCalculus(Common),
    /// Run the reduction and write the order ledger, lambda and remainders.
    Reduce(Common),
    /// Integrate the original equation from the configured initial state.
    Propagate(Common),
    /// Growth experiment: Sobolev norms, envelope and interpolation checks.
    Growth(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output] dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the config value).
    #[arg(long)]
    seed: Option<u64>,
    /// Grid size N (overrides [grid] n).
    #[arg(long)]
    grid: Option<usize>,
}

fn load(common: &Common) -> Result<torus_normal_form::harness::Config> {
    let text = std::fs::read_to_string(&common.config)?;
    let overrides = Overrides {
        grid: common.grid,
        seed: common.seed,
        output_dir: common.out.clone(),
    };
    parse_config_with(&text, &overrides)
}

fn run(cli: &Cli) -> Result<(CommandOutcome, i32)> {
    let (common, f, fail_code): (&Common, fn(&_) -> Result<CommandOutcome>, i32) = match &cli.command {
        Command::VerifyCalculus(c) => (c, cmd_verify_calculus, 2),
        Command::Reduce(c) => (c, cmd_reduce, 3),
        Command::Propagate(c) => (c, cmd_propagate, 2),
        Command::Growth(c) => (c, cmd_growth, 2),
    };
    let cfg = load(common)?;
    let outcome = f(&cfg)?;
    let code = if outcome.passed { 0 } else { fail_code };
    Ok((outcome, code))
}

fn threads_from_env() -> usize {
    std::env::var(THREADS_VAR)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    torus_normal_form::set_parallelism(threads_from_env());
    match run(&cli) {
        Ok((outcome, code)) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            let config = match &cli.command {
                Command::VerifyCalculus(c)
                | Command::Reduce(c)
                | Command::Propagate(c)
                | Command::Growth(c) => &c.config,
            };
            match &e {
                Error::Config { line, col, msg } => {
                    eprintln!("{}:{line}:{col}: {msg}", config.display())
                }
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
