//! Config-driven harness behind the command-line tool: expression grammar,
//! TOML configuration, property suites and subcommand drivers.

pub mod commands;
pub mod config;
pub mod expr;
pub mod suites;

pub use commands::{
    cmd_growth, cmd_propagate, cmd_reduce, cmd_verify_calculus, write_atomic, CommandOutcome,
};
pub use config::{parse_config, parse_config_with, Config, Overrides};
pub use expr::Expr;
pub use suites::{random_trig_symbol, run_calculus_suites, CheckOutcome, Status, SuiteReport};
