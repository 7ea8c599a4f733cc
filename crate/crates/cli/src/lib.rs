//! Command-line front end for the staircase harmonic modulation solver.
//!
//! `solve` runs one dual solve and writes a JSON result; `sweep` solves the
//! modulation targets `(m, 0, …, 0)` over a range of m and writes CSV tables.
//! Exit codes: 0 success, 1 a solve failed its checks (a diagnostic file is
//! still written), 2 bad configuration.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_solve, cmd_sweep, solve_one, Solved, SweepOutcome};
pub use config::{OutputFormat, RunConfig, Settings, SweepRange, GRID_ENV};
pub use error::CliError;
pub use output::{read_json, read_samples, read_summary, SampleRow, SolveRecord, Status, SummaryRow};
