use std::process::ExitCode;

use clap::Parser;
use shm_cli::args::{Cli, Command};
use shm_cli::{cmd_solve, cmd_sweep};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve(args) => match args.resolve_from_env().and_then(|c| cmd_solve(&c)) {
            Ok((code, record)) => {
                eprintln!("solve: {}", record.status.as_str());
                if let Some(e) = &record.error {
                    eprintln!("  {e}");
                }
                code
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Sweep(args) => match args.resolve_from_env().and_then(|c| cmd_sweep(&c)) {
            Ok(outcome) => {
                let failed = outcome.rows.iter().filter(|r| !r.status.is_ok()).count();
                eprintln!(
                    "sweep: {} of {} values ok; samples in {}, summary in {}",
                    outcome.rows.len() - failed,
                    outcome.rows.len(),
                    outcome.samples_path.display(),
                    outcome.summary_path.display()
                );
                outcome.exit_code
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
