use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, Settings, GRID_ENV};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "shm",
    version,
    about = "Multilevel staircase signals with prescribed Fourier coefficients"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the configured target coefficients; writes a JSON result.
    Solve(RunArgs),
    /// Solve targets (m, 0, …, 0) over a range of m; writes CSV tables.
    Sweep(RunArgs),
}

/// Flags override values from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Terminal penalty weight ε.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<String>,
    /// Quadrature intervals on [0, π]; defaults to $SHM_GRID or 20000.
    #[arg(long)]
    pub grid: Option<String>,
    /// Admissible levels, e.g. `-1,0,1`.
    #[arg(long, allow_hyphen_values = true)]
    pub levels: Option<String>,
    /// Odd harmonics of the cosine coefficients.
    #[arg(long)]
    pub freq_a: Option<String>,
    /// Odd harmonics of the sine coefficients.
    #[arg(long)]
    pub freq_b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub target_a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub target_b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub m_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub m_max: Option<String>,
    #[arg(long)]
    pub m_steps: Option<String>,
    /// Decreasing smoothing parameters, e.g. `1e-1,1e-2,1e-3`.
    #[arg(long)]
    pub mu_schedule: Option<String>,
    #[arg(long)]
    pub grad_tol: Option<String>,
    #[arg(long)]
    pub max_iter: Option<String>,
    #[arg(long)]
    pub snap_tol: Option<String>,
    #[arg(long)]
    pub min_dwell: Option<String>,
    /// `newton` or `bb`.
    #[arg(long)]
    pub method: Option<String>,
    /// Solve every m from p = 0, in parallel.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Write every n-th grid sample to the sweep table.
    #[arg(long)]
    pub sample_stride: Option<String>,
    /// Result file (solve) or sample table (sweep).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sweep summary table; defaults to `<out stem>_summary.csv`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// JSON layout: `pretty` or `compact`.
    #[arg(long)]
    pub format: Option<String>,
}

impl RunArgs {
    fn flag_settings(&self) -> Settings {
        let mut s = Settings::default();
        let strings = [
            ("eps", &self.eps),
            ("grid", &self.grid),
            ("levels", &self.levels),
            ("freq_a", &self.freq_a),
            ("freq_b", &self.freq_b),
            ("target_a", &self.target_a),
            ("target_b", &self.target_b),
            ("m_min", &self.m_min),
            ("m_max", &self.m_max),
            ("m_steps", &self.m_steps),
            ("mu_schedule", &self.mu_schedule),
            ("grad_tol", &self.grad_tol),
            ("max_iter", &self.max_iter),
            ("snap_tol", &self.snap_tol),
            ("min_dwell", &self.min_dwell),
            ("method", &self.method),
            ("sample_stride", &self.sample_stride),
            ("format", &self.format),
        ];
        for (key, value) in strings {
            if let Some(v) = value {
                s.set(key, v.clone());
            }
        }
        for (key, value) in [("out", &self.out), ("summary", &self.summary)] {
            if let Some(p) = value {
                s.set(key, p.display().to_string());
            }
        }
        if self.no_warm_start {
            s.set("warm_start", "false");
        }
        s
    }

    /// Config file, then flags, resolved against defaults and `env_grid`.
    pub fn resolve(&self, env_grid: Option<&str>) -> Result<RunConfig, CliError> {
        let mut settings = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        settings.overlay(&self.flag_settings());
        RunConfig::resolve(&settings, env_grid)
    }

    pub fn resolve_from_env(&self) -> Result<RunConfig, CliError> {
        let env = std::env::var(GRID_ENV).ok();
        self.resolve(env.as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "eps = 1e-3\nm_steps = 5\nlevels = -1,0,1\n").unwrap();
        let cli = Cli::try_parse_from([
            "shm",
            "sweep",
            "--config",
            path.to_str().unwrap(),
            "--eps",
            "1e-4",
            "--levels",
            "-1,-0.5,0,0.5,1",
            "--m-min",
            "-0.5",
            "--no-warm-start",
        ])
        .unwrap();
        let Command::Sweep(args) = cli.command else {
            panic!("expected sweep")
        };
        let c = args.resolve(None).unwrap();
        assert_eq!(c.solver.epsilon, 1e-4);
        assert_eq!(c.solver.levels.len(), 5);
        assert_eq!(c.sweep.m_steps, 5);
        assert_eq!(c.sweep.m_min, -0.5);
        assert!(!c.warm_start);
    }

    #[test]
    fn missing_config_file_is_a_config_error() {
        let args = RunArgs {
            config: Some("/nonexistent/run.cfg".into()),
            ..RunArgs::default()
        };
        assert_eq!(args.resolve(None).unwrap_err().exit_code(), 2);
    }
}
