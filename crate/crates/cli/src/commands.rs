use std::path::{Path, PathBuf};

use shm_core::{minimize_from, HarmonicSpec, SolverConfig, TimeGrid};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{self, SolveRecord, SummaryRow};

pub const DEFAULT_RESULT: &str = "result.json";
pub const DEFAULT_SWEEP: &str = "sweep.csv";

/// Result of one solve plus what a sweep needs to continue from it.
#[derive(Debug, Clone)]
pub struct Solved {
    pub record: SolveRecord,
    pub u_samples: Option<Vec<f64>>,
}

/// Runs one dual solve from `start` (zero if `None`). Solver errors are
/// recorded, not propagated.
pub fn solve_one(spec: &HarmonicSpec, cfg: &SolverConfig, bound: f64, start: Option<&[f64]>) -> Solved {
    let zero = vec![0.0; spec.dim()];
    match minimize_from(spec, cfg, start.unwrap_or(&zero)) {
        Ok(report) => Solved {
            record: SolveRecord::from_report(&report, spec, cfg, bound),
            u_samples: Some(report.u_samples),
        },
        Err(e) => Solved {
            record: SolveRecord::failed(spec, cfg, bound, Some(e.to_string())),
            u_samples: None,
        },
    }
}

/// Solves the configured targets and writes the JSON result. Exit code 0
/// iff the status is ok, 1 otherwise.
pub fn cmd_solve(config: &RunConfig) -> Result<(i32, SolveRecord), CliError> {
    let spec = config.spec()?;
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_RESULT));
    let solved = solve_one(&spec, &config.solver, config.residual_bound(), None);
    output::write_json(&out, &solved.record, config.format)?;
    Ok((if solved.record.status.is_ok() { 0 } else { 1 }, solved.record))
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub exit_code: i32,
    pub rows: Vec<SummaryRow>,
    pub samples_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Solves targets `(m, 0, …, 0)` for each m of the sweep range.
///
/// With warm starts the solves run in order, each starting from the previous
/// converged `p`. Without them they are independent and run in parallel when
/// the `parallel` feature is enabled.
pub fn cmd_sweep(config: &RunConfig) -> Result<SweepOutcome, CliError> {
    let ms = config.sweep.values();
    let specs = ms
        .iter()
        .map(|&m| config.modulation_spec(m))
        .collect::<Result<Vec<_>, _>>()?;
    let bound = config.residual_bound();
    let cfg = &config.solver;

    let solved: Vec<Solved> = if config.warm_start {
        let mut out = Vec::with_capacity(specs.len());
        let mut start: Option<Vec<f64>> = None;
        for spec in &specs {
            let s = solve_one(spec, cfg, bound, start.as_deref());
            if s.record.converged {
                start = s.record.p_opt.clone();
            }
            out.push(s);
        }
        out
    } else {
        solve_all(&specs, cfg, bound)
    };

    let rows: Vec<SummaryRow> = ms
        .iter()
        .zip(&solved)
        .map(|(&m, s)| SummaryRow::new(m, &s.record))
        .collect();
    let samples_path = config.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_SWEEP));
    let summary_path = output::summary_path(config, &samples_path);
    write_sweep(&samples_path, &summary_path, config, &ms, &solved, &rows)?;

    let exit_code = if rows.iter().all(|r| r.status.is_ok()) { 0 } else { 1 };
    Ok(SweepOutcome {
        exit_code,
        rows,
        samples_path,
        summary_path,
    })
}

#[cfg(feature = "parallel")]
fn solve_all(specs: &[HarmonicSpec], cfg: &SolverConfig, bound: f64) -> Vec<Solved> {
    use rayon::prelude::*;
    specs.par_iter().map(|spec| solve_one(spec, cfg, bound, None)).collect()
}

#[cfg(not(feature = "parallel"))]
fn solve_all(specs: &[HarmonicSpec], cfg: &SolverConfig, bound: f64) -> Vec<Solved> {
    specs.iter().map(|spec| solve_one(spec, cfg, bound, None)).collect()
}

fn write_sweep(
    samples_path: &Path,
    summary_path: &Path,
    config: &RunConfig,
    ms: &[f64],
    solved: &[Solved],
    rows: &[SummaryRow],
) -> Result<(), CliError> {
    let grid = TimeGrid::uniform(config.solver.grid_size)?;
    let samples: Vec<(f64, &[f64])> = ms
        .iter()
        .zip(solved)
        .filter_map(|(&m, s)| s.u_samples.as_deref().map(|u| (m, u)))
        .collect();
    output::write_samples(samples_path, grid.nodes(), &samples, config.sample_stride)?;
    output::write_summary(summary_path, rows)
}
