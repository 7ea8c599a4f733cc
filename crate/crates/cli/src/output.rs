//! Result documents: JSON for single solves, CSV for sweeps.
//!
//! JSON reals are written in shortest round-trip form; CSV reals use 17
//! significant digits. Both parse back to the exact `f64` written. Nothing
//! time-dependent is written, so identical runs give identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use shm_core::{verify_duality, HarmonicSpec, Method, SolveReport, SolverConfig, StaircaseCheck, ViolationKind};

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NotConverged,
    ExtractionFailed,
    StaircaseInvalid,
    ResidualExceedsBound,
    SolverError,
}

impl Status {
    pub fn is_ok(self) -> bool {
        self == Status::Ok
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NotConverged => "not_converged",
            Status::ExtractionFailed => "extraction_failed",
            Status::StaircaseInvalid => "staircase_invalid",
            Status::ResidualExceedsBound => "residual_exceeds_bound",
            Status::SolverError => "solver_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub levels: Vec<f64>,
    pub eps: f64,
    pub grid: usize,
    pub freq_a: Vec<u32>,
    pub freq_b: Vec<u32>,
    pub target_a: Vec<f64>,
    pub target_b: Vec<f64>,
    pub mu_schedule: Vec<f64>,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub snap_tol: f64,
    pub min_dwell: f64,
    pub method: String,
}

impl ConfigEcho {
    pub fn new(spec: &HarmonicSpec, cfg: &SolverConfig) -> Self {
        Self {
            levels: cfg.levels.values().to_vec(),
            eps: cfg.epsilon,
            grid: cfg.grid_size,
            freq_a: spec.ea().to_vec(),
            freq_b: spec.eb().to_vec(),
            target_a: spec.a_target().to_vec(),
            target_b: spec.b_target().to_vec(),
            mu_schedule: cfg.mu_schedule.clone(),
            grad_tol: cfg.grad_tol_for(spec.dim()),
            max_iter: cfg.max_iter,
            snap_tol: cfg.snap_tol,
            min_dwell: cfg.min_dwell,
            method: match cfg.method {
                Method::Newton => "newton",
                Method::BarzilaiBorwein => "bb",
            }
            .to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    /// Level on each of the `switches + 1` intervals.
    pub levels: Vec<f64>,
    /// Switching angles in `(0, π)`, increasing.
    pub angles: Vec<f64>,
    pub switches: usize,
    pub staircase_valid: bool,
    pub violation: Option<String>,
    pub merged_intervals: usize,
    pub merged_duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub mu: f64,
    pub iterations: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

/// Everything known about one solve. Fields are `None` when the solver
/// failed before producing them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub status: Status,
    pub error: Option<String>,
    pub config: ConfigEcho,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: Option<f64>,
    pub signal: Option<SignalRecord>,
    pub p_opt: Option<Vec<f64>>,
    pub x_terminal: Option<Vec<f64>>,
    pub residual_norm: Option<f64>,
    pub residual_bound: f64,
    pub duality_check: Option<f64>,
    pub objective: Option<f64>,
    /// Closed-form coefficients of the extracted signal.
    pub achieved_a: Option<Vec<f64>>,
    pub achieved_b: Option<Vec<f64>>,
    /// Max-norm distance between achieved and target coefficients.
    pub coefficient_error: Option<f64>,
    pub stages: Vec<StageRecord>,
}

fn violation_text(index: usize, kind: ViolationKind) -> String {
    let what = match kind {
        ViolationKind::NotALevel => "not an admissible level",
        ViolationKind::RepeatedLevel => "repeated level",
        ViolationKind::SkippedLevel => "skipped level",
        ViolationKind::AngleOrder => "angles out of order",
    };
    format!("interval {index}: {what}")
}

impl SolveRecord {
    pub fn from_report(report: &SolveReport, spec: &HarmonicSpec, cfg: &SolverConfig, bound: f64) -> Self {
        let mut record = Self::failed(spec, cfg, bound, None);
        record.converged = report.converged;
        record.iterations = report.iterations;
        record.grad_norm = Some(report.grad_norm);
        record.p_opt = Some(report.p_opt.clone());
        record.x_terminal = Some(report.x_terminal.clone());
        record.residual_norm = Some(report.residual_norm);
        record.duality_check = Some(verify_duality(report, cfg));
        record.objective = Some(report.objective_value);
        record.stages = report
            .stages
            .iter()
            .map(|s| StageRecord {
                mu: s.mu,
                iterations: s.iterations,
                objective: s.objective,
                grad_norm: s.grad_norm,
                converged: s.converged,
            })
            .collect();

        match &report.waveform {
            Ok(extraction) => {
                let check = shm_core::validate_staircase(&extraction.signal, &cfg.levels);
                let violation = match check {
                    StaircaseCheck::Valid => None,
                    StaircaseCheck::Violation { index, kind } => Some(violation_text(index, kind)),
                };
                record.signal = Some(SignalRecord {
                    levels: extraction.signal.levels().to_vec(),
                    angles: extraction.signal.angles().to_vec(),
                    switches: extraction.signal.switches(),
                    staircase_valid: violation.is_none(),
                    violation,
                    merged_intervals: extraction.merges.merged_intervals,
                    merged_duration: extraction.merges.merged_duration,
                });
                let (a, b) = shm_core::fourier_closed_form(&extraction.signal, spec);
                let err = a
                    .iter()
                    .zip(spec.a_target())
                    .chain(b.iter().zip(spec.b_target()))
                    .map(|(got, want)| (got - want).abs())
                    .fold(0.0, f64::max);
                record.achieved_a = Some(a);
                record.achieved_b = Some(b);
                record.coefficient_error = Some(err);
            }
            Err(e) => record.error = Some(e.to_string()),
        }

        record.status = if !report.converged {
            Status::NotConverged
        } else if record.signal.is_none() {
            Status::ExtractionFailed
        } else if !record.signal.as_ref().is_some_and(|s| s.staircase_valid) {
            Status::StaircaseInvalid
        } else if !(report.residual_norm <= bound) {
            Status::ResidualExceedsBound
        } else {
            Status::Ok
        };
        record
    }

    pub fn failed(spec: &HarmonicSpec, cfg: &SolverConfig, bound: f64, error: Option<String>) -> Self {
        Self {
            status: Status::SolverError,
            error,
            config: ConfigEcho::new(spec, cfg),
            converged: false,
            iterations: 0,
            grad_norm: None,
            signal: None,
            p_opt: None,
            x_terminal: None,
            residual_norm: None,
            residual_bound: bound,
            duality_check: None,
            objective: None,
            achieved_a: None,
            achieved_b: None,
            coefficient_error: None,
            stages: Vec::new(),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn render_json(record: &SolveRecord, format: OutputFormat) -> String {
    let mut text = match format {
        OutputFormat::Pretty => serde_json::to_string_pretty(record),
        OutputFormat::Compact => serde_json::to_string(record),
    }
    .expect("result serializes");
    text.push('\n');
    text
}

pub fn write_json(path: &Path, record: &SolveRecord, format: OutputFormat) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(render_json(record, format).as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

pub fn read_json(path: &Path) -> Result<SolveRecord, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

/// 17 significant digits, enough to recover any `f64`.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

/// One row of the long-format sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct SampleRow {
    pub m: f64,
    pub t: f64,
    pub u: f64,
}

/// One row of the per-m sweep summary.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SummaryRow {
    pub m: f64,
    pub status: Status,
    pub converged: bool,
    pub iterations: usize,
    pub switches: Option<usize>,
    pub staircase_valid: bool,
    pub residual_norm: Option<f64>,
    pub residual_bound: f64,
    pub duality_check: Option<f64>,
    pub coefficient_error: Option<f64>,
    pub objective: Option<f64>,
}

impl SummaryRow {
    pub fn new(m: f64, record: &SolveRecord) -> Self {
        Self {
            m,
            status: record.status,
            converged: record.converged,
            iterations: record.iterations,
            switches: record.signal.as_ref().map(|s| s.switches),
            staircase_valid: record.signal.as_ref().is_some_and(|s| s.staircase_valid),
            residual_norm: record.residual_norm,
            residual_bound: record.residual_bound,
            duality_check: record.duality_check,
            coefficient_error: record.coefficient_error,
            objective: record.objective,
        }
    }
}

const SAMPLE_HEADER: [&str; 3] = ["m", "t", "u"];
const SUMMARY_HEADER: [&str; 11] = [
    "m",
    "status",
    "converged",
    "iterations",
    "switches",
    "staircase_valid",
    "residual_norm",
    "residual_bound",
    "duality_check",
    "coefficient_error",
    "objective",
];

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Format(format!("{}: {e}", path.display()))
}

/// Writes `(m, t, u)` rows; `samples` pairs each m with its grid control.
pub fn write_samples(path: &Path, nodes: &[f64], samples: &[(f64, &[f64])], stride: usize) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(SAMPLE_HEADER).map_err(csv_err(path))?;
    for &(m, u) in samples {
        for i in (0..u.len()).step_by(stride) {
            w.write_record([real(m), real(nodes[i]), real(u[i])])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(SUMMARY_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            real(r.m),
            r.status.as_str().to_string(),
            r.converged.to_string(),
            r.iterations.to_string(),
            r.switches.map(|s| s.to_string()).unwrap_or_default(),
            r.staircase_valid.to_string(),
            opt_real(r.residual_norm),
            real(r.residual_bound),
            opt_real(r.duality_check),
            opt_real(r.coefficient_error),
            opt_real(r.objective),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

pub fn read_samples(path: &Path) -> Result<Vec<SampleRow>, CliError> {
    read_csv(path)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, CliError> {
    read_csv(path)
}

/// Default summary path: `<out stem>_summary.csv` beside the sample table.
pub fn summary_path(config: &RunConfig, out: &Path) -> std::path::PathBuf {
    config.summary.clone().unwrap_or_else(|| {
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
        out.with_file_name(format!("{stem}_summary.csv"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 5e-324, f64::MAX, -0.0, std::f64::consts::PI] {
            assert_eq!(real(x).parse::<f64>().unwrap().to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn status_strings_match_serde() {
        for s in [
            Status::Ok,
            Status::NotConverged,
            Status::ExtractionFailed,
            Status::StaircaseInvalid,
            Status::ResidualExceedsBound,
            Status::SolverError,
        ] {
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.as_str()));
        }
    }
}
