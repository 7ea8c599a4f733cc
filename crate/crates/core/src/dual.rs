//! Minimization of the dual functional
//!
//! `J_ε(p) = ∫_0^π L★(Cᵀ(t) p) dt + (ε/2)‖p‖² + ⟨x_0, p⟩`
//!
//! over `p ∈ ℝ^N`, control recovery `u(t) ∈ ∂L★(Cᵀ(t) p)` and the check
//! `x_ε(π) = −ε p` at the optimum.
//!
//! `L★` is nonsmooth, so the solver minimizes its Moreau envelope for a
//! decreasing sequence of smoothing parameters, warm-starting each stage from
//! the previous minimizer.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{closed_form_residual, fourier_closed_form, HarmonicSpec, SampledDynamics, TimeGrid};
use crate::error::{Result, ShmError};
use crate::exec::{self, Execution};
use crate::optimize::{self, Evaluation, Method, Objective, StopRule};
use crate::penalty::{ConjugateTable, LevelSet};
use crate::waveform::{extract, Extraction};

/// Default number of grid intervals on `[0, π]`.
pub const DEFAULT_GRID: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub levels: LevelSet,
    pub epsilon: f64,
    pub grid_size: usize,
    /// Strictly decreasing smoothing parameters.
    pub mu_schedule: Vec<f64>,
    /// Gradient tolerance at the final smoothing stage; `None` means `1e-9·N`.
    pub grad_tol: Option<f64>,
    /// Iteration cap per smoothing stage.
    pub max_iter: usize,
    /// Distance in `ω` below which a node counts as sitting on a breakpoint.
    pub snap_tol: f64,
    /// Shortest interval kept by waveform extraction (radians).
    pub min_dwell: f64,
    pub method: Method,
    pub execution: Execution,
}

impl SolverConfig {
    pub fn new(levels: LevelSet, epsilon: f64) -> Self {
        Self {
            levels,
            epsilon,
            grid_size: DEFAULT_GRID,
            mu_schedule: (1..=6).map(|k| 10f64.powi(-k)).collect(),
            grad_tol: None,
            max_iter: 5000,
            snap_tol: 1e-9,
            min_dwell: 1e-4,
            method: Method::default(),
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ShmError::InvalidConfig(msg));
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.grid_size < 2 {
            return bad(format!("grid size must be at least 2, got {}", self.grid_size));
        }
        if self.mu_schedule.is_empty() {
            return bad("smoothing schedule is empty".into());
        }
        if self.mu_schedule.iter().any(|&mu| !(mu > 0.0) || !mu.is_finite()) {
            return bad("smoothing parameters must be positive".into());
        }
        if self.mu_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return bad("smoothing schedule must be strictly decreasing".into());
        }
        if let Some(tol) = self.grad_tol {
            if !(tol > 0.0) {
                return bad(format!("gradient tolerance must be positive, got {tol}"));
            }
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if !(self.snap_tol >= 0.0) || !(self.min_dwell >= 0.0) {
            return bad("snap_tol and min_dwell must be non-negative".into());
        }
        Ok(())
    }

    pub fn grad_tol_for(&self, dim: usize) -> f64 {
        self.grad_tol.unwrap_or(1e-9 * dim as f64)
    }

    pub fn final_mu(&self) -> f64 {
        *self.mu_schedule.last().expect("validated schedule")
    }
}

/// One smoothing stage of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct StageLog {
    pub mu: f64,
    pub iterations: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub p_opt: Vec<f64>,
    /// Recovered control on the grid; every value is a level.
    pub u_samples: Vec<f64>,
    /// Staircase signal extracted from `u_samples`, or why extraction failed.
    pub waveform: std::result::Result<Extraction, ShmError>,
    /// `x(π)` driven by the recovered control (grid quadrature).
    pub x_terminal: Vec<f64>,
    /// `‖x_terminal‖₂`.
    pub residual_norm: f64,
    /// `‖x_terminal + ε p_opt‖₂`.
    pub duality_gap_check: f64,
    /// `J_ε(p_opt)` with the exact conjugate.
    pub objective_value: f64,
    /// Gradient norm of the final smoothed stage.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stages: Vec<StageLog>,
}

impl SolveReport {
    /// Closed-form `(a, b)` of the extracted signal.
    pub fn achieved_coefficients(&self, spec: &HarmonicSpec) -> Option<(Vec<f64>, Vec<f64>)> {
        self.waveform
            .as_ref()
            .ok()
            .map(|w| fourier_closed_form(&w.signal, spec))
    }

    /// `x_0 − [a; b]` of the extracted signal, exact.
    pub fn signal_residual(&self, spec: &HarmonicSpec) -> Option<Vec<f64>> {
        self.waveform
            .as_ref()
            .ok()
            .map(|w| closed_form_residual(&w.signal, spec))
    }
}

/// Discretized dual problem with `C(t)` sampled once.
#[derive(Debug, Clone)]
pub struct DualProblem {
    dynamics: SampledDynamics,
    table: ConjugateTable,
    grid: TimeGrid,
    x0: Vec<f64>,
    epsilon: f64,
    snap_tol: f64,
    execution: Execution,
}

#[derive(Default)]
struct Accumulator {
    value: f64,
    grad: Vec<f64>,
    hessian: Vec<f64>,
}

impl DualProblem {
    pub fn new(spec: &HarmonicSpec, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = TimeGrid::uniform(cfg.grid_size)?;
        Ok(Self {
            dynamics: SampledDynamics::new(spec, &grid),
            table: cfg.levels.conjugate_table(),
            grid,
            x0: spec.x0(),
            epsilon: cfg.epsilon,
            snap_tol: cfg.snap_tol,
            execution: cfg.execution,
        })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn table(&self) -> &ConjugateTable {
        &self.table
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(ShmError::Shape {
                expected: self.dim(),
                actual: p.len(),
            });
        }
        Ok(())
    }

    /// Quadrature of `∫ L★_μ(Cᵀp)` and, on request, its gradient and
    /// generalized Hessian. `mu == 0` uses the exact conjugate (value only).
    fn integrate(&self, p: &[f64], mu: f64, want_grad: bool, want_hessian: bool) -> Accumulator {
        let n = self.dim();
        let dynamics = &self.dynamics;
        let table = &self.table;
        exec::chunked_reduce(
            self.execution,
            dynamics.len(),
            || Accumulator {
                value: 0.0,
                grad: vec![0.0; if want_grad { n } else { 0 }],
                hessian: vec![0.0; if want_hessian { n * n } else { 0 }],
            },
            |acc, i| {
                let c = dynamics.row(i);
                let w = dynamics.weight(i);
                let omega: f64 = c.iter().zip(p).map(|(a, b)| a * b).sum();
                if mu == 0.0 {
                    acc.value += w * table.eval(omega);
                    return;
                }
                let s = table.smoothed(omega, mu);
                acc.value += w * s.value;
                if want_grad && s.grad != 0.0 {
                    let wg = w * s.grad;
                    for (g, cj) in acc.grad.iter_mut().zip(c) {
                        *g += wg * cj;
                    }
                }
                if want_hessian && s.curvature != 0.0 {
                    let wh = w * s.curvature;
                    for (j, cj) in c.iter().enumerate() {
                        let scaled = wh * cj;
                        for (h, ck) in acc.hessian[j * n..(j + 1) * n].iter_mut().zip(c) {
                            *h += scaled * ck;
                        }
                    }
                }
            },
            |total, part| {
                total.value += part.value;
                for (a, b) in total.grad.iter_mut().zip(&part.grad) {
                    *a += b;
                }
                for (a, b) in total.hessian.iter_mut().zip(&part.hessian) {
                    *a += b;
                }
            },
        )
    }

    fn regularization(&self, p: &[f64]) -> f64 {
        let sq: f64 = p.iter().map(|v| v * v).sum();
        let lin: f64 = p.iter().zip(&self.x0).map(|(a, b)| a * b).sum();
        0.5 * self.epsilon * sq + lin
    }

    /// `J_ε` with `L★` replaced by its Moreau envelope; `mu == 0` is exact.
    pub fn objective(&self, p: &[f64], mu: f64) -> Result<f64> {
        self.check_dim(p)?;
        if !(mu >= 0.0) {
            return Err(ShmError::Domain {
                value: mu,
                domain: "[0, inf) for the smoothing parameter",
            });
        }
        let value = self.integrate(p, mu, false, false).value + self.regularization(p);
        if !value.is_finite() {
            return Err(ShmError::Numerical(format!("dual objective is {value}")));
        }
        Ok(value)
    }

    /// `∫ C ∇L★_μ(Cᵀp) dt + εp + x_0`.
    pub fn gradient(&self, p: &[f64], mu: f64) -> Result<Vec<f64>> {
        Ok(self.evaluate(p, mu, false)?.grad.as_slice().to_vec())
    }

    pub fn evaluate(&self, p: &[f64], mu: f64, with_hessian: bool) -> Result<Evaluation> {
        self.check_dim(p)?;
        if !(mu > 0.0) {
            return Err(ShmError::Domain {
                value: mu,
                domain: "(0, inf) for the smoothing parameter",
            });
        }
        let n = self.dim();
        let acc = self.integrate(p, mu, true, with_hessian);
        let grad = DVector::from_iterator(n, (0..n).map(|j| acc.grad[j] + self.epsilon * p[j] + self.x0[j]));
        let hessian = with_hessian.then(|| {
            let mut h = DMatrix::from_row_slice(n, n, &acc.hessian);
            for j in 0..n {
                h[(j, j)] += self.epsilon;
            }
            h
        });
        Ok(Evaluation {
            value: acc.value + self.regularization(p),
            grad,
            hessian,
        })
    }

    /// `u_μ(t_i) = ∇L★_μ(Cᵀ(t_i) p)`.
    pub fn smoothed_control(&self, p: &[f64], mu: f64) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        if !(mu > 0.0) {
            return Err(ShmError::Domain {
                value: mu,
                domain: "(0, inf) for the smoothing parameter",
            });
        }
        Ok(self
            .dynamics
            .project(p)
            .into_iter()
            .map(|omega| self.table.smoothed(omega, mu).grad)
            .collect())
    }

    /// `x_0 + ∫ C u dt` on this problem's grid.
    pub fn terminal_state(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_samples(u)?;
        let mut x = self.x0.clone();
        for (xi, d) in x.iter_mut().zip(self.dynamics.integrate(u, self.execution)) {
            *xi += d;
        }
        Ok(x)
    }

    /// Selects `u(t_i) ∈ ∂L★(Cᵀ(t_i) p)` at every node.
    ///
    /// Nodes farther than `snap_tol` from every breakpoint take the unique
    /// subgradient. A node on a breakpoint `ω_k` takes the level of its
    /// nearest unambiguous neighbor (left on ties) when that level is `u_k`
    /// or `u_{k+1}`, and otherwise the side of `ω_k` on which `Cᵀp` falls.
    pub fn recover_control(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        let slopes = self.table.slopes();
        let omegas = self.dynamics.project(p);
        let resolved: Vec<std::result::Result<f64, usize>> = omegas
            .iter()
            .map(|&omega| {
                let (k, d) = self.table.nearest_breakpoint(omega);
                if d > self.snap_tol {
                    Ok(slopes[self.table.branch_index(omega)])
                } else {
                    Err(k)
                }
            })
            .collect();

        let n = resolved.len();
        let mut u = Vec::with_capacity(n);
        for (i, r) in resolved.iter().enumerate() {
            let k = match *r {
                Ok(level) => {
                    u.push(level);
                    continue;
                }
                Err(k) => k,
            };
            let left = (0..i).rev().find_map(|j| resolved[j].ok().map(|v| (i - j, v)));
            let right = (i + 1..n).find_map(|j| resolved[j].ok().map(|v| (j - i, v)));
            let neighbor = match (left, right) {
                (Some(l), Some(r)) => Some(if r.0 < l.0 { r.1 } else { l.1 }),
                (Some(l), None) => Some(l.1),
                (None, Some(r)) => Some(r.1),
                (None, None) => None,
            };
            let (lo, hi) = (slopes[k], slopes[k + 1]);
            let level = match neighbor {
                Some(v) if v == lo || v == hi => v,
                _ if omegas[i] >= self.table.breakpoints()[k] => hi,
                _ => lo,
            };
            u.push(level);
        }
        Ok(u)
    }
}

struct Stage<'a> {
    problem: &'a DualProblem,
    mu: f64,
}

impl Objective for Stage<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn eval(&self, x: &DVector<f64>, with_hessian: bool) -> Result<Evaluation> {
        self.problem.evaluate(x.as_slice(), self.mu, with_hessian)
    }
}

/// Smoothed dual objective; `mu == 0` evaluates the exact conjugate.
pub fn dual_objective(p: &[f64], spec: &HarmonicSpec, cfg: &SolverConfig, mu: f64) -> Result<f64> {
    DualProblem::new(spec, cfg)?.objective(p, mu)
}

/// Gradient of the smoothed dual objective; `mu` must be positive.
pub fn dual_gradient(p: &[f64], spec: &HarmonicSpec, cfg: &SolverConfig, mu: f64) -> Result<Vec<f64>> {
    DualProblem::new(spec, cfg)?.gradient(p, mu)
}

pub fn recover_control(p: &[f64], spec: &HarmonicSpec, cfg: &SolverConfig) -> Result<Vec<f64>> {
    DualProblem::new(spec, cfg)?.recover_control(p)
}

/// Minimizes `J_ε` from `p = 0`.
pub fn minimize(spec: &HarmonicSpec, cfg: &SolverConfig) -> Result<SolveReport> {
    minimize_from(spec, cfg, &vec![0.0; spec.dim()])
}

/// Minimizes `J_ε` by smoothing continuation starting at `p_start`.
pub fn minimize_from(spec: &HarmonicSpec, cfg: &SolverConfig, p_start: &[f64]) -> Result<SolveReport> {
    let problem = DualProblem::new(spec, cfg)?;
    problem.check_dim(p_start)?;
    let n = problem.dim();
    let grad_tol = cfg.grad_tol_for(n);
    let rule = StopRule {
        grad_tol,
        max_iter: cfg.max_iter,
    };

    let mut p = DVector::from_column_slice(p_start);
    let mut stages = Vec::with_capacity(cfg.mu_schedule.len());
    for &mu in &cfg.mu_schedule {
        let outcome = optimize::minimize(cfg.method, &Stage { problem: &problem, mu }, p, rule)?;
        stages.push(StageLog {
            mu,
            iterations: outcome.iterations,
            objective: outcome.value,
            grad_norm: outcome.grad_norm,
            converged: outcome.converged,
        });
        p = outcome.x;
    }
    let last = stages.last().expect("non-empty schedule").clone();

    let p_opt = p.as_slice().to_vec();
    let u_samples = problem.recover_control(&p_opt)?;
    let waveform = extract(&u_samples, problem.grid(), &cfg.levels, cfg.min_dwell);
    let x_terminal = problem.terminal_state(&u_samples)?;
    let residual_norm = norm(&x_terminal);
    let duality_gap_check = norm(
        &x_terminal
            .iter()
            .zip(&p_opt)
            .map(|(x, q)| x + cfg.epsilon * q)
            .collect::<Vec<_>>(),
    );
    let objective_value = problem.objective(&p_opt, 0.0)?;

    Ok(SolveReport {
        p_opt,
        u_samples,
        waveform,
        x_terminal,
        residual_norm,
        duality_gap_check,
        objective_value,
        grad_norm: last.grad_norm,
        iterations: stages.iter().map(|s| s.iterations).sum(),
        converged: last.converged,
        stages,
    })
}

/// `‖x(π) + ε p‖ / max(1, ε‖p‖)`; small at a converged optimum.
pub fn verify_duality(report: &SolveReport, cfg: &SolverConfig) -> f64 {
    let scale = (cfg.epsilon * norm(&report.p_opt)).max(1.0);
    let gap = norm(
        &report
            .x_terminal
            .iter()
            .zip(&report.p_opt)
            .map(|(x, q)| x + cfg.epsilon * q)
            .collect::<Vec<_>>(),
    );
    gap / scale
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
