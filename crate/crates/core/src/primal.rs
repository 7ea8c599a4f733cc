//! Primal-side reference solvers for
//!
//! `F_ε(u) = (1/2ε)‖x(π)‖² + ∫_0^π L(u(t)) dt`,  `u(t) ∈ [−1, 1]`,
//!
//! used to cross-check the dual method: accelerated proximal gradient on the
//! sampled control, and exhaustive search over piecewise-constant controls on
//! a few equal cells.

use nalgebra::DMatrix;

use crate::dynamics::{HarmonicSpec, SampledDynamics, TimeGrid};
use crate::error::{Result, ShmError};
use crate::exec::{self, Execution};
use crate::penalty::{penalty_prox, penalty_unchecked, LevelSet};

/// Largest number of assignments `enumerate_exhaustive` will visit.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalConfig {
    pub levels: LevelSet,
    pub epsilon: f64,
    pub grid_size: usize,
    /// Proximal-gradient step; `None` uses the inverse Lipschitz constant.
    pub step: Option<f64>,
    pub max_iter: usize,
    /// Stop when the weighted fixed-point residual `‖u⁺ − y‖/step` falls
    /// below this value.
    pub tol: f64,
    /// Number of equal time cells for exhaustive search.
    pub enum_grid: usize,
    pub execution: Execution,
}

impl PrimalConfig {
    pub fn new(levels: LevelSet, epsilon: f64, grid_size: usize) -> Self {
        Self {
            levels,
            epsilon,
            grid_size,
            step: None,
            max_iter: 200_000,
            tol: 1e-7,
            enum_grid: 8,
            execution: Execution::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(ShmError::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if let Some(step) = self.step {
            if !(step > 0.0) {
                return Err(ShmError::InvalidConfig(format!("step must be positive, got {step}")));
            }
        }
        if self.enum_grid == 0 {
            return Err(ShmError::InvalidConfig("enum_grid must be positive".into()));
        }
        Ok(())
    }
}

struct Primal {
    dynamics: SampledDynamics,
    x0: Vec<f64>,
    epsilon: f64,
    execution: Execution,
}

impl Primal {
    fn new(spec: &HarmonicSpec, cfg: &PrimalConfig) -> Result<(Self, TimeGrid)> {
        cfg.validate()?;
        let grid = TimeGrid::uniform(cfg.grid_size)?;
        let primal = Self {
            dynamics: SampledDynamics::new(spec, &grid),
            x0: spec.x0(),
            epsilon: cfg.epsilon,
            execution: cfg.execution,
        };
        Ok((primal, grid))
    }

    fn terminal(&self, u: &[f64]) -> Vec<f64> {
        let mut x = self.x0.clone();
        for (xi, d) in x.iter_mut().zip(self.dynamics.integrate(u, self.execution)) {
            *xi += d;
        }
        x
    }

    fn objective(&self, u: &[f64], levels: &[f64]) -> f64 {
        let x = self.terminal(u);
        let penalty: f64 = u
            .iter()
            .enumerate()
            .map(|(i, &v)| self.dynamics.weight(i) * penalty_unchecked(v, levels))
            .sum();
        x.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.epsilon) + penalty
    }

    /// Largest eigenvalue of `Σ w_i C_i C_iᵀ / ε`.
    fn lipschitz(&self) -> f64 {
        let n = self.dynamics.dim();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..self.dynamics.len() {
            let c = self.dynamics.row(i);
            let w = self.dynamics.weight(i);
            for j in 0..n {
                for k in 0..n {
                    m[(j, k)] += w * c[j] * c[k];
                }
            }
        }
        m.symmetric_eigenvalues().max() / self.epsilon
    }
}

/// Quadrature value of `F_ε` for a sampled control.
pub fn primal_objective(u_samples: &[f64], spec: &HarmonicSpec, cfg: &PrimalConfig) -> Result<f64> {
    let (primal, grid) = Primal::new(spec, cfg)?;
    grid.check_samples(u_samples)?;
    if let Some(&bad) = u_samples.iter().find(|u| !(-1.0..=1.0).contains(*u)) {
        return Err(ShmError::Domain {
            value: bad,
            domain: "[-1, 1]",
        });
    }
    Ok(primal.objective(u_samples, cfg.levels.values()))
}

#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub u_samples: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes the sampled `F_ε` by FISTA with adaptive restart. The box and
/// the kinks of `L` are handled exactly through the proximal map of `L`.
pub fn primal_minimize(spec: &HarmonicSpec, cfg: &PrimalConfig) -> Result<PrimalSolution> {
    let (primal, grid) = Primal::new(spec, cfg)?;
    let levels = cfg.levels.values();
    let table = cfg.levels.conjugate_table();
    let n_nodes = grid.len();
    let step = cfg.step.unwrap_or_else(|| 1.0 / primal.lipschitz());

    let mut u = vec![0.0; n_nodes];
    let mut y = u.clone();
    let mut momentum: f64 = 1.0;
    let mut value = primal.objective(&u, levels);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let x = primal.terminal(&y);
        let next: Vec<f64> = (0..n_nodes)
            .map(|i| {
                let c = primal.dynamics.row(i);
                let g: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / cfg.epsilon;
                penalty_prox(y[i] - step * g, step, &cfg.levels, &table)
            })
            .collect();
        let residual = (0..n_nodes)
            .map(|i| primal.dynamics.weight(i) * (next[i] - y[i]).powi(2))
            .sum::<f64>()
            .sqrt()
            / step;
        let next_value = primal.objective(&next, levels);
        if !next_value.is_finite() {
            return Err(ShmError::Numerical(format!("primal objective is {next_value}")));
        }
        if next_value > value {
            // Restart: drop momentum and retry from the last iterate.
            y.clone_from(&u);
            momentum = 1.0;
            continue;
        }
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        y = next.iter().zip(&u).map(|(a, b)| a + beta * (a - b)).collect();
        u = next;
        value = next_value;
        momentum = next_momentum;
        if residual <= cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(PrimalSolution {
        u_samples: u,
        objective: value,
        iterations,
        converged,
    })
}

/// Cell of node `i` when `[0, π]` is split into `cells` equal pieces
/// (closing node in the last cell).
pub fn node_cell(i: usize, intervals: usize, cells: usize) -> usize {
    ((i * cells) / intervals).min(cells - 1)
}

/// Expands one level per cell into grid samples.
pub fn cell_samples(assignment: &[f64], grid: &TimeGrid) -> Vec<f64> {
    let g = grid.intervals();
    (0..grid.len())
        .map(|i| assignment[node_cell(i, g, assignment.len())])
        .collect()
}

/// Quadrature-weighted average of a sampled control over each cell.
pub fn cell_average(u_samples: &[f64], grid: &TimeGrid, cells: usize) -> Result<Vec<f64>> {
    grid.check_samples(u_samples)?;
    let g = grid.intervals();
    let mut sums = vec![0.0; cells];
    let mut weights = vec![0.0; cells];
    for (i, (&u, &w)) in u_samples.iter().zip(grid.weights()).enumerate() {
        let c = node_cell(i, g, cells);
        sums[c] += w * u;
        weights[c] += w;
    }
    Ok(sums.iter().zip(&weights).map(|(s, w)| s / w).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    /// One level per cell.
    pub assignment: Vec<f64>,
    pub objective: f64,
    pub visited: u128,
}

/// Evaluates `F_ε` for every assignment of a level to each of `enum_grid`
/// equal cells on the fine grid and returns the best. Ties go to the
/// lexicographically smallest assignment (by level index, first cell most
/// significant).
pub fn enumerate_exhaustive(spec: &HarmonicSpec, cfg: &PrimalConfig) -> Result<EnumerationResult> {
    let (primal, grid) = Primal::new(spec, cfg)?;
    let levels = cfg.levels.values();
    let n_levels = levels.len();
    let cells = cfg.enum_grid;
    let total = (n_levels as u128)
        .checked_pow(cells as u32)
        .filter(|&t| t <= ENUMERATION_BUDGET)
        .ok_or(ShmError::Budget {
            assignments: (n_levels as u128).saturating_pow(cells as u32),
            budget: ENUMERATION_BUDGET,
        })?;
    let total = total as usize;

    // Per-cell ∫ C dt and cell length on the fine grid.
    let dim = primal.dynamics.dim();
    let mut cell_c = vec![vec![0.0; dim]; cells];
    let mut cell_len = vec![0.0; cells];
    for i in 0..grid.len() {
        let c = node_cell(i, grid.intervals(), cells);
        let w = primal.dynamics.weight(i);
        for (a, b) in cell_c[c].iter_mut().zip(primal.dynamics.row(i)) {
            *a += w * b;
        }
        cell_len[c] += w;
    }
    // Contribution of level k in cell c, tabulated.
    let contrib: Vec<Vec<Vec<f64>>> = cell_c
        .iter()
        .map(|cc| levels.iter().map(|&v| cc.iter().map(|a| v * a).collect()).collect())
        .collect();
    let pen: Vec<Vec<f64>> = cell_len
        .iter()
        .map(|&len| levels.iter().map(|&v| len * penalty_unchecked(v, levels)).collect())
        .collect();

    let evaluate = |index: usize, digits: &mut [usize], x: &mut [f64]| {
        let mut rest = index;
        for d in digits.iter_mut().rev() {
            *d = rest % n_levels;
            rest /= n_levels;
        }
        x.copy_from_slice(&primal.x0);
        let mut penalty = 0.0;
        for (c, &k) in digits.iter().enumerate() {
            for (xi, a) in x.iter_mut().zip(&contrib[c][k]) {
                *xi += a;
            }
            penalty += pen[c][k];
        }
        x.iter().map(|v| v * v).sum::<f64>() / (2.0 * cfg.epsilon) + penalty
    };

    const BLOCK: usize = 4096;
    let blocks = total.div_ceil(BLOCK);
    let bests = exec::map_indices(cfg.execution, blocks, |b| {
        let mut digits = vec![0; cells];
        let mut x = vec![0.0; dim];
        let mut best = (f64::INFINITY, usize::MAX);
        for index in b * BLOCK..((b + 1) * BLOCK).min(total) {
            let value = evaluate(index, &mut digits, &mut x);
            if value < best.0 {
                best = (value, index);
            }
        }
        best
    });
    let (objective, index) = bests.into_iter().fold(
        (f64::INFINITY, usize::MAX),
        |acc, cur| if cur.0 < acc.0 { cur } else { acc },
    );

    let mut digits = vec![0; cells];
    let mut rest = index;
    for d in digits.iter_mut().rev() {
        *d = rest % n_levels;
        rest /= n_levels;
    }
    Ok(EnumerationResult {
        assignment: digits.iter().map(|&k| levels[k]).collect(),
        objective,
        visited: total as u128,
    })
}
