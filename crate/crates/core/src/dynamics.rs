//! Harmonic dynamics `ẋ = C(t) u(t)` on `[0, π]` and Fourier coefficients of
//! half-wave symmetric staircase signals.

use std::f64::consts::PI;

use crate::error::{Result, ShmError};
use crate::exec::{self, Execution};
use crate::waveform::StaircaseSignal;

/// Frequency index sets and target coefficients. The initial state of the
/// reversed system is `x_0 = [a_target; b_target]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSpec {
    ea: Vec<u32>,
    eb: Vec<u32>,
    a_target: Vec<f64>,
    b_target: Vec<f64>,
}

impl HarmonicSpec {
    pub fn new(ea: Vec<u32>, eb: Vec<u32>, a_target: Vec<f64>, b_target: Vec<f64>) -> Result<Self> {
        for (name, set) in [("E_a", &ea), ("E_b", &eb)] {
            if let Some(&bad) = set.iter().find(|&&e| e == 0 || e % 2 == 0) {
                return Err(ShmError::InvalidSpec(format!(
                    "{name} contains {bad}; frequency indices must be odd and positive"
                )));
            }
            let mut sorted = set.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(ShmError::InvalidSpec(format!("{name} contains duplicates")));
            }
        }
        if ea.len() != a_target.len() || eb.len() != b_target.len() {
            return Err(ShmError::InvalidSpec(format!(
                "target lengths ({}, {}) do not match frequency counts ({}, {})",
                a_target.len(),
                b_target.len(),
                ea.len(),
                eb.len()
            )));
        }
        if ea.is_empty() && eb.is_empty() {
            return Err(ShmError::InvalidSpec("no frequencies given".into()));
        }
        if let Some(bad) = a_target.iter().chain(&b_target).find(|v| !v.is_finite()) {
            return Err(ShmError::InvalidSpec(format!("target {bad} is not finite")));
        }
        Ok(Self {
            ea,
            eb,
            a_target,
            b_target,
        })
    }

    /// The modulation-index family: `E_a = E_b = freqs`, both targets
    /// `(m, 0, …, 0)`.
    pub fn modulation(freqs: &[u32], m: f64) -> Result<Self> {
        let mut target = vec![0.0; freqs.len()];
        if let Some(first) = target.first_mut() {
            *first = m;
        }
        Self::new(freqs.to_vec(), freqs.to_vec(), target.clone(), target)
    }

    pub fn ea(&self) -> &[u32] {
        &self.ea
    }

    pub fn eb(&self) -> &[u32] {
        &self.eb
    }

    pub fn a_target(&self) -> &[f64] {
        &self.a_target
    }

    pub fn b_target(&self) -> &[f64] {
        &self.b_target
    }

    pub fn dim(&self) -> usize {
        self.ea.len() + self.eb.len()
    }

    /// `x_0`, a-block first.
    pub fn x0(&self) -> Vec<f64> {
        self.a_target.iter().chain(&self.b_target).copied().collect()
    }

    pub fn with_targets(&self, a_target: Vec<f64>, b_target: Vec<f64>) -> Result<Self> {
        Self::new(self.ea.clone(), self.eb.clone(), a_target, b_target)
    }

    /// Writes `C(t)` into `out` (length `dim`).
    pub fn c_into(&self, t: f64, out: &mut [f64]) {
        let scale = -2.0 / PI;
        let na = self.ea.len();
        for (slot, &e) in out[..na].iter_mut().zip(&self.ea) {
            *slot = scale * (e as f64 * t).cos();
        }
        for (slot, &e) in out[na..].iter_mut().zip(&self.eb) {
            *slot = scale * (e as f64 * t).sin();
        }
    }
}

/// Uniform grid on `[0, π]` with composite trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeGrid {
    /// `intervals + 1` nodes `t_i = iπ/intervals`.
    pub fn uniform(intervals: usize) -> Result<Self> {
        if intervals < 2 {
            return Err(ShmError::InvalidConfig(format!(
                "grid needs at least 2 intervals, got {intervals}"
            )));
        }
        let h = PI / intervals as f64;
        let nodes = (0..=intervals)
            .map(|i| if i == intervals { PI } else { i as f64 * h })
            .collect();
        let mut weights = vec![h; intervals + 1];
        weights[0] = 0.5 * h;
        weights[intervals] = 0.5 * h;
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of intervals `G`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn step(&self) -> f64 {
        PI / self.intervals() as f64
    }

    pub(crate) fn check_samples(&self, samples: &[f64]) -> Result<()> {
        if samples.len() != self.len() {
            return Err(ShmError::Shape {
                expected: self.len(),
                actual: samples.len(),
            });
        }
        Ok(())
    }
}

/// `C(t) = [C^a(t); C^b(t)]`.
pub fn eval_c(t: f64, spec: &HarmonicSpec) -> Vec<f64> {
    let mut out = vec![0.0; spec.dim()];
    spec.c_into(t, &mut out);
    out
}

/// Row-major samples of `C(t_i)` for every grid node.
#[derive(Debug, Clone)]
pub struct SampledDynamics {
    dim: usize,
    rows: Vec<f64>,
    weights: Vec<f64>,
}

impl SampledDynamics {
    pub fn new(spec: &HarmonicSpec, grid: &TimeGrid) -> Self {
        let dim = spec.dim();
        let mut rows = vec![0.0; dim * grid.len()];
        for (row, &t) in rows.chunks_exact_mut(dim).zip(grid.nodes()) {
            spec.c_into(t, row);
        }
        Self {
            dim,
            rows,
            weights: grid.weights().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `Cᵀ(t_i) p` at every node.
    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        self.rows
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(p).map(|(c, q)| c * q).sum())
            .collect()
    }

    /// `∫ C(t) u(t) dt` by trapezoid quadrature.
    pub fn integrate(&self, u: &[f64], exec: Execution) -> Vec<f64> {
        let dim = self.dim;
        exec::chunked_reduce(
            exec,
            self.len(),
            || vec![0.0; dim],
            |acc, i| {
                let wu = self.weights[i] * u[i];
                for (a, c) in acc.iter_mut().zip(self.row(i)) {
                    *a += wu * c;
                }
            },
            |total, part| {
                for (a, b) in total.iter_mut().zip(part) {
                    *a += b;
                }
            },
        )
    }
}

/// `x(π) = x_0 + ∫_0^π C(τ) u(τ) dτ` by trapezoid quadrature.
pub fn terminal_state(u_samples: &[f64], spec: &HarmonicSpec, grid: &TimeGrid) -> Result<Vec<f64>> {
    grid.check_samples(u_samples)?;
    let dynamics = SampledDynamics::new(spec, grid);
    let mut x = spec.x0();
    for (xi, d) in x.iter_mut().zip(dynamics.integrate(u_samples, Execution::default())) {
        *xi += d;
    }
    Ok(x)
}

/// Fourier coefficients `(a, b)` of a sampled signal on the frequencies of
/// `spec`, by trapezoid quadrature.
pub fn fourier_quadrature(u_samples: &[f64], spec: &HarmonicSpec, grid: &TimeGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.check_samples(u_samples)?;
    let dynamics = SampledDynamics::new(spec, grid);
    // C carries a factor -2/π, so the coefficients are -∫ C u dt.
    let mut coeffs = dynamics.integrate(u_samples, Execution::default());
    coeffs.iter_mut().for_each(|c| *c = -*c);
    let b = coeffs.split_off(spec.ea().len());
    Ok((coeffs, b))
}

/// Exact Fourier coefficients of a staircase signal by piecewise integration.
pub fn fourier_closed_form(signal: &StaircaseSignal, spec: &HarmonicSpec) -> (Vec<f64>, Vec<f64>) {
    let mut edges = Vec::with_capacity(signal.angles().len() + 2);
    edges.push(0.0);
    edges.extend_from_slice(signal.angles());
    edges.push(PI);

    let coefficient = |j: u32, antiderivative: fn(f64) -> f64| {
        let j = j as f64;
        let sum: f64 = signal
            .levels()
            .iter()
            .zip(edges.windows(2))
            .map(|(s, w)| s * (antiderivative(j * w[1]) - antiderivative(j * w[0])))
            .sum();
        2.0 / PI * sum / j
    };
    let a = spec.ea().iter().map(|&j| coefficient(j, f64::sin)).collect();
    let b = spec.eb().iter().map(|&j| coefficient(j, |x| -x.cos())).collect();
    (a, b)
}

/// `x_0 - [a; b]` from closed-form coefficients of `signal`.
pub fn closed_form_residual(signal: &StaircaseSignal, spec: &HarmonicSpec) -> Vec<f64> {
    let (a, b) = fourier_closed_form(signal, spec);
    spec.x0()
        .iter()
        .zip(a.iter().chain(&b))
        .map(|(target, achieved)| target - achieved)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(ea: &[u32], eb: &[u32], a: &[f64], b: &[f64]) -> HarmonicSpec {
        HarmonicSpec::new(ea.to_vec(), eb.to_vec(), a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(HarmonicSpec::new(vec![2], vec![], vec![0.0], vec![]).is_err());
        assert!(HarmonicSpec::new(vec![0], vec![], vec![0.0], vec![]).is_err());
        assert!(HarmonicSpec::new(vec![1, 1], vec![], vec![0.0, 0.0], vec![]).is_err());
        assert!(HarmonicSpec::new(vec![], vec![], vec![], vec![]).is_err());
        assert!(HarmonicSpec::new(vec![1], vec![], vec![], vec![]).is_err());
        assert!(HarmonicSpec::new(vec![1], vec![1], vec![f64::NAN], vec![0.0]).is_err());
        let s = HarmonicSpec::modulation(&[1, 5, 7], 0.4).unwrap();
        assert_eq!(s.x0(), vec![0.4, 0.0, 0.0, 0.4, 0.0, 0.0]);
    }

    #[test]
    fn c_examples() {
        let s = spec(&[1], &[1], &[0.0], &[0.0]);
        let c = eval_c(0.0, &s);
        assert_eq!(c, vec![-2.0 / PI, 0.0]);
        let c = eval_c(PI / 2.0, &s);
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(c[1], -2.0 / PI, epsilon = 1e-16);
        let c = eval_c(PI / 2.0, &spec(&[5], &[], &[0.0], &[]));
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn c_is_bounded_by_two_over_pi() {
        let s = HarmonicSpec::modulation(&[1, 5, 7, 11, 13], 0.0).unwrap();
        let mut max: f64 = 0.0;
        for i in 0..=1000 {
            let c = eval_c(PI * i as f64 / 1000.0, &s);
            max = c.iter().fold(max, |m, v| m.max(v.abs()));
        }
        assert!(max <= 2.0 / PI + 1e-15);
        assert_abs_diff_eq!(max, 2.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn grid_weights_sum_to_pi() {
        let g = TimeGrid::uniform(1000).unwrap();
        assert_eq!(g.len(), 1001);
        assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), PI, epsilon = 1e-12);
        assert_eq!(g.nodes()[1000], PI);
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(TimeGrid::uniform(1).is_err());
    }

    #[test]
    fn terminal_state_examples() {
        let g = TimeGrid::uniform(20_000).unwrap();
        let s = spec(&[1, 5], &[1, 3], &[0.3, -0.2], &[0.1, 0.7]);
        let zero = vec![0.0; g.len()];
        assert_eq!(terminal_state(&zero, &s, &g).unwrap(), s.x0());

        let ones = vec![1.0; g.len()];
        let square = spec(&[], &[1], &[], &[4.0 / PI]);
        let x = terminal_state(&ones, &square, &g).unwrap();
        assert!(x[0].abs() < 1e-8, "{x:?}");

        let cos = spec(&[1], &[], &[0.0], &[]);
        let x = terminal_state(&ones, &cos, &g).unwrap();
        assert!(x[0].abs() < 1e-12, "{x:?}");

        assert!(matches!(terminal_state(&[0.0; 3], &s, &g), Err(ShmError::Shape { .. })));
    }

    #[test]
    fn closed_form_examples() {
        let s = spec(&[1], &[1, 3], &[0.0], &[0.0, 0.0]);
        let square = StaircaseSignal::constant(1.0);
        let (a, b) = fourier_closed_form(&square, &s);
        assert_abs_diff_eq!(a[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[0], 4.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], 4.0 / (3.0 * PI), epsilon = 1e-15);

        let split = StaircaseSignal::new(vec![1.0, -1.0], vec![PI / 2.0]).unwrap();
        let (a, b) = fourier_closed_form(&split, &s);
        assert_abs_diff_eq!(a[0], 4.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(b[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_examples() {
        let g = TimeGrid::uniform(100_000).unwrap();
        let s = spec(&[1], &[1], &[0.0], &[0.0]);
        let (_, b) = fourier_quadrature(&vec![1.0; g.len()], &s, &g).unwrap();
        assert_abs_diff_eq!(b[0], 4.0 / PI, epsilon = 1e-8);
        let (a, b) = fourier_quadrature(&vec![0.0; g.len()], &s, &g).unwrap();
        assert_eq!((a, b), (vec![0.0], vec![0.0]));
    }

    #[test]
    fn terminal_state_is_targets_minus_coefficients() {
        let g = TimeGrid::uniform(4_000).unwrap();
        let s = spec(&[1, 5, 7], &[1, 3], &[0.5, 0.1, -0.2], &[0.3, 0.0]);
        let u: Vec<f64> = g.nodes().iter().map(|t| (3.0 * t).sin() * 0.8).collect();
        let x = terminal_state(&u, &s, &g).unwrap();
        let (a, b) = fourier_quadrature(&u, &s, &g).unwrap();
        for ((xi, x0), c) in x.iter().zip(s.x0()).zip(a.iter().chain(&b)) {
            assert_abs_diff_eq!(*xi, x0 - c, epsilon = 1e-14);
        }
    }

    #[test]
    fn even_harmonics_vanish_for_half_wave_symmetric_extension() {
        // Extend u to [0, 2π) by u(t + π) = -u(t) and integrate exactly per
        // piece: each piece on [φ_m, φ_{m+1}) reappears negated on the shifted
        // interval, where an even harmonic takes the same values.
        let signal = StaircaseSignal::new(vec![0.0, 1.0, 0.0, -1.0, 0.0], vec![0.3, 1.1, 1.9, 2.5]).unwrap();
        let mut edges = vec![0.0];
        edges.extend_from_slice(signal.angles());
        edges.push(PI);
        for j in [2.0_f64, 4.0, 6.0, 10.0] {
            let mut a = 0.0;
            let mut b = 0.0;
            for (s, w) in signal.levels().iter().zip(edges.windows(2)) {
                for (shift, sign) in [(0.0, 1.0), (PI, -1.0)] {
                    let (lo, hi) = (w[0] + shift, w[1] + shift);
                    a += sign * s * ((j * hi).sin() - (j * lo).sin()) / j;
                    b += sign * s * ((j * lo).cos() - (j * hi).cos()) / j;
                }
            }
            assert!(a.abs() <= 1e-12 && b.abs() <= 1e-12, "j={j}: {a} {b}");
        }
    }
}
