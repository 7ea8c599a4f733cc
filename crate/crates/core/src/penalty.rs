//! Piecewise-affine interpolant of the parabola `u²` over an admissible level
//! set, its convex conjugate, the conjugate's subdifferential and its Moreau
//! envelope.
//!
//! The penalty `L` interpolates `u²` at the levels `u_1 < … < u_L`. Its
//! conjugate `L★` is piecewise affine with branch `k` equal to
//! `u_k ω − u_k²` and kinks at `ω_k = u_k + u_{k+1}`. Outside the tabulated
//! interval `[ω_0, ω_L]` the terminal branches are extended affinely, which is
//! the true conjugate of `L` on all of ℝ.

use crate::error::{Result, ShmError};

/// Uniformly spaced admissible control values `-1 = u_1 < … < u_L = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    levels: Vec<f64>,
}

/// Relative tolerance used when validating user-supplied levels.
const LEVEL_TOL: f64 = 1e-9;

impl LevelSet {
    /// `count` uniformly spaced levels on `[-1, 1]`.
    pub fn uniform(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(ShmError::InvalidLevels(format!(
                "at least two levels are required, got {count}"
            )));
        }
        let n = (count - 1) as f64;
        // (2k - n) / n is exactly symmetric around zero.
        let levels = (0..count).map(|k| (2.0 * k as f64 - n) / n).collect();
        Ok(Self { levels })
    }

    /// Validates an explicit list and returns the canonical uniform set it
    /// describes.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let canonical = Self::uniform(values.len())?;
        for (k, (&given, &expected)) in values.iter().zip(&canonical.levels).enumerate() {
            if !given.is_finite() || (given - expected).abs() > LEVEL_TOL {
                return Err(ShmError::InvalidLevels(format!(
                    "level {k} is {given}, expected {expected} for {} uniform levels on [-1, 1]",
                    values.len()
                )));
            }
        }
        Ok(canonical)
    }

    pub fn values(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Distance `2 / (L - 1)` between adjacent levels.
    pub fn gap(&self) -> f64 {
        2.0 / (self.levels.len() - 1) as f64
    }

    /// Index of the level closest to `u` (lower index on exact ties).
    pub fn nearest_index(&self, u: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (k, &level) in self.levels.iter().enumerate() {
            let d = (u - level).abs();
            if d < best_dist {
                best = k;
                best_dist = d;
            }
        }
        best
    }

    pub fn contains(&self, u: f64) -> bool {
        self.levels.contains(&u)
    }

    /// Index of an exact member, if any.
    pub fn index_of(&self, u: f64) -> Option<usize> {
        self.levels.iter().position(|&level| level == u)
    }

    pub fn conjugate_table(&self) -> ConjugateTable {
        ConjugateTable::new(self)
    }
}

/// Evaluates the piecewise-affine interpolant `L(u)` of `u²`.
pub fn penalty_eval(u: f64, levels: &LevelSet) -> Result<f64> {
    if !(-1.0..=1.0).contains(&u) {
        return Err(ShmError::Domain {
            value: u,
            domain: "[-1, 1]",
        });
    }
    Ok(penalty_unchecked(u, levels.values()))
}

pub(crate) fn penalty_unchecked(u: f64, levels: &[f64]) -> f64 {
    let last = levels.len() - 1;
    if u >= levels[last] {
        return 1.0;
    }
    // k such that u_k <= u < u_{k+1}
    let k = levels.partition_point(|&level| level <= u).saturating_sub(1);
    let (lo, hi) = (levels[k], levels[k + 1]);
    if u == lo {
        return lo * lo;
    }
    (hi + lo) * u - lo * hi
}

/// Tabulated structure of the conjugate `L★`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateTable {
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
    breakpoints: Vec<f64>,
    lower_end: f64,
    upper_end: f64,
}

/// Closed interval `[lo, hi]`, used for subdifferentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Value, derivative and generalized second derivative of the Moreau
/// envelope at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothed {
    pub value: f64,
    pub grad: f64,
    /// `1/μ` inside a smoothed kink, zero on the affine pieces.
    pub curvature: f64,
}

impl ConjugateTable {
    pub fn new(levels: &LevelSet) -> Self {
        let u = levels.values();
        let n = u.len();
        let breakpoints: Vec<f64> = u.windows(2).map(|w| w[0] + w[1]).collect();
        let offset = 4.0 / (n - 1) as f64;
        Self {
            slopes: u.to_vec(),
            intercepts: u.iter().map(|&uk| -uk * uk).collect(),
            lower_end: breakpoints[0] - offset,
            upper_end: breakpoints[n - 2] + offset,
            breakpoints,
        }
    }

    /// Branch slopes `u_1 … u_L`.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Branch intercepts `-u_k²`.
    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    /// Kinks `ω_1 … ω_{L-1}`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Tabulated end points `ω_0` and `ω_L`.
    pub fn extended_ends(&self) -> (f64, f64) {
        (self.lower_end, self.upper_end)
    }

    /// Evaluates branch `k` (zero-based).
    pub fn branch(&self, k: usize, omega: f64) -> f64 {
        self.slopes[k] * omega + self.intercepts[k]
    }

    /// Zero-based index of the affine branch active at `omega`; at a kink the
    /// left branch is returned (both agree there).
    pub fn branch_index(&self, omega: f64) -> usize {
        self.breakpoints.partition_point(|&b| b < omega)
    }

    /// Index of the breakpoint closest to `omega` and its distance.
    pub fn nearest_breakpoint(&self, omega: f64) -> (usize, f64) {
        let k = self.branch_index(omega);
        let mut best = (0, f64::INFINITY);
        for j in [k.saturating_sub(1), k] {
            if let Some(&b) = self.breakpoints.get(j) {
                let d = (omega - b).abs();
                if d < best.1 {
                    best = (j, d);
                }
            }
        }
        best
    }

    pub fn eval(&self, omega: f64) -> f64 {
        self.branch(self.branch_index(omega), omega)
    }

    pub fn subdiff(&self, omega: f64) -> Interval {
        let k = self.branch_index(omega);
        match self.breakpoints.get(k) {
            Some(&b) if b == omega => Interval {
                lo: self.slopes[k],
                hi: self.slopes[k + 1],
            },
            _ => Interval::point(self.slopes[k]),
        }
    }

    /// Moreau envelope `min_v L★(v) + (ω - v)²/(2μ)` with gradient and
    /// curvature, by search over the affine pieces. `mu` must be positive.
    pub fn smoothed(&self, omega: f64, mu: f64) -> Smoothed {
        for (k, &b) in self.breakpoints.iter().enumerate() {
            let (left, right) = (self.slopes[k], self.slopes[k + 1]);
            if omega < b + mu * left {
                return Smoothed {
                    value: left * omega - left * left - 0.5 * mu * left * left,
                    grad: left,
                    curvature: 0.0,
                };
            }
            if omega <= b + mu * right {
                let shift = omega - b;
                return Smoothed {
                    value: left * right + shift * shift / (2.0 * mu),
                    grad: shift / mu,
                    curvature: 1.0 / mu,
                };
            }
        }
        let top = *self.slopes.last().unwrap();
        Smoothed {
            value: top * omega - top * top - 0.5 * mu * top * top,
            grad: top,
            curvature: 0.0,
        }
    }
}

/// `L★(ω)` with affine extension beyond `[ω_0, ω_L]`.
pub fn conjugate_eval(omega: f64, table: &ConjugateTable) -> f64 {
    table.eval(omega)
}

/// `∂L★(ω)`; an interval exactly at a breakpoint, a single level elsewhere.
pub fn conjugate_subdiff(omega: f64, table: &ConjugateTable) -> Interval {
    table.subdiff(omega)
}

/// Moreau envelope of `L★` and its gradient.
pub fn smoothed_conjugate_grad(omega: f64, mu: f64, table: &ConjugateTable) -> Result<(f64, f64)> {
    if !(mu > 0.0) {
        return Err(ShmError::Domain {
            value: mu,
            domain: "(0, inf) for the smoothing parameter",
        });
    }
    let s = table.smoothed(omega, mu);
    Ok((s.value, s.grad))
}

/// Proximal map of `τ·L` restricted to `[-1, 1]`:
/// `argmin_u L(u) + (u - v)²/(2τ)`.
///
/// On `[u_k, u_{k+1}]` the penalty has slope `ω_k`, so the minimizer is
/// either `v - τ ω_k` inside a segment or a level `u_k` whose subdifferential
/// `[ω_{k-1}, ω_k]` (unbounded at the ends of the box) contains `(v - u_k)/τ`.
pub fn penalty_prox(v: f64, tau: f64, levels: &LevelSet, table: &ConjugateTable) -> f64 {
    let u = levels.values();
    let slopes = table.breakpoints();
    for (k, &s) in slopes.iter().enumerate() {
        // Level u_k holds while v <= u_k + τ ω_k.
        if v <= u[k] + tau * s {
            return u[k];
        }
        let candidate = v - tau * s;
        if candidate < u[k + 1] {
            return candidate;
        }
    }
    u[u.len() - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn three() -> LevelSet {
        LevelSet::uniform(3).unwrap()
    }

    #[test]
    fn level_set_construction() {
        let l = LevelSet::uniform(9).unwrap();
        assert_eq!(l.values()[0], -1.0);
        assert_eq!(l.values()[8], 1.0);
        assert_eq!(l.values()[4], 0.0);
        assert_eq!(l.values()[1], -0.75);
        assert!(LevelSet::uniform(1).is_err());
        assert!(LevelSet::from_values(&[-1.0, 0.0, 1.0]).is_ok());
        assert!(LevelSet::from_values(&[-1.0, 0.2, 1.0]).is_err());
        assert!(LevelSet::from_values(&[-1.0, 1.0 / 3.0 - 1e-12 - 2.0 / 3.0, 1.0 / 3.0, 1.0]).is_ok());
    }

    #[test]
    fn penalty_examples() {
        let l = three();
        assert_eq!(penalty_eval(0.5, &l).unwrap(), 0.5);
        assert_eq!(penalty_eval(-1.0, &l).unwrap(), 1.0);
        assert_eq!(penalty_eval(1.0, &l).unwrap(), 1.0);
        assert_eq!(penalty_eval(0.0, &l).unwrap(), 0.0);
        assert!(matches!(penalty_eval(1.5, &l), Err(ShmError::Domain { .. })));
        assert!(penalty_eval(f64::NAN, &l).is_err());
    }

    #[test]
    fn penalty_interpolates_parabola_at_nodes() {
        for count in [2, 3, 5, 9] {
            let l = LevelSet::uniform(count).unwrap();
            for &u in l.values() {
                assert_abs_diff_eq!(penalty_eval(u, &l).unwrap(), u * u, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn penalty_sup_norm_is_one() {
        for count in [2, 3, 5, 9] {
            let l = LevelSet::uniform(count).unwrap();
            let max = (0..=10_000)
                .map(|i| penalty_eval(-1.0 + 2.0 * i as f64 / 10_000.0, &l).unwrap())
                .fold(f64::MIN, f64::max);
            assert_eq!(max, 1.0);
        }
    }

    #[test]
    fn conjugate_examples() {
        let t = three().conjugate_table();
        assert_eq!(conjugate_eval(0.0, &t), 0.0);
        assert_eq!(conjugate_eval(2.0, &t), 1.0);
        assert_eq!(conjugate_eval(-3.0, &t), 2.0);
        assert_eq!(t.breakpoints(), &[-1.0, 1.0]);
        assert_eq!(t.extended_ends(), (-3.0, 3.0));
    }

    #[test]
    fn subdiff_examples() {
        let t = three().conjugate_table();
        assert_eq!(conjugate_subdiff(0.5, &t), Interval::point(0.0));
        assert_eq!(conjugate_subdiff(1.0, &t), Interval { lo: 0.0, hi: 1.0 });
        assert_eq!(conjugate_subdiff(-1.0, &t), Interval { lo: -1.0, hi: 0.0 });
        assert_eq!(conjugate_subdiff(5.0, &t), Interval::point(1.0));
        assert_eq!(conjugate_subdiff(-50.0, &t), Interval::point(-1.0));
    }

    #[test]
    fn continuity_at_breakpoints() {
        for count in [2, 3, 5, 9] {
            let l = LevelSet::uniform(count).unwrap();
            let t = l.conjugate_table();
            let u = l.values();
            for (k, &b) in t.breakpoints().iter().enumerate() {
                let left = t.branch(k, b);
                let right = t.branch(k + 1, b);
                assert_abs_diff_eq!(left, right, epsilon = 4.0 * f64::EPSILON);
                assert_abs_diff_eq!(left, u[k] * u[k + 1], epsilon = 4.0 * f64::EPSILON);
            }
            assert!(t.slopes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn smoothed_examples() {
        let t = three().conjugate_table();
        for mu in [0.4, 0.1, 1e-3] {
            let (v, g) = smoothed_conjugate_grad(0.5, mu, &t).unwrap();
            assert_eq!(v, 0.0);
            assert_eq!(g, 0.0);
        }
        // The smoothed kink at ω = 1 spans [1 + μ·0, 1 + μ·1]; the gradient is
        // 0 at its left end and strictly between the slopes inside.
        let (_, g) = smoothed_conjugate_grad(1.0, 0.1, &t).unwrap();
        assert_eq!(g, 0.0);
        let (_, g) = smoothed_conjugate_grad(1.05, 0.1, &t).unwrap();
        assert!(g > 0.0 && g < 1.0);
        assert_abs_diff_eq!(g, 0.5, epsilon = 1e-12);
        // Bi-level: the kink at 0 is smoothed symmetrically.
        let t2 = LevelSet::uniform(2).unwrap().conjugate_table();
        let (_, g) = smoothed_conjugate_grad(0.0, 0.1, &t2).unwrap();
        assert_eq!(g, 0.0);
        let (_, g) = smoothed_conjugate_grad(0.03, 0.1, &t2).unwrap();
        assert_abs_diff_eq!(g, 0.3, epsilon = 1e-12);
        assert!(smoothed_conjugate_grad(1.0, 0.0, &t).is_err());
        assert!(smoothed_conjugate_grad(1.0, -1.0, &t).is_err());
    }

    #[test]
    fn smoothed_matches_grid_minimization() {
        // Oracle: minimize v -> L★(v) + (ω - v)²/(2μ) on a dense grid.
        let t = three().conjugate_table();
        let (omega, mu) = (3.0, 0.01);
        let mut best = (f64::INFINITY, 0.0);
        let n = 400_000;
        for i in 0..=n {
            let v = 2.0 + 2.0 * i as f64 / n as f64;
            let f = conjugate_eval(v, &t) + (omega - v).powi(2) / (2.0 * mu);
            if f < best.0 {
                best = (f, v);
            }
        }
        let oracle_grad = (omega - best.1) / mu;
        let (value, grad) = smoothed_conjugate_grad(omega, mu, &t).unwrap();
        assert_abs_diff_eq!(oracle_grad, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(grad, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(value, best.0, epsilon = 1e-9);
    }

    #[test]
    fn smoothed_converges_to_conjugate() {
        let t = LevelSet::uniform(5).unwrap().conjugate_table();
        for i in 0..200 {
            let omega = -4.0 + 8.0 * i as f64 / 199.0;
            let exact = t.eval(omega);
            let s = t.smoothed(omega, 1e-9);
            assert!(s.value <= exact + 1e-15);
            assert_abs_diff_eq!(s.value, exact, epsilon = 1e-9);
            let sub = t.subdiff(omega);
            let (_, d) = t.nearest_breakpoint(omega);
            if d > 1e-8 {
                assert!(sub.contains(s.grad));
            }
        }
    }

    #[test]
    fn prox_is_optimal() {
        let l = LevelSet::uniform(5).unwrap();
        let t = l.conjugate_table();
        for (v, tau) in [
            (0.3, 0.1),
            (-2.0, 0.5),
            (2.0, 0.01),
            (0.49, 0.2),
            (0.0, 1.0),
            (0.7, 0.05),
        ] {
            let p = penalty_prox(v, tau, &l, &t);
            let f = |u: f64| penalty_unchecked(u, l.values()) + (u - v).powi(2) / (2.0 * tau);
            let n = 200_000;
            let brute = (0..=n)
                .map(|i| -1.0 + 2.0 * i as f64 / n as f64)
                .fold(
                    (f64::INFINITY, 0.0),
                    |acc, u| if f(u) < acc.0 { (f(u), u) } else { acc },
                );
            assert!(f(p) <= brute.0 + 1e-12, "v={v} tau={tau} prox={p} brute={}", brute.1);
        }
    }
}
