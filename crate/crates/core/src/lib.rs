//! Multilevel staircase signals with prescribed low-order Fourier
//! coefficients, computed by convex duality.
//!
//! The Fourier coefficients of a half-wave symmetric control `u: [0, π) → U`
//! are the terminal state of `ẋ = C(t) u(t)`. Penalizing the terminal miss and
//! a piecewise-affine interpolant `L` of `u²` gives a primal problem whose
//! dual lives in `ℝ^N`:
//!
//! ```text
//! J_ε(p) = ∫_0^π L★(Cᵀ(t) p) dt + (ε/2)‖p‖² + ⟨x_0, p⟩
//! ```
//!
//! At the minimizer `u(t) ∈ ∂L★(Cᵀ(t) p)` is a staircase over `U` and
//! `x(π) = −ε p`.
//!
//! ```no_run
//! use shm_core::{minimize, verify_duality, HarmonicSpec, LevelSet, SolverConfig};
//!
//! let spec = HarmonicSpec::modulation(&[1, 5, 7, 11, 13], 0.5)?;
//! let cfg = SolverConfig::new(LevelSet::uniform(3)?, 1e-5);
//! let report = minimize(&spec, &cfg)?;
//! assert!(report.converged && verify_duality(&report, &cfg) < 1e-3);
//! # Ok::<(), shm_core::ShmError>(())
//! ```

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod optimize;
pub mod penalty;
pub mod primal;
pub mod waveform;

pub use dual::{
    dual_gradient, dual_objective, minimize, minimize_from, recover_control, verify_duality, DualProblem, SolveReport,
    SolverConfig, StageLog, DEFAULT_GRID,
};
pub use dynamics::{
    closed_form_residual, eval_c, fourier_closed_form, fourier_quadrature, terminal_state, HarmonicSpec, TimeGrid,
};
pub use error::{Result, ShmError};
pub use exec::Execution;
pub use optimize::Method;
pub use penalty::{
    conjugate_eval, conjugate_subdiff, penalty_eval, smoothed_conjugate_grad, ConjugateTable, Interval, LevelSet,
};
pub use primal::{enumerate_exhaustive, primal_minimize, primal_objective, EnumerationResult, PrimalConfig};
pub use waveform::{
    eval_signal, extract, validate_staircase, Extraction, MergeReport, StaircaseCheck, StaircaseSignal, ViolationKind,
};
