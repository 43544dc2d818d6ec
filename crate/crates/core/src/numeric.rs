//! Numeric policy: every tolerance used by the library lives here.
//!
//! Result files embed [`NumericPolicy::current`] so a run can be reproduced
//! with the exact thresholds that produced it.

use serde::Serialize;

/// Structural tolerance for state/POVM axioms (Hermiticity, PSD, trace, completeness).
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Accuracy target for iterative solvers and algebraic identities.
pub const SOLVER_TOL: f64 = 1e-9;
/// Hermiticity required before an eigendecomposition, relative to max(1, ‖A‖max).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Outcome probabilities at or below this value are treated as zero.
pub const Q_FLOOR: f64 = 1e-12;
/// Probability derivative above which a zero-probability outcome makes Fisher information diverge.
pub const DQ_FLOOR: f64 = 1e-9;
/// Eigenvalue sums below this are treated as outside the support in the SLD equation.
pub const LYAPUNOV_ZERO: f64 = 1e-12;
/// Largest right-hand side component tolerated on a zero eigenvalue sum.
pub const LYAPUNOV_RHS_TOL: f64 = 1e-10;
/// Central finite-difference step for derivative cross-checks.
pub const FD_STEP: f64 = 1e-4;
/// Maximum entry error tolerated between analytic and finite-difference derivatives.
pub const FD_TOL: f64 = 1e-6;
/// Largest Hilbert-space dimension for tensor-power constructions.
pub const DIM_CAP: usize = 64;
/// Default finite penalty returned for singular Fisher matrices inside optimizers.
pub const SINGULAR_PENALTY: f64 = 1e6;
/// Largest condition number of a Fisher matrix (on the support of G) treated as invertible.
pub const FISHER_COND_MAX: f64 = 1e10;
/// Largest condition number of the SLD Fisher matrix accepted by the bound solver.
pub const SLD_COND_MAX: f64 = 1e8;
/// Negative probabilities down to this value are clipped to zero.
pub const NEGATIVE_PROB_TOL: f64 = 1e-10;
/// Largest number of outcome histories enumerated by brute-force routines.
pub const HISTORY_CAP: usize = 1_000_000;

/// Serializable snapshot of the tolerances above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericPolicy {
    pub structural_tol: f64,
    pub solver_tol: f64,
    pub hermitian_tol: f64,
    pub q_floor: f64,
    pub dq_floor: f64,
    pub lyapunov_zero: f64,
    pub lyapunov_rhs_tol: f64,
    pub fd_step: f64,
    pub fd_tol: f64,
    pub dim_cap: usize,
    pub singular_penalty: f64,
    pub fisher_cond_max: f64,
    pub sld_cond_max: f64,
    pub negative_prob_tol: f64,
    pub history_cap: usize,
}

impl NumericPolicy {
    pub const fn current() -> Self {
        Self {
            structural_tol: STRUCTURAL_TOL,
            solver_tol: SOLVER_TOL,
            hermitian_tol: HERMITIAN_TOL,
            q_floor: Q_FLOOR,
            dq_floor: DQ_FLOOR,
            lyapunov_zero: LYAPUNOV_ZERO,
            lyapunov_rhs_tol: LYAPUNOV_RHS_TOL,
            fd_step: FD_STEP,
            fd_tol: FD_TOL,
            dim_cap: DIM_CAP,
            singular_penalty: SINGULAR_PENALTY,
            fisher_cond_max: FISHER_COND_MAX,
            sld_cond_max: SLD_COND_MAX,
            negative_prob_tol: NEGATIVE_PROB_TOL,
            history_cap: HISTORY_CAP,
        }
    }
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self::current()
    }
}
