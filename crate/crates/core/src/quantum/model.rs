use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{tensor, tensor_power, ComplexMatrix};
use crate::numeric::{DIM_CAP, FD_STEP, FD_TOL, SOLVER_TOL, STRUCTURAL_TOL};

use super::state::DensityOperator;

/// Box Θ = [lower, upper] ⊂ ℝ^m.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidModel(format!(
                "domain bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(Error::InvalidModel(
                "domain needs finite lower < upper in every coordinate".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// The cube [−a, a]^m.
    pub fn symmetric(m: usize, a: f64) -> Result<Self> {
        Self::new(vec![-a; m], vec![a; m])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| *t >= *l && *t <= *u)
    }

    pub fn clip(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(t, (l, u))| t.clamp(*l, *u))
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .collect()
    }

    /// K = sup_{θ∈Θ} ‖θ‖, attained at a corner of the box.
    pub fn k_bound(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l.abs().max(u.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean diameter of the box.
    pub fn diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn require(&self, theta: &[f64]) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::OutOfDomain(format!(
                "θ = {theta:?} not in [{:?}, {:?}]",
                self.lower, self.upper
            )))
        }
    }

    /// Deterministic Halton points in the interior (5% margin on every side).
    pub fn interior_grid(&self, count: usize) -> Vec<Vec<f64>> {
        const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
        (1..=count as u64)
            .map(|i| {
                (0..self.dim())
                    .map(|j| {
                        let h = radical_inverse(i, PRIMES[j % PRIMES.len()]);
                        self.lower[j] + (self.upper[j] - self.lower[j]) * (0.05 + 0.9 * h)
                    })
                    .collect()
            })
            .collect()
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

pub type StateFn = Arc<dyn Fn(&[f64]) -> ComplexMatrix + Send + Sync>;
pub type DerivFn = Arc<dyn Fn(&[f64], usize) -> ComplexMatrix + Send + Sync>;

/// Smooth family θ ↦ ρ_θ with analytic partial derivatives ∂_iρ_θ.
#[derive(Clone)]
pub struct StateModel {
    name: String,
    dim: usize,
    domain: ParameterDomain,
    state_fn: StateFn,
    deriv_fn: DerivFn,
}

impl fmt::Debug for StateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .finish()
    }
}

/// Worst deviations found by [`StateModel::verify_derivatives`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DerivativeCheck {
    pub points: usize,
    pub max_fd_error: f64,
    pub max_hermitian_defect: f64,
    pub max_trace: f64,
}

/// Points used for the registration-time derivative check.
const REGISTRATION_POINTS: usize = 25;

impl StateModel {
    /// Registers a model; the analytic derivatives are cross-checked against
    /// central finite differences on a 25-point interior grid.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        domain: ParameterDomain,
        state_fn: StateFn,
        deriv_fn: DerivFn,
    ) -> Result<Self> {
        let model = Self::new_unverified(name, dim, domain, state_fn, deriv_fn);
        model.verify_derivatives(REGISTRATION_POINTS)?;
        Ok(model)
    }

    pub(crate) fn new_unverified(
        name: impl Into<String>,
        dim: usize,
        domain: ParameterDomain,
        state_fn: StateFn,
        deriv_fn: DerivFn,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            domain,
            state_fn,
            deriv_fn,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of parameters m.
    pub fn params(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    /// ρ_θ, validated.
    pub fn state(&self, theta: &[f64]) -> Result<DensityOperator> {
        self.domain.require(theta)?;
        DensityOperator::new(self.state_matrix(theta))
    }

    /// ρ_θ without validation or domain checks.
    pub fn state_matrix(&self, theta: &[f64]) -> ComplexMatrix {
        (self.state_fn)(theta)
    }

    /// ∂_iρ_θ.
    pub fn derivative(&self, theta: &[f64], i: usize) -> ComplexMatrix {
        (self.deriv_fn)(theta, i)
    }

    pub fn derivatives(&self, theta: &[f64]) -> Vec<ComplexMatrix> {
        (0..self.params())
            .map(|i| self.derivative(theta, i))
            .collect()
    }

    /// Checks state validity, Hermitian traceless derivatives, and agreement
    /// with central finite differences at `points` interior grid points.
    pub fn verify_derivatives(&self, points: usize) -> Result<DerivativeCheck> {
        let mut check = DerivativeCheck {
            points,
            ..Default::default()
        };
        let widths = self.domain.widths();
        for theta in self.domain.interior_grid(points) {
            let rho = self.state_matrix(&theta);
            if rho.rows() != self.dim || rho.cols() != self.dim {
                return Err(Error::InvalidModel(format!(
                    "{}: state_fn returned {}x{}, expected {}x{}",
                    self.name,
                    rho.rows(),
                    rho.cols(),
                    self.dim,
                    self.dim
                )));
            }
            if let Some(v) = DensityOperator::check(&rho).first() {
                return Err(Error::InvalidModel(format!(
                    "{}: state at {theta:?} violates {} by {:e}",
                    self.name, v.axiom, v.magnitude
                )));
            }
            for i in 0..self.params() {
                let d = self.derivative(&theta, i);
                let step = FD_STEP.min(0.04 * widths[i]);
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus[i] += step;
                minus[i] -= step;
                let fd =
                    (&self.state_matrix(&plus) - &self.state_matrix(&minus)).scale_real(0.5 / step);
                check.max_fd_error = check.max_fd_error.max(d.max_abs_diff(&fd));
                check.max_hermitian_defect =
                    check.max_hermitian_defect.max(d.hermitian_deviation());
                check.max_trace = check.max_trace.max(d.trace().norm());
            }
        }
        if check.max_fd_error > FD_TOL {
            return Err(Error::InvalidModel(format!(
                "{}: analytic derivative differs from finite differences by {:e}",
                self.name, check.max_fd_error
            )));
        }
        if check.max_hermitian_defect > SOLVER_TOL || check.max_trace > SOLVER_TOL {
            return Err(Error::InvalidModel(format!(
                "{}: derivative not Hermitian traceless (defects {:e}, {:e})",
                self.name, check.max_hermitian_defect, check.max_trace
            )));
        }
        Ok(check)
    }
}

/// The n-copy family θ ↦ ρ_θ^⊗n with product-rule derivatives.
pub fn tensor_power_model(model: &StateModel, n: usize) -> Result<StateModel> {
    tensor_power_model_with_cap(model, n, DIM_CAP)
}

pub fn tensor_power_model_with_cap(model: &StateModel, n: usize, cap: usize) -> Result<StateModel> {
    if n == 0 {
        return Err(Error::InvalidOptions("tensor power needs n >= 1".into()));
    }
    if n == 1 {
        return Ok(model.clone());
    }
    let big = (model.dim() as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX);
    if big > cap as u128 {
        return Err(Error::CapacityError(format!(
            "dimension {}^{n} exceeds cap {cap}",
            model.dim()
        )));
    }
    let base_state = model.state_fn.clone();
    let base_deriv = model.deriv_fn.clone();
    let state_fn: StateFn = Arc::new(move |theta: &[f64]| tensor_power(&base_state(theta), n));
    let base_state = model.state_fn.clone();
    let deriv_fn: DerivFn = Arc::new(move |theta: &[f64], i: usize| {
        let rho = base_state(theta);
        let d = base_deriv(theta, i);
        let mut acc: Option<ComplexMatrix> = None;
        for k in 0..n {
            let mut term = tensor_power(&rho, k);
            term = tensor(&term, &d);
            term = tensor(&term, &tensor_power(&rho, n - k - 1));
            acc = Some(match acc {
                None => term,
                Some(a) => &a + &term,
            });
        }
        acc.expect("n >= 2")
    });
    StateModel::new(
        format!("{}^⊗{n}", model.name()),
        big as usize,
        model.domain().clone(),
        state_fn,
        deriv_fn,
    )
}

/// Real symmetric positive semidefinite weight matrix G.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    matrix: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidWeight(format!(
                "G must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::InvalidWeight(format!(
                "G is not symmetric (defect {asym:e})"
            )));
        }
        let min = matrix.clone().symmetric_eigen().eigenvalues.min();
        if min < -STRUCTURAL_TOL {
            return Err(Error::InvalidWeight(format!(
                "G is not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidWeight(
                "G rows have inconsistent lengths".into(),
            ));
        }
        Self::new(DMatrix::from_fn(m, m, |r, c| rows[r][c]))
    }

    pub fn identity(m: usize) -> Self {
        Self {
            matrix: DMatrix::identity(m, m),
        }
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(
            &nalgebra::DVector::from_column_slice(values),
        ))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.matrix * c)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|&x| x == 0.0)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| self.matrix[(r, c)]).collect())
            .collect()
    }
}
