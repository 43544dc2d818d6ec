use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrix::{min_eigenvalue, ComplexMatrix, C64};
use crate::numeric::STRUCTURAL_TOL;

use super::povm::{Axiom, Violation};

/// A positive semidefinite, trace-one operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let report = Self::check(&matrix);
        if let Some(v) = report.first() {
            return Err(Error::InvalidState(format!(
                "{} (deviation {:e})",
                v.axiom, v.magnitude
            )));
        }
        Ok(Self { matrix })
    }

    /// Lists every violated state axiom with its magnitude.
    pub fn check(matrix: &ComplexMatrix) -> Vec<Violation> {
        let mut out = Vec::new();
        if !matrix.is_square() {
            out.push(Violation {
                axiom: Axiom::Dimension,
                outcome: None,
                magnitude: f64::INFINITY,
            });
            return out;
        }
        let herm = matrix.hermitian_deviation();
        if herm > STRUCTURAL_TOL {
            out.push(Violation {
                axiom: Axiom::Hermitian,
                outcome: None,
                magnitude: herm,
            });
        }
        let min = min_eigenvalue(matrix);
        if min < -STRUCTURAL_TOL {
            out.push(Violation {
                axiom: Axiom::Positive,
                outcome: None,
                magnitude: -min,
            });
        }
        let tr = (matrix.trace() - 1.0).norm();
        if tr > STRUCTURAL_TOL {
            out.push(Violation {
                axiom: Axiom::UnitTrace,
                outcome: None,
                magnitude: tr,
            });
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Random state A·A†/tr(A·A†) with A a d×rank complex Gaussian matrix.
    pub fn random<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Self {
        let a = ComplexMatrix::from_fn(dim, rank, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let m = a.matmul(&a.dagger()).expect("square product");
        let t = m.trace().re;
        Self {
            matrix: m.scale_real(1.0 / t).hermitian_part(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::pauli;

    #[test]
    fn accepts_valid_states() {
        assert!(DensityOperator::new(pauli::bloch_state([0.3, -0.2, 0.5])).is_ok());
        assert!(DensityOperator::new(ComplexMatrix::diag_real(&[1.0, 0.0])).is_ok());
        assert_eq!(DensityOperator::maximally_mixed(3).dim(), 3);
    }

    #[test]
    fn rejects_each_axiom() {
        let not_psd = pauli::bloch_state([0.0, 0.0, 1.2]);
        let err = DensityOperator::check(&not_psd);
        assert_eq!(err[0].axiom, Axiom::Positive);
        assert!((err[0].magnitude - 0.1).abs() < 1e-12);

        let bad_trace = ComplexMatrix::diag_real(&[0.5, 0.4]);
        assert_eq!(
            DensityOperator::check(&bad_trace)[0].axiom,
            Axiom::UnitTrace
        );

        let non_herm = ComplexMatrix::from_real(2, 2, &[0.5, 0.1, 0.0, 0.5]).unwrap();
        assert_eq!(DensityOperator::check(&non_herm)[0].axiom, Axiom::Hermitian);
        assert!(matches!(
            DensityOperator::new(non_herm),
            Err(Error::InvalidState(_))
        ));
    }
}
