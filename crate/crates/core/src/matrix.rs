//! Dense complex matrices and the handful of Hermitian primitives the rest of
//! the crate is built on.
//!
//! Storage is row-major. Eigendecompositions are delegated to nalgebra; all
//! other operations are implemented directly since dimensions stay small
//! (at most 64 for tensor powers).

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::{HERMITIAN_TOL, LYAPUNOV_RHS_TOL, LYAPUNOV_ZERO};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::DimensionError(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_row_major(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let d = values.len();
        let mut m = Self::zeros(d, d);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * d + i] = C64::new(v, 0.0);
        }
        m
    }

    /// The rank-one operator |v⟩⟨v|.
    pub fn outer(v: &[C64]) -> Self {
        let d = v.len();
        Self::from_fn(d, d, |r, c| v[r] * v[c].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// max_{jk} |A_jk − conj(A_kj)|; infinite for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev = 0.0f64;
        for r in 0..n {
            for c in r..n {
                dev = dev.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// (A + A†)/2.
    pub fn hermitian_part(&self) -> Self {
        let n = self.rows;
        Self::from_fn(n, n, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionError(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Applies the matrix to a vector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// ⟨v|A|v⟩.
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let av = self.apply(v);
        v.iter().zip(&av).map(|(a, b)| a.conj() * b).sum()
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionError(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "add")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "sub")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_add(rhs).expect("matrix add: shape mismatch")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_sub(rhs).expect("matrix sub: shape mismatch")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix mul: shape mismatch")
    }
}

/// Pauli matrices and friends.
pub mod pauli {
    use super::{ComplexMatrix, C64, I, ONE, ZERO};

    pub fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_row_major(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap()
    }

    pub fn sigma_y() -> ComplexMatrix {
        ComplexMatrix::from_row_major(2, 2, vec![ZERO, -I, I, ZERO]).unwrap()
    }

    pub fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_row_major(2, 2, vec![ONE, ZERO, ZERO, -ONE]).unwrap()
    }

    /// σ_x, σ_y, σ_z in that order.
    pub fn all() -> [ComplexMatrix; 3] {
        [sigma_x(), sigma_y(), sigma_z()]
    }

    /// (I + b·σ)/2 for a real Bloch vector b.
    pub fn bloch_state(b: [f64; 3]) -> ComplexMatrix {
        let [x, y, z] = b;
        ComplexMatrix::from_row_major(
            2,
            2,
            vec![
                C64::new((1.0 + z) / 2.0, 0.0),
                C64::new(x / 2.0, -y / 2.0),
                C64::new(x / 2.0, y / 2.0),
                C64::new((1.0 - z) / 2.0, 0.0),
            ],
        )
        .unwrap()
    }
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column k is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// V·f(Λ)·V†.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, n, |r, c| {
            (0..n).map(|k| v[(r, k)] * v[(c, k)].conj() * fv[k]).sum()
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|x| x)
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.values.len())
            .map(|r| self.vectors[(r, k)])
            .collect()
    }
}

fn require_hermitian(a: &ComplexMatrix, tol: f64, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidOperator(format!(
            "{what}: {}x{} matrix is not square",
            a.rows(),
            a.cols()
        )));
    }
    let dev = a.hermitian_deviation();
    if dev > tol {
        return Err(Error::InvalidOperator(format!(
            "{what}: Hermiticity defect {dev:e} exceeds {tol:e}"
        )));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eig_herm(a: &ComplexMatrix) -> Result<HermitianEigen> {
    require_hermitian(a, HERMITIAN_TOL * a.max_abs().max(1.0), "eig_herm")?;
    Ok(eig_herm_unchecked(a))
}

/// Eigendecomposition of the Hermitian part of `a`, skipping validation.
pub(crate) fn eig_herm_unchecked(a: &ComplexMatrix) -> HermitianEigen {
    let n = a.rows();
    let eig = a.hermitian_part().to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// True iff the smallest eigenvalue of `a` is at least −tol.
pub fn is_psd(a: &ComplexMatrix, tol: f64) -> Result<bool> {
    require_hermitian(a, tol.max(HERMITIAN_TOL), "is_psd")?;
    Ok(min_eigenvalue(a) >= -tol)
}

pub(crate) fn min_eigenvalue(a: &ComplexMatrix) -> f64 {
    eig_herm_unchecked(a).values[0]
}

/// Kronecker product A ⊗ B.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    let oc = ac * bc;
    for i in 0..ar {
        for j in 0..ac {
            let x = a[(i, j)];
            for k in 0..br {
                let row = (i * br + k) * oc + j * bc;
                for l in 0..bc {
                    out.data[row + l] = x * b[(k, l)];
                }
            }
        }
    }
    out
}

/// A^⊗n, with A^⊗0 the 1×1 identity.
pub fn tensor_power(a: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(1);
    for _ in 0..n {
        out = tensor(&out, a);
    }
    out
}

/// tr(A·B) without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    if a.cols() != b.rows() || a.rows() != b.cols() {
        return Err(Error::DimensionError(format!(
            "trace_product of {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(trace_product_unchecked(a, b))
}

#[inline]
pub(crate) fn trace_product_unchecked(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let (n, m) = (a.rows(), a.cols());
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..m {
            acc += a.data[i * m + k] * b.data[k * n + i];
        }
    }
    acc
}

/// Solves (L·ρ + ρ·L)/2 = X for Hermitian L in the eigenbasis of ρ.
///
/// Components with λ_j + λ_k ≤ 1e−12 are set to zero when X vanishes there;
/// otherwise the derivative leaves the support of ρ and `SingularSupport` is
/// returned.
pub fn lyapunov_solve(rho: &ComplexMatrix, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    require_hermitian(
        rho,
        HERMITIAN_TOL * rho.max_abs().max(1.0),
        "lyapunov_solve rho",
    )?;
    require_hermitian(
        x,
        HERMITIAN_TOL * x.max_abs().max(1.0),
        "lyapunov_solve rhs",
    )?;
    if rho.rows() != x.rows() {
        return Err(Error::DimensionError(format!(
            "lyapunov_solve: rho is {}x{}, rhs is {}x{}",
            rho.rows(),
            rho.cols(),
            x.rows(),
            x.cols()
        )));
    }
    let n = rho.rows();
    let eig = eig_herm_unchecked(rho);
    let u = &eig.vectors;
    let xt = u.dagger().matmul(x)?.matmul(u)?;
    let mut lt = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let s = eig.values[j] + eig.values[k];
            let xjk = xt[(j, k)];
            if s <= LYAPUNOV_ZERO {
                if xjk.norm() > LYAPUNOV_RHS_TOL {
                    return Err(Error::SingularSupport {
                        row: j,
                        col: k,
                        magnitude: xjk.norm(),
                    });
                }
            } else {
                lt[(j, k)] = xjk * (2.0 / s);
            }
        }
    }
    Ok(u.matmul(&lt)?.matmul(&u.dagger())?.hermitian_part())
}

#[cfg(test)]
mod tests {
    use super::pauli::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let a = ComplexMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        a.hermitian_part()
    }

    #[test]
    fn psd_examples() {
        assert!(is_psd(&ComplexMatrix::identity(2), 1e-10).unwrap());
        assert!(!is_psd(&ComplexMatrix::diag_real(&[1.0, -0.5]), 1e-10).unwrap());
        let half = (&ComplexMatrix::identity(2) + &sigma_x()).scale_real(0.5);
        assert!(is_psd(&half, 1e-10).unwrap());
        let e = eig_herm(&half).unwrap();
        assert!((e.values[0]).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn psd_rejects_non_hermitian() {
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(is_psd(&a, 1e-10), Err(Error::InvalidOperator(_))));
        let b = ComplexMatrix::zeros(2, 3);
        assert!(matches!(is_psd(&b, 1e-10), Err(Error::InvalidOperator(_))));
        assert!(matches!(eig_herm(&a), Err(Error::InvalidOperator(_))));
    }

    #[test]
    fn tensor_examples() {
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(tensor(&a, &ComplexMatrix::identity(1)), a);
        let zz = tensor(&sigma_z(), &sigma_z());
        assert_eq!(zz, ComplexMatrix::diag_real(&[1.0, -1.0, -1.0, 1.0]));
        let big = tensor(&ComplexMatrix::identity(3), &ComplexMatrix::identity(2));
        assert_eq!((big.rows(), big.cols()), (6, 6));
    }

    #[test]
    fn eig_examples() {
        let e = eig_herm(&sigma_z()).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);
        let e = eig_herm(&ComplexMatrix::identity(5)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(4, &mut rng);
        let e = eig_herm(&a).unwrap();
        assert!(e.reconstruct().max_abs_diff(&a) <= 1e-9);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn trace_product_examples() {
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        assert!((trace_product(&half, &ComplexMatrix::identity(2)).unwrap() - ONE).norm() < 1e-15);
        assert!(trace_product(&sigma_x(), &sigma_y()).unwrap().norm() < 1e-15);
        let rho = pauli::bloch_state([0.6, 0.0, 0.0]);
        let e_plus = (&ComplexMatrix::identity(2) + &sigma_x()).scale_real(0.5);
        let t = trace_product(&rho, &e_plus).unwrap();
        assert!((t.re - 0.8).abs() < 1e-15 && t.im.abs() < 1e-15);
        assert!(matches!(
            trace_product(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3)),
            Err(Error::DimensionError(_))
        ));
    }

    #[test]
    fn lyapunov_examples() {
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        let l = lyapunov_solve(&half, &sigma_z().scale_real(0.5)).unwrap();
        assert!(l.max_abs_diff(&sigma_z()) < 1e-12);

        let l = lyapunov_solve(&half, &ComplexMatrix::zeros(2, 2)).unwrap();
        assert!(l.max_abs() < 1e-15);

        let rho = ComplexMatrix::diag_real(&[0.9, 0.1]);
        let l = lyapunov_solve(&rho, &sigma_x().scale_real(0.5)).unwrap();
        assert!(l.max_abs_diff(&sigma_x()) < 1e-12);
    }

    #[test]
    fn lyapunov_singular_support() {
        let pure = ComplexMatrix::diag_real(&[1.0, 0.0]);
        // derivative inside the support block: consistent
        let l = lyapunov_solve(&pure, &sigma_x().scale_real(0.5)).unwrap();
        let back = (&(&l * &pure) + &(&pure * &l)).scale_real(0.5);
        assert!(back.max_abs_diff(&sigma_x().scale_real(0.5)) < 1e-12);
        // population of the null space: inconsistent
        let x = ComplexMatrix::diag_real(&[0.0, 0.5]);
        assert!(matches!(
            lyapunov_solve(&pure, &x),
            Err(Error::SingularSupport { .. })
        ));
    }

    #[test]
    fn reconstruction_property_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let d = rng.random_range(1..=8);
            let a = random_hermitian(d, &mut rng);
            let e = eig_herm(&a).unwrap();
            let scale = a.frobenius_norm().max(1e-300);
            assert!(e.reconstruct().max_abs_diff(&a) <= 1e-9 * scale);
            let gram = e.vectors.dagger().matmul(&e.vectors).unwrap();
            assert!(gram.max_abs_diff(&ComplexMatrix::identity(d)) <= 1e-9);
        }
    }

    #[test]
    fn lyapunov_recovers_rhs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let d = rng.random_range(2..=5);
            let a = ComplexMatrix::from_fn(d, d, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let mut rho = a.matmul(&a.dagger()).unwrap();
            let t = rho.trace().re;
            rho = rho.scale_real(1.0 / t);
            let x = random_hermitian(d, &mut rng);
            let l = lyapunov_solve(&rho, &x).unwrap();
            let back = (&(&l * &rho) + &(&rho * &l)).scale_real(0.5);
            assert!(back.max_abs_diff(&x) <= 1e-9 * x.frobenius_norm().max(1.0));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cmat(d: usize) -> impl Strategy<Value = ComplexMatrix> {
            proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), d * d).prop_map(move |v| {
                ComplexMatrix::from_row_major(
                    d,
                    d,
                    v.into_iter().map(|(a, b)| C64::new(a, b)).collect(),
                )
                .unwrap()
            })
        }

        proptest! {
            #[test]
            fn tensor_is_associative(a in cmat(2), b in cmat(2), c in cmat(3)) {
                let left = tensor(&tensor(&a, &b), &c);
                let right = tensor(&a, &tensor(&b, &c));
                prop_assert!(left.max_abs_diff(&right) <= 1e-12);
            }

            #[test]
            fn trace_product_conjugate_symmetry(a in cmat(3), b in cmat(3)) {
                let lhs = trace_product(&a, &b).unwrap();
                let rhs = trace_product(&b.dagger(), &a.dagger()).unwrap().conj();
                prop_assert!((lhs - rhs).norm() <= 1e-12);
                let ha = a.hermitian_part();
                let hb = b.hermitian_part();
                prop_assert!(trace_product(&ha, &hb).unwrap().im.abs() <= 1e-12);
            }
        }
    }
}
