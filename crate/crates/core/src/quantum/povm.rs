use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{
    eig_herm_unchecked, min_eigenvalue, tensor, trace_product_unchecked, ComplexMatrix, C64,
};
use crate::numeric::{NEGATIVE_PROB_TOL, STRUCTURAL_TOL};

use super::state::DensityOperator;

/// Axioms checked by [`validate_povm`] and [`DensityOperator::check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axiom {
    Dimension,
    Hermitian,
    Positive,
    Completeness,
    UniqueLabels,
    UnitTrace,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axiom::Dimension => "element dimension",
            Axiom::Hermitian => "Hermiticity",
            Axiom::Positive => "positivity",
            Axiom::Completeness => "completeness (sum = I)",
            Axiom::UniqueLabels => "unique labels",
            Axiom::UnitTrace => "unit trace",
        };
        f.write_str(s)
    }
}

/// One violated axiom and its numeric deviation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub axiom: Axiom,
    pub outcome: Option<String>,
    pub magnitude: f64,
}

/// Finite-outcome measurement: labeled positive operators summing to identity.
///
/// Construction through [`Povm::new`] enforces the axioms; [`Povm::unchecked`]
/// exists so invalid candidates can be inspected with [`validate_povm`].
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    labels: Vec<String>,
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(outcomes: Vec<(String, ComplexMatrix)>) -> Result<Self> {
        let p = Self::unchecked(outcomes)?;
        let report = validate_povm(&p);
        if let Some(v) = report.first() {
            return Err(Error::InvalidPovm(format!(
                "{} violated{} (deviation {:e})",
                v.axiom,
                v.outcome
                    .as_ref()
                    .map(|o| format!(" at outcome `{o}`"))
                    .unwrap_or_default(),
                v.magnitude
            )));
        }
        Ok(p)
    }

    /// Builds a POVM without checking the axioms (only that it is nonempty and square).
    pub fn unchecked(outcomes: Vec<(String, ComplexMatrix)>) -> Result<Self> {
        let Some((_, first)) = outcomes.first() else {
            return Err(Error::InvalidPovm("no outcomes".into()));
        };
        let dim = first.rows();
        let (labels, elements): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
        for e in &elements {
            if e.rows() != dim || e.cols() != dim {
                return Err(Error::DimensionError(format!(
                    "POVM element is {}x{}, expected {dim}x{dim}",
                    e.rows(),
                    e.cols()
                )));
            }
        }
        Ok(Self {
            dim,
            labels,
            elements,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &ComplexMatrix {
        &self.elements[k]
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ComplexMatrix)> {
        self.labels.iter().map(String::as_str).zip(&self.elements)
    }

    pub fn relabel(self, f: impl Fn(&str) -> String) -> Self {
        Self {
            dim: self.dim,
            labels: self.labels.iter().map(|l| f(l)).collect(),
            elements: self.elements,
        }
    }

    /// Raw tr(ρE_k) for every outcome, no clipping or checks.
    pub(crate) fn raw_probabilities(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.elements
            .iter()
            .map(|e| trace_product_unchecked(rho, e).re)
            .collect()
    }
}

/// Checks Hermiticity, positivity, completeness and label uniqueness.
pub fn validate_povm(p: &Povm) -> Vec<Violation> {
    let mut out = Vec::new();
    let d = p.dim;
    let mut seen = HashSet::new();
    for label in &p.labels {
        if !seen.insert(label.as_str()) {
            out.push(Violation {
                axiom: Axiom::UniqueLabels,
                outcome: Some(label.clone()),
                magnitude: 1.0,
            });
        }
    }
    let mut sum = ComplexMatrix::zeros(d, d);
    for (label, e) in p.iter() {
        let herm = e.hermitian_deviation();
        if herm > STRUCTURAL_TOL {
            out.push(Violation {
                axiom: Axiom::Hermitian,
                outcome: Some(label.to_string()),
                magnitude: herm,
            });
        }
        let min = min_eigenvalue(e);
        if min < -STRUCTURAL_TOL {
            out.push(Violation {
                axiom: Axiom::Positive,
                outcome: Some(label.to_string()),
                magnitude: -min,
            });
        }
        sum = &sum + e;
    }
    let dev = sum.max_abs_diff(&ComplexMatrix::identity(d));
    if dev > STRUCTURAL_TOL {
        out.push(Violation {
            axiom: Axiom::Completeness,
            outcome: None,
            magnitude: dev,
        });
    }
    out
}

/// Born-rule outcome probabilities q_k = tr(ρE_k).
///
/// Negative values down to −1e−10 are clipped to zero and the vector is
/// renormalized; anything worse is reported as an invalid measurement.
pub fn outcome_distribution(rho: &DensityOperator, p: &Povm) -> Result<Vec<f64>> {
    distribution_of_matrix(rho.matrix(), p)
}

pub(crate) fn distribution_of_matrix(rho: &ComplexMatrix, p: &Povm) -> Result<Vec<f64>> {
    if rho.rows() != p.dim() {
        return Err(Error::DimensionError(format!(
            "state of dimension {} measured by POVM of dimension {}",
            rho.rows(),
            p.dim()
        )));
    }
    let mut q = p.raw_probabilities(rho);
    for (k, x) in q.iter_mut().enumerate() {
        if *x < -NEGATIVE_PROB_TOL {
            return Err(Error::InvalidPovm(format!(
                "outcome `{}` has probability {x:e}",
                p.label(k)
            )));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = q.iter().sum();
    if (total - 1.0).abs() > NEGATIVE_PROB_TOL {
        return Err(Error::InvalidPovm(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    q.iter_mut().for_each(|x| *x /= total);
    Ok(q)
}

/// Product measurement on the tensor product space; labels are joined with "⊗".
pub fn tensor_povm(ps: &[Povm]) -> Povm {
    let mut acc = Povm {
        dim: 1,
        labels: vec![String::new()],
        elements: vec![ComplexMatrix::identity(1)],
    };
    for (i, p) in ps.iter().enumerate() {
        let mut labels = Vec::with_capacity(acc.len() * p.len());
        let mut elements = Vec::with_capacity(acc.len() * p.len());
        for (la, ea) in acc.iter() {
            for (lb, eb) in p.iter() {
                labels.push(if i == 0 {
                    lb.to_string()
                } else {
                    format!("{la}⊗{lb}")
                });
                elements.push(tensor(ea, eb));
            }
        }
        acc = Povm {
            dim: acc.dim * p.dim,
            labels,
            elements,
        };
    }
    acc
}

/// Merges outcomes by summing the elements mapped to the same group label.
///
/// Groups appear in order of first occurrence in `p`.
pub fn coarse_grain(p: &Povm, partition: &HashMap<String, String>) -> Result<Povm> {
    let mut order: Vec<String> = Vec::new();
    let mut sums: HashMap<&str, ComplexMatrix> = HashMap::new();
    for (label, e) in p.iter() {
        let group = partition
            .get(label)
            .ok_or_else(|| Error::PartitionError(label.to_string()))?;
        match sums.get_mut(group.as_str()) {
            Some(s) => *s = &*s + e,
            None => {
                order.push(group.clone());
                sums.insert(group.as_str(), e.clone());
            }
        }
    }
    let outcomes = order
        .iter()
        .map(|g| (g.clone(), sums[g.as_str()].clone()))
        .collect();
    Povm::unchecked(outcomes)
}

/// Rank-one POVM E_k = S^{-1/2} w_k w_k† S^{-1/2} with S = Σ w_k w_k†.
pub fn rank_one_povm(vectors: &[Vec<C64>]) -> Result<Povm> {
    let normalized = normalize_frame(vectors)?;
    Povm::unchecked(
        normalized
            .iter()
            .enumerate()
            .map(|(k, v)| (k.to_string(), ComplexMatrix::outer(v)))
            .collect(),
    )
}

/// Returns S^{-1/2} w_k for every input vector.
pub(crate) fn normalize_frame(vectors: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    let Some(first) = vectors.first() else {
        return Err(Error::InvalidPovm("no vectors".into()));
    };
    let d = first.len();
    let mut s = ComplexMatrix::zeros(d, d);
    for w in vectors {
        if w.len() != d {
            return Err(Error::DimensionError(
                "frame vectors differ in length".into(),
            ));
        }
        for r in 0..d {
            for c in 0..d {
                s[(r, c)] += w[r] * w[c].conj();
            }
        }
    }
    let eig = eig_herm_unchecked(&s);
    let top = eig.values[d - 1];
    if eig.values[0] <= 1e-12 * top.max(1e-300) {
        return Err(Error::InvalidPovm(
            "frame vectors do not span the space".into(),
        ));
    }
    let inv_sqrt = eig.reconstruct_with(|x| 1.0 / x.sqrt());
    Ok(vectors.iter().map(|w| inv_sqrt.apply(w)).collect())
}

/// Random rank-one POVM with `outcomes` elements drawn from Gaussian frame vectors.
pub fn random_povm<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> Result<Povm> {
    let vectors: Vec<Vec<C64>> = (0..outcomes)
        .map(|_| {
            (0..dim)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    rank_one_povm(&vectors)
}

/// Commonly used measurements.
pub mod standard {
    use super::Povm;
    use crate::matrix::{pauli, ComplexMatrix};

    /// Projective measurement in the computational basis, labels "0".."d-1".
    pub fn computational_basis(d: usize) -> Povm {
        Povm::unchecked(
            (0..d)
                .map(|k| {
                    let mut e = ComplexMatrix::zeros(d, d);
                    e[(k, k)] = crate::matrix::ONE;
                    (k.to_string(), e)
                })
                .collect(),
        )
        .expect("nonempty basis")
    }

    /// Eigenbasis of σ_x, σ_y or σ_z as a two-outcome projective measurement
    /// labeled "+", "-". The σ_z case coincides with the computational basis
    /// (labels "0", "1") and is returned as such.
    pub fn pauli_basis(axis: usize) -> Povm {
        if axis == 2 {
            return computational_basis(2);
        }
        let s = &pauli::all()[axis];
        let id = ComplexMatrix::identity(2);
        Povm::unchecked(vec![
            ("+".into(), (&id + s).scale_real(0.5)),
            ("-".into(), (&id - s).scale_real(0.5)),
        ])
        .expect("two outcomes")
    }

    /// Six-outcome Pauli POVM {(I ± σ_a)/6}.
    pub fn pauli6() -> Povm {
        let id = ComplexMatrix::identity(2);
        let names = ["x", "y", "z"];
        let mut out = Vec::with_capacity(6);
        for (s, name) in pauli::all().iter().zip(names) {
            out.push((format!("+{name}"), (&id + s).scale_real(1.0 / 6.0)));
            out.push((format!("-{name}"), (&id - s).scale_real(1.0 / 6.0)));
        }
        Povm::unchecked(out).expect("six outcomes")
    }

    /// The uninformative measurement {I}.
    pub fn trivial(d: usize) -> Povm {
        Povm::unchecked(vec![("I".into(), ComplexMatrix::identity(d))]).expect("one outcome")
    }
}
