//! Fisher information of measurements and of the state family itself.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{lyapunov_solve, tensor, trace_product_unchecked, ComplexMatrix};
use crate::numeric::{DQ_FLOOR, HISTORY_CAP, Q_FLOOR};
use crate::quantum::{tensor_power_model, Povm, StateModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FisherSource {
    /// J^M_θ of the outcome distribution of a POVM.
    Povm,
    /// SLD quantum Fisher information.
    Sld,
}

/// Symmetric PSD m×m Fisher matrix evaluated at θ.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub matrix: DMatrix<f64>,
    pub theta: Vec<f64>,
    pub source: FisherSource,
}

impl FisherMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Smallest eigenvalue of `other − self`; nonnegative iff self ≼ other.
    pub fn loewner_gap(&self, other: &FisherMatrix) -> f64 {
        (&other.matrix - &self.matrix)
            .symmetric_eigen()
            .eigenvalues
            .min()
    }

    /// self ≼ other in PSD order, up to `slack`.
    pub fn is_dominated_by(&self, other: &FisherMatrix, slack: f64) -> bool {
        self.loewner_gap(other) >= -slack
    }

    pub fn scaled(&self, c: f64) -> FisherMatrix {
        FisherMatrix {
            matrix: &self.matrix * c,
            theta: self.theta.clone(),
            source: self.source,
        }
    }

    pub fn max_abs_diff(&self, other: &FisherMatrix) -> f64 {
        (&self.matrix - &other.matrix).abs().max()
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for r in 0..n {
        for c in r + 1..n {
            let v = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
}

/// Probabilities q_k and derivatives ∂_i q_k of every outcome at θ.
pub(crate) fn outcome_sensitivities(
    rho: &ComplexMatrix,
    derivs: &[ComplexMatrix],
    p: &Povm,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let q = p.raw_probabilities(rho);
    let dq = p
        .elements()
        .iter()
        .map(|e| {
            derivs
                .iter()
                .map(|d| trace_product_unchecked(d, e).re)
                .collect()
        })
        .collect();
    (q, dq)
}

/// J_ij = Σ_k ∂_i q_k ∂_j q_k / q_k over outcomes above the probability floor.
pub(crate) fn fisher_from_sensitivities(
    q: &[f64],
    dq: &[Vec<f64>],
    m: usize,
    label: impl Fn(usize) -> String,
) -> Result<DMatrix<f64>> {
    let mut j = DMatrix::zeros(m, m);
    for (k, (&qk, dk)) in q.iter().zip(dq).enumerate() {
        if qk <= Q_FLOOR {
            let worst = dk.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if worst > DQ_FLOOR {
                return Err(Error::SupportBoundary {
                    label: label(k),
                    probability: qk,
                    derivative: worst,
                });
            }
            continue;
        }
        for r in 0..m {
            let a = dk[r] / qk;
            for c in r..m {
                j[(r, c)] += a * dk[c];
            }
        }
    }
    for r in 0..m {
        for c in 0..r {
            j[(r, c)] = j[(c, r)];
        }
    }
    Ok(j)
}

/// Classical Fisher information J^M_θ of the outcome distribution of `p`.
pub fn classical_fisher(model: &StateModel, p: &Povm, theta: &[f64]) -> Result<FisherMatrix> {
    model.domain().require(theta)?;
    if p.dim() != model.dim() {
        return Err(Error::DimensionError(format!(
            "model of dimension {} measured by POVM of dimension {}",
            model.dim(),
            p.dim()
        )));
    }
    let rho = model.state_matrix(theta);
    let derivs = model.derivatives(theta);
    let (q, dq) = outcome_sensitivities(&rho, &derivs, p);
    let matrix = fisher_from_sensitivities(&q, &dq, model.params(), |k| p.label(k).to_string())?;
    Ok(FisherMatrix {
        matrix,
        theta: theta.to_vec(),
        source: FisherSource::Povm,
    })
}

/// Symmetric logarithmic derivatives L_i solving (L_iρ + ρL_i)/2 = ∂_iρ.
pub fn sld_operators(model: &StateModel, theta: &[f64]) -> Result<Vec<ComplexMatrix>> {
    let rho = model.state_matrix(theta);
    model
        .derivatives(theta)
        .iter()
        .map(|d| lyapunov_solve(&rho, d))
        .collect()
}

/// SLD Fisher information J^S_ij = Re tr(ρ L_i L_j).
pub fn sld_fisher(model: &StateModel, theta: &[f64]) -> Result<FisherMatrix> {
    model.domain().require(theta)?;
    let rho = model.state_matrix(theta);
    let ls = sld_operators(model, theta)?;
    let m = ls.len();
    let rho_l: Vec<ComplexMatrix> = ls.iter().map(|l| &rho * l).collect();
    let mut matrix = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = trace_product_unchecked(&rho_l[i], &ls[j]).re;
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    symmetrize(&mut matrix);
    Ok(FisherMatrix {
        matrix,
        theta: theta.to_vec(),
        source: FisherSource::Sld,
    })
}

/// The function θ̂(ω) from outcome labels to parameter estimates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimatorMap {
    values: HashMap<String, Vec<f64>>,
}

impl EstimatorMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, label: impl Into<String>, estimate: Vec<f64>) -> Self {
        self.values.insert(label.into(), estimate);
        self
    }

    pub fn insert(&mut self, label: impl Into<String>, estimate: Vec<f64>) {
        self.values.insert(label.into(), estimate);
    }

    pub fn get(&self, label: &str) -> Option<&[f64]> {
        self.values.get(label).map(Vec::as_slice)
    }

    /// Estimates in the outcome order of `p`; errors on a missing label.
    pub fn aligned(&self, p: &Povm) -> Result<Vec<&[f64]>> {
        p.labels()
            .iter()
            .map(|l| self.get(l).ok_or_else(|| Error::MissingEstimate(l.clone())))
            .collect()
    }
}

/// Deviations from the two local-unbiasedness conditions at θ.
#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasednessCheck {
    pub locally_unbiased: bool,
    /// Σ_k θ̂^j(k) q_k − θ^j.
    pub mean_defect: Vec<f64>,
    /// Σ_k θ̂^j(k) ∂_l q_k − δ^j_l.
    pub sensitivity_defect: DMatrix<f64>,
}

/// Checks E_θ[θ̂] = θ and ∂_l E_θ[θ̂^j] = δ^j_l within `tol`.
pub fn check_local_unbiasedness(
    model: &StateModel,
    p: &Povm,
    est: &EstimatorMap,
    theta: &[f64],
    tol: f64,
) -> Result<UnbiasednessCheck> {
    let m = model.params();
    let estimates = est.aligned(p)?;
    if let Some(bad) = estimates.iter().find(|e| e.len() != m) {
        return Err(Error::DimensionError(format!(
            "estimate of length {} for an {m}-parameter model",
            bad.len()
        )));
    }
    let rho = model.state_matrix(theta);
    let derivs = model.derivatives(theta);
    let (q, dq) = outcome_sensitivities(&rho, &derivs, p);
    let mut mean_defect: Vec<f64> = theta.iter().map(|t| -t).collect();
    let mut sensitivity_defect = -DMatrix::<f64>::identity(m, m);
    for (k, e) in estimates.iter().enumerate() {
        for j in 0..m {
            mean_defect[j] += e[j] * q[k];
            for l in 0..m {
                sensitivity_defect[(j, l)] += e[j] * dq[k][l];
            }
        }
    }
    let locally_unbiased = mean_defect.iter().all(|x| x.abs() <= tol)
        && sensitivity_defect.iter().all(|x| x.abs() <= tol);
    Ok(UnbiasednessCheck {
        locally_unbiased,
        mean_defect,
        sensitivity_defect,
    })
}

/// A sequential measurement plan: the POVM applied to sample k may depend on
/// the outcome indices observed on samples 1..k−1.
pub trait SequentialStrategy {
    fn measurement(&self, history: &[usize]) -> Result<Povm>;
}

impl<F> SequentialStrategy for F
where
    F: Fn(&[usize]) -> Result<Povm>,
{
    fn measurement(&self, history: &[usize]) -> Result<Povm> {
        self(history)
    }
}

/// Applies the same POVM to every sample.
#[derive(Debug, Clone)]
pub struct NonAdaptive(pub Povm);

impl SequentialStrategy for NonAdaptive {
    fn measurement(&self, _history: &[usize]) -> Result<Povm> {
        Ok(self.0.clone())
    }
}

/// Both sides of the chain identity (1/n) J^{M_n}_θ = J^{M^n_θ}_θ.
#[derive(Debug, Clone)]
pub struct ChainFisher {
    /// (1/n) × Fisher of the composed sequential POVM on ℋ^⊗n.
    pub lhs: FisherMatrix,
    /// Fisher of the history-averaged single-sample POVM.
    pub rhs: FisherMatrix,
    /// Number of complete outcome histories enumerated.
    pub histories: usize,
}

struct HistoryNode {
    history: Vec<usize>,
    povm: Povm,
}

/// Every outcome prefix of length < n with the POVM the strategy applies next.
fn enumerate_prefixes(
    strategy: &dyn SequentialStrategy,
    n: usize,
) -> Result<Vec<Vec<HistoryNode>>> {
    let mut levels: Vec<Vec<HistoryNode>> = Vec::with_capacity(n);
    let root = HistoryNode {
        history: Vec::new(),
        povm: strategy.measurement(&[])?,
    };
    levels.push(vec![root]);
    for depth in 1..n {
        let mut next = Vec::new();
        for node in &levels[depth - 1] {
            for w in 0..node.povm.len() {
                let mut h = node.history.clone();
                h.push(w);
                let povm = strategy.measurement(&h)?;
                next.push(HistoryNode { history: h, povm });
                if next.len() > HISTORY_CAP {
                    return Err(Error::CapacityError(format!(
                        "more than {HISTORY_CAP} outcome histories"
                    )));
                }
            }
        }
        levels.push(next);
    }
    Ok(levels)
}

fn history_label(h: &[usize]) -> String {
    h.iter()
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// The sequential POVM M_n on ℋ^⊗n: one element ⊗_k E^{(k)}_{ω_k}[ω_1..ω_{k−1}]
/// per complete outcome history.
pub fn composed_sequential_povm(strategy: &dyn SequentialStrategy, n: usize) -> Result<Povm> {
    if n == 0 {
        return Err(Error::InvalidOptions("need at least one step".into()));
    }
    let levels = enumerate_prefixes(strategy, n)?;
    // partial products for each prefix, built level by level
    let mut partial: Vec<(Vec<usize>, ComplexMatrix)> =
        vec![(Vec::new(), ComplexMatrix::identity(1))];
    for level in &levels {
        let mut next = Vec::new();
        for node in level {
            let (_, prefix_op) = partial
                .iter()
                .find(|(h, _)| *h == node.history)
                .expect("prefix enumerated at previous level");
            for (w, e) in node.povm.elements().iter().enumerate() {
                let mut h = node.history.clone();
                h.push(w);
                next.push((h, tensor(prefix_op, e)));
            }
        }
        if next.len() > HISTORY_CAP {
            return Err(Error::CapacityError(format!(
                "more than {HISTORY_CAP} outcome histories"
            )));
        }
        partial = next;
    }
    Povm::unchecked(
        partial
            .into_iter()
            .map(|(h, e)| (history_label(&h), e))
            .collect(),
    )
}

/// The single-sample POVM M^n_θ: for each step k, prefix h and outcome ω the
/// element (1/n)·P_θ(h)·E^{(k)}_ω[h], labeled "k|h|ω".
///
/// Prefix probabilities are evaluated at θ and frozen (they are data of the
/// POVM, not differentiated).
pub fn history_averaged_povm(
    strategy: &dyn SequentialStrategy,
    model: &StateModel,
    theta: &[f64],
    n: usize,
) -> Result<Povm> {
    if n == 0 {
        return Err(Error::InvalidOptions("need at least one step".into()));
    }
    let rho = model.state_matrix(theta);
    let levels = enumerate_prefixes(strategy, n)?;
    let mut prefix_prob: HashMap<Vec<usize>, f64> = HashMap::new();
    prefix_prob.insert(Vec::new(), 1.0);
    let mut outcomes = Vec::new();
    let weight = 1.0 / n as f64;
    for (k, level) in levels.iter().enumerate() {
        for node in level {
            let ph = prefix_prob[&node.history];
            let q = node.povm.raw_probabilities(&rho);
            for (w, e) in node.povm.elements().iter().enumerate() {
                if ph > 0.0 {
                    outcomes.push((
                        format!("{k}|{}|{w}", history_label(&node.history)),
                        e.scale_real(weight * ph),
                    ));
                }
                let mut h = node.history.clone();
                h.push(w);
                prefix_prob.insert(h, ph * q[w].max(0.0));
            }
        }
    }
    Povm::unchecked(outcomes)
}

/// Brute-force check of the chain identity over all outcome histories.
pub fn adaptive_chain_fisher(
    strategy: &dyn SequentialStrategy,
    model: &StateModel,
    theta: &[f64],
    n: usize,
) -> Result<ChainFisher> {
    let composed = composed_sequential_povm(strategy, n)?;
    let n_model = tensor_power_model(model, n)?;
    let lhs = classical_fisher(&n_model, &composed, theta)?.scaled(1.0 / n as f64);
    let averaged = history_averaged_povm(strategy, model, theta, n)?;
    let rhs = classical_fisher(model, &averaged, theta)?;
    Ok(ChainFisher {
        lhs,
        rhs,
        histories: composed.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{
        coarse_grain, random_povm, registry, standard, tensor_povm, validate_povm,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(f: &FisherMatrix) -> f64 {
        assert_eq!(f.dim(), 1);
        f.matrix[(0, 0)]
    }

    #[test]
    fn classical_fisher_examples() {
        let z = registry::qubit_zline().unwrap();
        let sz = standard::computational_basis(2);
        assert!((scalar(&classical_fisher(&z, &sz, &[0.0]).unwrap()) - 1.0).abs() < 1e-12);
        let t: f64 = 0.6;
        let j = scalar(&classical_fisher(&z, &sz, &[t]).unwrap());
        assert!((j - 1.0 / (1.0 - t * t)).abs() < 1e-12);

        let b = registry::qubit_bloch3().unwrap();
        let zero = classical_fisher(&b, &standard::trivial(2), &[0.1, 0.2, 0.3]).unwrap();
        assert!(zero.matrix.iter().all(|&x| x.abs() < 1e-15));

        let z2 = tensor_power_model(&z, 2).unwrap();
        let sz2 = tensor_povm(&[sz.clone(), sz]);
        let j2 = scalar(&classical_fisher(&z2, &sz2, &[t]).unwrap());
        assert!((j2 - 2.0 / (1.0 - t * t)).abs() < 1e-9);
    }

    #[test]
    fn support_boundary_is_an_error() {
        let pure = registry::classical_diag(2, 0.0).unwrap();
        // at the boundary θ = 1 the "1" outcome has q = 0 but ∂q = −1
        let err = classical_fisher(&pure, &standard::computational_basis(2), &[1.0]).unwrap_err();
        assert!(matches!(err, Error::SupportBoundary { .. }));
    }

    #[test]
    fn sld_examples() {
        let z = registry::qubit_zline().unwrap();
        assert!((scalar(&sld_fisher(&z, &[0.0]).unwrap()) - 1.0).abs() < 1e-12);

        let c = registry::classical_diag(3, 0.01).unwrap();
        let th = [0.2, 0.3];
        let js = sld_fisher(&c, &th).unwrap();
        let jc = classical_fisher(&c, &standard::computational_basis(3), &th).unwrap();
        assert!(js.max_abs_diff(&jc) < 1e-9);

        let r = registry::qubit_rotation1(0.9).unwrap();
        for t in [-1.0, 0.0, 0.3, 1.1] {
            assert!((scalar(&sld_fisher(&r, &[t]).unwrap()) - 0.81).abs() < 1e-12);
        }
    }

    #[test]
    fn local_unbiasedness_examples() {
        let z = registry::qubit_zline().unwrap();
        let sz = standard::computational_basis(2);
        let est = EstimatorMap::new()
            .with("0", vec![1.0])
            .with("1", vec![-1.0]);
        assert!(
            check_local_unbiasedness(&z, &sz, &est, &[0.0], 1e-12)
                .unwrap()
                .locally_unbiased
        );

        let c = EstimatorMap::new()
            .with("0", vec![0.4])
            .with("1", vec![0.4]);
        let r = check_local_unbiasedness(&z, &sz, &c, &[0.0], 1e-9).unwrap();
        assert!(!r.locally_unbiased);
        assert!((r.mean_defect[0] - 0.4).abs() < 1e-15);

        // at θ = t: θ̂(0) = t + (1 − t), θ̂(1) = t − (1 + t)
        let t: f64 = 0.35;
        let e = EstimatorMap::new()
            .with("0", vec![t + (1.0 - t)])
            .with("1", vec![t - (1.0 + t)]);
        assert!(
            check_local_unbiasedness(&z, &sz, &e, &[t], 1e-10)
                .unwrap()
                .locally_unbiased
        );
        let wrong = EstimatorMap::new()
            .with("0", vec![t + (1.0 - t * t)])
            .with("1", vec![t - (1.0 - t * t)]);
        let r = check_local_unbiasedness(&z, &sz, &wrong, &[t], 1e-10).unwrap();
        assert!(!r.locally_unbiased);
        assert!((r.mean_defect[0] - t * (1.0 - t * t)).abs() < 1e-12);

        let missing = EstimatorMap::new().with("0", vec![1.0]);
        assert!(matches!(
            check_local_unbiasedness(&z, &sz, &missing, &[0.0], 1e-9),
            Err(Error::MissingEstimate(_))
        ));
    }

    #[test]
    fn chain_identity_examples() {
        let b = registry::qubit_bloch3().unwrap();
        let th = [0.2, -0.1, 0.3];
        let m = standard::pauli6();
        let single = classical_fisher(&b, &m, &th).unwrap();
        for n in [1, 2] {
            let c = adaptive_chain_fisher(&NonAdaptive(m.clone()), &b, &th, n).unwrap();
            assert!(c.lhs.max_abs_diff(&single) < 1e-12);
            assert!(c.rhs.max_abs_diff(&single) < 1e-12);
        }

        let z = registry::qubit_zline().unwrap();
        let adaptive = |h: &[usize]| -> Result<Povm> {
            Ok(match h.first() {
                None | Some(0) => standard::pauli_basis(2),
                Some(_) => standard::pauli_basis(0),
            })
        };
        let c = adaptive_chain_fisher(&adaptive, &z, &[0.4], 2).unwrap();
        assert_eq!(c.histories, 4);
        assert!(c.lhs.max_abs_diff(&c.rhs) < 1e-9);
        // brute force: step 1 gives J = 1/(1−θ²); step 2 is σ_z w.p. (1+θ)/2, else σ_x (J = 0)
        let t: f64 = 0.4;
        let jz = 1.0 / (1.0 - t * t);
        assert!((c.lhs.matrix[(0, 0)] - 0.5 * (jz + 0.5 * (1.0 + t) * jz)).abs() < 1e-12);
    }

    #[test]
    fn averaged_povm_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = registry::qubit_bloch3().unwrap();
        let first = random_povm(2, 3, &mut rng).unwrap();
        let second: Vec<Povm> = (0..3)
            .map(|_| random_povm(2, 4, &mut rng).unwrap())
            .collect();
        let s = move |h: &[usize]| -> Result<Povm> {
            Ok(match h.len() {
                0 => first.clone(),
                _ => second[h[h.len() - 1] % 3].clone(),
            })
        };
        let avg = history_averaged_povm(&s, &b, &[0.1, 0.1, 0.1], 3).unwrap();
        assert!(validate_povm(&avg).is_empty());
        let comp = composed_sequential_povm(&s, 3).unwrap();
        assert!(validate_povm(&comp).is_empty());
        let c = adaptive_chain_fisher(&s, &b, &[0.1, 0.1, 0.1], 3).unwrap();
        assert!(c.lhs.max_abs_diff(&c.rhs) < 1e-9);
    }

    #[test]
    fn monotonicity_and_quantum_bound_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = registry::qubit_bloch3().unwrap();
        for _ in 0..30 {
            let p = random_povm(2, 6, &mut rng).unwrap();
            let th = [0.3, -0.2, 0.1];
            let j = classical_fisher(&b, &p, &th).unwrap();
            let js = sld_fisher(&b, &th).unwrap();
            assert!(j.is_dominated_by(&js, 1e-9));
            let part: HashMap<String, String> = p
                .labels()
                .iter()
                .enumerate()
                .map(|(k, l)| (l.clone(), (k % 2).to_string()))
                .collect();
            let coarse = classical_fisher(&b, &coarse_grain(&p, &part).unwrap(), &th).unwrap();
            assert!(coarse.is_dominated_by(&j, 1e-9));
        }
    }
}
