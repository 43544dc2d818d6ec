//! Quasi-quantum Cramér-Rao type bounds.
//!
//! C_θ(G) = inf_M Tr G (J^M_θ)^{-1} is approximated by searching rank-one
//! POVMs E_k = S^{-1/2} w_k w_k† S^{-1/2}, S = Σ_k w_k w_k†, with a
//! multi-restart quasi-Newton search over the real coordinates of the w_k.
//! Every parameter point is a valid POVM, so completeness never has to be
//! enforced as a constraint.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fisher::{classical_fisher, sld_fisher, FisherMatrix};
use crate::matrix::{ComplexMatrix, C64};
use crate::numeric::{FISHER_COND_MAX, Q_FLOOR, SINGULAR_PENALTY, SLD_COND_MAX};
use crate::optimize::{lbfgs, LbfgsOptions};
use crate::quantum::{
    normalize_frame, rank_one_povm, tensor_power_model, Povm, StateModel, WeightMatrix,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Number of POVM outcomes L; `None` takes the lower envelope over
    /// L ∈ {max(m+1, d), 2d, d²}.
    pub outcomes: Option<usize>,
    pub restarts: usize,
    /// Objective-and-gradient evaluation budget of a single restart.
    pub max_evals: usize,
    pub seed: u64,
    pub penalty: f64,
    /// Requested ε'. The reported ε' is never smaller than the restart gap.
    pub epsilon: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            outcomes: None,
            restarts: 4,
            max_evals: 4_000,
            seed: 0x5eed,
            penalty: SINGULAR_PENALTY,
            epsilon: 0.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidOptions("restarts must be at least 1".into()));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidOptions("max_evals must be positive".into()));
        }
        if let Some(l) = self.outcomes {
            if l < m + 1 {
                return Err(Error::InvalidOptions(format!(
                    "outcome count {l} is below m + 1 = {}",
                    m + 1
                )));
            }
        }
        if !(self.penalty.is_finite() && self.penalty > 0.0) {
            return Err(Error::InvalidOptions(
                "penalty must be finite and positive".into(),
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidOptions("epsilon must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundResult {
    /// Best Tr G (J^M_θ)^{-1} found.
    pub value: f64,
    #[serde(skip)]
    pub argmin_povm: Povm,
    /// Normalized frame vectors v_k with E_k = v_k v_k†.
    #[serde(skip)]
    pub argmin_vectors: Vec<Vec<C64>>,
    pub outcomes: usize,
    pub restarts_used: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Second-best restart value minus the best one (0 with a single restart).
    pub gap_estimate: f64,
    /// max(requested ε', gap_estimate).
    pub epsilon: f64,
    /// Tr G (J^S_θ)^{-1}.
    pub sld_floor: f64,
}

/// Tr G J^{-1}, restricted to the support of G.
///
/// Returns `penalty` when J is singular or worse conditioned than 1e10 along
/// a direction G sees; 0 when G = 0.
pub fn weighted_inverse_objective(j: &FisherMatrix, g: &WeightMatrix, penalty: f64) -> f64 {
    inverse_objective(&j.matrix, g.matrix(), penalty)
}

pub(crate) fn inverse_objective(j: &DMatrix<f64>, g: &DMatrix<f64>, penalty: f64) -> f64 {
    let tr_g = g.trace();
    if tr_g <= 0.0 {
        return 0.0;
    }
    if j.iter().any(|x| !x.is_finite()) {
        return penalty;
    }
    let m = j.nrows();
    if m == 1 {
        let v = j[(0, 0)];
        return if v > 0.0 { g[(0, 0)] / v } else { penalty };
    }
    let eig = j.clone().symmetric_eigen();
    let top = eig.eigenvalues.max();
    if top <= 0.0 {
        return penalty;
    }
    let mut total = 0.0;
    for i in 0..m {
        let u = eig.eigenvectors.column(i);
        let weight = (g * u).dot(&u);
        if weight <= 1e-12 * tr_g {
            continue;
        }
        let lam = eig.eigenvalues[i];
        if lam * FISHER_COND_MAX < top || lam <= 0.0 {
            return penalty;
        }
        total += weight / lam;
    }
    total
}

/// Tr G (J^M_θ)^{-1} of a given POVM.
pub fn povm_objective(
    model: &StateModel,
    p: &Povm,
    theta: &[f64],
    g: &WeightMatrix,
    penalty: f64,
) -> Result<f64> {
    let j = classical_fisher(model, p, theta)?;
    Ok(weighted_inverse_objective(&j, g, penalty))
}

/// Precomputed data for fast objective evaluation at one θ.
struct Problem {
    d: usize,
    m: usize,
    rho: DMatrix<C64>,
    drho: Vec<DMatrix<C64>>,
    g: DMatrix<f64>,
    penalty: f64,
}

impl Problem {
    fn new(model: &StateModel, theta: &[f64], g: &WeightMatrix, penalty: f64) -> Self {
        Self {
            d: model.dim(),
            m: model.params(),
            rho: model.state_matrix(theta).to_nalgebra(),
            drho: model
                .derivatives(theta)
                .iter()
                .map(ComplexMatrix::to_nalgebra)
                .collect(),
            g: g.matrix().clone(),
            penalty,
        }
    }

    fn vectors(&self, x: &[f64]) -> Vec<Vec<C64>> {
        x.chunks(2 * self.d)
            .map(|c| c.chunks(2).map(|p| C64::new(p[0], p[1])).collect())
            .collect()
    }

    #[cfg(test)]
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.evaluate_with_gradient(x, None)
    }

    /// Objective at x; with `grad`, also its gradient in the real
    /// coordinates of the frame vectors.
    fn evaluate_with_gradient(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (d, m) = (self.d, self.m);
        let l = x.len() / (2 * d);
        // W is d×L with the frame vectors as columns.
        let w = DMatrix::<C64>::from_fn(d, l, |j, k| {
            let i = 2 * (k * d + j);
            C64::new(x[i], x[i + 1])
        });
        let fail = |grad: Option<&mut [f64]>| {
            if let Some(g) = grad {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            self.penalty
        };
        let eig = (&w * w.adjoint()).symmetric_eigen();
        let top = eig.eigenvalues.max();
        let bottom = eig.eigenvalues.min();
        if !(top > 0.0) || bottom <= 1e-12 * top {
            return fail(grad);
        }
        let u = &eig.eigenvectors;
        let r: Vec<f64> = eig.eigenvalues.iter().map(|v| v.sqrt()).collect();
        let mut scaled = u.clone();
        for (k, rk) in r.iter().enumerate() {
            scaled.column_mut(k).iter_mut().for_each(|z| *z /= *rk);
        }
        let t = &scaled * u.adjoint();
        let v = &t * &w;

        let mut q = vec![0.0; l];
        let mut dq = vec![vec![0.0; m]; l];
        let mut j = DMatrix::<f64>::zeros(m, m);
        for k in 0..l {
            let vk = v.column(k);
            q[k] = quad(&self.rho, vk.as_slice());
            if q[k] <= Q_FLOOR {
                continue;
            }
            for i in 0..m {
                dq[k][i] = quad(&self.drho[i], vk.as_slice());
            }
            for a in 0..m {
                let s = dq[k][a] / q[k];
                for b in a..m {
                    j[(a, b)] += s * dq[k][b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                j[(a, b)] = j[(b, a)];
            }
        }
        let f = inverse_objective(&j, &self.g, self.penalty);
        let Some(grad) = grad else {
            return f;
        };
        if f >= self.penalty || self.g.trace() <= 0.0 {
            grad.iter_mut().for_each(|v| *v = 0.0);
            return f;
        }
        let Some(jinv) = j.clone().try_inverse() else {
            return fail(Some(grad));
        };
        let kmat = &jinv * &self.g * &jinv;

        // Y: column k is B_k v_k with B_k = ∂f/∂q_k ρ + Σ_i ∂f/∂(∂_i q_k) ∂_i ρ.
        let mut y = DMatrix::<C64>::zeros(d, l);
        for k in 0..l {
            if q[k] <= Q_FLOOR {
                continue;
            }
            let kd = &kmat * nalgebra::DVector::from_column_slice(&dq[k]);
            let a = dq[k].iter().zip(kd.iter()).map(|(p, s)| p * s).sum::<f64>() / (q[k] * q[k]);
            let vk = v.column(k);
            let mut yk = (&self.rho * vk) * C64::new(a, 0.0);
            for i in 0..m {
                let b = -2.0 * kd[i] / q[k];
                yk += (&self.drho[i] * vk) * C64::new(b, 0.0);
            }
            y.set_column(k, &yk);
        }
        // Chain rule through V = S^{-1/2} W.
        let z = &w * y.adjoint();
        let mut mt = u.adjoint() * z * u;
        for a in 0..d {
            for b in 0..d {
                mt[(a, b)] /= r[a] * r[b] * (r[a] + r[b]);
            }
        }
        let mm = u * mt * u.adjoint();
        let h = y.adjoint() * &t - w.adjoint() * (&mm + mm.adjoint());
        for k in 0..l {
            for jj in 0..d {
                let i = 2 * (k * d + jj);
                grad[i] = 2.0 * h[(k, jj)].re;
                grad[i + 1] = -2.0 * h[(k, jj)].im;
            }
        }
        f
    }
}

/// Re w† A w.
fn quad(a: &DMatrix<C64>, w: &[C64]) -> f64 {
    let d = w.len();
    let mut total = 0.0;
    for r in 0..d {
        let mut row = C64::new(0.0, 0.0);
        for c in 0..d {
            row += a[(r, c)] * w[c];
        }
        total += (w[r].conj() * row).re;
    }
    total
}

fn flatten(vectors: &[Vec<C64>]) -> Vec<f64> {
    vectors
        .iter()
        .flat_map(|v| v.iter().flat_map(|z| [z.re, z.im]))
        .collect()
}

fn random_start(d: usize, l: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..2 * d * l)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}

struct Restart {
    x: Vec<f64>,
    f: f64,
    evals: usize,
    converged: bool,
}

struct FixedRun {
    outcomes: usize,
    restarts: Vec<Restart>,
}

impl FixedRun {
    fn best(&self) -> usize {
        let mut b = 0;
        for (i, r) in self.restarts.iter().enumerate() {
            if r.f < self.restarts[b].f {
                b = i;
            }
        }
        b
    }
}

fn local_options(opts: &SolverOptions) -> LbfgsOptions {
    LbfgsOptions {
        max_evals: opts.max_evals,
        ..LbfgsOptions::default()
    }
}

fn run_fixed(problem: &Problem, l: usize, warm: &[Vec<f64>], opts: &SolverOptions) -> FixedRun {
    let d = problem.d;
    let local = local_options(opts);
    let starts: Vec<Vec<f64>> = warm
        .iter()
        .cloned()
        .chain((warm.len()..opts.restarts.max(warm.len())).map(|r| {
            let stream = ((l as u64) << 16) | r as u64;
            random_start(d, l, opts.seed, stream)
        }))
        .collect();
    let restarts = starts
        .into_par_iter()
        .map(|x0| {
            let r = lbfgs(
                |x: &[f64], g: &mut [f64]| problem.evaluate_with_gradient(x, Some(g)),
                &x0,
                &local,
            );
            Restart {
                x: r.x,
                f: r.f,
                evals: r.evals,
                converged: r.converged,
            }
        })
        .collect();
    FixedRun {
        outcomes: l,
        restarts,
    }
}

fn envelope(m: usize, d: usize) -> Vec<usize> {
    let mut ls = vec![(m + 1).max(d), 2 * d, d * d];
    ls.sort_unstable();
    ls.dedup();
    ls
}

fn sld_floor(model: &StateModel, theta: &[f64], g: &WeightMatrix, penalty: f64) -> Result<f64> {
    let js = sld_fisher(model, theta)?;
    let eig = js.matrix.clone().symmetric_eigen();
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lo > 0.0) || hi / lo > SLD_COND_MAX {
        return Err(Error::DegenerateModel(format!(
            "SLD Fisher information has condition number {:e} at θ = {theta:?}",
            hi / lo
        )));
    }
    Ok(weighted_inverse_objective(&js, g, penalty))
}

fn solve(
    model: &StateModel,
    theta: &[f64],
    g: &WeightMatrix,
    ls: &[usize],
    warm: Option<(usize, Vec<f64>)>,
    opts: &SolverOptions,
) -> Result<BoundResult> {
    let m = model.params();
    opts.validate(m)?;
    model.domain().require(theta)?;
    if g.dim() != m {
        return Err(Error::DimensionError(format!(
            "weight matrix is {}x{} for an {m}-parameter model",
            g.dim(),
            g.dim()
        )));
    }
    let floor = sld_floor(model, theta, g, opts.penalty)?;
    let problem = Problem::new(model, theta, g, opts.penalty);

    let runs: Vec<FixedRun> = ls
        .iter()
        .map(|&l| {
            let w: Vec<Vec<f64>> = match &warm {
                Some((wl, x)) if *wl == l => vec![x.clone()],
                _ => Vec::new(),
            };
            run_fixed(&problem, l, &w, opts)
        })
        .collect();

    // Prefer fewer outcomes unless more of them is strictly better.
    let mut chosen = 0;
    for (i, run) in runs.iter().enumerate().skip(1) {
        let cur = runs[chosen].restarts[runs[chosen].best()].f;
        let f = run.restarts[run.best()].f;
        if f < cur - 1e-10 * cur.abs() {
            chosen = i;
        }
    }
    let run = &runs[chosen];
    let b = run.best();
    let best = &run.restarts[b];
    if best.f >= opts.penalty {
        return Err(Error::DegenerateModel(format!(
            "every restart ended on a singular Fisher matrix at θ = {theta:?}"
        )));
    }
    let mut others: Vec<f64> = run
        .restarts
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != b)
        .map(|(_, r)| r.f)
        .collect();
    others.sort_by(f64::total_cmp);
    let gap = others.first().map_or(0.0, |s| (s - best.f).max(0.0));
    let vectors = normalize_frame(&problem.vectors(&best.x))?;
    let povm = rank_one_povm(&problem.vectors(&best.x))?;
    Ok(BoundResult {
        value: best.f,
        argmin_povm: povm,
        argmin_vectors: vectors,
        outcomes: run.outcomes,
        restarts_used: runs.iter().map(|r| r.restarts.len()).sum(),
        evaluations: runs
            .iter()
            .flat_map(|r| r.restarts.iter())
            .map(|r| r.evals)
            .sum(),
        converged: best.converged,
        gap_estimate: gap,
        epsilon: opts.epsilon.max(gap),
        sld_floor: floor,
    })
}

/// Numerical C_θ(G) for the single-copy family.
pub fn cr_bound(
    model: &StateModel,
    theta: &[f64],
    g: &WeightMatrix,
    opts: &SolverOptions,
) -> Result<BoundResult> {
    let ls = match opts.outcomes {
        Some(l) => vec![l],
        None => envelope(model.params(), model.dim()),
    };
    solve(model, theta, g, &ls, None, opts)
}

/// Numerical C^n_θ(G) for the n-copy family ρ_θ^⊗n (not multiplied by n).
///
/// The product of the single-copy optimum is always among the starting
/// points, so n·C^n never exceeds the single-copy value found with the same
/// options. A fixed outcome count applies to the n-copy search only; the
/// single-copy search always takes the envelope. Warm starts count toward
/// `restarts`.
pub fn cr_bound_n(
    model: &StateModel,
    theta: &[f64],
    g: &WeightMatrix,
    n: usize,
    opts: &SolverOptions,
) -> Result<BoundResult> {
    if n == 0 {
        return Err(Error::InvalidOptions("copy count must be positive".into()));
    }
    if n == 1 {
        return cr_bound(model, theta, g, opts);
    }
    let big = tensor_power_model(model, n)?;
    let single_opts = SolverOptions {
        outcomes: None,
        ..opts.clone()
    };
    let single = cr_bound(model, theta, g, &single_opts)?;
    let product = product_vectors(&single.argmin_vectors, n);
    let dn = big.dim();
    let mut ls = match opts.outcomes {
        Some(l) => vec![l.max(dn)],
        None => envelope(big.params(), dn),
    };
    if opts.outcomes.is_none() && !ls.contains(&product.len()) {
        ls.push(product.len());
        ls.sort_unstable();
    }
    let warm = Some((product.len(), flatten(&product)));
    solve(&big, theta, g, &ls, warm, opts)
}

fn product_vectors(single: &[Vec<C64>], n: usize) -> Vec<Vec<C64>> {
    let mut acc: Vec<Vec<C64>> = vec![vec![C64::new(1.0, 0.0)]];
    for _ in 0..n {
        acc = acc
            .iter()
            .flat_map(|a| {
                single.iter().map(move |b| {
                    a.iter()
                        .flat_map(|x| b.iter().map(move |y| x * y))
                        .collect::<Vec<C64>>()
                })
            })
            .collect();
    }
    acc
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantumBoundEstimate {
    /// (n, n·C^n_θ(G)) for n = 1..n_max.
    pub scaled: Vec<(usize, f64)>,
    /// Running minimum of the scaled sequence.
    pub running_min: Vec<f64>,
    /// Final running minimum: an upper bound on C^Q_θ(G), not its value.
    pub upper_bound: f64,
}

/// Finite-n surrogate for C^Q_θ(G) = liminf n·C^n_θ(G).
pub fn quantum_cr_bound(
    model: &StateModel,
    theta: &[f64],
    g: &WeightMatrix,
    n_max: usize,
    opts: &SolverOptions,
) -> Result<QuantumBoundEstimate> {
    if n_max == 0 {
        return Err(Error::InvalidOptions("n_max must be positive".into()));
    }
    let mut scaled = Vec::with_capacity(n_max);
    let mut running_min = Vec::with_capacity(n_max);
    let mut low = f64::INFINITY;
    for n in 1..=n_max {
        let v = n as f64 * cr_bound_n(model, theta, g, n, opts)?.value;
        low = low.min(v);
        scaled.push((n, v));
        running_min.push(low);
    }
    Ok(QuantumBoundEstimate {
        scaled,
        running_min,
        upper_bound: low,
    })
}
