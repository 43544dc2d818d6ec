//! Monte Carlo engine for the two-stage adaptive estimator and its
//! block-collective variant.
//!
//! A trial spends ⌊√n⌋ samples on a fixed measurement M₀, estimates θ̌ by
//! maximum likelihood, asks a selector for the measurement M_θ̌, and returns
//! the maximum-likelihood estimate computed from the remaining samples only.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bound::{cr_bound, cr_bound_n, povm_objective, SolverOptions};
use crate::error::{Error, Result};
use crate::estimation::{mle_from_counts, sample_counts, MleOptions, RngStream};
use crate::quantum::{
    distribution_of_matrix, tensor_povm, tensor_power_model, validate_povm, Povm, StateModel,
    WeightMatrix,
};

/// A measurement chosen for a parameter guess θ'.
#[derive(Debug, Clone)]
pub struct Selected {
    pub povm: Arc<Povm>,
    /// Tr G (J^M_{θ'})^{-1} of the returned POVM, when the selector knows it.
    pub bound: Option<f64>,
    /// Reported ε' of the choice.
    pub epsilon: f64,
}

/// The map θ' ↦ M_{θ'} used by the second stage.
pub trait MeasurementSelector: Send + Sync {
    fn select(&self, theta: &[f64]) -> Result<Selected>;
}

/// Ignores θ' and always returns the same measurement.
#[derive(Debug, Clone)]
pub struct ConstantSelector {
    povm: Arc<Povm>,
}

impl ConstantSelector {
    pub fn new(povm: Povm) -> Result<Self> {
        if let Some(v) = validate_povm(&povm).first() {
            return Err(Error::InvalidPovm(format!(
                "{} violated by {:e}",
                v.axiom, v.magnitude
            )));
        }
        Ok(Self {
            povm: Arc::new(povm),
        })
    }
}

impl MeasurementSelector for ConstantSelector {
    fn select(&self, _theta: &[f64]) -> Result<Selected> {
        Ok(Selected {
            povm: self.povm.clone(),
            bound: None,
            epsilon: 0.0,
        })
    }
}

/// Picks the numerically optimal measurement for the n-copy family at θ',
/// cached on a grid of pitch `pitch` per coordinate.
///
/// The solve happens at the grid point itself, so the cached value depends
/// only on the key and concurrent duplicate solves agree.
pub struct OptimalSelector {
    model: StateModel,
    copies: usize,
    g: WeightMatrix,
    opts: SolverOptions,
    pitch: f64,
    cache: RwLock<HashMap<Vec<i64>, Selected>>,
}

impl OptimalSelector {
    /// `model` is the single-copy family; selections act on `copies` copies.
    pub fn new(
        model: StateModel,
        copies: usize,
        g: WeightMatrix,
        opts: SolverOptions,
        pitch: f64,
    ) -> Result<Self> {
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::InvalidOptions(format!(
                "cache pitch {pitch} must be positive"
            )));
        }
        if copies == 0 {
            return Err(Error::InvalidOptions("copies must be positive".into()));
        }
        if g.dim() != model.params() {
            return Err(Error::DimensionError(format!(
                "weight matrix of size {} for an {}-parameter model",
                g.dim(),
                model.params()
            )));
        }
        opts.validate(model.params())?;
        Ok(Self {
            model,
            copies,
            g,
            opts,
            pitch,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn cached(&self) -> usize {
        self.cache.read().expect("selector cache poisoned").len()
    }

    /// The grid point a guess is snapped to.
    pub fn grid_point(&self, theta: &[f64]) -> Vec<f64> {
        let key = self.key(theta);
        self.model.domain().clip(
            &key.iter()
                .map(|&k| k as f64 * self.pitch)
                .collect::<Vec<_>>(),
        )
    }

    fn key(&self, theta: &[f64]) -> Vec<i64> {
        theta
            .iter()
            .map(|t| (t / self.pitch).round() as i64)
            .collect()
    }
}

impl MeasurementSelector for OptimalSelector {
    fn select(&self, theta: &[f64]) -> Result<Selected> {
        let key = self.key(theta);
        if let Some(hit) = self
            .cache
            .read()
            .expect("selector cache poisoned")
            .get(&key)
        {
            return Ok(hit.clone());
        }
        let point = self.grid_point(theta);
        let res = cr_bound_n(&self.model, &point, &self.g, self.copies, &self.opts)?;
        let chosen = Selected {
            povm: Arc::new(res.argmin_povm),
            bound: Some(res.value),
            epsilon: res.epsilon,
        };
        let mut cache = self.cache.write().expect("selector cache poisoned");
        Ok(cache.entry(key).or_insert(chosen).clone())
    }
}

/// First-stage measurement, second-stage selector and the ε' they target.
#[derive(Clone)]
pub struct AdaptiveStrategy {
    pub m0: Povm,
    pub selector: Arc<dyn MeasurementSelector>,
    pub epsilon: f64,
}

impl AdaptiveStrategy {
    pub fn new(m0: Povm, selector: Arc<dyn MeasurementSelector>, epsilon: f64) -> Self {
        Self {
            m0,
            selector,
            epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub theta_hat: Vec<f64>,
    pub theta_check: Vec<f64>,
    pub n: usize,
    /// Samples spent on the first stage.
    pub first_stage: usize,
    pub seed: u64,
    pub stream: u64,
}

/// ⌊√n⌋.
pub fn first_stage_size(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// One run of the two-stage estimator with n samples of `model` at θ*.
pub fn two_stage_trial(
    model: &StateModel,
    theta_star: &[f64],
    strategy: &AdaptiveStrategy,
    n: usize,
    stream: RngStream,
) -> Result<TrialResult> {
    if n < 4 {
        return Err(Error::TooFewSamples(n));
    }
    model.domain().require(theta_star)?;
    let n1 = first_stage_size(n);
    let mut rng = stream.rng();
    let rho = model.state_matrix(theta_star);

    let q0 = distribution_of_matrix(&rho, &strategy.m0)?;
    let counts0 = sample_counts(&q0, n1, &mut rng);
    let first = MleOptions {
        seed: rng.random(),
        ..MleOptions::default()
    };
    let theta_check = mle_from_counts(model, &strategy.m0, &counts0, model.domain(), &first)?;

    let selected = strategy.selector.select(&theta_check)?;
    let q = distribution_of_matrix(&rho, &selected.povm)?;
    let counts = sample_counts(&q, n - n1, &mut rng);
    let second = MleOptions {
        seed: rng.random(),
        center: Some(theta_check.clone()),
        ..MleOptions::default()
    };
    let theta_hat = mle_from_counts(model, &selected.povm, &counts, model.domain(), &second)?;
    Ok(TrialResult {
        theta_hat,
        theta_check,
        n,
        first_stage: n1,
        seed: stream.seed,
        stream: stream.stream,
    })
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseReport {
    /// Total number of single-copy samples.
    pub n: usize,
    /// Copies per block (1 for the plain two-stage scheme).
    pub copies: usize,
    pub trials: usize,
    pub failures: usize,
    /// Empirical mean-square-error matrix V̂.
    pub v_hat: Vec<Vec<f64>>,
    /// Tr G V̂.
    pub trace_mse: f64,
    /// Monte Carlo standard error of Tr G V̂.
    pub trace_mse_stderr: f64,
    /// n·Tr G V̂.
    pub scaled: f64,
    pub scaled_stderr: f64,
    /// C_θ(G).
    pub c_bound: f64,
    /// Tr G (J^S_θ)^{-1}.
    pub sld_bound: f64,
    /// copies·C^{copies}_θ(G), for block studies.
    pub n_cn_bound: Option<f64>,
    /// ε' of the reference bound.
    pub epsilon: f64,
}

/// Reference values a study is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceBounds {
    pub c_bound: f64,
    pub sld_bound: f64,
    pub n_cn_bound: Option<f64>,
    pub epsilon: f64,
}

/// Trials allowed to fail before a study is aborted.
fn failure_cap(trials: usize) -> usize {
    trials / 100
}

/// Runs `trials` trials at every block count in `grid` and aggregates them.
#[allow(clippy::too_many_arguments)]
fn run_study(
    model: &StateModel,
    theta_star: &[f64],
    g: &WeightMatrix,
    strategy: &AdaptiveStrategy,
    copies: usize,
    grid: &[usize],
    trials: usize,
    seed: u64,
    reference: ReferenceBounds,
) -> Result<Vec<MseReport>> {
    if trials < 100 {
        return Err(Error::InvalidOptions(format!(
            "a study needs at least 100 trials, got {trials}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidOptions("empty sample-size grid".into()));
    }
    if let Some(&bad) = grid.iter().find(|&&n| n < 4) {
        return Err(Error::TooFewSamples(bad));
    }
    model.domain().require(theta_star)?;
    let m = model.params();
    let mut reports = Vec::with_capacity(grid.len());
    for &blocks in grid {
        let outcomes: Vec<Result<TrialResult>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let stream = RngStream::new(seed, ((blocks as u64) << 32) | t as u64);
                two_stage_trial(model, theta_star, strategy, blocks, stream)
            })
            .collect();
        reports.push(aggregate(
            &outcomes,
            theta_star,
            g,
            m,
            blocks * copies,
            copies,
            reference,
        )?);
    }
    Ok(reports)
}

fn aggregate(
    outcomes: &[Result<TrialResult>],
    theta_star: &[f64],
    g: &WeightMatrix,
    m: usize,
    n: usize,
    copies: usize,
    reference: ReferenceBounds,
) -> Result<MseReport> {
    let trials = outcomes.len();
    let failures = outcomes.iter().filter(|r| r.is_err()).count();
    if failures > failure_cap(trials) {
        return Err(Error::TooManyFailures { failures, trials });
    }
    let ok = (trials - failures) as f64;
    let mut v = vec![CompensatedSum::default(); m * m];
    let mut tr = CompensatedSum::default();
    let mut tr_sq = CompensatedSum::default();
    let gm = g.matrix();
    for r in outcomes.iter().flatten() {
        let e: Vec<f64> = r
            .theta_hat
            .iter()
            .zip(theta_star)
            .map(|(a, b)| a - b)
            .collect();
        let mut x = 0.0;
        for i in 0..m {
            for j in 0..m {
                v[i * m + j].add(e[i] * e[j]);
                x += gm[(i, j)] * e[i] * e[j];
            }
        }
        tr.add(x);
        tr_sq.add(x * x);
    }
    let v_hat: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| v[i * m + j].value() / ok).collect())
        .collect();
    let mean = tr.value() / ok;
    let var = ((tr_sq.value() / ok - mean * mean) * ok / (ok - 1.0).max(1.0)).max(0.0);
    let se = (var / ok).sqrt();
    let vm = DMatrix::from_fn(m, m, |i, j| v_hat[i][j]);
    let trace_mse = (gm * vm).trace();
    Ok(MseReport {
        n,
        copies,
        trials,
        failures,
        v_hat,
        trace_mse,
        trace_mse_stderr: se,
        scaled: n as f64 * trace_mse,
        scaled_stderr: n as f64 * se,
        c_bound: reference.c_bound,
        sld_bound: reference.sld_bound,
        n_cn_bound: reference.n_cn_bound,
        epsilon: reference.epsilon,
    })
}

/// C_θ*(G) and the SLD floor at θ*, with ε' = max(strategy ε', solver gap).
pub fn reference_bounds(
    model: &StateModel,
    theta_star: &[f64],
    g: &WeightMatrix,
    copies: usize,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<ReferenceBounds> {
    let single = cr_bound(model, theta_star, g, opts)?;
    let n_cn_bound = if copies > 1 {
        Some(copies as f64 * cr_bound_n(model, theta_star, g, copies, opts)?.value)
    } else {
        None
    };
    Ok(ReferenceBounds {
        c_bound: single.value,
        sld_bound: single.sld_floor,
        n_cn_bound,
        epsilon: epsilon.max(single.epsilon),
    })
}

/// n·Tr G V̂ of the two-stage estimator for every n in `n_grid`.
#[allow(clippy::too_many_arguments)]
pub fn mse_study(
    model: &StateModel,
    theta_star: &[f64],
    g: &WeightMatrix,
    strategy: &AdaptiveStrategy,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<MseReport>> {
    if trials < 100 {
        return Err(Error::InvalidOptions(format!(
            "a study needs at least 100 trials, got {trials}"
        )));
    }
    let reference = reference_bounds(model, theta_star, g, 1, strategy.epsilon, opts)?;
    run_study(
        model, theta_star, g, strategy, 1, n_grid, trials, seed, reference,
    )
}

/// Options of a block-collective study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockOptions {
    pub solver: SolverOptions,
    /// Selector cache pitch.
    pub pitch: f64,
    pub epsilon: f64,
}

impl Default for BlockOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            pitch: 1e-3,
            epsilon: 0.0,
        }
    }
}

/// Two-stage strategy on blocks of `copies` copies: M₀^⊗copies first, then
/// the optimal `copies`-copy measurement at θ̌.
pub fn block_strategy(
    model: &StateModel,
    g: &WeightMatrix,
    m0: &Povm,
    copies: usize,
    opts: &BlockOptions,
) -> Result<AdaptiveStrategy> {
    let selector = OptimalSelector::new(
        model.clone(),
        copies,
        g.clone(),
        opts.solver.clone(),
        opts.pitch,
    )?;
    let m0n = if copies == 1 {
        m0.clone()
    } else {
        tensor_povm(&vec![m0.clone(); copies])
    };
    Ok(AdaptiveStrategy::new(m0n, Arc::new(selector), opts.epsilon))
}

/// Groups of `copies` samples treated as single samples of ρ_θ^⊗copies, with
/// the two-stage scheme run over n₂ ∈ `n2_grid` groups. Reported n is
/// copies·n₂.
#[allow(clippy::too_many_arguments)]
pub fn block_collective_study(
    model: &StateModel,
    theta_star: &[f64],
    g: &WeightMatrix,
    m0: &Povm,
    copies: usize,
    n2_grid: &[usize],
    trials: usize,
    seed: u64,
    opts: &BlockOptions,
) -> Result<Vec<MseReport>> {
    if copies == 0 {
        return Err(Error::InvalidOptions("copies must be positive".into()));
    }
    let strategy = block_strategy(model, g, m0, copies, opts)?;
    if copies == 1 {
        return mse_study(
            model,
            theta_star,
            g,
            &strategy,
            n2_grid,
            trials,
            seed,
            &opts.solver,
        );
    }
    if trials < 100 {
        return Err(Error::InvalidOptions(format!(
            "a study needs at least 100 trials, got {trials}"
        )));
    }
    let block_model = tensor_power_model(model, copies)?;
    let reference = reference_bounds(model, theta_star, g, copies, opts.epsilon, &opts.solver)?;
    run_study(
        &block_model,
        theta_star,
        g,
        &strategy,
        copies,
        n2_grid,
        trials,
        seed,
        reference,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyPoint {
    pub delta: f64,
    /// Empirical P(‖θ̌ − θ*‖ > δ).
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// n·Tr G (θ̂ − θ*)(θ̂ − θ*)ᵀ averaged over the trials in the bin.
    pub scaled_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbePoint {
    pub theta_prime: Vec<f64>,
    /// Tr G (J^{M_θ'}_θ*)^{-1}.
    pub value: f64,
    /// The selector's own bound at θ', when known.
    pub bound_at_prime: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    pub consistency: Vec<ConsistencyPoint>,
    pub conditional: Vec<ConditionalBin>,
    pub continuity: Vec<ProbePoint>,
}

/// Empirical surrogates for the regularity conditions of the two-stage
/// scheme: consistency of θ̌, boundedness of the second-stage error given θ̌,
/// and continuity of θ' ↦ Tr G (J^{M_θ'}_θ*)^{-1}.
///
/// Bins for the conditional error are [0, δ₁), [δ₁, δ₂), …, [δ_k, ∞) over
/// the sorted `deltas`. The continuity probe moves θ' along each coordinate
/// axis through θ* by `probe_offsets`, clipped into Θ.
#[allow(clippy::too_many_arguments)]
pub fn regularity_diagnostics(
    model: &StateModel,
    theta_star: &[f64],
    g: &WeightMatrix,
    strategy: &AdaptiveStrategy,
    n: usize,
    trials: usize,
    seed: u64,
    deltas: &[f64],
    probe_offsets: &[f64],
) -> Result<RegularityReport> {
    if trials == 0 {
        return Err(Error::InvalidOptions(
            "diagnostics need at least one trial".into(),
        ));
    }
    if n < 4 {
        return Err(Error::TooFewSamples(n));
    }
    model.domain().require(theta_star)?;
    let outcomes: Vec<Result<TrialResult>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let stream = RngStream::new(seed, ((n as u64) << 32) | t as u64);
            two_stage_trial(model, theta_star, strategy, n, stream)
        })
        .collect();
    let failures = outcomes.iter().filter(|r| r.is_err()).count();
    if failures > failure_cap(trials) {
        return Err(Error::TooManyFailures { failures, trials });
    }
    let done: Vec<&TrialResult> = outcomes.iter().flatten().collect();
    let dist = |a: &[f64]| {
        a.iter()
            .zip(theta_star)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let gm = g.matrix();
    let weighted = |a: &[f64]| {
        let e: Vec<f64> = a.iter().zip(theta_star).map(|(x, y)| x - y).collect();
        let mut s = 0.0;
        for i in 0..e.len() {
            for j in 0..e.len() {
                s += gm[(i, j)] * e[i] * e[j];
            }
        }
        s
    };
    let total = done.len() as f64;
    let mut sorted: Vec<f64> = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let consistency = sorted
        .iter()
        .map(|&delta| ConsistencyPoint {
            delta,
            probability: done.iter().filter(|r| dist(&r.theta_check) > delta).count() as f64
                / total,
        })
        .collect();

    let mut edges = vec![0.0];
    edges.extend(sorted.iter().copied().filter(|d| *d > 0.0));
    edges.push(f64::INFINITY);
    let conditional = edges
        .windows(2)
        .map(|w| {
            let mut sum = CompensatedSum::default();
            let mut count = 0;
            for r in &done {
                let d = dist(&r.theta_check);
                if d >= w[0] && d < w[1] {
                    sum.add(weighted(&r.theta_hat));
                    count += 1;
                }
            }
            ConditionalBin {
                lower: w[0],
                upper: w[1],
                count,
                scaled_mse: (count > 0).then(|| n as f64 * sum.value() / count as f64),
            }
        })
        .collect();

    let mut continuity = Vec::new();
    for axis in 0..theta_star.len() {
        for &off in probe_offsets {
            let mut tp = theta_star.to_vec();
            tp[axis] += off;
            let tp = model.domain().clip(&tp);
            let sel = strategy.selector.select(&tp)?;
            let value = povm_objective(
                model,
                &sel.povm,
                theta_star,
                g,
                crate::numeric::SINGULAR_PENALTY,
            )?;
            continuity.push(ProbePoint {
                theta_prime: tp,
                value,
                bound_at_prime: sel.bound,
            });
        }
    }
    Ok(RegularityReport {
        n,
        trials,
        failures,
        consistency,
        conditional,
        continuity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{registry, standard};

    fn constant(p: Povm) -> Arc<dyn MeasurementSelector> {
        Arc::new(ConstantSelector::new(p).unwrap())
    }

    #[test]
    fn first_stage_sizes() {
        assert_eq!(first_stage_size(4), 2);
        assert_eq!(first_stage_size(15), 3);
        assert_eq!(first_stage_size(16), 4);
        assert_eq!(first_stage_size(4096), 64);
        assert_eq!(first_stage_size(1_000_001), 1000);
    }

    #[test]
    fn compensated_sum_is_exact_where_naive_is_not() {
        let mut s = CompensatedSum::default();
        for x in [1e16, 1.0, -1e16, 1.0] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn trial_preconditions_and_determinism() {
        let r = registry::qubit_rotation1(0.9).unwrap();
        let sel = OptimalSelector::new(
            r.clone(),
            1,
            WeightMatrix::identity(1),
            SolverOptions::default(),
            1e-3,
        )
        .unwrap();
        let s = AdaptiveStrategy::new(standard::pauli6(), Arc::new(sel), 0.0);
        assert_eq!(
            two_stage_trial(&r, &[0.3], &s, 3, RngStream::new(1, 1)),
            Err(Error::TooFewSamples(3))
        );
        let a = two_stage_trial(&r, &[0.3], &s, 256, RngStream::new(1, 1)).unwrap();
        let b = two_stage_trial(&r, &[0.3], &s, 256, RngStream::new(1, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.first_stage, 16);
        assert!(r.domain().contains(&a.theta_hat) && r.domain().contains(&a.theta_check));
    }

    #[test]
    fn zero_variance_trial_is_exact() {
        // margin 0 reaches the pure states; measure the eigenbasis at θ = 1
        let c = registry::classical_diag(2, 0.0).unwrap();
        let s = AdaptiveStrategy::new(
            standard::computational_basis(2),
            constant(standard::computational_basis(2)),
            0.0,
        );
        let t = two_stage_trial(&c, &[1.0], &s, 100, RngStream::new(3, 0)).unwrap();
        assert_eq!(t.theta_hat, vec![1.0]);
    }

    #[test]
    fn selector_is_cached_and_meets_its_bound() {
        let b = registry::qubit_bloch3().unwrap();
        let g = WeightMatrix::identity(3);
        let sel =
            OptimalSelector::new(b.clone(), 1, g.clone(), SolverOptions::default(), 1e-2).unwrap();
        let a = sel.select(&[0.101, 0.2, -0.3]).unwrap();
        let again = sel.select(&[0.099, 0.2004, -0.3]).unwrap();
        assert!(Arc::ptr_eq(&a.povm, &again.povm));
        assert_eq!(sel.cached(), 1);
        assert!(validate_povm(&a.povm).is_empty());
        let point = sel.grid_point(&[0.101, 0.2, -0.3]);
        let value = povm_objective(&b, &a.povm, &point, &g, 1e6).unwrap();
        let best = cr_bound(&b, &point, &g, &SolverOptions::default()).unwrap();
        assert!(value <= best.value + a.epsilon + 1e-9);
    }

    #[test]
    fn classical_trial_matches_binomial_pipeline() {
        // with a constant eigenbasis selector the second stage is a binomial MLE
        let c = registry::classical_diag(2, 0.01).unwrap();
        let basis = standard::computational_basis(2);
        let s = AdaptiveStrategy::new(basis.clone(), constant(basis.clone()), 0.0);
        let n = 10_000;
        for t in 0..20u64 {
            let stream = RngStream::new(17, t);
            let got = two_stage_trial(&c, &[0.3], &s, n, stream).unwrap();
            let mut rng = stream.rng();
            let _ = sample_counts(&[0.3, 0.7], first_stage_size(n), &mut rng);
            let _: u64 = rng.random();
            let counts = sample_counts(&[0.3, 0.7], n - first_stage_size(n), &mut rng);
            let closed = counts[0] as f64 / (n - first_stage_size(n)) as f64;
            assert!((got.theta_hat[0] - c.domain().clip(&[closed])[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn study_preconditions() {
        let z = registry::qubit_zline().unwrap();
        let basis = standard::computational_basis(2);
        let s = AdaptiveStrategy::new(basis.clone(), constant(basis), 0.0);
        let g = WeightMatrix::identity(1);
        assert!(matches!(
            mse_study(&z, &[0.2], &g, &s, &[64], 0, 1, &SolverOptions::default()),
            Err(Error::InvalidOptions(_))
        ));
    }

    #[test]
    fn perfect_estimator_has_zero_mse() {
        let c = registry::classical_diag(2, 0.0).unwrap();
        let basis = standard::computational_basis(2);
        let s = AdaptiveStrategy::new(basis.clone(), constant(basis), 0.0);
        let reference = ReferenceBounds {
            c_bound: 0.0,
            sld_bound: 0.0,
            n_cn_bound: None,
            epsilon: 0.0,
        };
        let reps = run_study(
            &c,
            &[1.0],
            &WeightMatrix::identity(1),
            &s,
            1,
            &[16],
            100,
            5,
            reference,
        )
        .unwrap();
        assert_eq!(reps[0].trace_mse, 0.0);
        assert_eq!(reps[0].v_hat, vec![vec![0.0]]);
    }

    #[test]
    fn diagnostics_examples() {
        let z = registry::qubit_zline().unwrap();
        let basis = standard::computational_basis(2);
        let s = AdaptiveStrategy::new(standard::pauli6(), constant(basis), 0.0);
        let g = WeightMatrix::identity(1);
        let rep = regularity_diagnostics(
            &z,
            &[0.2],
            &g,
            &s,
            256,
            200,
            9,
            &[0.05, 0.2, 10.0],
            &[-0.1, 0.0, 0.1],
        )
        .unwrap();
        assert_eq!(rep.consistency.last().unwrap().probability, 0.0);
        let first = rep.continuity[0].value;
        assert!(rep.continuity.iter().all(|p| p.value == first));
        assert_eq!(rep.conditional.iter().map(|b| b.count).sum::<usize>(), 200);
    }
}
