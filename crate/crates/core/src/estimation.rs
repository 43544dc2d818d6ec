//! Outcome sampling and maximum-likelihood estimation for POVM statistics.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::quantum::{distribution_of_matrix, ParameterDomain, Povm, StateModel};

/// A reproducible random stream: a master seed plus a stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// One observed outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sample {
    pub label: String,
    /// Index of the outcome in the generating POVM.
    pub outcome: usize,
    pub step: usize,
}

/// Draws one outcome index by inverse CDF over the fixed outcome order.
pub(crate) fn draw<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

pub(crate) fn cumulative(q: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    q.iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Outcome counts of `count` i.i.d. draws from the distribution `q`.
pub(crate) fn sample_counts<R: Rng + ?Sized>(q: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let cdf = cumulative(q);
    let mut counts = vec![0; q.len()];
    for _ in 0..count {
        counts[draw(&cdf, rng)] += 1;
    }
    counts
}

/// Draws `count` i.i.d. outcomes of `p` on ρ_θ.
pub fn sample_outcomes<R: Rng + ?Sized>(
    model: &StateModel,
    theta: &[f64],
    p: &Povm,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Sample>> {
    model.domain().require(theta)?;
    let q = distribution_of_matrix(&model.state_matrix(theta), p)?;
    let cdf = cumulative(&q);
    Ok((0..count)
        .map(|step| {
            let k = draw(&cdf, rng);
            Sample {
                label: p.label(k).to_string(),
                outcome: k,
                step,
            }
        })
        .collect())
}

/// Reduces samples to per-outcome counts, checking labels against `p`.
pub fn counts_of(p: &Povm, samples: &[Sample]) -> Result<Vec<usize>> {
    let mut counts = vec![0; p.len()];
    for s in samples {
        let k = if s.outcome < p.len() && p.label(s.outcome) == s.label {
            s.outcome
        } else {
            p.index_of(&s.label).ok_or_else(|| {
                Error::InvalidPovm(format!("sample label `{}` is not an outcome", s.label))
            })?
        };
        counts[k] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleOptions {
    /// Total number of simplex starts (the first one at `center`).
    pub starts: usize,
    /// Seed of the random starts.
    pub seed: u64,
    pub stream: u64,
    /// Objective tolerance of each simplex search.
    pub tol: f64,
    pub max_evals: usize,
    /// First start; the box center when absent.
    pub center: Option<Vec<f64>>,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0x6d6c65,
            stream: 0,
            tol: 1e-9,
            max_evals: 4_000,
            center: None,
        }
    }
}

struct Likelihood<'a> {
    model: &'a StateModel,
    p: &'a Povm,
    observed: Vec<(usize, f64)>,
    total: f64,
}

impl Likelihood<'_> {
    /// −Σ_k n_k log q_k(θ); +∞ when an observed outcome is impossible.
    fn nll(&self, theta: &[f64]) -> f64 {
        let q = self.p.raw_probabilities(&self.model.state_matrix(theta));
        let mut total = 0.0;
        for &(k, n) in &self.observed {
            if !(q[k] > 0.0) {
                return f64::INFINITY;
            }
            total -= n * q[k].ln();
        }
        total
    }

    /// Objective over ℝ^m: likelihood at the clipped point plus a quadratic
    /// pull back into the box.
    fn objective(&self, domain: &ParameterDomain, x: &[f64]) -> f64 {
        let c = domain.clip(x);
        let dist2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        self.nll(&c) + 100.0 * self.total.max(1.0) * dist2
    }
}

/// Maximum-likelihood estimate over the box `domain` from outcome counts.
pub fn mle_from_counts(
    model: &StateModel,
    p: &Povm,
    counts: &[usize],
    domain: &ParameterDomain,
    opts: &MleOptions,
) -> Result<Vec<f64>> {
    let m = model.params();
    if domain.dim() != m {
        return Err(Error::DimensionError(format!(
            "{}-dimensional domain for an {m}-parameter model",
            domain.dim()
        )));
    }
    if counts.len() != p.len() {
        return Err(Error::DimensionError(format!(
            "{} counts for a {}-outcome POVM",
            counts.len(),
            p.len()
        )));
    }
    if p.dim() != model.dim() {
        return Err(Error::DimensionError(format!(
            "POVM on dimension {} for a model on dimension {}",
            p.dim(),
            model.dim()
        )));
    }
    if opts.starts == 0 {
        return Err(Error::InvalidOptions(
            "at least one MLE start is needed".into(),
        ));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::NoData);
    }
    let lik = Likelihood {
        model,
        p,
        observed: counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(k, &n)| (k, n as f64))
            .collect(),
        total: total as f64,
    };

    let probes = domain.interior_grid(8);
    let probe_values: Vec<f64> = probes.iter().map(|t| lik.nll(t)).collect();

    let center = match &opts.center {
        Some(c) if c.len() == m => domain.clip(c),
        Some(c) => {
            return Err(Error::DimensionError(format!(
                "MLE start of length {} for an {m}-parameter model",
                c.len()
            )))
        }
        None => domain.center(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(opts.stream);
    let mut starts = vec![center];
    for _ in 1..opts.starts {
        starts.push(
            (0..m)
                .map(|i| {
                    let (lo, hi) = (domain.lower()[i], domain.upper()[i]);
                    lo + (hi - lo) * rng.random::<f64>()
                })
                .collect(),
        );
    }
    let steps: Vec<f64> = domain.widths().iter().map(|w| 0.1 * w).collect();
    let nm = NelderMeadOptions {
        max_evals: opts.max_evals,
        ftol_abs: opts.tol,
        ftol_rel: 1e-13,
        xtol: 1e-9,
        rebuilds: 1,
    };

    let mut found: Vec<(f64, Vec<f64>)> = Vec::with_capacity(starts.len());
    for x0 in &starts {
        let r = nelder_mead(|x| lik.objective(domain, x), x0, &steps, &nm);
        let mut theta = domain.clip(&r.x);
        let mut value = lik.nll(&theta);
        // Snap coordinates sitting next to a face onto it.
        for i in 0..m {
            for bound in [domain.lower()[i], domain.upper()[i]] {
                if (theta[i] - bound).abs() <= 1e-6 * domain.widths()[i] {
                    let mut t = theta.clone();
                    t[i] = bound;
                    let v = lik.nll(&t);
                    if v <= value {
                        theta = t;
                        value = v;
                    }
                }
            }
        }
        found.push((value, theta));
    }

    let best = found.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::InfeasibleLikelihood);
    }
    let spread = probe_values
        .iter()
        .chain(found.iter().map(|(v, _)| v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if spread.1 - spread.0 <= 1e-12 * (1.0 + spread.0.abs()) {
        return Err(Error::FlatLikelihood);
    }
    let (_, theta) = found
        .into_iter()
        .filter(|(v, _)| *v <= best + opts.tol)
        .min_by(|a, b| {
            a.1.iter()
                .zip(&b.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one start attains the best value");
    Ok(theta)
}

/// Maximum-likelihood estimate over the box `domain`.
pub fn mle(
    model: &StateModel,
    p: &Povm,
    samples: &[Sample],
    domain: &ParameterDomain,
    opts: &MleOptions,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::NoData);
    }
    let counts = counts_of(p, samples)?;
    mle_from_counts(model, p, &counts, domain, opts)
}

/// Preliminary estimate θ̌: the MLE under the first-stage measurement M₀.
pub fn preliminary_estimate(
    model: &StateModel,
    m0: &Povm,
    samples: &[Sample],
    domain: &ParameterDomain,
    opts: &MleOptions,
) -> Result<Vec<f64>> {
    mle(model, m0, samples, domain, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasednessDiagnostic {
    /// B_n = mean(θ̂) − θ at the center point.
    pub bias: Vec<f64>,
    pub bias_stderr: Vec<f64>,
    /// A_n(i, j) = ∂ mean(θ̂^i) / ∂θ^j by central differences.
    #[serde(skip)]
    pub jacobian: DMatrix<f64>,
    #[serde(skip)]
    pub jacobian_stderr: DMatrix<f64>,
}

fn mean_and_stderr(xs: &[&[f64]], m: usize) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len() as f64;
    let mut mean = vec![0.0; m];
    for x in xs {
        for i in 0..m {
            mean[i] += x[i];
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    let mut var = vec![0.0; m];
    for x in xs {
        for i in 0..m {
            var[i] += (x[i] - mean[i]).powi(2);
        }
    }
    let se = var
        .iter()
        .map(|v| {
            if n > 1.0 {
                (v / (n - 1.0) / n).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    (mean, se)
}

/// Bias and sensitivity of an estimator from a finite-difference design.
///
/// `trials` pairs each estimate with the true parameter it was generated at;
/// the true parameters must be θ or θ ± h·e_j, with every one of these 2m+1
/// points present.
pub fn asymptotic_unbiasedness_diag(
    trials: &[(Vec<f64>, Vec<f64>)],
    theta: &[f64],
    h: f64,
) -> Result<UnbiasednessDiagnostic> {
    let m = theta.len();
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::DesignError(format!(
            "perturbation h = {h} must be positive"
        )));
    }
    let matches = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12);
    let mut center: Vec<&[f64]> = Vec::new();
    let mut plus: Vec<Vec<&[f64]>> = vec![Vec::new(); m];
    let mut minus: Vec<Vec<&[f64]>> = vec![Vec::new(); m];
    for (est, truth) in trials {
        if est.len() != m || truth.len() != m {
            return Err(Error::DesignError(format!(
                "trial of dimension {}/{} in an {m}-parameter design",
                est.len(),
                truth.len()
            )));
        }
        if matches(truth, theta) {
            center.push(est);
            continue;
        }
        let mut placed = false;
        for j in 0..m {
            let mut tp = theta.to_vec();
            tp[j] += h;
            let mut tm = theta.to_vec();
            tm[j] -= h;
            if matches(truth, &tp) {
                plus[j].push(est);
                placed = true;
            } else if matches(truth, &tm) {
                minus[j].push(est);
                placed = true;
            }
            if placed {
                break;
            }
        }
        if !placed {
            return Err(Error::DesignError(format!(
                "true parameter {truth:?} is not a design point"
            )));
        }
    }
    if center.is_empty() || plus.iter().chain(&minus).any(|g| g.is_empty()) {
        return Err(Error::DesignError(
            "every design point θ and θ ± h·e_j needs at least one trial".into(),
        ));
    }
    let (mean, se) = mean_and_stderr(&center, m);
    let bias = mean.iter().zip(theta).map(|(a, t)| a - t).collect();
    let mut jac = DMatrix::zeros(m, m);
    let mut jac_se = DMatrix::zeros(m, m);
    for j in 0..m {
        let (mp, sp) = mean_and_stderr(&plus[j], m);
        let (mm, sm) = mean_and_stderr(&minus[j], m);
        for i in 0..m {
            jac[(i, j)] = (mp[i] - mm[i]) / (2.0 * h);
            jac_se[(i, j)] = (sp[i] * sp[i] + sm[i] * sm[i]).sqrt() / (2.0 * h);
        }
    }
    Ok(UnbiasednessDiagnostic {
        bias,
        bias_stderr: se,
        jacobian: jac,
        jacobian_stderr: jac_se,
    })
}
