//! Acceptance checks 1–11. Each check prints one PASS/FAIL line with its
//! evidence; run with `--nocapture` to see them on success.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use qcrb::adaptive::{block_collective_study, block_strategy, mse_study, BlockOptions, MseReport};
use qcrb::bound::{cr_bound, cr_bound_n, povm_objective, SolverOptions};
use qcrb::fisher::{adaptive_chain_fisher, classical_fisher, sld_fisher};
use qcrb::matrix::{pauli, trace_product, ComplexMatrix, C64};
use qcrb::quantum::{
    coarse_grain, random_povm, registry, standard, validate_povm, DensityOperator, Povm,
    StateModel, WeightMatrix,
};
use qcrb::report::emit_study_table;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    evidence: String,
    elapsed: Duration,
    budget: Duration,
}

impl Outcome {
    fn line(&self) -> String {
        let ok = self.pass && self.elapsed <= self.budget;
        format!(
            "{} C{:<2} {:<44} {:>8.1?} / {:?}  {}",
            if ok { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed,
            self.budget,
            self.evidence
        )
    }

    fn ok(&self) -> bool {
        self.pass && self.elapsed <= self.budget
    }
}

fn timed(
    id: u32,
    title: &'static str,
    budget_secs: u64,
    f: impl FnOnce() -> (bool, String),
) -> Outcome {
    let t = Instant::now();
    let (pass, evidence) = f();
    let o = Outcome {
        id,
        title,
        pass,
        evidence,
        elapsed: t.elapsed(),
        budget: Duration::from_secs(budget_secs),
    };
    println!("{}", o.line());
    o
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn noise(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * (scale / 2.0)
    })
}

fn unit_orthogonal_to(psi: &[C64], rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut u: Vec<C64> = (0..psi.len()).map(|_| gaussian(rng)).collect();
    let norm2: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
    let overlap: C64 = psi.iter().zip(&u).map(|(p, x)| p.conj() * x).sum::<C64>() / norm2;
    for (x, p) in u.iter_mut().zip(psi) {
        *x -= overlap * p;
    }
    let n = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    u.iter().map(|x| x / n).collect()
}

fn log_uniform(lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random θ in the central 80% of the model's box.
fn interior_theta(model: &StateModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dom = model.domain();
    (0..dom.dim())
        .map(|i| {
            let (a, b) = (dom.lower()[i], dom.upper()[i]);
            let w = b - a;
            rng.random_range(a + 0.1 * w..b - 0.1 * w)
        })
        .collect()
}

fn qubit_models() -> Vec<StateModel> {
    vec![
        registry::qubit_bloch3().unwrap(),
        registry::qubit_rotation1(0.9).unwrap(),
        registry::qubit_zline().unwrap(),
    ]
}

fn all_models() -> Vec<StateModel> {
    registry::all_default()
        .unwrap()
        .into_iter()
        .map(|(_, m)| m)
        .collect()
}

fn c1_validation() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut false_accepts, mut false_rejects, mut cases) = (0, 0, 0);
    for case in 0..200 {
        let d = 2 + case % 3;
        let invalid = case % 2 == 1;
        let is_povm = (case / 2) % 2 == 0;
        let delta = log_uniform(1e-6, 1e-1, &mut rng);
        let accepted = if is_povm {
            let l = d + 1 + case % 4;
            let p = random_povm(d, l, &mut rng).unwrap();
            let mut elems: Vec<ComplexMatrix> = p.elements().to_vec();
            if invalid {
                match case % 3 {
                    0 => {
                        // shift weight off E_0 along a direction E_0 annihilates
                        let eig = qcrb::matrix::eig_herm(&elems[0]).unwrap();
                        let v = eig.vector(d - 1);
                        let u = unit_orthogonal_to(&v, &mut rng);
                        let pu = ComplexMatrix::outer(&u).scale_real(delta);
                        elems[0] = &elems[0] - &pu;
                        elems[1] = &elems[1] + &pu;
                    }
                    1 => {
                        let mut e = ComplexMatrix::zeros(d, d);
                        e[(0, 0)] = C64::new(delta, 0.0);
                        elems[0] = &elems[0] + &e;
                    }
                    _ => {
                        let mut e = ComplexMatrix::zeros(d, d);
                        e[(0, 1)] = C64::new(0.0, delta);
                        elems[0] = &elems[0] + &e;
                    }
                }
            } else {
                for e in elems.iter_mut() {
                    *e = &*e + &noise(d, 1e-12, &mut rng);
                }
            }
            let q = Povm::unchecked(
                elems
                    .into_iter()
                    .enumerate()
                    .map(|(k, e)| (k.to_string(), e))
                    .collect(),
            )
            .unwrap();
            validate_povm(&q).is_empty()
        } else {
            let rank = if case % 5 == 0 { 1 } else { 1 + case % d };
            let rho = DensityOperator::random(d, rank, &mut rng).into_matrix();
            let m = if invalid {
                match case % 3 {
                    0 => {
                        let psi: Vec<C64> = (0..d).map(|_| gaussian(&mut rng)).collect();
                        let n = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                        let psi: Vec<C64> = psi.iter().map(|x| x / n).collect();
                        let u = unit_orthogonal_to(&psi, &mut rng);
                        let pure = ComplexMatrix::outer(&psi).scale_real(1.0 + delta);
                        &pure - &ComplexMatrix::outer(&u).scale_real(delta)
                    }
                    1 => rho.scale_real(1.0 + delta),
                    _ => {
                        let mut e = ComplexMatrix::zeros(d, d);
                        e[(0, 1)] = C64::new(delta, 0.0);
                        &rho + &e
                    }
                }
            } else {
                &rho + &noise(d, 1e-12, &mut rng)
            };
            DensityOperator::check(&m).is_empty()
        };
        cases += 1;
        if invalid && accepted {
            false_accepts += 1;
        }
        if !invalid && !accepted {
            false_rejects += 1;
        }
    }
    (
        false_accepts == 0 && false_rejects == 0,
        format!("{cases} cases, {false_accepts} false accepts, {false_rejects} false rejects"),
    )
}

/// Σ_k q_k ∂_i log q_k ∂_j log q_k with central differences of log q_k.
fn fd_fisher(model: &StateModel, p: &Povm, theta: &[f64]) -> Vec<Vec<f64>> {
    let m = theta.len();
    let h = 1e-5;
    let logq = |t: &[f64]| -> Vec<f64> {
        let rho = model.state_matrix(t);
        p.elements()
            .iter()
            .map(|e| trace_product(&rho, e).unwrap().re.ln())
            .collect()
    };
    let q: Vec<f64> = logq(theta).iter().map(|x| x.exp()).collect();
    let grads: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[i] += h;
            tm[i] -= h;
            logq(&tp)
                .iter()
                .zip(logq(&tm))
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect()
        })
        .collect();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| (0..q.len()).map(|k| q[k] * grads[i][k] * grads[j][k]).sum())
                .collect()
        })
        .collect()
}

fn c2_fisher() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut count = 0;
    for model in all_models() {
        for k in 0..20 {
            let l = model.dim() + 1 + k % 4;
            let p = random_povm(model.dim(), l, &mut rng).unwrap();
            let theta = interior_theta(&model, &mut rng);
            let j = classical_fisher(&model, &p, &theta).unwrap();
            let oracle = fd_fisher(&model, &p, &theta);
            let scale = j.matrix.abs().max().max(1.0);
            for (r, row) in oracle.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    worst = worst.max((j.matrix[(r, c)] - v).abs() / scale);
                }
            }
            count += 1;
        }
    }
    (
        worst <= 1e-6,
        format!("{count} (model, POVM) pairs, max relative deviation {worst:.2e}"),
    )
}

fn c3_information_inequality() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let models = all_models();
    let mut worst_sld = f64::INFINITY;
    for k in 0..150 {
        let model = &models[k % models.len()];
        let p = random_povm(model.dim(), model.dim() + 1 + k % 5, &mut rng).unwrap();
        let theta = interior_theta(model, &mut rng);
        let jm = classical_fisher(model, &p, &theta).unwrap();
        let js = sld_fisher(model, &theta).unwrap();
        worst_sld = worst_sld.min(jm.loewner_gap(&js));
    }
    let mut worst_cg = f64::INFINITY;
    for k in 0..100 {
        let model = &models[k % models.len()];
        let l = model.dim() + 2 + k % 5;
        let p = random_povm(model.dim(), l, &mut rng).unwrap();
        let groups = rng.random_range(1..l);
        let partition: HashMap<String, String> = p
            .labels()
            .iter()
            .enumerate()
            .map(|(i, lab)| {
                (
                    lab.clone(),
                    format!(
                        "g{}",
                        if i < groups {
                            i
                        } else {
                            rng.random_range(0..groups)
                        }
                    ),
                )
            })
            .collect();
        let coarse = coarse_grain(&p, &partition).unwrap();
        let theta = interior_theta(model, &mut rng);
        let jc = classical_fisher(model, &coarse, &theta).unwrap();
        let jm = classical_fisher(model, &p, &theta).unwrap();
        worst_cg = worst_cg.min(jc.loewner_gap(&jm));
    }
    (
        worst_sld >= -1e-9 && worst_cg >= -1e-9,
        format!(
            "min eig(J^S - J^M) = {worst_sld:.2e} over 150, min eig(J^M - J^coarse) = {worst_cg:.2e} over 100"
        ),
    )
}

fn c4_chain_identity() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let models = qubit_models();
    let mut worst = 0.0f64;
    let mut histories = 0;
    for k in 0..50 {
        let model = &models[k % models.len()];
        let first = random_povm(2, 2 + k % 3, &mut rng).unwrap();
        let second: Vec<Povm> = (0..first.len())
            .map(|w| random_povm(2, 2 + (k + w) % 4, &mut rng).unwrap())
            .collect();
        let strategy = move |h: &[usize]| -> qcrb::Result<Povm> {
            Ok(match h.first() {
                None => first.clone(),
                Some(&w) => second[w].clone(),
            })
        };
        let theta = interior_theta(model, &mut rng);
        let chain = adaptive_chain_fisher(&strategy, model, &theta, 2).unwrap();
        worst = worst.max(chain.lhs.max_abs_diff(&chain.rhs));
        histories += chain.histories;
    }
    (
        worst <= 1e-9,
        format!("50 strategies, {histories} histories, max |lhs - rhs| = {worst:.2e}"),
    )
}

fn projective(polar: f64, azimuth: f64) -> Povm {
    let n = [
        polar.sin() * azimuth.cos(),
        polar.sin() * azimuth.sin(),
        polar.cos(),
    ];
    let s = pauli::all();
    let mut ns = ComplexMatrix::zeros(2, 2);
    for (a, sa) in n.iter().zip(&s) {
        ns = &ns + &sa.scale_real(*a);
    }
    let id = ComplexMatrix::identity(2);
    Povm::new(vec![
        ("+".into(), (&id + &ns).scale_real(0.5)),
        ("-".into(), (&id - &ns).scale_real(0.5)),
    ])
    .unwrap()
}

fn c5_one_parameter() -> (bool, String) {
    let model = registry::qubit_rotation1(0.9).unwrap();
    let g = WeightMatrix::identity(1);
    let theta = [0.3];
    let b = cr_bound(&model, &theta, &g, &SolverOptions::default()).unwrap();
    let mut grid = f64::INFINITY;
    for i in 0..60 {
        for j in 0..60 {
            let p = projective(
                std::f64::consts::PI * i as f64 / 60.0,
                2.0 * std::f64::consts::PI * j as f64 / 60.0,
            );
            if let Ok(v) = povm_objective(&model, &p, &theta, &g, 1e6) {
                grid = grid.min(v);
            }
        }
    }
    let sld = 1.0 / 0.81;
    (
        (b.value - sld).abs() <= 1e-3 && (b.value - grid).abs() <= 1e-3,
        format!(
            "C = {:.6}, 1/0.81 = {sld:.6}, 3600-point grid = {grid:.6}",
            b.value
        ),
    )
}

fn c6_classical() -> (bool, String) {
    let model = registry::classical_diag(3, 0.01).unwrap();
    let theta = [0.2, 0.3];
    let g = WeightMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let opts = SolverOptions::default();
    let c1 = cr_bound(&model, &theta, &g, &opts).unwrap().value;
    let eig = povm_objective(&model, &standard::computational_basis(3), &theta, &g, 1e6).unwrap();
    let c2 = 2.0 * cr_bound_n(&model, &theta, &g, 2, &opts).unwrap().value;
    (
        (c1 - eig).abs() <= 1e-4 && (c2 - c1).abs() <= 2e-3,
        format!("C = {c1:.6}, eigenbasis = {eig:.6}, 2 C^2 = {c2:.6}"),
    )
}

const BLOCH_THETA: [f64; 3] = [0.2, -0.1, 0.3];

fn c7_two_copy() -> (bool, String) {
    let model = registry::qubit_bloch3().unwrap();
    let g = WeightMatrix::identity(3);
    let opts = SolverOptions::default();
    let c1 = cr_bound(&model, &BLOCH_THETA, &g, &opts).unwrap().value;
    let c2 = 2.0
        * cr_bound_n(&model, &BLOCH_THETA, &g, 2, &opts)
            .unwrap()
            .value;
    (
        c2 <= c1 + 2e-3,
        format!("2 C^2 = {c2:.6} <= C + 2e-3 = {:.6}", c1 + 2e-3),
    )
}

const ROTATION_SEED: u64 = 20_08;
const ROTATION_GRID: [usize; 3] = [256, 1024, 4096];

fn rotation_study(workers: usize) -> Vec<MseReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .unwrap();
    pool.install(|| {
        let model = registry::qubit_rotation1(0.9).unwrap();
        let g = WeightMatrix::identity(1);
        let opts = BlockOptions::default();
        let strategy = block_strategy(&model, &g, &standard::pauli6(), 1, &opts).unwrap();
        mse_study(
            &model,
            &[0.3],
            &g,
            &strategy,
            &ROTATION_GRID,
            2000,
            ROTATION_SEED,
            &opts.solver,
        )
        .unwrap()
    })
}

fn describe(reps: &[MseReport]) -> String {
    reps.iter()
        .map(|r| format!("n={}: {:.4}±{:.4}", r.n, r.scaled, r.scaled_stderr))
        .collect::<Vec<_>>()
        .join(", ")
}

fn c8_achievability(reps: &[MseReport]) -> (bool, String) {
    let decreasing = reps.windows(2).all(|w| {
        let slack = 2.0 * w[0].scaled_stderr.hypot(w[1].scaled_stderr);
        w[1].scaled <= w[0].scaled + slack
    });
    let last = reps.last().unwrap();
    let target = last.c_bound + last.epsilon;
    let rel = (last.scaled - target).abs() / target;
    (
        decreasing && rel <= 0.15,
        format!(
            "{}; target C + eps' = {target:.4}, deviation {:.1}%",
            describe(reps),
            100.0 * rel
        ),
    )
}

struct BlockEvidence {
    baseline: Vec<MseReport>,
    block: Vec<MseReport>,
}

fn bloch_studies() -> BlockEvidence {
    let model = registry::qubit_bloch3().unwrap();
    let g = WeightMatrix::identity(3);
    let opts = BlockOptions::default();
    let m0 = standard::pauli6();
    let baseline = block_collective_study(
        &model,
        &BLOCH_THETA,
        &g,
        &m0,
        1,
        &[1024, 2048, 4096],
        1000,
        10,
        &opts,
    )
    .unwrap();
    let block = block_collective_study(
        &model,
        &BLOCH_THETA,
        &g,
        &m0,
        2,
        &[512, 1024, 2048],
        1000,
        10,
        &opts,
    )
    .unwrap();
    BlockEvidence { baseline, block }
}

fn c10_block(e: &BlockEvidence) -> (bool, String) {
    let b = e.block.last().unwrap();
    let s = e.baseline.last().unwrap();
    let two_c2 = b.n_cn_bound.unwrap();
    let slack = 2.0 * b.scaled_stderr.hypot(s.scaled_stderr);
    let rel = (b.scaled - two_c2).abs() / two_c2;
    (
        b.scaled <= s.scaled + slack && rel <= 0.20,
        format!(
            "n1=2: {}; n1=1: {}; 2 C^2 = {two_c2:.4}, deviation {:.1}%",
            describe(&e.block),
            describe(&e.baseline),
            100.0 * rel
        ),
    )
}

/// n·Tr G V̂ ≥ bound − 3σ for n ≥ 1024, against the bound of the measurement
/// family each strategy draws from: C for single-sample measurements,
/// n₁C^{n₁} for measurements on blocks of n₁ copies.
fn c9_lower_bound(rotation: &[MseReport], e: &BlockEvidence) -> (bool, String) {
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    for r in rotation.iter().chain(&e.baseline).chain(&e.block) {
        if r.n < 1024 {
            continue;
        }
        let bound = r.n_cn_bound.unwrap_or(r.c_bound);
        let margin = (r.scaled - (bound - 3.0 * r.scaled_stderr)) / r.scaled_stderr.max(1e-300);
        worst = worst.min(margin);
        checked += 1;
    }
    (
        worst >= 0.0,
        format!(
            "{checked} (strategy, n) points, min margin {worst:.2} stderr above bound - 3 stderr"
        ),
    )
}

fn write_table(reps: &[MseReport], path: &Path) -> Vec<u8> {
    emit_study_table(reps, path).unwrap();
    fs::read(path).unwrap()
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let mut outcomes = vec![
        timed(1, "POVM/state validation", 10, c1_validation),
        timed(2, "classical Fisher vs finite differences", 30, c2_fisher),
        timed(
            3,
            "information inequality, coarse-graining",
            60,
            c3_information_inequality,
        ),
        timed(4, "adaptive chain identity", 30, c4_chain_identity),
        timed(5, "one-parameter bound", 120, c5_one_parameter),
        timed(6, "classical reduction", 180, c6_classical),
        timed(7, "two-copy inequality", 600, c7_two_copy),
    ];

    let mut rotation = Vec::new();
    outcomes.push(timed(8, "two-stage achievability (rotation)", 600, || {
        rotation = rotation_study(4);
        c8_achievability(&rotation)
    }));
    let first_table = write_table(&rotation, &dir.path().join("rotation_a.csv"));

    let mut bloch = None;
    outcomes.push(timed(
        10,
        "block-collective strategy (bloch3)",
        1800,
        || {
            let e = bloch_studies();
            let verdict = c10_block(&e);
            bloch = Some(e);
            verdict
        },
    ));
    let bloch = bloch.unwrap();
    outcomes.push(timed(
        9,
        "lower bound on every simulated strategy",
        1,
        || c9_lower_bound(&rotation, &bloch),
    ));

    outcomes.push(timed(
        11,
        "reproducibility across worker counts",
        600,
        || {
            let again = rotation_study(1);
            let second_table = write_table(&again, &dir.path().join("rotation_b.csv"));
            (
                second_table == first_table,
                format!(
                    "4 workers vs 1 worker: {} vs {} bytes, identical = {}",
                    first_table.len(),
                    second_table.len(),
                    second_table == first_table
                ),
            )
        },
    ));

    outcomes.sort_by_key(|o| o.id);
    println!("---- summary ----");
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.ok()).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
