//! The `qcrb run` command: loads a configuration, runs the requested
//! computation and writes `result.json` (and, for studies, a CSV table).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::adaptive::{
    block_collective_study, block_strategy, mse_study, regularity_diagnostics, MseReport,
};
use crate::bound::{cr_bound, quantum_cr_bound};
use crate::config::{self, Command, ConfigError, Resolved};
use crate::fisher::{classical_fisher, sld_fisher, FisherMatrix};
use crate::quantum::validate_povm;
use crate::report::{emit_study_table, ResultDocument};
use crate::Error;

/// Exit status for configuration errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for numerical and domain errors.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numeric(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Numeric(e) => write!(f, "{}: {e}", e.kind()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Numeric(e)
    }
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Human-readable summary lines.
    pub summary: Vec<String>,
    pub result_path: PathBuf,
    pub table_path: Option<PathBuf>,
}

/// Runs the configuration file at `path`, with `overrides` applied and the
/// output directory optionally replaced by `out_dir`.
pub fn run_file(
    path: &Path,
    overrides: &[String],
    out_dir: Option<&Path>,
) -> Result<RunOutput, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    let mut all = overrides.to_vec();
    if let Some(d) = out_dir {
        all.push(format!("output.dir={}", toml_string(&d.to_string_lossy())));
    }
    run_text(&text, &all)
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Runs a configuration given as TOML text.
pub fn run_text(text: &str, overrides: &[String]) -> Result<RunOutput, RunError> {
    let cfg = config::parse(text, overrides)?;
    let echo = serde_json::to_value(&cfg)
        .map_err(|e| ConfigError::new("", format!("cannot echo config: {e}")))?;
    let resolved = cfg.resolve()?;
    let mut doc = ResultDocument::new(echo, overrides.to_vec());
    let mut summary = Vec::new();
    let mut reports: Option<Vec<MseReport>> = None;
    execute(&resolved, &mut doc, &mut summary, &mut reports)?;

    let out = &resolved.config.output;
    fs::create_dir_all(&out.dir)
        .map_err(|e| Error::IoError(format!("{}: {e}", out.dir.display())))?;
    let result_path = out.dir.join(&out.result);
    let table_path = match &reports {
        Some(r) => {
            let p = out.dir.join(&out.table);
            emit_study_table(r, &p)?;
            summary.push(format!("table: {}", p.display()));
            Some(p)
        }
        None => None,
    };
    doc.write(&result_path)?;
    summary.push(format!("result: {}", result_path.display()));
    Ok(RunOutput {
        summary,
        result_path,
        table_path,
    })
}

fn fisher_json(f: &FisherMatrix) -> Value {
    let m = f.dim();
    json!((0..m)
        .map(|i| (0..m).map(|j| f.matrix[(i, j)]).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn study_line(r: &MseReport) -> String {
    let mut s = format!(
        "n = {:>6}  n·Tr G V = {:.6} ± {:.6}  C = {:.6}  SLD = {:.6}",
        r.n, r.scaled, r.scaled_stderr, r.c_bound, r.sld_bound
    );
    if let Some(b) = r.n_cn_bound {
        s.push_str(&format!("  n·C^n = {b:.6}"));
    }
    if r.failures > 0 {
        s.push_str(&format!("  ({} failed trials)", r.failures));
    }
    s
}

fn execute(
    r: &Resolved,
    doc: &mut ResultDocument,
    summary: &mut Vec<String>,
    reports: &mut Option<Vec<MseReport>>,
) -> Result<(), RunError> {
    let cfg = &r.config;
    let theta = &cfg.theta;
    let sim = &cfg.simulation;
    let solver = cfg.solver.options();
    match cfg.command {
        Command::Validate => {
            let check = r.model.verify_derivatives(25)?;
            let violations = validate_povm(&r.m0);
            if let Some(v) = violations.first() {
                return Err(Error::InvalidPovm(format!(
                    "first-stage measurement: {} violated by {:e}",
                    v.axiom, v.magnitude
                ))
                .into());
            }
            r.model.state(theta)?;
            doc.results = json!({
                "model": r.model.name(),
                "dim": r.model.dim(),
                "params": r.model.params(),
                "domain": { "lower": r.model.domain().lower(), "upper": r.model.domain().upper() },
                "derivative_check": {
                    "points": check.points,
                    "max_fd_error": check.max_fd_error,
                    "max_hermitian_defect": check.max_hermitian_defect,
                    "max_trace": check.max_trace,
                },
                "weight": r.weight.to_rows(),
            });
            summary.push(format!(
                "config ok: {} (d = {}, m = {})",
                r.model.name(),
                r.model.dim(),
                r.model.params()
            ));
        }
        Command::Fisher => {
            let jc = classical_fisher(&r.model, &r.m0, theta)?;
            let js = sld_fisher(&r.model, theta)?;
            doc.results = json!({
                "theta": theta,
                "classical": fisher_json(&jc),
                "sld": fisher_json(&js),
                "loewner_gap": jc.loewner_gap(&js),
            });
            summary.push(format!(
                "Fisher information at {:?}: tr J^M = {:.6}, tr J^S = {:.6}",
                theta,
                jc.matrix.trace(),
                js.matrix.trace()
            ));
        }
        Command::Bound => {
            let b = cr_bound(&r.model, theta, &r.weight, &solver)?;
            doc.results = json!({
                "bound": to_json(&b),
                "argmin_povm": povm_json(&b.argmin_povm),
            });
            doc.diagnostics = json!({ "gap_estimate": b.gap_estimate, "converged": b.converged });
            summary.push(format!(
                "C_theta(G) = {:.6}  SLD floor = {:.6}  epsilon = {:.3e}  outcomes = {}",
                b.value, b.sld_floor, b.epsilon, b.outcomes
            ));
        }
        Command::BoundN => {
            let q = quantum_cr_bound(&r.model, theta, &r.weight, cfg.n, &solver)?;
            doc.results = to_json(&q);
            for ((n, v), low) in q.scaled.iter().zip(&q.running_min) {
                summary.push(format!("n = {n}  n·C^n = {v:.6}  running min = {low:.6}"));
            }
            summary.push(format!("upper bound on C^Q: {:.6}", q.upper_bound));
        }
        Command::Simulate => {
            let strategy = block_strategy(&r.model, &r.weight, &r.m0, 1, &r.block_options())?;
            let reps = mse_study(
                &r.model,
                theta,
                &r.weight,
                &strategy,
                &sim.n_grid,
                sim.trials,
                sim.seed,
                &solver,
            )?;
            doc.results = json!({ "reports": to_json(&reps) });
            summary.extend(reps.iter().map(study_line));
            *reports = Some(reps);
        }
        Command::Collective => {
            let reps = block_collective_study(
                &r.model,
                theta,
                &r.weight,
                &r.m0,
                sim.copies,
                &sim.n_grid,
                sim.trials,
                sim.seed,
                &r.block_options(),
            )?;
            doc.results = json!({ "copies": sim.copies, "reports": to_json(&reps) });
            summary.extend(reps.iter().map(study_line));
            *reports = Some(reps);
        }
        Command::Diagnostics => {
            let strategy = block_strategy(&r.model, &r.weight, &r.m0, 1, &r.block_options())?;
            let mut out = Vec::with_capacity(sim.n_grid.len());
            for &n in &sim.n_grid {
                let d = regularity_diagnostics(
                    &r.model,
                    theta,
                    &r.weight,
                    &strategy,
                    n,
                    sim.trials,
                    sim.seed,
                    &sim.deltas,
                    &sim.probe_offsets,
                )?;
                let worst = d
                    .consistency
                    .iter()
                    .map(|c| format!("P(>{}) = {:.4}", c.delta, c.probability))
                    .collect::<Vec<_>>()
                    .join("  ");
                summary.push(format!("n = {n}  {worst}"));
                out.push(d);
            }
            doc.diagnostics = to_json(&out);
            doc.results = json!({ "n_grid": sim.n_grid });
        }
    }
    Ok(())
}

fn povm_json(p: &crate::quantum::Povm) -> Value {
    json!(p
        .iter()
        .map(|(label, e)| {
            let d = e.rows();
            json!({
                "label": label,
                "re": (0..d).map(|i| (0..d).map(|j| e[(i, j)].re).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "im": (0..d).map(|i| (0..d).map(|j| e[(i, j)].im).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })
        })
        .collect::<Vec<_>>())
}
