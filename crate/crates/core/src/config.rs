//! Run configuration: a TOML document with `[model]`, `[solver]`,
//! `[simulation]` and `[output]` sections, plus `key.path=value` overrides.
//!
//! ```toml
//! command = "bound"
//! theta = [0.3]
//!
//! [model]
//! name = "qubit-rotation1"
//! params = { r = 0.9 }
//!
//! [solver]
//! restarts = 4
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::adaptive::BlockOptions;
use crate::bound::SolverOptions;
use crate::quantum::registry::ModelSpec;
use crate::quantum::{standard, Povm, StateModel, WeightMatrix};

/// A configuration problem, reported with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "`{}`: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Fisher,
    Bound,
    BoundN,
    Simulate,
    Collective,
    Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub outcomes: Option<usize>,
    pub restarts: usize,
    pub max_evals: usize,
    pub seed: u64,
    pub penalty: f64,
    pub epsilon: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            outcomes: d.outcomes,
            restarts: d.restarts,
            max_evals: d.max_evals,
            seed: d.seed,
            penalty: d.penalty,
            epsilon: d.epsilon,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            outcomes: self.outcomes,
            restarts: self.restarts,
            max_evals: self.max_evals,
            seed: self.seed,
            penalty: self.penalty,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    /// Sample sizes; for `collective`, numbers of blocks.
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Copies per block for `collective`.
    pub copies: usize,
    /// Selector cache pitch.
    pub pitch: f64,
    /// First-stage measurement: "default", "pauli6" or "computational".
    pub m0: String,
    /// δ grid for `diagnostics`.
    pub deltas: Vec<f64>,
    /// Offsets of the continuity probe for `diagnostics`.
    pub probe_offsets: Vec<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![256, 1024, 4096],
            trials: 1000,
            seed: 1,
            copies: 2,
            pitch: 1e-3,
            m0: "default".into(),
            deltas: vec![0.05, 0.1, 0.2, 0.4],
            probe_offsets: vec![-0.1, -0.05, -0.02, 0.0, 0.02, 0.05, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub result: String,
    pub table: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("qcrb-out"),
            result: "result.json".into(),
            table: "study.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelConfig,
    pub theta: Vec<f64>,
    /// Weight matrix rows; identity when absent.
    #[serde(default)]
    pub weight: Option<Vec<Vec<f64>>>,
    /// Copy count for `bound-n` (largest n of the sequence).
    #[serde(default = "default_copies")]
    pub n: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_copies() -> usize {
    2
}

/// Parses `text`, applying `overrides` of the form `a.b.c=value` first.
/// Values parse as TOML (numbers, arrays, booleans, quoted strings) and fall
/// back to bare strings.
pub fn parse(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut doc: toml::Table =
        toml::from_str(text).map_err(|e| ConfigError::new("", format!("invalid TOML: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    RunConfig::deserialize(toml::Value::Table(doc))
        .map_err(|e| ConfigError::new("", format!("schema violation: {e}")))
}

fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::new(spec, "override must look like key.path=value"))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(ConfigError::new(spec, "empty override key"));
    }
    let value = parse_value(raw.trim());
    let keys: Vec<&str> = path.split('.').collect();
    let mut table = doc;
    for k in &keys[..keys.len() - 1] {
        let entry = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::new(path, format!("`{k}` is not a section")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// A configuration with its model and weight resolved and checked.
pub struct Resolved {
    pub config: RunConfig,
    pub spec: ModelSpec,
    pub model: StateModel,
    pub weight: WeightMatrix,
    pub m0: Povm,
}

impl RunConfig {
    /// Resolves names and checks every invariant that does not need a
    /// numerical computation.
    pub fn resolve(self) -> Result<Resolved, ConfigError> {
        let spec = ModelSpec::from_name(&self.model.name, &self.model.params)
            .map_err(|e| ConfigError::new("model", e.to_string()))?;
        let model = spec
            .build()
            .map_err(|e| ConfigError::new("model", e.to_string()))?;
        let m = model.params();
        if self.theta.len() != m {
            return Err(ConfigError::new(
                "theta",
                format!(
                    "{} has {m} parameters, got {}",
                    model.name(),
                    self.theta.len()
                ),
            ));
        }
        if !model.domain().contains(&self.theta) {
            return Err(ConfigError::new(
                "theta",
                format!(
                    "{:?} lies outside Θ = [{:?}, {:?}]",
                    self.theta,
                    model.domain().lower(),
                    model.domain().upper()
                ),
            ));
        }
        let weight = match &self.weight {
            None => WeightMatrix::identity(m),
            Some(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(ConfigError::new("weight", format!("G must be {m}x{m}")));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                WeightMatrix::new(DMatrix::from_row_slice(m, m, &flat))
                    .map_err(|e| ConfigError::new("weight", format!("G invariant violated: {e}")))?
            }
        };
        self.solver
            .options()
            .validate(m)
            .map_err(|e| ConfigError::new("solver", e.to_string()))?;
        let sim = &self.simulation;
        let m0 = match sim.m0.as_str() {
            "default" => spec.default_m0(),
            "pauli6" if model.dim() == 2 => standard::pauli6(),
            "computational" => standard::computational_basis(model.dim()),
            other => {
                return Err(ConfigError::new(
                    "simulation.m0",
                    format!("unknown or inapplicable first-stage measurement `{other}`"),
                ))
            }
        };
        match self.command {
            Command::Simulate | Command::Collective | Command::Diagnostics => {
                if self.command != Command::Diagnostics && sim.trials < 100 {
                    return Err(ConfigError::new(
                        "simulation.trials",
                        format!("studies need at least 100 trials, got {}", sim.trials),
                    ));
                }
                if sim.trials == 0 {
                    return Err(ConfigError::new("simulation.trials", "must be positive"));
                }
                if sim.n_grid.is_empty() {
                    return Err(ConfigError::new("simulation.n_grid", "must not be empty"));
                }
                if let Some(bad) = sim.n_grid.iter().find(|&&n| n < 4) {
                    return Err(ConfigError::new(
                        "simulation.n_grid",
                        format!("every entry needs at least 4 samples, got {bad}"),
                    ));
                }
                if !(sim.pitch > 0.0 && sim.pitch.is_finite()) {
                    return Err(ConfigError::new("simulation.pitch", "must be positive"));
                }
                if self.command == Command::Collective && sim.copies == 0 {
                    return Err(ConfigError::new("simulation.copies", "must be positive"));
                }
            }
            Command::BoundN if self.n == 0 => {
                return Err(ConfigError::new("n", "must be positive"));
            }
            _ => {}
        }
        Ok(Resolved {
            config: self,
            spec,
            model,
            weight,
            m0,
        })
    }
}

impl Resolved {
    pub fn block_options(&self) -> BlockOptions {
        BlockOptions {
            solver: self.config.solver.options(),
            pitch: self.config.simulation.pitch,
            epsilon: self.config.solver.epsilon,
        }
    }
}
