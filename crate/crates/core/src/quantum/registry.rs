//! Built-in models, selectable by name.
//!
//! | name              | family                                            | Θ                       |
//! |-------------------|---------------------------------------------------|-------------------------|
//! | `qubit-bloch3`    | (I + θ·σ)/2                                       | ‖θ‖∞ ≤ 0.57             |
//! | `qubit-rotation1` | e^{−iθσ_z/2} (I + rσ_x)/2 e^{iθσ_z/2}             | [−1.2, 1.2]             |
//! | `classical-diag`  | diag(θ_1, …, θ_{d−1}, 1 − Σθ_i)                   | [margin, 1/(d−1) − margin]^{d−1} |
//! | `qubit-zline`     | (I + θσ_z)/2                                      | [−0.9, 0.9]             |

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::{pauli, ComplexMatrix, C64};

use super::model::{DerivFn, ParameterDomain, StateFn, StateModel};
use super::povm::{standard, Povm};

pub const BLOCH3_HALF_WIDTH: f64 = 0.57;
pub const ROTATION_HALF_WIDTH: f64 = 1.2;
pub const ZLINE_HALF_WIDTH: f64 = 0.9;

/// Registry entry with its numeric parameters resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    QubitBloch3,
    QubitRotation1 { r: f64 },
    ClassicalDiag { d: usize, margin: f64 },
    QubitZLine,
}

pub const NAMES: [&str; 4] = [
    "qubit-bloch3",
    "qubit-rotation1",
    "classical-diag",
    "qubit-zline",
];

impl ModelSpec {
    /// Resolves a registry name and its numeric parameters.
    ///
    /// Recognized parameters: `r` (qubit-rotation1, default 0.9), `d` and
    /// `margin` (classical-diag, defaults 2 and 0.01). Unknown keys are errors.
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match name {
            "qubit-bloch3" | "qubit-zline" => &[],
            "qubit-rotation1" => &["r"],
            "classical-diag" => &["d", "margin"],
            other => {
                return Err(Error::InvalidModel(format!(
                    "unknown model `{other}` (known: {})",
                    NAMES.join(", ")
                )))
            }
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidModel(format!(
                "model `{name}` has no parameter `{k}`"
            )));
        }
        Ok(match name {
            "qubit-bloch3" => ModelSpec::QubitBloch3,
            "qubit-zline" => ModelSpec::QubitZLine,
            "qubit-rotation1" => ModelSpec::QubitRotation1 {
                r: params.get("r").copied().unwrap_or(0.9),
            },
            _ => {
                let d = params.get("d").copied().unwrap_or(2.0);
                if d.fract() != 0.0 || d < 2.0 {
                    return Err(Error::InvalidModel(format!(
                        "classical-diag needs integer d >= 2, got {d}"
                    )));
                }
                ModelSpec::ClassicalDiag {
                    d: d as usize,
                    margin: params.get("margin").copied().unwrap_or(0.01),
                }
            }
        })
    }

    pub fn build(&self) -> Result<StateModel> {
        match *self {
            ModelSpec::QubitBloch3 => qubit_bloch3(),
            ModelSpec::QubitRotation1 { r } => qubit_rotation1(r),
            ModelSpec::ClassicalDiag { d, margin } => classical_diag(d, margin),
            ModelSpec::QubitZLine => qubit_zline(),
        }
    }

    /// Default first-stage measurement M₀: the six-outcome Pauli POVM for
    /// qubit models, the eigenbasis measurement for classical-diag.
    pub fn default_m0(&self) -> Povm {
        match *self {
            ModelSpec::ClassicalDiag { d, .. } => standard::computational_basis(d),
            _ => standard::pauli6(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::QubitBloch3 => "qubit-bloch3",
            ModelSpec::QubitRotation1 { .. } => "qubit-rotation1",
            ModelSpec::ClassicalDiag { .. } => "classical-diag",
            ModelSpec::QubitZLine => "qubit-zline",
        }
    }
}

/// ρ_θ = (I + θ·σ)/2 on the cube ‖θ‖∞ ≤ 0.57 (inscribed in the Bloch ball).
pub fn qubit_bloch3() -> Result<StateModel> {
    let state_fn: StateFn = Arc::new(|t: &[f64]| pauli::bloch_state([t[0], t[1], t[2]]));
    let sigmas = pauli::all();
    let deriv_fn: DerivFn = Arc::new(move |_t: &[f64], i: usize| sigmas[i].scale_real(0.5));
    StateModel::new(
        "qubit-bloch3",
        2,
        ParameterDomain::symmetric(3, BLOCH3_HALF_WIDTH)?,
        state_fn,
        deriv_fn,
    )
}

/// ρ_θ = e^{−iθσ_z/2} ρ₀ e^{iθσ_z/2} with ρ₀ = (I + rσ_x)/2, i.e. Bloch
/// vector r(cos θ, sin θ, 0).
pub fn qubit_rotation1(r: f64) -> Result<StateModel> {
    if !(0.0..=1.0).contains(&r) || r == 0.0 {
        return Err(Error::InvalidModel(format!(
            "qubit-rotation1 needs 0 < r <= 1, got {r}"
        )));
    }
    let state_fn: StateFn =
        Arc::new(move |t: &[f64]| pauli::bloch_state([r * t[0].cos(), r * t[0].sin(), 0.0]));
    let deriv_fn: DerivFn = Arc::new(move |t: &[f64], _i: usize| {
        let (s, c) = t[0].sin_cos();
        ComplexMatrix::from_row_major(
            2,
            2,
            vec![
                C64::new(0.0, 0.0),
                C64::new(-r * s / 2.0, -r * c / 2.0),
                C64::new(-r * s / 2.0, r * c / 2.0),
                C64::new(0.0, 0.0),
            ],
        )
        .expect("2x2")
    });
    StateModel::new(
        "qubit-rotation1",
        2,
        ParameterDomain::symmetric(1, ROTATION_HALF_WIDTH)?,
        state_fn,
        deriv_fn,
    )
}

/// Commuting family diag(θ_1, …, θ_{d−1}, 1 − Σθ_i).
///
/// Each coordinate ranges over [margin, 1/(d−1) − margin] so every point of
/// the box is a valid state; margin 0 allows pure states on the boundary.
pub fn classical_diag(d: usize, margin: f64) -> Result<StateModel> {
    if d < 2 {
        return Err(Error::InvalidModel("classical-diag needs d >= 2".into()));
    }
    let m = d - 1;
    let hi = 1.0 / m as f64 - margin;
    if !(margin >= 0.0 && margin < hi) {
        return Err(Error::InvalidModel(format!(
            "classical-diag margin {margin} leaves an empty domain"
        )));
    }
    let state_fn: StateFn = Arc::new(move |t: &[f64]| {
        let mut p: Vec<f64> = t.to_vec();
        p.push(1.0 - t.iter().sum::<f64>());
        ComplexMatrix::diag_real(&p)
    });
    let deriv_fn: DerivFn = Arc::new(move |_t: &[f64], i: usize| {
        let mut p = vec![0.0; d];
        p[i] = 1.0;
        p[d - 1] = -1.0;
        ComplexMatrix::diag_real(&p)
    });
    StateModel::new(
        "classical-diag",
        d,
        ParameterDomain::new(vec![margin; m], vec![hi; m])?,
        state_fn,
        deriv_fn,
    )
}

/// One-parameter line (I + θσ_z)/2 through the Bloch ball.
pub fn qubit_zline() -> Result<StateModel> {
    let state_fn: StateFn = Arc::new(|t: &[f64]| pauli::bloch_state([0.0, 0.0, t[0]]));
    let deriv_fn: DerivFn = Arc::new(|_t: &[f64], _i| pauli::sigma_z().scale_real(0.5));
    StateModel::new(
        "qubit-zline",
        2,
        ParameterDomain::symmetric(1, ZLINE_HALF_WIDTH)?,
        state_fn,
        deriv_fn,
    )
}

/// Builds every registry model with default parameters.
pub fn all_default() -> Result<Vec<(ModelSpec, StateModel)>> {
    let specs = [
        ModelSpec::QubitBloch3,
        ModelSpec::QubitRotation1 { r: 0.9 },
        ModelSpec::ClassicalDiag { d: 2, margin: 0.01 },
        ModelSpec::ClassicalDiag { d: 3, margin: 0.01 },
        ModelSpec::QubitZLine,
    ];
    specs
        .into_iter()
        .map(|s| s.build().map(|m| (s, m)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_models_pass_derivative_checks() {
        for (spec, model) in all_default().unwrap() {
            let check = model.verify_derivatives(25).unwrap();
            assert!(check.max_fd_error <= 1e-6, "{spec:?}");
            assert!(check.max_hermitian_defect <= 1e-9 && check.max_trace <= 1e-9);
        }
    }

    #[test]
    fn name_resolution() {
        let mut p = BTreeMap::new();
        p.insert("r".to_string(), 0.5);
        assert_eq!(
            ModelSpec::from_name("qubit-rotation1", &p).unwrap(),
            ModelSpec::QubitRotation1 { r: 0.5 }
        );
        assert!(ModelSpec::from_name("qubit-bloch3", &p).is_err());
        assert!(ModelSpec::from_name("nope", &BTreeMap::new()).is_err());
        let mut q = BTreeMap::new();
        q.insert("d".to_string(), 2.5);
        assert!(ModelSpec::from_name("classical-diag", &q).is_err());
    }

    #[test]
    fn rotation_state_matches_conjugation() {
        let m = qubit_rotation1(0.9).unwrap();
        let theta: f64 = 0.7;
        let u = ComplexMatrix::from_row_major(
            2,
            2,
            vec![
                C64::from_polar(1.0, -theta / 2.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::from_polar(1.0, theta / 2.0),
            ],
        )
        .unwrap();
        let rho0 = pauli::bloch_state([0.9, 0.0, 0.0]);
        let expect = &(&u * &rho0) * &u.dagger();
        assert!(m.state_matrix(&[theta]).max_abs_diff(&expect) < 1e-15);
    }
}
