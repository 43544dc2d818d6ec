//! States, measurements and parametric models.

mod model;
mod povm;
pub mod registry;
mod state;

pub use model::{tensor_power_model, DerivFn, ParameterDomain, StateFn, StateModel, WeightMatrix};
pub use povm::{
    coarse_grain, outcome_distribution, random_povm, rank_one_povm, standard, tensor_povm,
    validate_povm, Axiom, Povm, Violation,
};
pub use state::DensityOperator;

pub(crate) use povm::{distribution_of_matrix, normalize_frame};
