//! Quantum Cramér-Rao type bounds for parametric families of density
//! operators, POVM optimization, and Monte Carlo studies of the two-stage
//! adaptive estimator and its block-collective variant.
//!
//! Module map:
//!
//! - [`matrix`]: dense complex linear algebra (Kronecker products,
//!   Hermitian eigensolver, SLD Lyapunov equation).
//! - [`quantum`]: density operators, POVMs, parametric models and the
//!   built-in model registry.
//! - [`fisher`]: classical and SLD Fisher information, local unbiasedness,
//!   the adaptive chain identity.
//! - [`bound`]: numerical minimization of Tr G J^{-1} over POVMs.
//! - [`estimation`]: seeded sampling and maximum likelihood.
//! - [`adaptive`]: two-stage and block-collective Monte Carlo studies.
//! - [`config`], [`report`] and [`cli`]: run configuration, result files and
//!   the `qcrb run` driver.

pub mod adaptive;
pub mod bound;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimation;
pub mod fisher;
pub mod matrix;
pub mod numeric;
pub mod optimize;
pub mod quantum;
pub mod report;

pub use error::{Error, Result};
