//! Exact game-theoretic feature attributions and counterfactual feature
//! importances for binary-decision models.
//!
//! The crate is organised bottom-up:
//!
//! - [`game`]: coalitions, characteristic functions, Shapley values, Harsanyi
//!   dividends and voting power indices, all computed by exact enumeration.
//! - [`models`]: the model abstraction (output `f`, decision `F`), hybrid
//!   points, portable JSON model documents, datasets and the quantile transform.
//! - [`counterfactuals`]: K-NN counterfactual generation in quantile space,
//!   the sparsity predicates and families, and maximally sparse induction.
//! - [`attributions`]: SHAP, CF-SHAP, binary CF-SHAP, counterfactual
//!   frequency importances and power-index attributions over single-reference
//!   games.
//! - [`metrics`]: rank agreement metrics between explanations and
//!   explanation-quality metrics (necessity, sufficiency, recourse cost,
//!   plausibility).
//! - [`verify`]: randomized and exhaustive property suites for the
//!   equivalence results connecting the attributions above.

pub mod attributions;
pub mod counterfactuals;
mod error;
pub mod game;
pub mod metrics;
pub mod models;
pub mod synthetic;
pub mod verify;

pub use error::{Error, Result};

/// Exact rational used for attributions of binary games.
pub type Rational = num_rational::Ratio<i128>;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
