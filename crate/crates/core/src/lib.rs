//! Gradient-boosted credit scoring with exact Shapley attributions and a
//! geographic proxy-discrimination audit battery.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: dataset schema, CSV ingestion, temporal splits, census joins,
//!   macro-region mapping and a planted-bias synthetic generator.
//! - [`gbt`]: exact greedy second-order boosting on a logistic objective.
//! - [`shap`]: Shapley attributions by subset enumeration and by the
//!   polynomial-time tree algorithm, plus group and summary aggregations.
//! - [`metrics`]: ROC/AUC, threshold-swept conditional-rate curves, Pearson and
//!   Spearman correlation, curve gaps.
//! - [`audit`]: the four experiments (geographic attribution vs. census,
//!   counterfactual relocation, proxy swap, regional rate curves).
//! - [`cli`]: the `geoaudit` command-line surface.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod audit;
pub mod cli;
pub mod data;
pub mod error;
pub mod gbt;
pub mod metrics;
pub mod shap;

pub use error::{Error, Result};
