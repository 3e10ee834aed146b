//! Shapley feature attributions for tree ensembles.
//!
//! The value of a coalition `S` is the path-dependent conditional expectation
//! `E[f(x) | x_S]`: descend each tree, follow the row at splits on features in
//! `S` and take the cover-weighted average of both branches otherwise.
//! [`shap_exact`] enumerates every coalition; [`shap_tree`] computes the same
//! values in polynomial time. Both work on the margin (log-odds) scale.

mod aggregate;
mod exact;
mod tree;

pub use aggregate::{
    aggregate_by_group, summarize, write_attributions, write_group_table, write_scatter,
    write_summary, FeatureImpact, GroupAttributionTable, GroupStat, ShapSummary,
};
pub use exact::{shap_exact, MAX_EXACT_FEATURES};
pub use tree::shap_tree;

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ExampleRow;
use crate::error::{Error, Result};
use crate::gbt::{Ensemble, NodeKind, Tree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputScale {
    Margin,
    Probability,
}

/// Attribution of one prediction. `base_value + sum(phi)` equals the model
/// output on `output_scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub output_scale: OutputScale,
}

impl AttributionRow {
    /// `base_value + sum(phi)`.
    pub fn output(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapEngine {
    #[default]
    Tree,
    Exact,
}

impl FromStr for ShapEngine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(ShapEngine::Tree),
            "exact" => Ok(ShapEngine::Exact),
            other => Err(Error::Config(format!(
                "unknown shap engine {other:?} (expected tree or exact)"
            ))),
        }
    }
}

pub fn explain(m: &Ensemble, row: &[f64], engine: ShapEngine) -> Result<AttributionRow> {
    match engine {
        ShapEngine::Tree => shap_tree(m, row),
        ShapEngine::Exact => shap_exact(m, row),
    }
}

/// Attributions for every row, in row order. Runs on the current rayon pool.
pub fn explain_rows(
    m: &Ensemble,
    rows: &[ExampleRow],
    engine: ShapEngine,
) -> Result<Vec<AttributionRow>> {
    if engine == ShapEngine::Exact && m.n_features() > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            n: m.n_features(),
            max: MAX_EXACT_FEATURES,
        });
    }
    rows.par_iter()
        .map(|r| explain(m, &r.features, engine))
        .collect()
}

/// Cover-weighted branch fractions at a split, `(left, right)`.
pub(crate) fn branch_fractions(tree: &Tree, left: usize, right: usize) -> Result<(f64, f64)> {
    let cl = tree.nodes()[left].cover;
    let cr = tree.nodes()[right].cover;
    let total = cl + cr;
    if !(total > 0.0) {
        return Err(Error::Model(format!(
            "split with children {left}/{right} has zero total cover"
        )));
    }
    Ok((cl / total, cr / total))
}

/// Expectation of one tree's raw output given the features for which `present` is true.
pub(crate) fn tree_expectation(
    tree: &Tree,
    row: &[f64],
    present: &impl Fn(usize) -> bool,
    node: usize,
) -> Result<f64> {
    match tree.nodes()[node].kind {
        NodeKind::Leaf { weight } => Ok(weight),
        NodeKind::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            if present(feature) {
                let next = if row[feature] < threshold {
                    left
                } else {
                    right
                };
                tree_expectation(tree, row, present, next)
            } else {
                let (fl, fr) = branch_fractions(tree, left, right)?;
                Ok(fl * tree_expectation(tree, row, present, left)?
                    + fr * tree_expectation(tree, row, present, right)?)
            }
        }
    }
}

/// `E[f(x) | x_S]` on the margin scale, where `present[i]` marks `i ∈ S`.
pub fn conditional_expectation(m: &Ensemble, row: &[f64], present: &[bool]) -> Result<f64> {
    m.check_row(row)?;
    if present.len() != m.n_features() {
        return Err(Error::InvalidInput(format!(
            "feature subset mask has {} entries, model has {} features",
            present.len(),
            m.n_features()
        )));
    }
    let is_present = |f: usize| present[f];
    let mut sum = 0.0;
    for tree in m.trees() {
        sum += tree_expectation(tree, row, &is_present, 0)?;
    }
    Ok(m.base_score() + m.shrinkage() * sum)
}

/// `E[f(x)]` with nothing conditioned: the cover-weighted mean margin.
pub fn expected_value(m: &Ensemble) -> Result<f64> {
    let row = vec![0.0; m.n_features()];
    conditional_expectation(m, &row, &vec![false; m.n_features()])
}
