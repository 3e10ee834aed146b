//! Evaluation metrics: threshold-swept conditional rates, ROC/AUC and correlations.

mod curves;
mod roc;
mod stats;

pub use curves::{
    max_curve_gap, rate_curves, threshold_grid, write_curve_table, write_curves, Confusion,
    CurveGap, CurveSuite, Rate, DEFAULT_THRESHOLDS,
};
pub use roc::{roc, write_roc, RocResult};
pub use stats::{pearson, spearman};
