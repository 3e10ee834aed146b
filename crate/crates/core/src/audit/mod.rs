//! The proxy-discrimination audit battery.
//!
//! Each experiment is a pure function of its inputs and returns a serializable
//! report. [`report`] handles file naming and companion CSV tables.

mod geo;
mod proxy;
mod regions;
mod relocate;
pub mod report;

pub use geo::{geo_bias_report, write_geo_table, GeoBiasReport, GeoRow};
pub use proxy::{
    proxy_swap_experiment, write_equivalence_curves, write_equivalence_roc, EquivalenceReport,
};
pub use regions::{
    regional_curves, write_regional_curves, RegionCurves, RegionGap, RegionOrdering, RegionPattern,
    RegionalCurveReport,
};
pub use relocate::{
    counterfactual_relocation, write_moves, DeltaSummary, Move, RelocationReport, TargetSampler,
};

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::Result;
use crate::gbt::Ensemble;

/// Default probabilities for every row, in row order.
pub fn score_rows(m: &Ensemble, ds: &Dataset) -> Result<Vec<f64>> {
    ds.rows()
        .par_iter()
        .map(|r| m.predict_proba(&r.features))
        .collect()
}
