use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::score_rows;
use crate::data::{join_whiteness, CensusTable, Dataset, WHITENESS_FEATURE};
use crate::error::{Error, Result};
use crate::gbt::{fit, Ensemble, TrainConfig};
use crate::metrics::{
    max_curve_gap, rate_curves, roc, spearman, write_curve_table, CurveGap, CurveSuite, Rate,
    RocResult,
};
use crate::shap::{explain_rows, summarize, ShapEngine, ShapSummary};

/// Baseline (cep3) model versus the same model trained on neighbourhood whiteness.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub n_train: usize,
    pub n_eval: usize,
    pub auc_baseline: f64,
    pub auc_swapped: f64,
    /// |auc_baseline - auc_swapped|
    pub delta_auc: f64,
    /// Largest gap per rate over the threshold grid.
    pub gaps: Vec<CurveGap>,
    pub max_gap: f64,
    /// Largest per-row difference in eval default probability.
    pub max_score_diff: f64,
    pub summary_baseline: ShapSummary,
    pub summary_swapped: ShapSummary,
    /// Spearman correlation of `(not_white_prop, phi)` over eval rows.
    pub whiteness_spearman: f64,
    /// `whiteness_spearman > 0.9`
    pub whiteness_monotone: bool,
    /// cep3 codes filled from the census fallback.
    pub imputed: Vec<u16>,
    /// Published real-data values, for comparison only.
    pub reference: BTreeMap<&'static str, f64>,
    #[serde(skip)]
    pub baseline: Ensemble,
    #[serde(skip)]
    pub swapped: Ensemble,
    #[serde(skip)]
    pub curves_baseline: CurveSuite,
    #[serde(skip)]
    pub curves_swapped: CurveSuite,
    #[serde(skip)]
    pub roc_baseline: RocResult,
    #[serde(skip)]
    pub roc_swapped: RocResult,
}

struct Side {
    model: Ensemble,
    scores: Vec<f64>,
    curves: CurveSuite,
    roc: RocResult,
    summary: ShapSummary,
}

fn run_side(
    train: &Dataset,
    eval: &Dataset,
    cfg: &TrainConfig,
    thresholds: &[f64],
) -> Result<Side> {
    let model = fit(train, cfg)?;
    let scores = score_rows(&model, eval)?;
    let labels = eval.labels();
    let attrs = explain_rows(&model, eval.rows(), ShapEngine::Tree)?;
    Ok(Side {
        curves: rate_curves(&scores, &labels, thresholds)?,
        roc: roc(&scores, &labels)?,
        summary: summarize(&attrs, eval)?,
        model,
        scores,
    })
}

/// Trains one model on `train` as given and one with cep3 replaced by the
/// census not-white proportion, then compares both on `eval`.
pub fn proxy_swap_experiment(
    train: &Dataset,
    eval: &Dataset,
    census: &CensusTable,
    cfg: &TrainConfig,
    thresholds: &[f64],
) -> Result<EquivalenceReport> {
    if eval.is_empty() {
        return Err(Error::InvalidInput(
            "proxy swap needs a non-empty eval split".into(),
        ));
    }
    let swapped_train = join_whiteness(train, census)?;
    let swapped_eval = join_whiteness(eval, census)?;
    let mut imputed = swapped_train.imputed.clone();
    imputed.extend(&swapped_eval.imputed);
    imputed.sort_unstable();
    imputed.dedup();

    let base = run_side(train, eval, cfg, thresholds)?;
    let swap = run_side(
        &swapped_train.dataset,
        &swapped_eval.dataset,
        cfg,
        thresholds,
    )?;

    let gaps = Rate::ALL
        .iter()
        .map(|&r| max_curve_gap(&base.curves, &swap.curves, r))
        .collect::<Result<Vec<_>>>()?;
    let max_gap = gaps.iter().map(|g| g.gap).fold(0.0, f64::max);
    let max_score_diff = base
        .scores
        .iter()
        .zip(&swap.scores)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let points = &swap
        .summary
        .get(WHITENESS_FEATURE)
        .ok_or_else(|| Error::Schema(format!("swapped model lacks {WHITENESS_FEATURE}")))?
        .points;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    // a model that never splits on whiteness has constant phi
    let whiteness_spearman = spearman(&xs, &ys).unwrap_or(0.0);

    Ok(EquivalenceReport {
        n_train: train.len(),
        n_eval: eval.len(),
        auc_baseline: base.roc.auc,
        auc_swapped: swap.roc.auc,
        delta_auc: (base.roc.auc - swap.roc.auc).abs(),
        gaps,
        max_gap,
        max_score_diff,
        summary_baseline: base.summary,
        summary_swapped: swap.summary,
        whiteness_spearman,
        whiteness_monotone: whiteness_spearman > 0.9,
        imputed,
        reference: BTreeMap::from([("auc_train", 0.76), ("auc_eval", 0.74)]),
        baseline: base.model,
        swapped: swap.model,
        curves_baseline: base.curves,
        curves_swapped: swap.curves,
        roc_baseline: base.roc,
        roc_swapped: swap.roc,
    })
}

/// Both models' rate curves, keyed by `model` (`baseline` or `swapped`).
pub fn write_equivalence_curves<W: Write>(report: &EquivalenceReport, writer: W) -> Result<()> {
    write_curve_table(
        "model",
        &[
            ("baseline", &report.curves_baseline),
            ("swapped", &report.curves_swapped),
        ],
        writer,
    )
}

/// `model,fpr,tpr`
pub fn write_equivalence_roc<W: Write>(report: &EquivalenceReport, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let err = crate::data::csv_err;
    wtr.write_record(["model", "fpr", "tpr"]).map_err(err)?;
    for (name, r) in [
        ("baseline", &report.roc_baseline),
        ("swapped", &report.roc_swapped),
    ] {
        for (x, y) in &r.points {
            wtr.write_record([name.to_string(), x.to_string(), y.to_string()])
                .map_err(err)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<roc table>", e))
}
