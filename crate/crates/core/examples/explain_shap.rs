//! Shapley attributions: the polynomial tree algorithm against brute-force
//! coalition enumeration, local accuracy, and the global feature ranking.
//!
//!     cargo run --release --example explain_shap

use geoaudit::data::{generate_synthetic, temporal_split, SynthConfig};
use geoaudit::gbt::{fit, TrainConfig};
use geoaudit::shap::{explain_rows, shap_exact, shap_tree, summarize, ShapEngine};

fn main() -> geoaudit::Result<()> {
    let cfg = SynthConfig {
        n_rows: 20_000,
        ..SynthConfig::paper()
    };
    let (ds, _) = generate_synthetic(&cfg)?;
    let split = temporal_split(&ds, cfg.split_cutoff);
    let model = fit(&split.train, &TrainConfig::default())?;

    let mut worst = 0.0f64;
    for row in split.eval.rows().iter().take(20) {
        let fast = shap_tree(&model, &row.features)?;
        let slow = shap_exact(&model, &row.features)?;
        for (a, b) in fast.phi.iter().zip(&slow.phi) {
            worst = worst.max((a - b).abs());
        }
    }
    println!("tree vs exact on 20 rows: max |dphi| = {worst:.2e}");

    let row = &split.eval.rows()[0];
    let a = shap_tree(&model, &row.features)?;
    println!(
        "row {}: base {:.4} + sum(phi) {:.4} = {:.6}, model margin {:.6}",
        row.id,
        a.base_value,
        a.phi.iter().sum::<f64>(),
        a.output(),
        model.predict_margin(&row.features)?
    );

    let attrs = explain_rows(&model, split.eval.rows(), ShapEngine::Tree)?;
    let summary = summarize(&attrs, &split.eval)?;
    println!("mean |phi| over {} eval rows:", attrs.len());
    for (i, f) in summary.ranked.iter().enumerate() {
        println!("{:>3}. {:<8} {:.4}", i + 1, f.feature, f.mean_abs_phi);
    }
    Ok(())
}
