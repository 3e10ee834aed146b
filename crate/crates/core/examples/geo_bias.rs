//! Aggregate the cep3 attribution per code and correlate it with the census
//! not-white proportion, next to the same correlation for raw default
//! probabilities.
//!
//!     cargo run --release --example geo_bias

use geoaudit::audit::geo_bias_report;
use geoaudit::data::{generate_synthetic, temporal_split, SynthConfig};
use geoaudit::gbt::{fit, TrainConfig};
use geoaudit::shap::ShapEngine;

fn main() -> geoaudit::Result<()> {
    let cfg = SynthConfig::paper();
    let (ds, census) = generate_synthetic(&cfg)?;
    let split = temporal_split(&ds, cfg.split_cutoff);
    let model = fit(&split.train, &TrainConfig::default())?;

    let report = geo_bias_report(&model, &split.eval, &census, ShapEngine::Tree)?;
    println!(
        "{} codes over {} eval rows",
        report.table.len(),
        report.n_rows
    );
    println!(
        "r_shap  = {:.3}   (real-data reference {:.2})",
        report.r_shap, report.reference["r_shap"]
    );
    println!(
        "r_proba = {:.3}   (real-data reference {:.2})",
        report.r_proba, report.reference["r_proba"]
    );

    let mut table = report.table.clone();
    table.sort_by(|a, b| a.mean_phi.total_cmp(&b.mean_phi));
    println!("most favourable codes:");
    for r in table.iter().take(3) {
        println!(
            "  {:03}  phi {:+.3}  not-white {:.3}  n {}",
            r.cep3, r.mean_phi, r.not_white_prop, r.n
        );
    }
    println!("least favourable codes:");
    for r in table.iter().rev().take(3) {
        println!(
            "  {:03}  phi {:+.3}  not-white {:.3}  n {}",
            r.cep3, r.mean_phi, r.not_white_prop, r.n
        );
    }
    Ok(())
}
