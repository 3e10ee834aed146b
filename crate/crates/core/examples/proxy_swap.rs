//! Swap cep3 for the census not-white proportion, retrain with identical
//! settings, and compare the two models curve by curve.
//!
//!     cargo run --release --example proxy_swap [-- <preset>]

use geoaudit::audit::proxy_swap_experiment;
use geoaudit::data::{generate_synthetic, temporal_split, SynthConfig, WHITENESS_FEATURE};
use geoaudit::gbt::TrainConfig;
use geoaudit::metrics::threshold_grid;

fn main() -> geoaudit::Result<()> {
    let preset = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "pure-proxy".into());
    let cfg = SynthConfig::preset(&preset)?;
    let (ds, census) = generate_synthetic(&cfg)?;
    let split = temporal_split(&ds, cfg.split_cutoff);

    let grid = threshold_grid(101)?;
    let rep = proxy_swap_experiment(
        &split.train,
        &split.eval,
        &census,
        &TrainConfig::default(),
        &grid,
    )?;

    println!(
        "auc with cep3 {:.4}, with whiteness {:.4}, |dAUC| {:.4}",
        rep.auc_baseline, rep.auc_swapped, rep.delta_auc
    );
    println!("largest gap per rate over {} thresholds:", grid.len());
    for g in &rep.gaps {
        let i = grid.iter().position(|&t| t == g.threshold).unwrap();
        let c = rep.curves_baseline.counts[i];
        println!(
            "  {:<4} {:.4} at {:.2} ({} rows predicted default)",
            g.rate.name(),
            g.gap,
            g.threshold,
            c.tp + c.fp
        );
    }
    println!(
        "{} ranks #{} with cep3 removed; phi rises with the proportion: spearman {:.3}",
        WHITENESS_FEATURE,
        rep.summary_swapped.rank_of(WHITENESS_FEATURE).unwrap(),
        rep.whiteness_spearman
    );
    Ok(())
}
