//! Conditional-rate curves p(ŷ | y) per macro-region, the maximum cross-region
//! gap per rate, and how often the less-white regions sit above the whiter
//! ones on both FPR and TPR.
//!
//!     cargo run --release --example regional_curves

use geoaudit::audit::regional_curves;
use geoaudit::data::{generate_synthetic, temporal_split, Region, RegionMapping, SynthConfig};
use geoaudit::gbt::{fit, TrainConfig};
use geoaudit::metrics::{threshold_grid, Rate};

fn main() -> geoaudit::Result<()> {
    let cfg = SynthConfig::paper();
    let (ds, _) = generate_synthetic(&cfg)?;
    let split = temporal_split(&ds, cfg.split_cutoff);
    let model = fit(&split.train, &TrainConfig::default())?;

    let grid = threshold_grid(101)?;
    let report = regional_curves(&model, &split.eval, &RegionMapping::bundled(), &grid)?;

    println!(
        "{:<14}{:>7}{:>9}{:>9}{:>9}{:>9}",
        "region", "rows", "TPR@.5", "TNR@.5", "FPR@.5", "FNR@.5"
    );
    for r in &report.regions {
        let v = |rate| {
            r.curves
                .value(rate, 50)
                .map_or("-".into(), |v| format!("{v:.3}"))
        };
        println!(
            "{:<14}{:>7}{:>9}{:>9}{:>9}{:>9}",
            r.region.name(),
            r.n_rows,
            v(Rate::Tpr),
            v(Rate::Tnr),
            v(Rate::Fpr),
            v(Rate::Fnr)
        );
    }
    for g in &report.gaps {
        if let (Some(gap), Some(t), Some(hi), Some(lo)) = (g.gap, g.threshold, g.high, g.low) {
            println!(
                "max {} gap {gap:.3} at {t:.2}: {hi} over {lo}",
                g.rate.name()
            );
        }
    }
    let p = report.pattern(
        &[Region::North, Region::Northeast, Region::CentralWest],
        &[Region::Southeast, Region::South],
        0.2,
        0.8,
    );
    println!(
        "less-white regions higher on FPR at {}/{}, TPR at {}/{}, both at {}/{} thresholds in [0.2, 0.8]",
        p.fpr_holds, p.n_thresholds, p.tpr_holds, p.n_thresholds, p.both_hold, p.n_thresholds
    );
    Ok(())
}
