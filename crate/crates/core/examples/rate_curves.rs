//! Threshold-swept confusion rates, ROC/AUC and correlation helpers on a
//! small hand-made score vector.
//!
//!     cargo run --example rate_curves

use geoaudit::metrics::{max_curve_gap, pearson, rate_curves, roc, spearman, threshold_grid, Rate};

fn main() -> geoaudit::Result<()> {
    let scores = [0.92, 0.81, 0.74, 0.66, 0.58, 0.47, 0.39, 0.31, 0.22, 0.08];
    let labels = [
        true, true, false, true, false, true, false, false, false, false,
    ];
    let grid = threshold_grid(11)?;

    let suite = rate_curves(&scores, &labels, &grid)?;
    let show = |v: Option<f64>| v.map_or("  -  ".into(), |v| format!("{v:.3}"));
    println!("thr    TPR    FPR    PPV    NPV");
    for (i, t) in grid.iter().enumerate() {
        println!(
            "{t:.1}  {}  {}  {}  {}",
            show(suite.value(Rate::Tpr, i)),
            show(suite.value(Rate::Fpr, i)),
            show(suite.value(Rate::Ppv, i)),
            show(suite.value(Rate::Npv, i))
        );
    }

    let r = roc(&scores, &labels)?;
    println!("AUC {:.4} over {} ROC points", r.auc, r.points.len());

    // a slightly shuffled scorer
    let other = [0.90, 0.70, 0.80, 0.60, 0.55, 0.50, 0.35, 0.30, 0.20, 0.10];
    let b = rate_curves(&other, &labels, &grid)?;
    for rate in [Rate::Tpr, Rate::Fpr] {
        let g = max_curve_gap(&suite, &b, rate)?;
        println!(
            "max {} gap {:.3} at threshold {:.1}",
            rate.name(),
            g.gap,
            g.threshold
        );
    }
    println!(
        "pearson {:.4}, spearman {:.4}",
        pearson(&scores, &other)?,
        spearman(&scores, &other)?
    );
    Ok(())
}
