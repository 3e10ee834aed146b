//! Fit the 250-tree, depth-3 boosted model on the temporal train split, report
//! ROC-AUC on both splits, and round-trip the model file.
//!
//!     cargo run --release --example train_model

use geoaudit::audit::score_rows;
use geoaudit::data::{generate_synthetic, temporal_split, SynthConfig};
use geoaudit::gbt::{fit, read_model, write_model, TrainConfig};
use geoaudit::metrics::roc;

fn main() -> geoaudit::Result<()> {
    let cfg = SynthConfig::paper();
    let (ds, _) = generate_synthetic(&cfg)?;
    let split = temporal_split(&ds, cfg.split_cutoff);

    let train_cfg = TrainConfig::default();
    let t = std::time::Instant::now();
    let model = fit(&split.train, &train_cfg)?;
    println!(
        "{} trees of depth <= {} in {:.1?}",
        model.trees().len(),
        train_cfg.max_depth,
        t.elapsed()
    );

    for (name, part) in [("train", &split.train), ("eval", &split.eval)] {
        let auc = roc(&score_rows(&model, part)?, &part.labels())?.auc;
        println!("{name:<5} auc {auc:.4}");
    }

    let mut bytes = Vec::new();
    write_model(&model, &mut bytes)?;
    let back = read_model(bytes.as_slice())?;
    let row = &split.eval.rows()[0].features;
    assert_eq!(model.predict_margin(row)?, back.predict_margin(row)?);
    println!("model file: {} bytes, reloads bit-exactly", bytes.len());
    Ok(())
}
