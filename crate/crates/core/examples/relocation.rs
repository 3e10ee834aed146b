//! Counterfactual relocation: move São Paulo applicants (cep3 010-199) to
//! Bahia codes (400-489) with every other feature fixed, then re-score.
//!
//!     cargo run --release --example relocation

use geoaudit::audit::{counterfactual_relocation, TargetSampler};
use geoaudit::data::{generate_synthetic, temporal_split, SynthConfig, GEO_FEATURE};
use geoaudit::gbt::{fit, TrainConfig};

fn main() -> geoaudit::Result<()> {
    let cfg = SynthConfig::paper();
    let (ds, _) = generate_synthetic(&cfg)?;
    let split = temporal_split(&ds, cfg.split_cutoff);
    let model = fit(&split.train, &TrainConfig::default())?;

    let g = split.train.schema().index_of(GEO_FEATURE).unwrap();
    let bahia = TargetSampler::uniform(
        split
            .train
            .rows()
            .iter()
            .map(|r| r.features[g] as u16)
            .filter(|c| (400..=489).contains(c)),
    )?;
    let report =
        counterfactual_relocation(&model, &split.eval, |c| (10..=199).contains(&c), &bahia, 7)?;

    println!("moved {} rows", report.n_moved);
    println!(
        "worthiness strictly decreased for {:.2}% (real-data reference {:.1}%)",
        100.0 * report.increased,
        100.0 * report.reference["worthiness_decreased"]
    );
    let d = report.worthiness_delta;
    println!(
        "worthiness delta: min {:+.4} q1 {:+.4} median {:+.4} q3 {:+.4} max {:+.4}",
        d.min, d.q1, d.median, d.q3, d.max
    );
    Ok(())
}
