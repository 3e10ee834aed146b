//! Generate the `paper` preset synthetic dataset and inspect the planted
//! geography → race → default link.
//!
//!     cargo run --release --example synthesize [-- <preset> <out_dir>]

use std::collections::BTreeMap;
use std::fs::File;

use geoaudit::data::{
    generate_synthetic, temporal_split, write_census, write_dataset, RegionMapping, SynthConfig,
    GEO_FEATURE,
};

fn main() -> geoaudit::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "paper".into());
    let cfg = SynthConfig::preset(&preset)?;
    let (ds, census) = generate_synthetic(&cfg)?;
    let split = temporal_split(&ds, cfg.split_cutoff);

    println!(
        "preset {preset}: {} rows, default rate {:.4}",
        ds.len(),
        ds.base_rate().unwrap()
    );
    println!(
        "train {} rows ({:.4}), eval {} rows ({:.4})",
        split.train.len(),
        split.train.base_rate().unwrap(),
        split.eval.len(),
        split.eval.base_rate().unwrap()
    );

    // default rate and census whiteness per macro-region
    let mapping = RegionMapping::bundled();
    let g = ds.schema().index_of(GEO_FEATURE).unwrap();
    let mut by_region: BTreeMap<_, (usize, usize, f64)> = BTreeMap::new();
    for row in ds.rows() {
        let code = row.features[g] as u16;
        let e = by_region.entry(mapping.region_of(code)).or_default();
        e.0 += 1;
        e.1 += row.label as usize;
        e.2 += census.get(code).unwrap();
    }
    println!(
        "{:<14}{:>8}{:>10}{:>12}",
        "region", "rows", "default", "not-white"
    );
    for (region, (n, pos, prop)) in by_region {
        let n_f = n as f64;
        println!(
            "{:<14}{n:>8}{:>10.3}{:>12.3}",
            region.name(),
            pos as f64 / n_f,
            prop / n_f
        );
    }

    if let Some(dir) = args.next() {
        std::fs::create_dir_all(&dir).unwrap();
        write_dataset(&ds, File::create(format!("{dir}/dataset.csv")).unwrap())?;
        write_census(&census, File::create(format!("{dir}/census.csv")).unwrap())?;
        println!("wrote {dir}/dataset.csv and {dir}/census.csv");
    }
    Ok(())
}
