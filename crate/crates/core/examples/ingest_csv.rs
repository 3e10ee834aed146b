//! Bring your own data: read a dataset CSV with any feature columns, validate
//! it, and replace cep3 with neighbourhood whiteness from a census CSV.
//!
//!     cargo run --example ingest_csv

use geoaudit::data::{
    join_whiteness, read_census, read_dataset_inferred, region_of_cep3, RegionMapping, GEO_FEATURE,
};

const DATA: &str = "\
id,ref_date,age,income,cep3,label
a1,2017-06-02,34,2100.5,012,0
a2,2017-11-20,51,880.0,415,1
a3,2018-01-15,27,1500.0,901,0
a4,2018-02-09,45,990.0,415,1
";

const CENSUS: &str = "\
cep3,not_white_prop
12,0.36
415,0.78
901,0.215
";

fn main() -> geoaudit::Result<()> {
    let ds = read_dataset_inferred(DATA.as_bytes())?;
    println!("features {:?}, {} rows", ds.schema().names(), ds.len());

    let mapping = RegionMapping::bundled();
    for code in ds.geo_codes().unwrap() {
        println!("cep3 {code:03} -> {}", region_of_cep3(code, &mapping));
    }

    let census = read_census(CENSUS.as_bytes())?;
    let joined = join_whiteness(&ds, &census)?;
    let w = joined.dataset.schema().index_of("not_white_prop").unwrap();
    for row in joined.dataset.rows() {
        println!("{} not_white_prop {}", row.id, row.features[w]);
    }

    // validation errors carry the offending line
    let bad = DATA.replace("901", "1200");
    match read_dataset_inferred(bad.as_bytes()) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    assert!(ds.schema().index_of(GEO_FEATURE).is_some());
    Ok(())
}
