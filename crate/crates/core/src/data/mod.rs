//! Dataset schema, CSV ingestion, temporal splitting, census joins, region
//! mapping and the synthetic planted-bias generator.

mod census;
mod dataset;
mod region;
mod synth;

pub use census::{join_whiteness, load_census, read_census, write_census, CensusTable, Joined};
pub use dataset::{
    load_dataset, load_dataset_inferred, read_dataset, read_dataset_inferred, temporal_split,
    write_dataset, Dataset, ExampleRow, Provenance, Schema, Split, GEO_FEATURE, WHITENESS_FEATURE,
};
pub use region::{
    load_regions, read_regions, region_of_cep3, write_regions, Region, RegionMapping, RegionRange,
};
pub use synth::{generate_synthetic, SynthConfig};

pub(crate) use dataset::csv_err;

/// Largest valid CEP-3 code.
pub const CEP3_MAX: u16 = 999;
