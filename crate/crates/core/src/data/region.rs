use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dataset::csv_err;
use super::CEP3_MAX;
use crate::error::{Error, Result};

/// The five IBGE macro-regions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    North,
    Northeast,
    #[serde(rename = "Central-West")]
    CentralWest,
    Southeast,
    South,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::North,
        Region::Northeast,
        Region::CentralWest,
        Region::Southeast,
        Region::South,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Region::North => "North",
            Region::Northeast => "Northeast",
            Region::CentralWest => "Central-West",
            Region::Southeast => "Southeast",
            Region::South => "South",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "north" | "n" => Region::North,
            "northeast" | "ne" => Region::Northeast,
            "centralwest" | "centerwest" | "cw" => Region::CentralWest,
            "southeast" | "se" => Region::Southeast,
            "south" | "s" => Region::South,
            _ => return Err(Error::InvalidInput(format!("unknown region {s:?}"))),
        })
    }
}

/// Inclusive code range assigned to one region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionRange {
    pub lo: u16,
    pub hi: u16,
    pub region: Region,
}

/// Total map from CEP-3 codes to macro-regions.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMapping {
    ranges: Vec<RegionRange>,
    source: String,
    dense: Vec<Region>,
}

const DEFAULT_TABLE: &str = include_str!("../../data/regions.csv");

impl RegionMapping {
    /// Ranges must be disjoint and together cover `0..=999`.
    pub fn new(mut ranges: Vec<RegionRange>, source: impl Into<String>) -> Result<Self> {
        ranges.sort_by_key(|r| r.lo);
        let mut dense = Vec::with_capacity(usize::from(CEP3_MAX) + 1);
        let mut next = 0u16;
        for r in &ranges {
            if r.lo > r.hi || r.hi > CEP3_MAX {
                return Err(Error::InvalidInput(format!(
                    "bad region range {}..={}",
                    r.lo, r.hi
                )));
            }
            if r.lo != next {
                return Err(Error::InvalidInput(if r.lo < next {
                    format!("region range starting at {} overlaps its predecessor", r.lo)
                } else {
                    format!("codes {}..={} are not mapped to any region", next, r.lo - 1)
                }));
            }
            dense.extend(std::iter::repeat_n(r.region, usize::from(r.hi - r.lo) + 1));
            next = r.hi + 1;
        }
        if next != CEP3_MAX + 1 {
            return Err(Error::InvalidInput(format!(
                "codes {next}..=999 are not mapped to any region"
            )));
        }
        Ok(RegionMapping {
            ranges,
            source: source.into(),
            dense,
        })
    }

    /// Bundled table derived from the public CEP block allocation by state.
    pub fn bundled() -> Self {
        let mut m = read_regions(DEFAULT_TABLE.as_bytes()).expect("bundled region table is valid");
        m.source = "bundled CEP block allocation by state, grouped into IBGE macro-regions".into();
        m
    }

    pub fn ranges(&self) -> &[RegionRange] {
        &self.ranges
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// # Panics
    /// If `cep3 > 999`.
    pub fn region_of(&self, cep3: u16) -> Region {
        self.dense[usize::from(cep3)]
    }
}

impl Default for RegionMapping {
    fn default() -> Self {
        Self::bundled()
    }
}

pub fn region_of_cep3(cep3: u16, mapping: &RegionMapping) -> Region {
    mapping.region_of(cep3)
}

pub fn load_regions(path: impl AsRef<Path>) -> Result<RegionMapping> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut m = read_regions(file)?;
    m.source = path.display().to_string();
    Ok(m)
}

/// Parses `cep3_lo,cep3_hi,region`.
pub fn read_regions<R: Read>(reader: R) -> Result<RegionMapping> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = records.next().ok_or(Error::NoHeader)?.map_err(csv_err)?;
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != ["cep3_lo", "cep3_hi", "region"] {
        return Err(Error::Schema(format!(
            "region header must be cep3_lo,cep3_hi,region, got {}",
            names.join(",")
        )));
    }
    let mut ranges = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i as u64 + 2;
        let bad = |message: String| Error::MalformedRow { line, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let lo = rec[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad cep3_lo {:?}", &rec[0])))?;
        let hi = rec[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad cep3_hi {:?}", &rec[1])))?;
        let region = rec[2].parse().map_err(|e: Error| bad(e.to_string()))?;
        ranges.push(RegionRange { lo, hi, region });
    }
    RegionMapping::new(ranges, "csv")
}

pub fn write_regions<W: Write>(mapping: &RegionMapping, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["cep3_lo", "cep3_hi", "region"])
        .map_err(csv_err)?;
    for r in &mapping.ranges {
        wtr.write_record([r.lo.to_string(), r.hi.to_string(), r.region.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<region writer>", e))?;
    Ok(())
}
