use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::dataset::{csv_err, Dataset, ExampleRow, GEO_FEATURE, WHITENESS_FEATURE};
use super::CEP3_MAX;
use crate::error::{Error, Result};

/// Self-declared not-white proportion per CEP-3 code.
#[derive(Clone, Debug, PartialEq)]
pub struct CensusTable {
    entries: BTreeMap<u16, f64>,
    fallback: Option<f64>,
}

fn check_prop(what: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!(
            "{what}: proportion {p} outside [0,1]"
        )));
    }
    Ok(())
}

impl CensusTable {
    pub fn new(entries: BTreeMap<u16, f64>, fallback: Option<f64>) -> Result<Self> {
        for (&code, &p) in &entries {
            if code > CEP3_MAX {
                return Err(Error::InvalidInput(format!(
                    "cep3 {code} out of range [0,999]"
                )));
            }
            check_prop(&format!("cep3 {code}"), p)?;
        }
        if let Some(f) = fallback {
            check_prop("fallback", f)?;
        }
        Ok(CensusTable { entries, fallback })
    }

    /// Builds a table from `f(code)` for every code in `0..=999`.
    pub fn from_fn(f: impl Fn(u16) -> f64) -> Result<Self> {
        Self::new((0..=CEP3_MAX).map(|c| (c, f(c))).collect(), None)
    }

    pub fn with_fallback(mut self, fallback: Option<f64>) -> Result<Self> {
        if let Some(f) = fallback {
            check_prop("fallback", f)?;
        }
        self.fallback = fallback;
        Ok(self)
    }

    pub fn fallback(&self) -> Option<f64> {
        self.fallback
    }

    pub fn entries(&self) -> &BTreeMap<u16, f64> {
        &self.entries
    }

    /// Entry for `code` only, ignoring the fallback.
    pub fn get(&self, code: u16) -> Option<f64> {
        self.entries.get(&code).copied()
    }

    /// Entry for `code`, or the fallback when set.
    pub fn lookup(&self, code: u16) -> Option<f64> {
        self.get(code).or(self.fallback)
    }
}

pub fn load_census(path: impl AsRef<Path>) -> Result<CensusTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_census(file)
}

/// Parses `cep3,not_white_prop`.
pub fn read_census<R: Read>(reader: R) -> Result<CensusTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = records.next().ok_or(Error::NoHeader)?.map_err(csv_err)?;
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != ["cep3", "not_white_prop"] {
        return Err(Error::Schema(format!(
            "census header must be cep3,not_white_prop, got {}",
            names.join(",")
        )));
    }
    let mut entries = BTreeMap::new();
    for (i, rec) in records.enumerate() {
        let line = i as u64 + 2;
        let bad = |message: String| Error::MalformedRow { line, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let code: u16 = rec[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad cep3 {:?}", &rec[0])))?;
        if code > CEP3_MAX {
            return Err(bad(format!("cep3 out of range [0,999]: {code}")));
        }
        let p: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad proportion {:?}", &rec[1])))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(bad(format!("proportion {p} outside [0,1]")));
        }
        if entries.insert(code, p).is_some() {
            return Err(bad(format!("cep3 {code} listed twice")));
        }
    }
    CensusTable::new(entries, None)
}

pub fn write_census<W: Write>(census: &CensusTable, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["cep3", "not_white_prop"])
        .map_err(csv_err)?;
    for (code, p) in &census.entries {
        wtr.write_record([code.to_string(), p.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<census writer>", e))?;
    Ok(())
}

/// Result of [`join_whiteness`].
#[derive(Clone, Debug)]
pub struct Joined {
    pub dataset: Dataset,
    /// Codes that had no census entry and were filled from the fallback.
    pub imputed: Vec<u16>,
}

/// Replaces the `cep3` column with the census not-white proportion of each row's code.
///
/// Column position, row order, labels and all other features are preserved.
pub fn join_whiteness(ds: &Dataset, census: &CensusTable) -> Result<Joined> {
    let g = ds
        .schema()
        .index_of(GEO_FEATURE)
        .ok_or_else(|| Error::Schema(format!("dataset has no {GEO_FEATURE:?} column")))?;
    let schema = ds.schema().replaced(GEO_FEATURE, WHITENESS_FEATURE)?;

    let mut missing = Vec::new();
    let mut imputed = Vec::new();
    for code in ds.rows().iter().map(|r| r.features[g] as u16) {
        if census.get(code).is_none() {
            if census.fallback().is_some() {
                imputed.push(code);
            } else {
                missing.push(code);
            }
        }
    }
    missing.sort_unstable();
    missing.dedup();
    if !missing.is_empty() {
        return Err(Error::MissingCensus(missing));
    }
    imputed.sort_unstable();
    imputed.dedup();
    if !imputed.is_empty() {
        log::warn!(
            "census fallback {} used for {} cep3 codes: {:?}",
            census.fallback().unwrap_or_default(),
            imputed.len(),
            imputed
        );
    }

    let rows = ds
        .rows()
        .iter()
        .map(|r| {
            let mut features = r.features.clone();
            let code = features[g] as u16;
            features[g] = census.lookup(code).expect("coverage checked above");
            ExampleRow {
                id: r.id.clone(),
                ref_date: r.ref_date,
                features,
                label: r.label,
            }
        })
        .collect();
    Ok(Joined {
        dataset: Dataset::new(schema, rows, ds.provenance())?,
        imputed,
    })
}
