use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::CEP3_MAX;
use crate::error::{Error, Result};

/// Name of the geographic code column.
pub const GEO_FEATURE: &str = "cep3";
/// Name of the census column that replaces [`GEO_FEATURE`] after a whiteness join.
pub const WHITENESS_FEATURE: &str = "not_white_prop";

const RESERVED: [&str; 3] = ["id", "ref_date", "label"];

/// Ordered list of feature names.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schema(Vec<String>);

impl Schema {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if RESERVED.contains(&name.as_str()) {
                return Err(Error::Schema(format!("{name:?} is a reserved column name")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("feature {name:?} listed twice")));
            }
        }
        Ok(Schema(names))
    }

    /// `age, beh_1..beh_8, cep3`.
    pub fn credit() -> Self {
        let mut names = vec!["age".to_string()];
        names.extend((1..=8).map(|k| format!("beh_{k}")));
        names.push(GEO_FEATURE.to_string());
        Schema(names)
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    /// Same schema with `from` renamed to `to` in place.
    pub fn replaced(&self, from: &str, to: &str) -> Result<Self> {
        let idx = self
            .index_of(from)
            .ok_or_else(|| Error::Schema(format!("feature {from:?} not in schema")))?;
        let mut names = self.0.clone();
        names[idx] = to.to_string();
        Schema::new(names)
    }
}

/// One credit applicant.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleRow {
    pub id: String,
    pub ref_date: NaiveDate,
    /// Feature values in schema order.
    pub features: Vec<f64>,
    /// `true` means default.
    pub label: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ingested,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<ExampleRow>,
    provenance: Provenance,
}

struct RowChecker {
    width: usize,
    geo: Option<usize>,
    age: Option<usize>,
}

impl RowChecker {
    fn new(schema: &Schema) -> Self {
        RowChecker {
            width: schema.len(),
            geo: schema.index_of(GEO_FEATURE),
            age: schema.index_of("age"),
        }
    }

    fn check(&self, row: &ExampleRow) -> std::result::Result<(), String> {
        if row.features.len() != self.width {
            return Err(format!(
                "row {:?} has {} features, schema has {}",
                row.id,
                row.features.len(),
                self.width
            ));
        }
        if let Some(v) = row.features.iter().find(|v| !v.is_finite()) {
            return Err(format!("row {:?} has non-finite feature value {v}", row.id));
        }
        if let Some(g) = self.geo {
            let c = row.features[g];
            if c.fract() != 0.0 {
                return Err(format!("cep3 must be an integer, got {c}"));
            }
            if !(0.0..=f64::from(CEP3_MAX)).contains(&c) {
                return Err(format!("cep3 out of range [0,999]: {c}"));
            }
        }
        if let Some(a) = self.age {
            if row.features[a] <= 0.0 {
                return Err(format!("age must be positive, got {}", row.features[a]));
            }
        }
        Ok(())
    }
}

impl Dataset {
    /// Validates every row against the schema and rejects duplicate ids.
    pub fn new(schema: Schema, rows: Vec<ExampleRow>, provenance: Provenance) -> Result<Self> {
        let checker = RowChecker::new(&schema);
        let mut ids = HashSet::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            checker
                .check(row)
                .map_err(|m| Error::InvalidInput(format!("row {i}: {m}")))?;
            if !ids.insert(row.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: row.id.clone(),
                    line: i as u64 + 2,
                });
            }
        }
        Ok(Dataset {
            schema,
            rows,
            provenance,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[ExampleRow] {
        &self.rows
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Fraction of rows labelled as default; `None` when empty.
    pub fn base_rate(&self) -> Option<f64> {
        if self.rows.is_empty() {
            return None;
        }
        let pos = self.rows.iter().filter(|r| r.label).count();
        Some(pos as f64 / self.rows.len() as f64)
    }

    /// CEP-3 code of every row, or `None` when the schema has no geographic column.
    pub fn geo_codes(&self) -> Option<Vec<u16>> {
        let g = self.schema.index_of(GEO_FEATURE)?;
        Some(self.rows.iter().map(|r| r.features[g] as u16).collect())
    }

    /// Subset of rows matching `keep`, in original order.
    pub fn filter(&self, mut keep: impl FnMut(&ExampleRow) -> bool) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            provenance: self.provenance,
        }
    }

    pub(crate) fn from_parts_unchecked(
        schema: Schema,
        rows: Vec<ExampleRow>,
        provenance: Provenance,
    ) -> Self {
        Dataset {
            schema,
            rows,
            provenance,
        }
    }
}

/// Reads a dataset CSV whose feature columns must be exactly `schema`.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schema)
}

enum Column {
    Id,
    Date,
    Label,
    Feature(usize),
}

pub fn read_dataset<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    read_impl(reader, Some(schema))
}

/// Reads a dataset CSV, taking the feature columns from the header in file order.
pub fn load_dataset_inferred(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_inferred(file)
}

pub fn read_dataset_inferred<R: Read>(reader: R) -> Result<Dataset> {
    read_impl(reader, None)
}

fn read_impl<R: Read>(reader: R, schema: Option<&Schema>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(Error::NoHeader),
        Some(h) => h.map_err(|e| Error::MalformedRow {
            line: 1,
            message: e.to_string(),
        })?,
    };
    if header.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::NoHeader);
    }
    let inferred;
    let schema = match schema {
        Some(s) => s,
        None => {
            let names: Vec<&str> = header
                .iter()
                .map(str::trim)
                .filter(|h| !RESERVED.contains(h))
                .collect();
            if names.is_empty() {
                return Err(Error::Schema("header has no feature columns".into()));
            }
            inferred = Schema::new(names)?;
            &inferred
        }
    };

    let mut columns = Vec::with_capacity(header.len());
    let mut seen = HashSet::new();
    for name in header.iter().map(str::trim) {
        if !seen.insert(name.to_string()) {
            return Err(Error::Schema(format!("column {name:?} appears twice")));
        }
        columns.push(match name {
            "id" => Column::Id,
            "ref_date" => Column::Date,
            "label" => Column::Label,
            other => Column::Feature(
                schema
                    .index_of(other)
                    .ok_or_else(|| Error::Schema(format!("unknown column {other:?}")))?,
            ),
        });
    }
    for required in RESERVED
        .iter()
        .copied()
        .chain(schema.names().iter().map(String::as_str))
    {
        if !seen.contains(required) {
            return Err(Error::Schema(format!("missing column {required:?}")));
        }
    }

    let checker = RowChecker::new(schema);
    let mut rows = Vec::new();
    let mut ids = HashSet::new();
    for (i, record) in records.enumerate() {
        let line = i as u64 + 2;
        let bad = |message: String| Error::MalformedRow { line, message };
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != columns.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                columns.len(),
                record.len()
            )));
        }
        let mut id = None;
        let mut date = None;
        let mut label = None;
        let mut features = vec![f64::NAN; schema.len()];
        for (col, raw) in columns.iter().zip(record.iter()) {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(bad("empty cell (missing values are not supported)".into()));
            }
            match col {
                Column::Id => id = Some(raw.to_string()),
                Column::Date => {
                    date = Some(
                        NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                            .map_err(|e| bad(format!("bad ref_date {raw:?}: {e}")))?,
                    )
                }
                Column::Label => {
                    label = Some(match raw {
                        "0" => false,
                        "1" => true,
                        _ => return Err(bad(format!("label must be 0 or 1, got {raw:?}"))),
                    })
                }
                Column::Feature(k) => {
                    features[*k] = raw
                        .parse::<f64>()
                        .map_err(|_| bad(format!("bad number {raw:?}")))?
                }
            }
        }
        let row = ExampleRow {
            id: id.expect("id column checked"),
            ref_date: date.expect("ref_date column checked"),
            features,
            label: label.expect("label column checked"),
        };
        checker.check(&row).map_err(bad)?;
        if !ids.insert(row.id.clone()) {
            return Err(Error::DuplicateId { id: row.id, line });
        }
        rows.push(row);
    }
    Ok(Dataset::from_parts_unchecked(
        schema.clone(),
        rows,
        Provenance::Ingested,
    ))
}

/// Writes `id,ref_date,<features>,label` with shortest round-trip float formatting.
pub fn write_dataset<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id", "ref_date"];
    header.extend(ds.schema.names().iter().map(String::as_str));
    header.push("label");
    wtr.write_record(&header).map_err(csv_err)?;
    let mut buf: Vec<String> = Vec::with_capacity(header.len());
    for row in &ds.rows {
        buf.clear();
        buf.push(row.id.clone());
        buf.push(row.ref_date.format("%Y-%m-%d").to_string());
        buf.extend(row.features.iter().map(|v| v.to_string()));
        buf.push(if row.label { "1" } else { "0" }.to_string());
        wtr.write_record(&buf).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<dataset writer>", e))?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// Train/eval partition of a dataset.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: Dataset,
    pub eval: Dataset,
}

/// Rows dated strictly before `cutoff` go to train, the rest to eval.
pub fn temporal_split(ds: &Dataset, cutoff: NaiveDate) -> Split {
    let (train, eval): (Vec<_>, Vec<_>) =
        ds.rows.iter().cloned().partition(|r| r.ref_date < cutoff);
    if train.is_empty() {
        log::warn!("temporal split at {cutoff}: train side is empty");
    }
    if eval.is_empty() {
        log::warn!("temporal split at {cutoff}: eval side is empty");
    }
    Split {
        train: Dataset::from_parts_unchecked(ds.schema.clone(), train, ds.provenance),
        eval: Dataset::from_parts_unchecked(ds.schema.clone(), eval, ds.provenance),
    }
}
