use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::score_rows;
use crate::data::{CensusTable, Dataset, GEO_FEATURE};
use crate::error::{Error, Result};
use crate::gbt::Ensemble;
use crate::metrics::pearson;
use crate::shap::{aggregate_by_group, explain_rows, ShapEngine};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeoRow {
    pub cep3: u16,
    pub mean_phi: f64,
    pub mean_proba: f64,
    pub not_white_prop: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeoBiasReport {
    pub engine: ShapEngine,
    pub n_rows: usize,
    /// One row per cep3 with census coverage, ascending by code.
    pub table: Vec<GeoRow>,
    /// Codes present in the data but absent from the census.
    pub uncovered: Vec<u16>,
    /// Pearson(mean phi_cep3, not_white_prop) across codes.
    pub r_shap: f64,
    /// Pearson(mean default probability, not_white_prop) across codes.
    pub r_proba: f64,
    /// Published real-data values, for comparison only.
    pub reference: BTreeMap<&'static str, f64>,
}

pub(crate) fn require_schema(m: &Ensemble, ds: &Dataset) -> Result<()> {
    if m.schema() != ds.schema() {
        return Err(Error::Schema(format!(
            "model features {:?} differ from dataset features {:?}",
            m.schema().names(),
            ds.schema().names()
        )));
    }
    Ok(())
}

pub(crate) fn geo_index(ds: &Dataset) -> Result<usize> {
    ds.schema()
        .index_of(GEO_FEATURE)
        .ok_or_else(|| Error::Schema(format!("dataset has no {GEO_FEATURE:?} column")))
}

/// Aggregates cep3 attributions per code and correlates them with the census.
pub fn geo_bias_report(
    m: &Ensemble,
    ds: &Dataset,
    census: &CensusTable,
    engine: ShapEngine,
) -> Result<GeoBiasReport> {
    require_schema(m, ds)?;
    let g = geo_index(ds)?;
    if ds.is_empty() {
        return Err(Error::InvalidInput(
            "geo bias report on an empty dataset".into(),
        ));
    }
    let code = |r: &crate::data::ExampleRow| r.features[g] as u16;

    let attrs = explain_rows(m, ds.rows(), engine)?;
    let phi = aggregate_by_group(&attrs, ds, GEO_FEATURE, code)?;
    let proba = score_rows(m, ds)?;
    let mut proba_sums: BTreeMap<u16, f64> = BTreeMap::new();
    for (r, p) in ds.rows().iter().zip(&proba) {
        *proba_sums.entry(code(r)).or_default() += p;
    }

    let mut table = Vec::new();
    let mut uncovered = Vec::new();
    for (&cep3, stat) in &phi.groups {
        match census.lookup(cep3) {
            Some(prop) => table.push(GeoRow {
                cep3,
                mean_phi: stat.mean_phi,
                mean_proba: proba_sums[&cep3] / stat.n as f64,
                not_white_prop: prop,
                n: stat.n,
            }),
            None => uncovered.push(cep3),
        }
    }
    if !uncovered.is_empty() {
        log::warn!(
            "{} cep3 codes have no census entry and are left out",
            uncovered.len()
        );
    }
    if table.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 census-covered cep3 codes, found {}",
            table.len()
        )));
    }
    let props: Vec<f64> = table.iter().map(|r| r.not_white_prop).collect();
    let phis: Vec<f64> = table.iter().map(|r| r.mean_phi).collect();
    let probas: Vec<f64> = table.iter().map(|r| r.mean_proba).collect();
    Ok(GeoBiasReport {
        engine,
        n_rows: ds.len(),
        r_shap: pearson(&phis, &props)?,
        r_proba: pearson(&probas, &props)?,
        table,
        uncovered,
        reference: BTreeMap::from([("r_shap", 0.83), ("r_proba", 0.48)]),
    })
}

/// `cep3,mean_phi,mean_proba,not_white_prop,n`
pub fn write_geo_table<W: Write>(report: &GeoBiasReport, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in &report.table {
        wtr.serialize(row).map_err(crate::data::csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<geo table>", e))
}
