use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::Write;

use serde::Serialize;

use super::AttributionRow;
use crate::data::{Dataset, ExampleRow};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupStat {
    pub mean_phi: f64,
    pub n: usize,
}

/// Mean attribution of one feature per group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupAttributionTable<K: Ord> {
    pub feature: String,
    pub groups: BTreeMap<K, GroupStat>,
}

impl<K: Ord> GroupAttributionTable<K> {
    pub fn total_rows(&self) -> usize {
        self.groups.values().map(|g| g.n).sum()
    }
}

fn check_aligned(attrs: &[AttributionRow], ds: &Dataset) -> Result<()> {
    if attrs.len() != ds.len() {
        return Err(Error::InvalidInput(format!(
            "{} attribution rows for {} dataset rows",
            attrs.len(),
            ds.len()
        )));
    }
    if let Some(a) = attrs.iter().find(|a| a.phi.len() != ds.schema().len()) {
        return Err(Error::InvalidInput(format!(
            "attribution has {} features, schema has {}",
            a.phi.len(),
            ds.schema().len()
        )));
    }
    Ok(())
}

/// Unweighted mean of `feature`'s attribution over the rows of each group.
pub fn aggregate_by_group<K: Ord>(
    attrs: &[AttributionRow],
    ds: &Dataset,
    feature: &str,
    key: impl Fn(&ExampleRow) -> K,
) -> Result<GroupAttributionTable<K>> {
    check_aligned(attrs, ds)?;
    let f = ds
        .schema()
        .index_of(feature)
        .ok_or_else(|| Error::InvalidInput(format!("feature {feature:?} not in schema")))?;
    let mut sums: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for (a, row) in attrs.iter().zip(ds.rows()) {
        let e = sums.entry(key(row)).or_insert((0.0, 0));
        e.0 += a.phi[f];
        e.1 += 1;
    }
    let groups = sums
        .into_iter()
        .map(|(k, (sum, n))| {
            (
                k,
                GroupStat {
                    mean_phi: sum / n as f64,
                    n,
                },
            )
        })
        .collect();
    Ok(GroupAttributionTable {
        feature: feature.to_string(),
        groups,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeatureImpact {
    pub feature: String,
    pub mean_abs_phi: f64,
    /// `(feature value, phi)` per row, in dataset order.
    #[serde(skip)]
    pub points: Vec<(f64, f64)>,
}

/// Per-feature mean |phi|, ranked from most to least important.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapSummary {
    pub ranked: Vec<FeatureImpact>,
}

impl ShapSummary {
    /// 1-based rank of `feature`.
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.ranked
            .iter()
            .position(|f| f.feature == feature)
            .map(|p| p + 1)
    }

    pub fn get(&self, feature: &str) -> Option<&FeatureImpact> {
        self.ranked.iter().find(|f| f.feature == feature)
    }
}

pub fn summarize(attrs: &[AttributionRow], ds: &Dataset) -> Result<ShapSummary> {
    if attrs.is_empty() {
        return Err(Error::InvalidInput("no attributions to summarize".into()));
    }
    check_aligned(attrs, ds)?;
    let n = attrs.len() as f64;
    let mut ranked: Vec<FeatureImpact> = ds
        .schema()
        .names()
        .iter()
        .enumerate()
        .map(|(f, name)| {
            let points: Vec<(f64, f64)> = attrs
                .iter()
                .zip(ds.rows())
                .map(|(a, r)| (r.features[f], a.phi[f]))
                .collect();
            let mean_abs_phi = points.iter().map(|p| p.1.abs()).sum::<f64>() / n;
            FeatureImpact {
                feature: name.clone(),
                mean_abs_phi,
                points,
            }
        })
        .collect();
    // stable: ties keep schema order
    ranked.sort_by(|a, b| b.mean_abs_phi.total_cmp(&a.mean_abs_phi));
    Ok(ShapSummary { ranked })
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<csv writer>", e)
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// `id,base_value,phi_<feature>...`
pub fn write_attributions<W: Write>(
    attrs: &[AttributionRow],
    ds: &Dataset,
    writer: W,
) -> Result<()> {
    check_aligned(attrs, ds)?;
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "base_value".to_string()];
    header.extend(ds.schema().names().iter().map(|n| format!("phi_{n}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for (a, row) in attrs.iter().zip(ds.rows()) {
        let mut rec = vec![row.id.clone(), a.base_value.to_string()];
        rec.extend(a.phi.iter().map(|p| p.to_string()));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush().map_err(io_err)
}

/// `rank,feature,mean_abs_phi`
pub fn write_summary<W: Write>(summary: &ShapSummary, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["rank", "feature", "mean_abs_phi"])
        .map_err(csv_err)?;
    for (i, f) in summary.ranked.iter().enumerate() {
        wtr.write_record([
            (i + 1).to_string(),
            f.feature.clone(),
            f.mean_abs_phi.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(io_err)
}

/// Beeswarm input: `feature,id,value,phi`.
pub fn write_scatter<W: Write>(summary: &ShapSummary, ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["feature", "id", "value", "phi"])
        .map_err(csv_err)?;
    for f in &summary.ranked {
        for ((value, phi), row) in f.points.iter().zip(ds.rows()) {
            wtr.write_record([
                f.feature.clone(),
                row.id.clone(),
                value.to_string(),
                phi.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(io_err)
}

/// `group,mean_phi,n`
pub fn write_group_table<K: Ord + Display, W: Write>(
    table: &GroupAttributionTable<K>,
    writer: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["group", "mean_phi", "n"])
        .map_err(csv_err)?;
    for (k, g) in &table.groups {
        wtr.write_record([k.to_string(), g.mean_phi.to_string(), g.n.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(io_err)
}
