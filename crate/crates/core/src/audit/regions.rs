use std::io::Write;

use serde::Serialize;

use super::geo::{geo_index, require_schema};
use super::score_rows;
use crate::data::{Dataset, Region, RegionMapping};
use crate::error::{Error, Result};
use crate::gbt::Ensemble;
use crate::metrics::{rate_curves, write_curve_table, CurveSuite, Rate};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionCurves {
    pub region: Region,
    pub n_rows: usize,
    pub curves: CurveSuite,
}

/// Largest spread of one rate across regions over all thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionGap {
    pub rate: Rate,
    /// `None` when no region defines the rate anywhere.
    pub gap: Option<f64>,
    pub threshold: Option<f64>,
    pub high: Option<Region>,
    pub low: Option<Region>,
}

/// Regions sorted by descending rate at one threshold; undefined regions are left out.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionOrdering {
    pub threshold: f64,
    pub tpr: Vec<Region>,
    pub tnr: Vec<Region>,
}

/// How often a two-group ordering holds over a threshold window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionPattern {
    pub n_thresholds: usize,
    pub fpr_holds: usize,
    pub tpr_holds: usize,
    pub both_hold: usize,
    /// `both_hold / n_thresholds`
    pub share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionalCurveReport {
    pub n_rows: usize,
    pub regions: Vec<RegionCurves>,
    /// Regions with no scored rows.
    pub empty_regions: Vec<Region>,
    pub gaps: Vec<RegionGap>,
    pub orderings: Vec<RegionOrdering>,
}

impl RegionalCurveReport {
    pub fn get(&self, region: Region) -> Option<&RegionCurves> {
        self.regions.iter().find(|r| r.region == region)
    }

    fn values(&self, rate: Rate, i: usize) -> Vec<(Region, f64)> {
        self.regions
            .iter()
            .filter_map(|r| r.curves.value(rate, i).map(|v| (r.region, v)))
            .collect()
    }

    /// Checks, for each threshold in `[lo, hi]`, whether every region in
    /// `high` has strictly larger FPR and TPR than every region in `low`.
    /// A threshold where any listed region is missing or undefined does not hold.
    pub fn pattern(&self, high: &[Region], low: &[Region], lo: f64, hi: f64) -> RegionPattern {
        let eps = 1e-12;
        let thresholds: &[f64] = self.regions.first().map_or(&[], |r| &r.curves.thresholds);
        let holds = |rate: Rate, i: usize| -> bool {
            let pick = |set: &[Region]| -> Option<Vec<f64>> {
                set.iter()
                    .map(|&g| self.get(g)?.curves.value(rate, i))
                    .collect()
            };
            match (pick(high), pick(low)) {
                (Some(h), Some(l)) if !h.is_empty() && !l.is_empty() => {
                    h.iter().cloned().fold(f64::INFINITY, f64::min)
                        > l.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                }
                _ => false,
            }
        };
        let (mut n, mut f, mut t, mut both) = (0, 0, 0, 0);
        for (i, &th) in thresholds.iter().enumerate() {
            if th < lo - eps || th > hi + eps {
                continue;
            }
            n += 1;
            let (hf, ht) = (holds(Rate::Fpr, i), holds(Rate::Tpr, i));
            f += hf as usize;
            t += ht as usize;
            both += (hf && ht) as usize;
        }
        RegionPattern {
            n_thresholds: n,
            fpr_holds: f,
            tpr_holds: t,
            both_hold: both,
            share: if n == 0 { 0.0 } else { both as f64 / n as f64 },
        }
    }
}

/// Per-region rate curves of `m` over `ds`, with cross-region disparities.
pub fn regional_curves(
    m: &Ensemble,
    ds: &Dataset,
    mapping: &RegionMapping,
    thresholds: &[f64],
) -> Result<RegionalCurveReport> {
    require_schema(m, ds)?;
    let g = geo_index(ds)?;
    if ds.is_empty() {
        return Err(Error::InvalidInput(
            "regional curves on an empty dataset".into(),
        ));
    }
    let scores = score_rows(m, ds)?;
    let labels = ds.labels();

    let mut regions = Vec::new();
    let mut empty_regions = Vec::new();
    for region in Region::ALL {
        let idx: Vec<usize> = (0..ds.len())
            .filter(|&i| mapping.region_of(ds.rows()[i].features[g] as u16) == region)
            .collect();
        if idx.is_empty() {
            log::warn!("region {region} has no rows");
            empty_regions.push(region);
            continue;
        }
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let y: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        regions.push(RegionCurves {
            region,
            n_rows: idx.len(),
            curves: rate_curves(&s, &y, thresholds)?,
        });
    }

    let mut report = RegionalCurveReport {
        n_rows: ds.len(),
        regions,
        empty_regions,
        gaps: Vec::new(),
        orderings: Vec::new(),
    };
    report.gaps = Rate::ALL
        .iter()
        .map(|&rate| {
            let mut best = RegionGap {
                rate,
                gap: None,
                threshold: None,
                high: None,
                low: None,
            };
            for (i, &t) in thresholds.iter().enumerate() {
                let vals = report.values(rate, i);
                let Some(&(hr, hv)) = vals.iter().max_by(|a, b| a.1.total_cmp(&b.1)) else {
                    continue;
                };
                let &(lr, lv) = vals.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
                if best.gap.is_none_or(|g| hv - lv > g) {
                    best = RegionGap {
                        rate,
                        gap: Some(hv - lv),
                        threshold: Some(t),
                        high: Some(hr),
                        low: Some(lr),
                    };
                }
            }
            best
        })
        .collect();
    report.orderings = thresholds
        .iter()
        .enumerate()
        .map(|(i, &threshold)| {
            let order = |rate| {
                let mut v = report.values(rate, i);
                v.sort_by(|a, b| b.1.total_cmp(&a.1));
                v.into_iter().map(|(r, _)| r).collect()
            };
            RegionOrdering {
                threshold,
                tpr: order(Rate::Tpr),
                tnr: order(Rate::Tnr),
            }
        })
        .collect();
    Ok(report)
}

/// All regions' curves, keyed by `region`.
pub fn write_regional_curves<W: Write>(report: &RegionalCurveReport, writer: W) -> Result<()> {
    let suites: Vec<(&str, &CurveSuite)> = report
        .regions
        .iter()
        .map(|r| (r.region.name(), &r.curves))
        .collect();
    write_curve_table("region", &suites, writer)
}
