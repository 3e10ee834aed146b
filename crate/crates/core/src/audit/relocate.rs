use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::geo::{geo_index, require_schema};
use crate::data::{Dataset, Region, RegionMapping};
use crate::error::{Error, Result};
use crate::gbt::{margin_to_proba, Ensemble};

/// Where relocated rows are sent.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSampler {
    /// Uniform draw from a fixed set of codes.
    Uniform { codes: Vec<u16> },
    /// Every row keeps its own code.
    Identity,
}

impl TargetSampler {
    pub fn uniform(codes: impl IntoIterator<Item = u16>) -> Result<Self> {
        let mut codes: Vec<u16> = codes.into_iter().collect();
        codes.sort_unstable();
        codes.dedup();
        if codes.is_empty() {
            return Err(Error::InvalidInput("target sampler has no codes".into()));
        }
        Ok(TargetSampler::Uniform { codes })
    }

    /// Distinct codes of `region` observed in `train`.
    pub fn region(train: &Dataset, mapping: &RegionMapping, region: Region) -> Result<Self> {
        let g = geo_index(train)?;
        Self::uniform(
            train
                .rows()
                .iter()
                .map(|r| r.features[g] as u16)
                .filter(|&c| mapping.region_of(c) == region),
        )
        .map_err(|_| Error::InvalidInput(format!("no training rows in region {region}")))
    }

    fn draw(&self, rng: &mut ChaCha8Rng, own: u16) -> u16 {
        match self {
            TargetSampler::Uniform { codes } => codes[rng.random_range(0..codes.len())],
            TargetSampler::Identity => own,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Move {
    pub id: String,
    pub cep3_from: u16,
    pub cep3_to: u16,
    pub worthiness_before: f64,
    pub worthiness_after: f64,
    pub delta: f64,
}

/// Five-number summary plus mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl DeltaSummary {
    fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        DeltaSummary {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

/// Worthiness is `1 - p(default)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelocationReport {
    pub seed: u64,
    pub target: TargetSampler,
    pub n_moved: usize,
    pub n_increased: usize,
    pub n_decreased: usize,
    pub n_unchanged: usize,
    /// Share of moved rows whose default probability strictly increased.
    pub increased: f64,
    pub decreased: f64,
    pub unchanged: f64,
    /// `worthiness_after - worthiness_before`.
    pub worthiness_delta: DeltaSummary,
    /// Published real-data values, for comparison only.
    pub reference: BTreeMap<&'static str, f64>,
    #[serde(skip)]
    pub moves: Vec<Move>,
}

/// Moves every row whose cep3 satisfies `source` to a code drawn from `target`
/// and re-scores it with all other features held fixed.
pub fn counterfactual_relocation(
    m: &Ensemble,
    ds: &Dataset,
    source: impl Fn(u16) -> bool,
    target: &TargetSampler,
    seed: u64,
) -> Result<RelocationReport> {
    require_schema(m, ds)?;
    let g = geo_index(ds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<(usize, u16)> = ds
        .rows()
        .iter()
        .enumerate()
        .filter(|(_, r)| source(r.features[g] as u16))
        .map(|(i, r)| (i, target.draw(&mut rng, r.features[g] as u16)))
        .collect();
    if picked.is_empty() {
        return Err(Error::InvalidInput("source selects no rows".into()));
    }

    let scored: Vec<(Move, std::cmp::Ordering)> = picked
        .par_iter()
        .map(|&(i, to)| {
            let row = &ds.rows()[i];
            let before = m.predict_margin(&row.features)?;
            let mut moved = row.features.clone();
            moved[g] = to as f64;
            let after = m.predict_margin(&moved)?;
            let (wb, wa) = (1.0 - margin_to_proba(before), 1.0 - margin_to_proba(after));
            let mv = Move {
                id: row.id.clone(),
                cep3_from: row.features[g] as u16,
                cep3_to: to,
                worthiness_before: wb,
                worthiness_after: wa,
                delta: wa - wb,
            };
            Ok((mv, after.total_cmp(&before)))
        })
        .collect::<Result<_>>()?;

    let count = |o: std::cmp::Ordering| scored.iter().filter(|s| s.1 == o).count();
    let n = scored.len();
    let (n_inc, n_dec) = (
        count(std::cmp::Ordering::Greater),
        count(std::cmp::Ordering::Less),
    );
    let n_unch = n - n_inc - n_dec;
    let moves: Vec<Move> = scored.into_iter().map(|s| s.0).collect();
    let deltas: Vec<f64> = moves.iter().map(|mv| mv.delta).collect();
    Ok(RelocationReport {
        seed,
        target: target.clone(),
        n_moved: n,
        n_increased: n_inc,
        n_decreased: n_dec,
        n_unchanged: n_unch,
        increased: n_inc as f64 / n as f64,
        decreased: n_dec as f64 / n as f64,
        unchanged: n_unch as f64 / n as f64,
        worthiness_delta: DeltaSummary::of(&deltas),
        reference: BTreeMap::from([("worthiness_decreased", 0.998)]),
        moves,
    })
}

/// `id,cep3_from,cep3_to,worthiness_before,worthiness_after,delta`
pub fn write_moves<W: Write>(report: &RelocationReport, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for mv in &report.moves {
        wtr.serialize(mv).map_err(crate::data::csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<moves table>", e))
}
