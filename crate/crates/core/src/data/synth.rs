//! Synthetic credit data with a planted geography → race → default link.
//!
//! Each CEP-3 code gets a not-white proportion built from a coarse state level,
//! an optional smooth within-block wave and per-code jitter. Default log-odds are a linear
//! score of eight behavioral latents and age, plus `race_default_strength`
//! times the proportion of the applicant's code, plus Gaussian noise. The
//! intercept is solved so the realized default rate hits the target.

use chrono::{Days, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::census::CensusTable;
use super::dataset::{Dataset, ExampleRow, Provenance, Schema};
use super::CEP3_MAX;
use crate::error::{Error, Result};

/// Generator parameters. Serialized as a flat key-value (TOML) file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub base_default_rate: f64,
    /// Scales how far each code's not-white proportion departs from the national mean.
    pub geo_race_strength: f64,
    /// Log-odds added per unit of not-white proportion.
    pub race_default_strength: f64,
    pub noise_scale: f64,
    /// Amplitude of the smooth within-block logit wave of the not-white proportion.
    pub census_wave: f64,
    /// Per-code logit jitter of the not-white proportion.
    pub census_jitter: f64,
    pub seed: u64,
    pub date_start: NaiveDate,
    pub date_end: NaiveDate,
    pub split_cutoff: NaiveDate,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

impl SynthConfig {
    /// 98 698 rows dated 2017-04-01..=2018-03-31, cutoff 2018-01-01, 34.5% defaults.
    pub fn paper() -> Self {
        SynthConfig {
            n_rows: 98_698,
            base_default_rate: 0.345,
            geo_race_strength: 1.0,
            race_default_strength: 2.5,
            noise_scale: 0.5,
            census_wave: 0.25,
            census_jitter: 0.15,
            seed: 7,
            date_start: ymd(2017, 4, 1),
            date_end: ymd(2018, 3, 31),
            split_cutoff: ymd(2018, 1, 1),
        }
    }

    /// Paper constants with one not-white proportion per block (no wave, no
    /// jitter), so `cep3` carries nothing beyond the proportion's partition.
    pub fn pure_proxy() -> Self {
        SynthConfig {
            census_wave: 0.0,
            census_jitter: 0.0,
            ..Self::paper()
        }
    }

    /// Paper constants with no race → default coupling.
    pub fn null() -> Self {
        SynthConfig {
            race_default_strength: 0.0,
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "pure-proxy" => Ok(Self::pure_proxy()),
            "null" => Ok(Self::null()),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected paper, pure-proxy or null)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_rows == 0 {
            return fail("n_rows must be positive".into());
        }
        if !(self.base_default_rate > 0.0 && self.base_default_rate < 1.0) {
            return fail(format!(
                "base_default_rate must lie in (0,1), got {}",
                self.base_default_rate
            ));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return fail(format!(
                "noise_scale must be positive, got {}",
                self.noise_scale
            ));
        }
        if !self.census_wave.is_finite() {
            return fail(format!(
                "census_wave must be finite, got {}",
                self.census_wave
            ));
        }
        if !(self.census_jitter >= 0.0 && self.census_jitter.is_finite()) {
            return fail(format!(
                "census_jitter must be >= 0, got {}",
                self.census_jitter
            ));
        }
        if !self.geo_race_strength.is_finite() || !self.race_default_strength.is_finite() {
            return fail("coupling strengths must be finite".into());
        }
        if self.date_end < self.date_start {
            return fail(format!(
                "date_end {} precedes date_start {}",
                self.date_end, self.date_start
            ));
        }
        Ok(())
    }
}

/// Share of not-white residents across Brazil, used as the neutral point.
const NATIONAL_NOT_WHITE: f64 = 0.523;
const WAVE_PERIOD: f64 = 40.0;

/// (lo, hi, not-white level, share of applicants). São Paulo is over-represented.
const BLOCKS: [(u16, u16, f64, f64); 12] = [
    (0, 9, 0.51, 0.0),
    (10, 199, 0.36, 0.42),    // SP
    (200, 399, 0.51, 0.152),  // RJ, ES, MG
    (400, 489, 0.78, 0.054),  // BA
    (490, 659, 0.688, 0.152), // rest of Northeast
    (660, 699, 0.764, 0.043),
    (700, 767, 0.585, 0.041),
    (768, 779, 0.764, 0.012),
    (780, 788, 0.585, 0.008),
    (789, 789, 0.764, 0.003),
    (790, 799, 0.585, 0.0055),
    (800, 999, 0.215, 0.107),
];

const BEH_WEIGHTS: [f64; 8] = [0.55, -0.45, 0.40, -0.30, 0.25, 0.20, -0.15, 0.10];
const AGE_WEIGHT: f64 = -0.35;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

fn synth_census(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<CensusTable> {
    let center = logit(NATIONAL_NOT_WHITE);
    let mut props = Vec::with_capacity(usize::from(CEP3_MAX) + 1);
    for &(lo, hi, level, _) in &BLOCKS {
        for code in lo..=hi {
            let jitter: f64 = rng.sample(StandardNormal);
            let wave = cfg.census_wave
                * (std::f64::consts::TAU * f64::from(code - lo) / WAVE_PERIOD).sin();
            let z = logit(level) - center + wave + cfg.census_jitter * jitter;
            props.push(round_to(logistic(center + cfg.geo_race_strength * z), 4));
        }
    }
    CensusTable::from_fn(|c| props[usize::from(c)])
}

/// Generates a dataset and the census table its labels were drawn against.
///
/// Pure function of `cfg`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(Dataset, CensusTable)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let census = synth_census(cfg, &mut rng)?;

    let block_pick = WeightedIndex::new(BLOCKS.iter().map(|b| b.3))
        .map_err(|e| Error::Config(format!("block weights: {e}")))?;
    let n_days = (cfg.date_end - cfg.date_start).num_days() as u64 + 1;

    let n = cfg.n_rows;
    let mut rows = Vec::with_capacity(n);
    let mut score = Vec::with_capacity(n);
    let mut uniform = Vec::with_capacity(n);
    for i in 0..n {
        let ref_date = cfg.date_start + Days::new(rng.random_range(0..n_days));
        let (lo, hi, _, _) = BLOCKS[block_pick.sample(&mut rng)];
        let code = rng.random_range(lo..=hi);

        let age_z: f64 = rng.sample(StandardNormal);
        let age = (40.0 + 13.0 * age_z).clamp(18.0, 90.0).round();

        let mut features = Vec::with_capacity(10);
        features.push(age);
        let mut s = AGE_WEIGHT * (age - 40.0) / 13.0;
        for (k, w) in BEH_WEIGHTS.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            s += w * z;
            features.push(if k % 2 == 0 {
                round_to((0.6 * z).exp(), 4)
            } else {
                round_to(500.0 + 100.0 * z, 2)
            });
        }
        features.push(f64::from(code));

        let prop = census.get(code).expect("census covers every code");
        let noise: f64 = rng.sample(StandardNormal);
        s += cfg.race_default_strength * prop + cfg.noise_scale * noise;

        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        score.push(s);
        uniform.push(u);
        rows.push(ExampleRow {
            id: format!("s{i:06}"),
            ref_date,
            features,
            label: false,
        });
    }

    // label_i = u_i < logistic(b + s_i)  <=>  b > logit(u_i) - s_i
    let cut: Vec<f64> = uniform
        .iter()
        .zip(&score)
        .map(|(&u, &s)| logit(u) - s)
        .collect();
    let intercept = calibrate_intercept(&cut, cfg.base_default_rate)?;
    for (row, &c) in rows.iter_mut().zip(&cut) {
        row.label = c < intercept;
    }

    let ds = Dataset::new(Schema::credit(), rows, Provenance::Synthetic)?;
    Ok((ds, census))
}

/// Intercept placing exactly `round(target * n)` rows below it, or an error
/// when that count misses the target rate by more than one percentage point.
fn calibrate_intercept(cut: &[f64], target: f64) -> Result<f64> {
    let n = cut.len();
    let k = (target * n as f64).round() as usize;
    let realized = k as f64 / n as f64;
    if (realized - target).abs() > 0.01 || k == 0 || k == n {
        return Err(Error::Config(format!(
            "base rate {target} unreachable with {n} rows (closest achievable {realized:.4})"
        )));
    }
    let mut sorted = cut.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (a, b) = (sorted[k - 1], sorted[k]);
    if a == b {
        return Err(Error::Config(
            "base-rate calibration failed: tied latent thresholds".into(),
        ));
    }
    let intercept = a + (b - a) / 2.0;
    if !intercept.is_finite() || intercept.abs() > 50.0 {
        return Err(Error::Config(format!(
            "base rate {target} unreachable given the coupling coefficients (intercept {intercept})"
        )));
    }
    Ok(intercept)
}
