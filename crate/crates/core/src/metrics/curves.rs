use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Number of points in the default threshold grid (0.00, 0.01, ..., 1.00).
pub const DEFAULT_THRESHOLDS: usize = 101;

/// `n` evenly spaced thresholds from 0 to 1 inclusive.
pub fn threshold_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Config(format!(
            "threshold grid needs at least 2 points, got {n}"
        )));
    }
    let last = (n - 1) as f64;
    Ok((0..n).map(|i| i as f64 / last).collect())
}

/// The eight conditional rates. `ŷ = 1` means "predicted default".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rate {
    /// p(ŷ=1 | y=1)
    Tpr,
    /// p(ŷ=0 | y=0)
    Tnr,
    /// p(ŷ=1 | y=0)
    Fpr,
    /// p(ŷ=0 | y=1)
    Fnr,
    /// p(y=1 | ŷ=1)
    Ppv,
    /// p(y=0 | ŷ=0)
    Npv,
    /// p(y=0 | ŷ=1)
    Fdr,
    /// p(y=1 | ŷ=0)
    For,
}

impl Rate {
    pub const ALL: [Rate; 8] = [
        Rate::Tpr,
        Rate::Tnr,
        Rate::Fpr,
        Rate::Fnr,
        Rate::Ppv,
        Rate::Npv,
        Rate::Fdr,
        Rate::For,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rate::Tpr => "tpr",
            Rate::Tnr => "tnr",
            Rate::Fpr => "fpr",
            Rate::Fnr => "fnr",
            Rate::Ppv => "ppv",
            Rate::Npv => "npv",
            Rate::Fdr => "fdr",
            Rate::For => "for",
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rate::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown rate {s:?}")))
    }
}

/// Confusion counts at one threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    /// `None` when the conditioning event has no rows.
    pub fn rate(&self, rate: Rate) -> Option<f64> {
        let Confusion { tp, fp, tn, fn_ } = *self;
        match rate {
            Rate::Tpr => ratio(tp, tp + fn_),
            Rate::Fnr => ratio(fn_, tp + fn_),
            Rate::Tnr => ratio(tn, tn + fp),
            Rate::Fpr => ratio(fp, tn + fp),
            Rate::Ppv => ratio(tp, tp + fp),
            Rate::Fdr => ratio(fp, tp + fp),
            Rate::Npv => ratio(tn, tn + fn_),
            Rate::For => ratio(fn_, tn + fn_),
        }
    }
}

/// Conditional rates over a threshold grid. Predictions are `score >= threshold`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveSuite {
    pub thresholds: Vec<f64>,
    pub counts: Vec<Confusion>,
    pub n_pos: u64,
    pub n_neg: u64,
}

impl CurveSuite {
    pub fn rate(&self, rate: Rate) -> Vec<Option<f64>> {
        self.counts.iter().map(|c| c.rate(rate)).collect()
    }

    pub fn value(&self, rate: Rate, i: usize) -> Option<f64> {
        self.counts[i].rate(rate)
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

pub(crate) fn check_scores(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::InvalidInput("no scores".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    Ok(())
}

pub fn rate_curves(scores: &[f64], labels: &[bool], thresholds: &[f64]) -> Result<CurveSuite> {
    check_scores(scores, labels)?;
    if thresholds.windows(2).any(|w| w[0] >= w[1]) || thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::InvalidInput(
            "thresholds must be strictly ascending".into(),
        ));
    }
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for (&s, &y) in scores.iter().zip(labels) {
        if y {
            pos.push(s)
        } else {
            neg.push(s)
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let n_pos = pos.len() as u64;
    let n_neg = neg.len() as u64;
    let counts = thresholds
        .iter()
        .map(|&t| {
            let pos_below = pos.partition_point(|&s| s < t) as u64;
            let neg_below = neg.partition_point(|&s| s < t) as u64;
            Confusion {
                tp: n_pos - pos_below,
                fn_: pos_below,
                fp: n_neg - neg_below,
                tn: neg_below,
            }
        })
        .collect();
    Ok(CurveSuite {
        thresholds: thresholds.to_vec(),
        counts,
        n_pos,
        n_neg,
    })
}

/// Largest absolute difference between two curves of the same rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurveGap {
    pub rate: Rate,
    pub gap: f64,
    pub threshold: f64,
}

/// Thresholds where either curve is undefined are skipped.
pub fn max_curve_gap(a: &CurveSuite, b: &CurveSuite, rate: Rate) -> Result<CurveGap> {
    if a.thresholds.len() != b.thresholds.len()
        || a.thresholds
            .iter()
            .zip(&b.thresholds)
            .any(|(x, y)| x.to_bits() != y.to_bits())
    {
        return Err(Error::InvalidInput(
            "curve suites use different threshold grids".into(),
        ));
    }
    let mut best: Option<CurveGap> = None;
    for (i, &t) in a.thresholds.iter().enumerate() {
        if let (Some(x), Some(y)) = (a.value(rate, i), b.value(rate, i)) {
            let gap = (x - y).abs();
            if best.is_none_or(|b| gap > b.gap) {
                best = Some(CurveGap {
                    rate,
                    gap,
                    threshold: t,
                });
            }
        }
    }
    best.ok_or_else(|| {
        Error::InvalidInput(format!(
            "{rate} is undefined at every threshold on one side"
        ))
    })
}

/// `threshold,tpr,tnr,fpr,fnr,ppv,npv,fdr,for,n_pos,n_neg`; undefined rates are empty.
pub fn write_curves<W: Write>(suite: &CurveSuite, writer: W) -> Result<()> {
    write_rows(None, &[("", suite)], writer)
}

/// Several suites in one long table with a leading `key` column naming each suite.
pub fn write_curve_table<W: Write>(
    key: &str,
    suites: &[(&str, &CurveSuite)],
    writer: W,
) -> Result<()> {
    write_rows(Some(key), suites, writer)
}

fn write_rows<W: Write>(
    key: Option<&str>,
    suites: &[(&str, &CurveSuite)],
    writer: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::InvalidInput(e.to_string());
    let mut header: Vec<&str> = key.into_iter().collect();
    header.push("threshold");
    header.extend(Rate::ALL.iter().map(|r| r.name()));
    header.extend(["n_pos", "n_neg"]);
    wtr.write_record(&header).map_err(err)?;
    for (name, suite) in suites {
        for (i, t) in suite.thresholds.iter().enumerate() {
            let mut rec: Vec<String> = key.map(|_| name.to_string()).into_iter().collect();
            rec.push(t.to_string());
            rec.extend(
                Rate::ALL
                    .iter()
                    .map(|&r| suite.value(r, i).map(|v| v.to_string()).unwrap_or_default()),
            );
            rec.push(suite.n_pos.to_string());
            rec.push(suite.n_neg.to_string());
            wtr.write_record(&rec).map_err(err)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<curve writer>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_exact_hundredths() {
        let g = threshold_grid(101).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[50], 0.5);
        assert_eq!(g[100], 1.0);
        assert!(threshold_grid(1).is_err());
    }

    #[test]
    fn balanced_confusion_at_half() {
        let s = rate_curves(&[0.9, 0.4, 0.6, 0.1], &[true, true, false, false], &[0.5]).unwrap();
        assert_eq!(
            s.counts[0],
            Confusion {
                tp: 1,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
        for r in Rate::ALL {
            assert_eq!(s.value(r, 0), Some(0.5), "{r}");
        }
    }

    #[test]
    fn zero_threshold_predicts_everything_positive() {
        let s = rate_curves(&[0.9, 0.4, 0.6, 0.1], &[true, true, false, false], &[0.0]).unwrap();
        assert_eq!(s.value(Rate::Tpr, 0), Some(1.0));
        assert_eq!(s.value(Rate::Fpr, 0), Some(1.0));
        assert_eq!(s.value(Rate::Npv, 0), None);
        assert_eq!(s.value(Rate::For, 0), None);
    }

    #[test]
    fn perfect_scorer() {
        let s = rate_curves(&[1.0, 1.0, 0.0], &[true, true, false], &[0.5]).unwrap();
        assert_eq!(s.value(Rate::Tpr, 0), Some(1.0));
        assert_eq!(s.value(Rate::Fpr, 0), Some(0.0));
        assert_eq!(s.value(Rate::Ppv, 0), Some(1.0));
    }

    #[test]
    fn single_class_leaves_conditioned_rates_undefined() {
        let s = rate_curves(&[0.3, 0.7], &[true, true], &[0.5]).unwrap();
        assert_eq!(s.value(Rate::Tnr, 0), None);
        assert_eq!(s.value(Rate::Fpr, 0), None);
        assert_eq!(s.value(Rate::Tpr, 0), Some(0.5));
    }

    #[test]
    fn input_errors() {
        assert!(rate_curves(&[0.1], &[true, false], &[0.5]).is_err());
        assert!(rate_curves(&[], &[], &[0.5]).is_err());
        assert!(rate_curves(&[0.1], &[true], &[0.5, 0.2]).is_err());
    }

    #[test]
    fn gap_identity_and_single_bump() {
        let grid = threshold_grid(11).unwrap();
        let scores = [0.05, 0.15, 0.35, 0.55, 0.75, 0.95];
        let labels = [false, true, false, true, false, true];
        let a = rate_curves(&scores, &labels, &grid).unwrap();
        for r in Rate::ALL {
            assert_eq!(max_curve_gap(&a, &a, r).unwrap().gap, 0.0);
        }
        // construct b from a by bumping one count so only one threshold changes
        let mut b = a.clone();
        let mut fake = b.counts[4];
        fake.tp = 7;
        fake.fn_ = 93;
        b.counts[4] = fake;
        let mut c = a.clone();
        c.counts[4] = Confusion {
            tp: 0,
            fn_: 100,
            ..fake
        };
        let g = max_curve_gap(&b, &c, Rate::Tpr).unwrap();
        assert!((g.gap - 0.07).abs() < 1e-15);
        assert_eq!(g.threshold, grid[4]);
    }

    #[test]
    fn gap_grid_mismatch() {
        let a = rate_curves(&[0.2, 0.8], &[false, true], &[0.1, 0.5]).unwrap();
        let b = rate_curves(&[0.2, 0.8], &[false, true], &[0.1, 0.6]).unwrap();
        assert!(max_curve_gap(&a, &b, Rate::Tpr).is_err());
    }

    #[test]
    fn csv_leaves_undefined_cells_empty() {
        let s = rate_curves(&[0.9, 0.4], &[true, false], &[0.0]).unwrap();
        let mut out = Vec::new();
        write_curves(&s, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "threshold,tpr,tnr,fpr,fnr,ppv,npv,fdr,for,n_pos,n_neg\n0,1,0,1,0,0.5,,0.5,,1,1\n"
        );
    }

    #[test]
    fn keyed_table() {
        let s = rate_curves(&[0.9, 0.4], &[true, false], &[0.0, 0.5]).unwrap();
        let mut out = Vec::new();
        write_curve_table("model", &[("a", &s), ("b", &s)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("model,threshold,tpr"));
        assert!(lines[3].starts_with("b,0,"));
    }
}
