use std::io::Write;

use serde::Serialize;

use super::curves::check_scores;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocResult {
    /// `(fpr, tpr)` from (0,0) to (1,1), one point per distinct score.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocResult> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput("roc needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area, in units of one positive-negative pair
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1
            } else {
                fp += 1
            }
            i += 1;
        }
        area2 += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    let auc = area2 as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocResult { points, auc })
}

/// `fpr,tpr`
pub fn write_roc<W: Write>(roc: &RocResult, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::InvalidInput(e.to_string());
    wtr.write_record(["fpr", "tpr"]).map_err(err)?;
    for (x, y) in &roc.points {
        wtr.write_record([x.to_string(), y.to_string()])
            .map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<roc writer>", e))
}
