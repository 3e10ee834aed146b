//! Shapley values by enumerating every feature coalition.
//!
//! `phi_i = (1/N) * sum over S ⊆ N\{i} of [v(S ∪ {i}) - v(S)] / C(N-1, |S|)`.

use super::{tree_expectation, AttributionRow, OutputScale};
use crate::error::{Error, Result};
use crate::gbt::Ensemble;

/// Largest feature count [`shap_exact`] accepts (2^15 coalitions per row).
pub const MAX_EXACT_FEATURES: usize = 15;

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

pub fn shap_exact(m: &Ensemble, row: &[f64]) -> Result<AttributionRow> {
    m.check_row(row)?;
    let n = m.n_features();
    if n > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            n,
            max: MAX_EXACT_FEATURES,
        });
    }

    // raw tree sums per coalition; base score and shrinkage are applied below
    let n_masks = 1usize << n;
    let mut raw = vec![0.0; n_masks];
    for (mask, slot) in raw.iter_mut().enumerate() {
        let present = |f: usize| mask >> f & 1 == 1;
        for tree in m.trees() {
            *slot += tree_expectation(tree, row, &present, 0)?;
        }
    }

    let weights: Vec<f64> = (0..n)
        .map(|s| 1.0 / (n as f64 * binomial(n - 1, s)))
        .collect();
    let mut phi = vec![0.0; n];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for mask in (0..n_masks).filter(|mask| mask & bit == 0) {
            let size = mask.count_ones() as usize;
            acc += weights[size] * (raw[mask | bit] - raw[mask]);
        }
        *phi_i = m.shrinkage() * acc;
    }

    Ok(AttributionRow {
        phi,
        base_value: m.base_score() + m.shrinkage() * raw[0],
        output_scale: OutputScale::Margin,
    })
}
