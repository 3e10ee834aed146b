//! Independent oracles and random model builders shared by the integration tests.
#![allow(dead_code)]

use chrono::NaiveDate;
use geoaudit::data::{Dataset, ExampleRow, Provenance, Schema};
use geoaudit::gbt::{Ensemble, NodeKind, Tree, TreeNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn schema(n: usize) -> Schema {
    Schema::new((0..n).map(|i| format!("f{i}"))).unwrap()
}

/// Values rows and thresholds are drawn from; small so that splits are hit both ways.
const GRID: [f64; 6] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];

pub fn random_row(r: &mut ChaCha8Rng, n_features: usize) -> Vec<f64> {
    (0..n_features)
        .map(|_| GRID[r.random_range(0..GRID.len())])
        .collect()
}

/// Random tree with positive integer leaf covers and internal covers equal to
/// the sum of their children. Features may repeat along a path.
pub fn random_tree(r: &mut ChaCha8Rng, features: &[usize], max_depth: usize) -> Tree {
    fn grow(
        r: &mut ChaCha8Rng,
        features: &[usize],
        depth: usize,
        max_depth: usize,
        nodes: &mut Vec<Option<TreeNode>>,
    ) -> (usize, f64) {
        let me = nodes.len();
        nodes.push(None);
        if depth == max_depth || (depth > 0 && r.random_bool(0.25)) {
            let cover = r.random_range(1..=20) as f64;
            let weight = r.random_range(-2.0..2.0);
            nodes[me] = Some(TreeNode::leaf(weight, cover));
            return (me, cover);
        }
        let feature = features[r.random_range(0..features.len())];
        let threshold = r.random_range(1..GRID.len()) as f64 - 0.5;
        let (left, cl) = grow(r, features, depth + 1, max_depth, nodes);
        let (right, cr) = grow(r, features, depth + 1, max_depth, nodes);
        nodes[me] = Some(TreeNode::split(feature, threshold, left, right, cl + cr));
        (me, cl + cr)
    }
    let mut nodes = Vec::new();
    grow(r, features, 0, max_depth, &mut nodes);
    Tree::new(nodes.into_iter().map(Option::unwrap).collect()).unwrap()
}

pub fn random_ensemble(
    r: &mut ChaCha8Rng,
    n_features: usize,
    n_trees: usize,
    max_depth: usize,
) -> Ensemble {
    let features: Vec<usize> = (0..n_features).collect();
    let trees = (0..n_trees)
        .map(|_| random_tree(r, &features, max_depth))
        .collect();
    let base = r.random_range(-1.0..1.0);
    let shrinkage = r.random_range(0.05..1.0);
    Ensemble::new(schema(n_features), base, shrinkage, trees).unwrap()
}

/// `E[f(x) | x_S]` under the path-dependent (cover-weighted) value function.
pub fn coalition_value(m: &Ensemble, row: &[f64], present: &[bool]) -> f64 {
    fn walk(t: &Tree, k: usize, row: &[f64], present: &[bool]) -> f64 {
        let node = &t.nodes()[k];
        match node.kind {
            NodeKind::Leaf { weight } => weight,
            NodeKind::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if present[feature] {
                    let next = if row[feature] < threshold {
                        left
                    } else {
                        right
                    };
                    walk(t, next, row, present)
                } else {
                    let (cl, cr) = (t.nodes()[left].cover, t.nodes()[right].cover);
                    (cl * walk(t, left, row, present) + cr * walk(t, right, row, present))
                        / (cl + cr)
                }
            }
        }
    }
    let sum: f64 = m.trees().iter().map(|t| walk(t, 0, row, present)).sum();
    m.base_score() + m.shrinkage() * sum
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Shapley values as the average marginal contribution over every ordering.
pub fn shapley_by_permutation(m: &Ensemble, row: &[f64]) -> Vec<f64> {
    let n = m.n_features();
    let perms = permutations(n);
    let mut phi = vec![0.0; n];
    for p in &perms {
        let mut present = vec![false; n];
        let mut prev = coalition_value(m, row, &present);
        for &f in p {
            present[f] = true;
            let v = coalition_value(m, row, &present);
            phi[f] += v - prev;
            prev = v;
        }
    }
    phi.iter_mut().for_each(|v| *v /= perms.len() as f64);
    phi
}

/// (tp, fp, tn, fn) by direct counting with `ŷ = score >= t`.
pub fn brute_confusion(scores: &[f64], labels: &[bool], t: f64) -> (u64, u64, u64, u64) {
    let mut c = (0, 0, 0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= t, y) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, false) => c.2 += 1,
            (false, true) => c.3 += 1,
        }
    }
    c
}

/// P(score_pos > score_neg) + ½ P(tie) over all positive/negative pairs.
pub fn mann_whitney(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &yi) in labels.iter().enumerate() {
        if !yi {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn dataset(rows: Vec<(Vec<f64>, bool)>, schema: Schema) -> Dataset {
    let d = NaiveDate::from_ymd_opt(2017, 6, 1).unwrap();
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, (features, label))| ExampleRow {
            id: format!("r{i}"),
            ref_date: d,
            features,
            label,
        })
        .collect();
    Dataset::new(schema, rows, Provenance::Ingested).unwrap()
}

/// Random training set over a few distinct values per feature, labels
/// loosely tied to the first feature.
pub fn random_training_set(r: &mut ChaCha8Rng, n_rows: usize, n_features: usize) -> Dataset {
    let rows = (0..n_rows)
        .map(|_| {
            let x = random_row(r, n_features);
            let p = sigmoid(x[0] - 2.5);
            (x, r.random_bool(p))
        })
        .collect();
    dataset(rows, schema(n_features))
}

/// Margin of every training row after each boosting round, recomputed from scratch.
pub fn margins_after(m: &Ensemble, ds: &Dataset, k: usize) -> Vec<f64> {
    let sub = m.truncated(k);
    ds.rows()
        .iter()
        .map(|r| sub.predict_margin(&r.features).unwrap())
        .collect()
}

pub fn log_loss(margins: &[f64], ds: &Dataset) -> f64 {
    margins
        .iter()
        .zip(ds.rows())
        .map(|(&m, r)| {
            let p = sigmoid(m);
            if r.label {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / margins.len() as f64
}

/// Best split of `rows` by exhaustive search over every feature and every
/// midpoint of consecutive distinct values. Returns `(gain, feature, threshold)`.
pub fn rescan_best_split(
    ds: &Dataset,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    lambda: f64,
    gamma: f64,
    min_child_cover: f64,
) -> Option<(f64, usize, f64)> {
    let score = |gs: f64, hs: f64| gs * gs / (hs + lambda);
    let gt: f64 = rows.iter().map(|&i| g[i]).sum();
    let ht: f64 = rows.iter().map(|&i| h[i]).sum();
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..ds.schema().len() {
        let mut vals: Vec<f64> = rows.iter().map(|&i| ds.rows()[i].features[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut gl, mut hl) = (0.0, 0.0);
            for &i in rows {
                if ds.rows()[i].features[f] < t {
                    gl += g[i];
                    hl += h[i];
                }
            }
            let (gr, hr) = (gt - gl, ht - hl);
            if hl < min_child_cover || hr < min_child_cover {
                continue;
            }
            let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(gt, ht)) - gamma;
            if best.is_none_or(|b| gain > b.0) {
                best = Some((gain, f, t));
            }
        }
    }
    best
}
