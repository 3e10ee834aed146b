//! Exact greedy second-order boosting.
//!
//! Per round: `g = p - y`, `h = p(1 - p)`. Leaves get `-G / (H + lambda)`.
//! A split is kept when
//! `0.5 * [GL²/(HL+λ) + GR²/(HR+λ) - G²/(H+λ)] - gamma > 0`.
//! Candidates are midpoints between consecutive distinct values of the rows in
//! a node. Equal gains go to the lower feature index, then the lower threshold.

use serde::{Deserialize, Serialize};

use super::{logistic, Ensemble, NodeKind, Tree, TreeNode};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum gain for a split.
    pub gamma: f64,
    /// Minimum hessian sum in each child.
    pub min_child_cover: f64,
    /// Recorded for reproducibility. Training uses no sampling, so results do
    /// not depend on it.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 250,
            max_depth: 3,
            shrinkage: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_cover: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_trees == 0 {
            return fail("n_trees must be at least 1".into());
        }
        if self.max_depth == 0 {
            return fail("max_depth must be at least 1".into());
        }
        if !(self.shrinkage > 0.0 && self.shrinkage.is_finite()) {
            return fail(format!(
                "shrinkage must be positive, got {}",
                self.shrinkage
            ));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("min_child_cover", self.min_child_cover),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Feature matrix in row-major order with per-feature sort orders.
struct Matrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    sorted: Vec<Vec<u32>>,
}

impl Matrix {
    fn new(ds: &Dataset) -> Self {
        let n_rows = ds.len();
        let n_cols = ds.schema().len();
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for row in ds.rows() {
            values.extend_from_slice(&row.features);
        }
        let sorted = (0..n_cols)
            .map(|f| {
                let mut idx: Vec<u32> = (0..n_rows as u32).collect();
                // stable: ties keep row order
                idx.sort_by(|&a, &b| {
                    values[a as usize * n_cols + f].total_cmp(&values[b as usize * n_cols + f])
                });
                idx
            })
            .collect();
        Matrix {
            n_rows,
            n_cols,
            values,
            sorted,
        }
    }

    #[inline]
    fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }
}

/// Threshold strictly between `lo` and `hi` (so `lo` goes left and `hi` right).
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo {
        m
    } else {
        hi
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

#[derive(Clone, Copy, Default)]
struct Scan {
    gl: f64,
    hl: f64,
    last: Option<f64>,
}

struct Growing {
    grad: f64,
    hess: f64,
    kind: Option<NodeKind>,
}

struct Grower<'a> {
    x: &'a Matrix,
    cfg: &'a TrainConfig,
}

impl Grower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda)
    }

    /// Grows one tree; `node_of` receives the leaf index of every row.
    fn grow(&self, grad: &[f64], hess: &[f64], node_of: &mut [u32]) -> Tree {
        let n = self.x.n_rows;
        node_of.fill(0);
        let mut nodes = vec![Growing {
            grad: grad.iter().sum(),
            hess: hess.iter().sum(),
            kind: None,
        }];
        let mut frontier = vec![0usize];

        for _ in 0..self.cfg.max_depth {
            if frontier.is_empty() {
                break;
            }
            let mut active = vec![false; nodes.len()];
            for &k in &frontier {
                active[k] = true;
            }
            let mut best: Vec<Option<Candidate>> = vec![None; nodes.len()];
            let mut scan = vec![Scan::default(); nodes.len()];

            for f in 0..self.x.n_cols {
                for &k in &frontier {
                    scan[k] = Scan::default();
                }
                for &r in &self.x.sorted[f] {
                    let r = r as usize;
                    let k = node_of[r] as usize;
                    if !active[k] {
                        continue;
                    }
                    let v = self.x.get(r, f);
                    let st = &mut scan[k];
                    if let Some(last) = st.last {
                        if v > last {
                            let node = &nodes[k];
                            let (gl, hl) = (st.gl, st.hl);
                            let (gr, hr) = (node.grad - gl, node.hess - hl);
                            if hl >= self.cfg.min_child_cover && hr >= self.cfg.min_child_cover {
                                let gain = 0.5
                                    * (self.score(gl, hl) + self.score(gr, hr)
                                        - self.score(node.grad, node.hess))
                                    - self.cfg.gamma;
                                if best[k].is_none_or(|b| gain > b.gain) {
                                    best[k] = Some(Candidate {
                                        feature: f,
                                        threshold: midpoint(last, v),
                                        gain,
                                    });
                                }
                            }
                        }
                    }
                    st.gl += grad[r];
                    st.hl += hess[r];
                    st.last = Some(v);
                }
            }

            let mut next = Vec::new();
            let mut split_at: Vec<Option<(usize, f64, usize, usize)>> = vec![None; nodes.len()];
            for &k in &frontier {
                match best[k] {
                    Some(c) if c.gain > 0.0 => {
                        let left = nodes.len();
                        let right = left + 1;
                        for _ in 0..2 {
                            nodes.push(Growing {
                                grad: 0.0,
                                hess: 0.0,
                                kind: None,
                            });
                        }
                        nodes[k].kind = Some(NodeKind::Split {
                            feature: c.feature,
                            threshold: c.threshold,
                            left,
                            right,
                            default_left: true,
                            gain: c.gain,
                        });
                        split_at.push(None);
                        split_at.push(None);
                        split_at[k] = Some((c.feature, c.threshold, left, right));
                        next.push(left);
                        next.push(right);
                    }
                    _ => {}
                }
            }
            if next.is_empty() {
                break;
            }
            for r in 0..n {
                if let Some((f, t, left, right)) = split_at[node_of[r] as usize] {
                    let child = if self.x.get(r, f) < t { left } else { right };
                    node_of[r] = child as u32;
                    nodes[child].grad += grad[r];
                    nodes[child].hess += hess[r];
                }
            }
            frontier = next;
        }

        let lambda = self.cfg.lambda;
        let mut covers = vec![0.0; nodes.len()];
        // children always have larger indices, so a reverse sweep sees them first
        for k in (0..nodes.len()).rev() {
            covers[k] = match nodes[k].kind {
                Some(NodeKind::Split { left, right, .. }) => covers[left] + covers[right],
                _ => nodes[k].hess,
            };
        }
        let out = nodes
            .into_iter()
            .zip(covers)
            .map(|(node, cover)| match node.kind {
                Some(kind) => TreeNode { kind, cover },
                None => TreeNode::leaf(-node.grad / (node.hess + lambda), cover),
            })
            .collect();
        Tree::new(out).expect("grower emits well-formed trees")
    }
}

/// Fits `cfg.n_trees` trees on `train`.
///
/// The base score is the log-odds of the training default rate.
pub fn fit(train: &Dataset, cfg: &TrainConfig) -> Result<Ensemble> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let y: Vec<f64> = train
        .rows()
        .iter()
        .map(|r| f64::from(u8::from(r.label)))
        .collect();
    let positives = y.iter().filter(|&&v| v > 0.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::InvalidInput(
            "training labels contain a single class".into(),
        ));
    }
    let rate = positives as f64 / y.len() as f64;
    let base_score = (rate / (1.0 - rate)).ln();

    let x = Matrix::new(train);
    let grower = Grower { x: &x, cfg };
    let n = x.n_rows;
    let mut margin = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut node_of = vec![0u32; n];
    let mut trees = Vec::with_capacity(cfg.n_trees);

    for _ in 0..cfg.n_trees {
        for i in 0..n {
            let p = logistic(margin[i]);
            grad[i] = p - y[i];
            hess[i] = p * (1.0 - p);
        }
        let tree = grower.grow(&grad, &hess, &mut node_of);
        for i in 0..n {
            if let NodeKind::Leaf { weight } = tree.nodes()[node_of[i] as usize].kind {
                margin[i] += cfg.shrinkage * weight;
            }
        }
        debug_assert!((0..n.min(16)).all(|i| tree.leaf_index(x.row(i)) == node_of[i] as usize));
        trees.push(tree);
    }

    Ensemble::new(train.schema().clone(), base_score, cfg.shrinkage, trees)
}
