//! Gradient-boosted regression trees with a regularized binary logistic objective.

mod io;
mod train;

pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT, MODEL_VERSION};
pub use train::{fit, TrainConfig};

use serde::{Deserialize, Serialize};

use crate::data::Schema;
use crate::error::{Error, Result};

/// Largest f64 below one.
const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic link, clamped so every finite margin maps strictly inside (0, 1).
pub(crate) fn logistic(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, ONE_BELOW)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Direction for missing values. Ingestion rejects missing cells, so
        /// this is carried for format compatibility only.
        default_left: bool,
        gain: f64,
    },
    Leaf {
        weight: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    #[serde(flatten)]
    pub kind: NodeKind,
    /// Sum of training hessians routed through this node.
    pub cover: f64,
}

impl TreeNode {
    pub fn leaf(weight: f64, cover: f64) -> Self {
        TreeNode {
            kind: NodeKind::Leaf { weight },
            cover,
        }
    }

    pub fn split(feature: usize, threshold: f64, left: usize, right: usize, cover: f64) -> Self {
        TreeNode {
            kind: NodeKind::Split {
                feature,
                threshold,
                left,
                right,
                default_left: true,
                gain: 0.0,
            },
            cover,
        }
    }
}

/// Regression tree stored as a flat node array with the root at index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TreeNode>", into = "Vec<TreeNode>")]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl TryFrom<Vec<TreeNode>> for Tree {
    type Error = Error;

    fn try_from(nodes: Vec<TreeNode>) -> Result<Self> {
        Tree::new(nodes)
    }
}

impl From<Tree> for Vec<TreeNode> {
    fn from(t: Tree) -> Self {
        t.nodes
    }
}

impl Tree {
    /// Checks that every node except the root has exactly one parent with a
    /// smaller index, that covers are non-negative and that internal covers
    /// equal the sum of their children.
    pub fn new(nodes: Vec<TreeNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Model("tree has no nodes".into()));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if !(node.cover >= 0.0 && node.cover.is_finite()) {
                return Err(Error::Model(format!(
                    "node {i} has invalid cover {}",
                    node.cover
                )));
            }
            match node.kind {
                NodeKind::Leaf { weight } => {
                    if !weight.is_finite() {
                        return Err(Error::Model(format!("leaf {i} has non-finite weight")));
                    }
                }
                NodeKind::Split {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if !threshold.is_finite() {
                        return Err(Error::Model(format!("node {i} has non-finite threshold")));
                    }
                    for child in [left, right] {
                        if child <= i || child >= nodes.len() {
                            return Err(Error::Model(format!(
                                "node {i} has out-of-order child index {child}"
                            )));
                        }
                        parents[child] += 1;
                    }
                    let sum = nodes[left].cover + nodes[right].cover;
                    if (node.cover - sum).abs() > 1e-9 * node.cover.max(1.0) {
                        return Err(Error::Model(format!(
                            "node {i} cover {} differs from children sum {sum}",
                            node.cover
                        )));
                    }
                }
            }
        }
        if let Some(orphan) = (1..nodes.len()).find(|&i| parents[i] != 1) {
            return Err(Error::Model(format!(
                "node {orphan} is referenced {} times",
                parents[orphan]
            )));
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Index of the leaf `row` lands in.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i].kind {
                NodeKind::Leaf { .. } => return i,
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if row[feature] < threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    /// Raw (unshrunk) leaf weight for `row`.
    pub fn value(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)].kind {
            NodeKind::Leaf { weight } => weight,
            NodeKind::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn uses_feature(&self, feature: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n.kind, NodeKind::Split { feature: f, .. } if f == feature))
    }
}

/// Trained boosted ensemble.
///
/// `margin(x) = base_score + shrinkage * sum_t weight_t(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    schema: Schema,
    base_score: f64,
    shrinkage: f64,
    trees: Vec<Tree>,
}

impl Ensemble {
    pub fn new(schema: Schema, base_score: f64, shrinkage: f64, trees: Vec<Tree>) -> Result<Self> {
        if !base_score.is_finite() {
            return Err(Error::Model("base_score must be finite".into()));
        }
        if !(shrinkage > 0.0 && shrinkage.is_finite()) {
            return Err(Error::Model(format!(
                "shrinkage must be positive, got {shrinkage}"
            )));
        }
        for (t, tree) in trees.iter().enumerate() {
            for node in tree.nodes() {
                if let NodeKind::Split { feature, .. } = node.kind {
                    if feature >= schema.len() {
                        return Err(Error::Model(format!(
                            "tree {t} splits on feature {feature}, schema has {}",
                            schema.len()
                        )));
                    }
                }
            }
        }
        Ok(Ensemble {
            schema,
            base_score,
            shrinkage,
            trees,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// The first `k` trees with the same base score and shrinkage.
    pub fn truncated(&self, k: usize) -> Ensemble {
        Ensemble {
            schema: self.schema.clone(),
            base_score: self.base_score,
            shrinkage: self.shrinkage,
            trees: self.trees[..k.min(self.trees.len())].to_vec(),
        }
    }

    pub fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.schema.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.schema.len()
            )));
        }
        Ok(())
    }

    pub fn predict_margin(&self, row: &[f64]) -> Result<f64> {
        self.check_row(row)?;
        let sum: f64 = self.trees.iter().map(|t| t.value(row)).sum();
        Ok(self.base_score + self.shrinkage * sum)
    }

    /// Default probability `logistic(margin)`.
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        self.predict_margin(row).map(logistic)
    }
}

/// Logistic link, exposed for callers working on the margin scale.
pub fn margin_to_proba(margin: f64) -> f64 {
    logistic(margin)
}
