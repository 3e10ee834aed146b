//! Polynomial-time path-dependent Shapley values for tree ensembles.
//!
//! For each tree, one recursion tracks the set of unique features on the
//! current root-to-node path together with the fraction of coalitions
//! (`zero`: feature absent, `one`: feature present) that flow down it and the
//! permutation weights of every subset size. At a leaf, each path feature
//! receives its marginal contribution by unwinding itself from the weights.
//! A feature met twice on one path is unwound first and re-extended with the
//! product of its fractions.

use super::{branch_fractions, tree_expectation, AttributionRow, OutputScale};
use crate::error::Result;
use crate::gbt::{Ensemble, NodeKind, Tree};

const NO_FEATURE: usize = usize::MAX;

#[derive(Clone, Copy, Debug)]
struct PathElem {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

impl Default for PathElem {
    fn default() -> Self {
        PathElem {
            feature: NO_FEATURE,
            zero: 0.0,
            one: 0.0,
            weight: 0.0,
        }
    }
}

fn extend(path: &mut [PathElem], depth: usize, zero: f64, one: f64, feature: usize) {
    path[depth] = PathElem {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut [PathElem], depth: usize, index: usize) {
    let PathElem { one, zero, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
}

/// Total permutation weight of the path with element `index` removed.
fn unwound_sum(path: &[PathElem], depth: usize, index: usize) -> f64 {
    let PathElem { one, zero, .. } = path[index];
    let mut next = path[depth].weight;
    let mut total = 0.0;
    if one != 0.0 {
        for i in (0..depth).rev() {
            let tmp = next / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64;
        }
    } else {
        for i in (0..depth).rev() {
            total += path[i].weight / (zero * (depth - i) as f64);
        }
    }
    total * (depth + 1) as f64
}

struct Walk<'a> {
    tree: &'a Tree,
    row: &'a [f64],
    phi: &'a mut [f64],
    buf: Vec<PathElem>,
}

impl Walk<'_> {
    /// `parent` is the buffer offset of the parent's path; this node's path
    /// (`depth + 1` elements) is written right after it.
    fn recurse(
        &mut self,
        node: usize,
        parent: usize,
        mut depth: usize,
        zero: f64,
        one: f64,
        feature: usize,
    ) -> Result<()> {
        let here = parent + depth + 1;
        self.buf.copy_within(parent..here, here);
        extend(&mut self.buf[here..], depth, zero, one, feature);

        match self.tree.nodes()[node].kind {
            NodeKind::Leaf { weight } => {
                let path = &self.buf[here..];
                for i in 1..=depth {
                    let w = unwound_sum(path, depth, i);
                    let el = path[i];
                    self.phi[el.feature] += w * (el.one - el.zero) * weight;
                }
            }
            NodeKind::Split {
                feature: split,
                threshold,
                left,
                right,
                ..
            } => {
                let (fl, fr) = branch_fractions(self.tree, left, right)?;
                let (hot, cold, hot_zero, cold_zero) = if self.row[split] < threshold {
                    (left, right, fl, fr)
                } else {
                    (right, left, fr, fl)
                };
                let mut incoming_zero = 1.0;
                let mut incoming_one = 1.0;
                if let Some(k) = (1..=depth).find(|&k| self.buf[here + k].feature == split) {
                    incoming_zero = self.buf[here + k].zero;
                    incoming_one = self.buf[here + k].one;
                    unwind(&mut self.buf[here..], depth, k);
                    depth -= 1;
                }
                self.recurse(
                    hot,
                    here,
                    depth + 1,
                    hot_zero * incoming_zero,
                    incoming_one,
                    split,
                )?;
                self.recurse(cold, here, depth + 1, cold_zero * incoming_zero, 0.0, split)?;
            }
        }
        Ok(())
    }
}

pub fn shap_tree(m: &Ensemble, row: &[f64]) -> Result<AttributionRow> {
    m.check_row(row)?;
    let mut raw_phi = vec![0.0; m.n_features()];
    let mut expected = 0.0;
    let absent = |_: usize| false;
    for tree in m.trees() {
        expected += tree_expectation(tree, row, &absent, 0)?;
        if matches!(tree.nodes()[0].kind, NodeKind::Leaf { .. }) {
            continue;
        }
        let d = tree.depth();
        let mut walk = Walk {
            tree,
            row,
            phi: &mut raw_phi,
            buf: vec![PathElem::default(); (d + 2) * (d + 3) / 2 + 1],
        };
        walk.recurse(0, 0, 0, 1.0, 1.0, NO_FEATURE)?;
    }
    let s = m.shrinkage();
    Ok(AttributionRow {
        phi: raw_phi.into_iter().map(|p| s * p).collect(),
        base_value: m.base_score() + s * expected,
        output_scale: OutputScale::Margin,
    })
}

#[cfg(test)]
mod tests {
    use super::super::shap_exact;
    use super::super::testing::*;
    use super::*;
    use crate::gbt::TreeNode;

    #[test]
    fn empty_ensemble_is_null() {
        let m = crate::gbt::Ensemble::new(schema(3), 0.4, 0.1, vec![]).unwrap();
        let a = shap_tree(&m, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(a.phi, vec![0.0; 3]);
        assert_eq!(a.base_value, 0.4);
    }

    #[test]
    fn symmetric_features_get_equal_credit() {
        let m = ensemble(
            2,
            vec![
                stump(0, 0.0, 0.0, 1.0, 5.0, 5.0),
                stump(1, 0.0, 0.0, 1.0, 5.0, 5.0),
            ],
        );
        let a = shap_tree(&m, &[1.0, 1.0]).unwrap();
        assert!((a.phi[0] - a.phi[1]).abs() < 1e-12);
        assert!((a.phi[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn repeated_feature_on_path_matches_enumeration() {
        // f0 split twice on the same path, f1 in between
        let t = Tree::new(vec![
            TreeNode::split(0, 0.5, 1, 2, 10.0),
            TreeNode::split(1, 0.5, 3, 4, 6.0),
            TreeNode::leaf(3.0, 4.0),
            TreeNode::split(0, 0.25, 5, 6, 2.0),
            TreeNode::leaf(-1.0, 4.0),
            TreeNode::leaf(2.0, 1.5),
            TreeNode::leaf(-4.0, 0.5),
        ])
        .unwrap();
        let m = ensemble(2, vec![t]);
        for row in [[0.1, 0.2], [0.3, 0.9], [0.9, 0.1], [0.3, 0.1]] {
            let a = shap_tree(&m, &row).unwrap();
            let b = shap_exact(&m, &row).unwrap();
            for i in 0..2 {
                assert!(
                    (a.phi[i] - b.phi[i]).abs() < 1e-12,
                    "{row:?}: {a:?} vs {b:?}"
                );
            }
            assert!((a.base_value - b.base_value).abs() < 1e-12);
        }
    }

    #[test]
    fn leaf_only_tree_moves_base_only() {
        let m = ensemble(1, vec![Tree::new(vec![TreeNode::leaf(0.7, 3.0)]).unwrap()]);
        let a = shap_tree(&m, &[0.0]).unwrap();
        assert_eq!(a.phi, vec![0.0]);
        assert_eq!(a.base_value, 0.7);
    }
}
