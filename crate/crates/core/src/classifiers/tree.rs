use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

/// Impurity of a node holding `n0` rows of class 0 and `n1` of class 1.
/// Entropy is in bits.
pub fn impurity(criterion: Criterion, n0: usize, n1: usize) -> f64 {
    let n = (n0 + n1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (n0 as f64 / n, n1 as f64 / n);
    match criterion {
        Criterion::Gini => 1.0 - p0 * p0 - p1 * p1,
        Criterion::Entropy => {
            let h = |p: f64| {
                if p > 0.0 {
                    -p * math::ln(p) / core::f64::consts::LN_2
                } else {
                    0.0
                }
            };
            h(p0) + h(p1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub criterion: Criterion,
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        /// Impurity decrease achieved by this split.
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: u8,
        /// Fraction of class-1 training rows that reached this leaf.
        p_one: f64,
    },
}

/// CART tree stored as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub params: TreeParams,
    pub feature_dim: usize,
    pub nodes: Vec<Node>,
}

/// Splits need at least this much impurity decrease; anything smaller is
/// rounding noise.
const MIN_GAIN: f64 = 1e-12;

pub fn train_tree(data: &Dataset, p: &TreeParams) -> Result<TreeModel> {
    if data.is_empty() {
        return Err(Error::Empty("training data".into()));
    }
    let mut model = TreeModel {
        params: *p,
        feature_dim: data.feature_dim(),
        nodes: Vec::new(),
    };
    let indices: Vec<usize> = (0..data.len()).collect();
    grow(data, p, &mut model.nodes, indices, 0);
    Ok(model)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn grow(
    data: &Dataset,
    p: &TreeParams,
    nodes: &mut Vec<Node>,
    idx: Vec<usize>,
    depth: usize,
) -> usize {
    let labels = data.labels();
    let n1 = idx.iter().filter(|&&i| labels[i] == 1).count();
    let n0 = idx.len() - n1;
    let id = nodes.len();
    nodes.push(Node::Leaf {
        class: u8::from(n1 > n0),
        p_one: n1 as f64 / idx.len() as f64,
    });
    let depth_ok = p.max_depth.is_none_or(|d| depth < d);
    if n0 == 0 || n1 == 0 || !depth_ok || idx.len() < p.min_samples_split {
        return id;
    }
    let Some(best) = best_split(data, p.criterion, &idx, n0, n1) else {
        return id;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| data.features()[i][best.feature] <= best.threshold);
    let left = grow(data, p, nodes, left_idx, depth + 1);
    let right = grow(data, p, nodes, right_idx, depth + 1);
    nodes[id] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        gain: best.gain,
        left,
        right,
    };
    id
}

/// Exhaustive search over midpoints between consecutive distinct values of
/// every feature. The first split (lowest feature, then lowest threshold)
/// with the largest gain wins.
fn best_split(
    data: &Dataset,
    criterion: Criterion,
    idx: &[usize],
    n0: usize,
    n1: usize,
) -> Option<BestSplit> {
    let rows = data.features();
    let labels = data.labels();
    let n = idx.len() as f64;
    let parent = impurity(criterion, n0, n1);
    let mut best: Option<BestSplit> = None;
    let mut order: Vec<(f64, u8)> = Vec::with_capacity(idx.len());
    for feature in 0..data.feature_dim() {
        order.clear();
        order.extend(idx.iter().map(|&i| (rows[i][feature], labels[i])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut l0, mut l1) = (0usize, 0usize);
        for k in 0..order.len() - 1 {
            if order[k].1 == 1 {
                l1 += 1;
            } else {
                l0 += 1;
            }
            let (lo, hi) = (order[k].0, order[k + 1].0);
            if lo == hi {
                continue;
            }
            let nl = (l0 + l1) as f64;
            let weighted = nl / n * impurity(criterion, l0, l1)
                + (n - nl) / n * impurity(criterion, n0 - l0, n1 - l1);
            let gain = parent - weighted;
            if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(BestSplit {
                    feature,
                    threshold: lo + (hi - lo) / 2.0,
                    gain,
                });
            }
        }
    }
    best
}

impl TreeModel {
    fn leaf(&self, x: &[f64]) -> Result<&Node> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: x.len(),
            });
        }
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    id = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                leaf => return Ok(leaf),
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        match self.leaf(x)? {
            Node::Leaf { class, .. } => Ok(*class),
            Node::Split { .. } => Err(Error::InvalidParameter("malformed tree".into())),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        match self.leaf(x)? {
            Node::Leaf { p_one, .. } => Ok(*p_one),
            Node::Split { .. } => Err(Error::InvalidParameter("malformed tree".into())),
        }
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ExtractorId;
    use alloc::vec;
    use proptest::prelude::*;

    fn one_d(xs: &[f64], ys: &[u8]) -> Dataset {
        Dataset::from_rows(
            ExtractorId::Lbp,
            xs.iter().map(|&x| vec![x]).collect(),
            ys.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn impurity_at_half() {
        assert_eq!(impurity(Criterion::Gini, 5, 5), 0.5);
        assert!((impurity(Criterion::Entropy, 5, 5) - 1.0).abs() < 1e-15);
        assert_eq!(impurity(Criterion::Gini, 4, 0), 0.0);
        assert_eq!(impurity(Criterion::Entropy, 0, 4), 0.0);
    }

    #[test]
    fn pure_data_is_one_leaf() {
        let m = train_tree(&one_d(&[1.0, 2.0, 3.0], &[1, 1, 1]), &TreeParams::default()).unwrap();
        assert_eq!(
            m.nodes,
            vec![Node::Leaf {
                class: 1,
                p_one: 1.0
            }]
        );
    }

    #[test]
    fn root_split_matches_exhaustive_search() {
        let xs = [1.0, 2.0, 3.0, 7.0, 8.0, 9.0];
        let ys = [0, 0, 0, 1, 1, 1];
        // Oracle: evaluate every midpoint directly.
        let mut best = (f64::NEG_INFINITY, 0.0);
        for t in [1.5, 2.5, 5.0, 7.5, 8.5] {
            let left: Vec<u8> = xs
                .iter()
                .zip(&ys)
                .filter(|(x, _)| **x <= t)
                .map(|(_, y)| *y)
                .collect();
            let right: Vec<u8> = xs
                .iter()
                .zip(&ys)
                .filter(|(x, _)| **x > t)
                .map(|(_, y)| *y)
                .collect();
            let g = |v: &[u8]| {
                let p = v.iter().filter(|&&y| y == 1).count() as f64 / v.len() as f64;
                1.0 - p * p - (1.0 - p) * (1.0 - p)
            };
            let gain = 0.5 - (left.len() as f64 * g(&left) + right.len() as f64 * g(&right)) / 6.0;
            if gain > best.0 {
                best = (gain, t);
            }
        }
        assert_eq!(best.1, 5.0);
        for criterion in [Criterion::Gini, Criterion::Entropy] {
            let m = train_tree(
                &one_d(&xs, &ys),
                &TreeParams {
                    criterion,
                    ..Default::default()
                },
            )
            .unwrap();
            match m.nodes[0] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    assert_eq!((feature, threshold), (0, 5.0));
                    assert!(
                        matches!(m.nodes[left], Node::Leaf { class: 0, p_one } if p_one == 0.0)
                    );
                    assert!(
                        matches!(m.nodes[right], Node::Leaf { class: 1, p_one } if p_one == 1.0)
                    );
                }
                _ => panic!("expected a split"),
            }
        }
    }

    #[test]
    fn stopping_rules() {
        let d = one_d(&[1.0, 2.0, 3.0, 4.0], &[0, 1, 0, 1]);
        let stump = train_tree(
            &d,
            &TreeParams {
                max_depth: Some(0),
                ..Default::default()
            },
        )
        .unwrap();
        // tie -> class 0
        assert_eq!(
            stump.nodes,
            vec![Node::Leaf {
                class: 0,
                p_one: 0.5
            }]
        );
        let m = train_tree(
            &d,
            &TreeParams {
                min_samples_split: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.nodes.len(), 1);
        assert!(
            train_tree(
                &d,
                &TreeParams {
                    max_depth: Some(1),
                    ..Default::default()
                }
            )
            .unwrap()
            .depth()
                <= 1
        );
        assert!(m.predict(&[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn unlimited_tree_memorizes_and_gains_are_positive(
            rows in proptest::collection::vec(proptest::collection::vec(-1000.0f64..1000.0, 3), 2..60),
            labels in proptest::collection::vec(0u8..2, 60),
            entropy in any::<bool>(),
            max_depth in proptest::option::of(1usize..6),
        ) {
            let labels = labels[..rows.len()].to_vec();
            let d = Dataset::from_rows(ExtractorId::Hog, rows.clone(), labels.clone()).unwrap();
            let criterion = if entropy { Criterion::Entropy } else { Criterion::Gini };
            let m = train_tree(&d, &TreeParams { criterion, max_depth, min_samples_split: 2 }).unwrap();
            for node in &m.nodes {
                if let Node::Split { gain, .. } = node {
                    prop_assert!(*gain >= 0.0);
                }
            }
            match max_depth {
                Some(limit) => prop_assert!(m.depth() <= limit),
                None => {
                    // continuous draws make every row and feature value distinct
                    for (r, &l) in rows.iter().zip(&labels) {
                        prop_assert_eq!(m.predict(r).unwrap(), l);
                    }
                }
            }
        }
    }
}
