//! Logistic regression, k-nearest neighbours and a CART decision tree.
//!
//! All three are deterministic functions of their training data: no random
//! initialisation, and every tie is broken by position.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// Full-batch gradient-descent iterations for logistic regression.
pub const LOGISTIC_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    Logistic,
    Tree,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Knn, ClassifierKind::Logistic, ClassifierKind::Tree];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::Tree => "tree",
        }
    }

    /// Column heading in the results table.
    pub fn title(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "KNN",
            ClassifierKind::Logistic => "Logistic",
            ClassifierKind::Tree => "Tree",
        }
    }

    pub fn default_grid(self) -> Vec<Params> {
        match self {
            ClassifierKind::Logistic => {
                let mut grid = Vec::new();
                for learning_rate in [0.01, 0.1, 1.0] {
                    for l2 in [0.0, 0.01, 0.1] {
                        grid.push(Params::Logistic { learning_rate, l2 });
                    }
                }
                grid
            }
            ClassifierKind::Knn => [1, 3, 5, 7, 11].into_iter().map(|k| Params::Knn { k }).collect(),
            ClassifierKind::Tree => {
                let mut grid = Vec::new();
                for max_depth in [3, 5, 8, 12] {
                    for min_leaf in [1, 5, 10] {
                        grid.push(Params::Tree { max_depth, min_leaf });
                    }
                }
                grid
            }
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown classifier '{s}' (expected knn, logistic or tree)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Params {
    Logistic { learning_rate: f64, l2: f64 },
    Knn { k: usize },
    Tree { max_depth: usize, min_leaf: usize },
}

impl Params {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Params::Logistic { .. } => ClassifierKind::Logistic,
            Params::Knn { .. } => ClassifierKind::Knn,
            Params::Tree { .. } => ClassifierKind::Tree,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Params::Logistic { learning_rate, l2 } => {
                if !(learning_rate.is_finite() && learning_rate > 0.0) || !(l2.is_finite() && l2 >= 0.0) {
                    return Err(format!("invalid logistic parameters {self:?}"));
                }
            }
            Params::Knn { k: 0 } => return Err("knn needs k >= 1".into()),
            Params::Tree { max_depth, min_leaf } if max_depth == 0 || min_leaf == 0 => {
                return Err("tree needs max_depth >= 1 and min_leaf >= 1".into())
            }
            _ => {}
        }
        Ok(())
    }
}

/// Per-feature standardisation fitted on training data. Constant features
/// are centred but not scaled.
#[derive(Debug, Clone, PartialEq)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TreeNode {
    Leaf(bool),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Logistic {
        standardizer: Standardizer,
        weights: Vec<f64>,
        bias: f64,
    },
    Knn {
        standardizer: Standardizer,
        points: Vec<Vec<f64>>,
        labels: Vec<bool>,
        k: usize,
    },
    Tree {
        nodes: Vec<TreeNode>,
    },
}

/// A fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    model: Model,
}

fn check_shape(x: &[Vec<f64>], y: &[bool]) -> Result<usize, EvalError> {
    if x.is_empty() {
        return Err(EvalError::EmptyTraining);
    }
    if x.len() != y.len() {
        return Err(EvalError::InvalidConfig(format!(
            "{} feature rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(EvalError::DimensionMismatch {
            expected: d,
            found: row.len(),
        });
    }
    Ok(d)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Classifier {
    pub fn fit(params: &Params, x: &[Vec<f64>], y: &[bool]) -> Result<Classifier, EvalError> {
        check_shape(x, y)?;
        params.validate().map_err(EvalError::InvalidConfig)?;
        let model = match *params {
            Params::Logistic { learning_rate, l2 } => fit_logistic(x, y, learning_rate, l2),
            Params::Knn { k } => {
                let standardizer = Standardizer::fit(x);
                Model::Knn {
                    points: x.iter().map(|r| standardizer.apply(r)).collect(),
                    labels: y.to_vec(),
                    standardizer,
                    k,
                }
            }
            Params::Tree { max_depth, min_leaf } => fit_tree(x, y, max_depth, min_leaf),
        };
        Ok(Classifier { model })
    }

    pub fn predict(&self, row: &[f64]) -> bool {
        match &self.model {
            Model::Logistic {
                standardizer,
                weights,
                bias,
            } => {
                let z: f64 = standardizer
                    .apply(row)
                    .iter()
                    .zip(weights)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + bias;
                z > 0.0
            }
            Model::Knn {
                standardizer,
                points,
                labels,
                k,
            } => {
                let q = standardizer.apply(row);
                let mut dist: Vec<(f64, usize)> = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                    .collect();
                let k = (*k).min(dist.len());
                let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < dist.len() {
                    dist.select_nth_unstable_by(k - 1, by_distance);
                }
                let positives = dist[..k].iter().filter(|(_, i)| labels[*i]).count();
                2 * positives > k
            }
            Model::Tree { nodes } => {
                let mut at = 0;
                loop {
                    match nodes[at] {
                        TreeNode::Leaf(label) => return label,
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => at = if row[feature] <= threshold { left } else { right },
                    }
                }
            }
        }
    }

    /// Number of nodes of a tree classifier.
    pub fn tree_size(&self) -> Option<usize> {
        match &self.model {
            Model::Tree { nodes } => Some(nodes.len()),
            _ => None,
        }
    }
}

fn fit_logistic(x: &[Vec<f64>], y: &[bool], learning_rate: f64, l2: f64) -> Model {
    let standardizer = Standardizer::fit(x);
    let xs: Vec<Vec<f64>> = x.iter().map(|r| standardizer.apply(r)).collect();
    let d = xs[0].len();
    let n = xs.len() as f64;
    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let mut grad = vec![0.0; d];
    for _ in 0..LOGISTIC_ITERATIONS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (row, &label) in xs.iter().zip(y) {
            let z: f64 = row.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>() + bias;
            let err = sigmoid(z) - f64::from(u8::from(label));
            for (g, v) in grad.iter_mut().zip(row) {
                *g += err * v;
            }
            grad_b += err;
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= learning_rate * (g / n + l2 * *w);
        }
        bias -= learning_rate * grad_b / n;
    }
    Model::Logistic {
        standardizer,
        weights,
        bias,
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Leaves with as many positives as negatives predict positive.
fn majority(pos: usize, n: usize) -> bool {
    2 * pos >= n
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// `sorted[f]` holds the node's samples ordered by feature `f`, ties by
    /// sample index.
    fn grow(&mut self, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let samples = &sorted[0];
        let n = samples.len();
        let pos = samples.iter().filter(|&&i| self.y[i as usize]).count();
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf(majority(pos, n)));
        if depth >= self.max_depth || pos == 0 || pos == n || n < 2 * self.min_leaf {
            return id;
        }

        let parent = n as f64 * gini(pos, n);
        let mut best: Option<(f64, usize, f64)> = None;
        for (f, order) in sorted.iter().enumerate() {
            let mut left_pos = 0;
            for split in 1..n {
                let prev = order[split - 1] as usize;
                left_pos += usize::from(self.y[prev]);
                let (a, b) = (self.x[prev][f], self.x[order[split] as usize][f]);
                if a == b || split < self.min_leaf || n - split < self.min_leaf {
                    continue;
                }
                let impurity = split as f64 * gini(left_pos, split)
                    + (n - split) as f64 * gini(pos - left_pos, n - split);
                if best.is_none_or(|(bi, _, _)| impurity < bi) {
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some((impurity, f, threshold));
                }
            }
        }
        let Some((impurity, feature, threshold)) = best else {
            return id;
        };
        if impurity >= parent - 1e-12 {
            return id;
        }

        let goes_left = |i: u32| self.x[i as usize][feature] <= threshold;
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for order in &sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = order.iter().partition(|&&i| goes_left(i));
            left_sorted.push(l);
            right_sorted.push(r);
        }
        drop(sorted);
        let left = self.grow(left_sorted, depth + 1);
        let right = self.grow(right_sorted, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

fn fit_tree(x: &[Vec<f64>], y: &[bool], max_depth: usize, min_leaf: usize) -> Model {
    let d = x[0].len();
    let n = x.len() as u32;
    let sorted: Vec<Vec<u32>> = if d == 0 {
        vec![(0..n).collect()]
    } else {
        (0..d)
            .map(|f| {
                let mut order: Vec<u32> = (0..n).collect();
                order.sort_by(|&a, &b| {
                    x[a as usize][f]
                        .partial_cmp(&x[b as usize][f])
                        .unwrap_or(Ordering::Equal)
                        .then(a.cmp(&b))
                });
                order
            })
            .collect()
    };
    let mut builder = TreeBuilder {
        x,
        y,
        max_depth,
        min_leaf,
        nodes: Vec::new(),
    };
    if d == 0 {
        let pos = y.iter().filter(|&&l| l).count();
        builder.nodes.push(TreeNode::Leaf(majority(pos, y.len())));
    } else {
        builder.grow(sorted, 0);
    }
    Model::Tree { nodes: builder.nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        while x.len() < n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let margin = a + 2.0 * b - 0.3;
            if margin.abs() < 0.1 {
                continue;
            }
            x.push(vec![a, b]);
            y.push(margin > 0.0);
        }
        (x, y)
    }

    fn accuracy(c: &Classifier, x: &[Vec<f64>], y: &[bool]) -> f64 {
        let hits = x.iter().zip(y).filter(|(r, &l)| c.predict(r) == l).count();
        hits as f64 / x.len() as f64
    }

    #[test]
    fn logistic_separates_linearly_separable_data() {
        let (x, y) = separable(200, 1);
        let c = Classifier::fit(&Params::Logistic { learning_rate: 1.0, l2: 0.0 }, &x, &y).unwrap();
        assert_eq!(accuracy(&c, &x, &y), 1.0);
    }

    #[test]
    fn one_nearest_neighbour_memorises() {
        let (x, _) = separable(100, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<bool> = (0..x.len()).map(|_| rng.gen()).collect();
        let c = Classifier::fit(&Params::Knn { k: 1 }, &x, &y).unwrap();
        assert_eq!(accuracy(&c, &x, &y), 1.0);
    }

    #[test]
    fn knn_majority_vote() {
        let x = vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0]];
        let y = vec![true, true, false, false];
        let c = Classifier::fit(&Params::Knn { k: 3 }, &x, &y).unwrap();
        assert!(c.predict(&[0.05]));
        assert!(!c.predict(&[4.0]));
    }

    #[test]
    fn pure_labels_give_a_single_leaf() {
        let (x, _) = separable(50, 4);
        let y = vec![true; x.len()];
        let c = Classifier::fit(&Params::Tree { max_depth: 8, min_leaf: 1 }, &x, &y).unwrap();
        assert_eq!(c.tree_size(), Some(1));
        assert!(c.predict(&[0.0, 0.0]));
    }

    #[test]
    fn deep_tree_fits_training_data() {
        let (x, y) = separable(200, 5);
        let c = Classifier::fit(&Params::Tree { max_depth: 30, min_leaf: 1 }, &x, &y).unwrap();
        assert_eq!(accuracy(&c, &x, &y), 1.0);
        let stump = Classifier::fit(&Params::Tree { max_depth: 1, min_leaf: 1 }, &x, &y).unwrap();
        assert_eq!(stump.tree_size(), Some(3));
    }

    #[test]
    fn min_leaf_is_respected() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let mut y = vec![false; 10];
        y[0] = true;
        let c = Classifier::fit(&Params::Tree { max_depth: 5, min_leaf: 2 }, &x, &y).unwrap();
        // The lone positive cannot be isolated into a leaf of its own.
        assert_eq!(c.predict(&[0.0]), c.predict(&[1.0]));
        let c = Classifier::fit(&Params::Tree { max_depth: 5, min_leaf: 1 }, &x, &y).unwrap();
        assert!(c.predict(&[0.0]));
        assert!(!c.predict(&[1.0]));
    }

    #[test]
    fn shape_errors() {
        let p = Params::Knn { k: 1 };
        assert!(matches!(Classifier::fit(&p, &[], &[]), Err(EvalError::EmptyTraining)));
        assert!(matches!(
            Classifier::fit(&p, &[vec![1.0], vec![1.0, 2.0]], &[true, false]),
            Err(EvalError::DimensionMismatch { expected: 1, found: 2 })
        ));
        assert!(Classifier::fit(&Params::Knn { k: 0 }, &[vec![1.0]], &[true]).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(ClassifierKind::Logistic.default_grid().len(), 9);
        assert_eq!(ClassifierKind::Knn.default_grid().len(), 5);
        assert_eq!(ClassifierKind::Tree.default_grid().len(), 12);
        for kind in ClassifierKind::ALL {
            assert!(kind.default_grid().iter().all(|p| p.kind() == kind));
        }
    }

    #[test]
    fn params_json() {
        let p = Params::Tree { max_depth: 3, min_leaf: 5 };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"max_depth":3,"min_leaf":5}"#);
        assert_eq!(serde_json::from_str::<Params>(&s).unwrap(), p);
        let l: Params = serde_json::from_str(r#"{"learning_rate":0.1,"l2":0.0}"#).unwrap();
        assert_eq!(l.kind(), ClassifierKind::Logistic);
    }
}
