//! Multi-output regression trees from symptom vectors to herb vectors.
//!
//! Nodes are split greedily on the `(feature, threshold)` pair that
//! minimizes the summed squared error of the two children over all output
//! columns. Candidate thresholds are midpoints between consecutive distinct
//! feature values, so a binary feature has the single threshold 0.5.
//! Samples with `x <= threshold` go left. Ties prefer the lower feature
//! index and then the lower threshold, which makes fitting deterministic.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::corpus::{Axis, Corpus, Space};
use crate::error::{Error, Result};

/// Relative margin a candidate split must win by to replace the incumbent.
const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        /// Sum over output columns of the column MSE at this node.
        impurity: f64,
        /// Squared-error reduction achieved by the split.
        gain: f64,
    },
    Leaf {
        value: Vec<f64>,
        n_samples: usize,
        impurity: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 3,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    /// Root at index 0.
    nodes: Vec<Node>,
    max_depth: usize,
    n_features: usize,
    n_outputs: usize,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    /// `(feature, threshold)` of the root, if it is a split.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// Distinct features used by any split, ascending.
    pub fn split_features(&self) -> BTreeSet<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: ArrayView1<f64>) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> &[f64] {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::ShapeMismatch(format!(
                "tree expects {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        let mut out = Array2::zeros((x.nrows(), self.n_outputs));
        for (row, mut o) in x.rows().into_iter().zip(out.rows_mut()) {
            o.assign(&ArrayView1::from(self.predict_row(row)));
        }
        Ok(out)
    }
}

struct Builder<'x, 'y> {
    x: ArrayView2<'x, f64>,
    y: ArrayView2<'y, f64>,
    params: TreeParams,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn column_sums(y: ArrayView2<f64>, rows: &[usize]) -> Vec<f64> {
    let mut s = vec![0.0; y.ncols()];
    for &i in rows {
        for (acc, v) in s.iter_mut().zip(y.row(i)) {
            *acc += v;
        }
    }
    s
}

/// Summed squared deviation from the column means, and those means.
fn sse(y: ArrayView2<f64>, rows: &[usize]) -> (f64, Vec<f64>) {
    let n = rows.len() as f64;
    let mean: Vec<f64> = column_sums(y, rows).into_iter().map(|s| s / n).collect();
    let mut total = 0.0;
    for &i in rows {
        for (v, m) in y.row(i).iter().zip(&mean) {
            total += (v - m) * (v - m);
        }
    }
    (total, mean)
}

impl Builder<'_, '_> {
    /// Best split by the proxy `Σ_c S_L²/n_L + S_R²/n_R`, which is the
    /// constant total sum of squares minus the children's squared error.
    fn best_split(&self, rows: &[usize]) -> Option<Candidate> {
        let n = rows.len();
        let h = self.y.ncols();
        let total = column_sums(self.y, rows);
        let mut best: Option<Candidate> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut left = vec![0.0; h];

        for j in 0..self.x.ncols() {
            let first = self.x[[rows[0], j]];
            if rows.iter().all(|&i| self.x[[i, j]] == first) {
                continue;
            }
            sorted.clear();
            sorted.extend(rows.iter().map(|&i| (self.x[[i, j]], i)));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            left.fill(0.0);
            for k in 0..n - 1 {
                let (v, i) = sorted[k];
                for (acc, yv) in left.iter_mut().zip(self.y.row(i)) {
                    *acc += yv;
                }
                let next = sorted[k + 1].0;
                if next == v {
                    continue;
                }
                let (nl, nr) = ((k + 1) as f64, (n - k - 1) as f64);
                let score: f64 = left
                    .iter()
                    .zip(&total)
                    .map(|(l, t)| l * l / nl + (t - l) * (t - l) / nr)
                    .sum();
                let better = match &best {
                    None => true,
                    Some(b) => score > b.score + TIE_RTOL * b.score.abs(),
                };
                if better {
                    best = Some(Candidate {
                        feature: j,
                        threshold: v + (next - v) / 2.0,
                        score,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len();
        let (node_sse, mean) = sse(self.y, &rows);
        let impurity = node_sse / n as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: mean,
            n_samples: n,
            impurity,
        });
        if depth >= self.params.max_depth || n < self.params.min_samples_split.max(2) || node_sse <= 0.0 {
            return id;
        }
        let Some(c) = self.best_split(&rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[[i, c.feature]] <= c.threshold);
        let gain = node_sse - sse(self.y, &l).0 - sse(self.y, &r).0;
        if gain <= TIE_RTOL * node_sse {
            return id;
        }
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            left,
            right,
            n_samples: n,
            impurity,
            gain,
        };
        id
    }
}

pub fn fit_tree(x: ArrayView2<f64>, y: ArrayView2<f64>, params: TreeParams) -> Result<RegressionTree> {
    if x.nrows() != y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "X has {} rows, Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::ShapeMismatch("cannot fit a tree on zero samples".into()));
    }
    let mut b = Builder {
        x,
        y,
        params,
        nodes: Vec::new(),
    };
    b.build((0..x.nrows()).collect(), 0);
    Ok(RegressionTree {
        nodes: b.nodes,
        max_depth: params.max_depth,
        n_features: x.ncols(),
        n_outputs: y.ncols(),
    })
}

/// Normalized total squared-error reduction per feature; all zeros for a
/// tree without splits.
pub fn feature_importances(tree: &RegressionTree) -> Vec<f64> {
    let mut imp = vec![0.0; tree.n_features];
    for node in &tree.nodes {
        if let Node::Split { feature, gain, .. } = node {
            imp[*feature] += gain;
        }
    }
    let total: f64 = imp.iter().sum();
    if total > 0.0 {
        imp.iter_mut().for_each(|v| *v /= total);
    }
    imp
}

/// Mean over output columns of `1 − SS_res / SS_tot`, skipping constant
/// columns. With every column constant the result is 1 for an exact fit and
/// 0 otherwise.
pub fn r_squared(tree: &RegressionTree, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    if x.nrows() != y.nrows() || y.ncols() != tree.n_outputs {
        return Err(Error::ShapeMismatch(format!(
            "X is {}x{}, Y is {}x{}, tree maps {} -> {}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols(),
            tree.n_features,
            tree.n_outputs
        )));
    }
    let pred = tree.predict(x)?;
    let n = y.nrows() as f64;
    let mut scores = Vec::new();
    let mut exact = true;
    for c in 0..y.ncols() {
        let col = y.column(c);
        let mean = col.sum() / n;
        let ss_tot: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        let ss_res: f64 = col.iter().zip(pred.column(c)).map(|(v, p)| (v - p).powi(2)).sum();
        if ss_tot > 0.0 {
            scores.push(1.0 - ss_res / ss_tot);
        } else if ss_res > 0.0 {
            exact = false;
        }
    }
    Ok(if scores.is_empty() {
        if exact {
            1.0
        } else {
            0.0
        }
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeReport {
    pub depth: usize,
    /// Up to three `(feature name, importance)` pairs with nonzero
    /// importance, by importance descending then feature index.
    pub top_features: Vec<(String, f64)>,
    pub n_features_used: usize,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeRow {
    pub depth: usize,
    pub feat1: Option<String>,
    pub imp1: Option<f64>,
    pub feat2: Option<String>,
    pub imp2: Option<f64>,
    pub feat3: Option<String>,
    pub imp3: Option<f64>,
    pub n_features: usize,
    pub r2: f64,
}

impl TreeReport {
    pub fn to_row(&self) -> TreeRow {
        let f = |k: usize| self.top_features.get(k).map(|(n, _)| n.clone());
        let i = |k: usize| self.top_features.get(k).map(|(_, v)| *v);
        TreeRow {
            depth: self.depth,
            feat1: f(0),
            imp1: i(0),
            feat2: f(1),
            imp2: i(1),
            feat3: f(2),
            imp3: i(2),
            n_features: self.n_features_used,
            r2: self.r2,
        }
    }
}

pub const DEFAULT_DEPTHS: [usize; 5] = [3, 5, 7, 10, 30];

/// Raw symptom matrix, optionally followed by the three signed pattern
/// scores, with a name per column.
pub fn design_matrix(corpus: &Corpus, include_patterns: bool) -> (Array2<f64>, Vec<String>) {
    let s = corpus.symptom_vocab().len();
    let d = s + if include_patterns { 3 } else { 0 };
    let mut x = Array2::zeros((corpus.len(), d));
    for (i, p) in corpus.provisions().iter().enumerate() {
        for j in p.symptoms_raw.iter_ones() {
            x[[i, j]] = 1.0;
        }
        if include_patterns {
            for axis in Axis::ALL {
                x[[i, s + axis.index()]] = p.scores.get(axis) as f64;
            }
        }
    }
    let mut names = corpus.symptom_vocab().tokens().to_vec();
    if include_patterns {
        names.extend(Axis::ALL.iter().map(|a| a.name().to_string()));
    }
    (x, names)
}

pub fn report_for(
    tree: &RegressionTree,
    names: &[String],
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
) -> Result<TreeReport> {
    let imp = feature_importances(tree);
    let mut ranked: Vec<usize> = (0..imp.len()).filter(|&j| imp[j] > 0.0).collect();
    ranked.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
    Ok(TreeReport {
        depth: tree.max_depth(),
        top_features: ranked.iter().take(3).map(|&j| (names[j].clone(), imp[j])).collect(),
        n_features_used: tree.split_features().len(),
        r2: r_squared(tree, x, y)?,
    })
}

/// Fits one tree per depth on the herb matrix and reports in-sample fit.
pub fn depth_sweep(
    corpus: &Corpus,
    depths: &[usize],
    include_patterns: bool,
    min_samples_split: usize,
) -> Result<Vec<TreeReport>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if depths.is_empty() {
        return Err(Error::InvalidParameter("depth list is empty".into()));
    }
    let (x, names) = design_matrix(corpus, include_patterns);
    let y = corpus.feature_matrix(Space::Herb);
    depths
        .iter()
        .map(|&max_depth| {
            let tree = fit_tree(
                x.view(),
                y.view(),
                TreeParams {
                    max_depth,
                    min_samples_split,
                },
            )?;
            report_for(&tree, &names, x.view(), y.view())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn params(max_depth: usize) -> TreeParams {
        TreeParams {
            max_depth,
            min_samples_split: 2,
        }
    }

    #[test]
    fn depth_zero_is_a_mean_leaf() {
        let x = array![[0.], [1.], [1.]];
        let y = array![[1., 0.], [2., 3.], [3., 3.]];
        let t = fit_tree(x.view(), y.view(), params(0)).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict_row(x.row(0)), &[2.0, 2.0]);
        assert_eq!(r_squared(&t, x.view(), y.view()).unwrap(), 0.0);
        assert!(feature_importances(&t).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn perfectly_determined_target() {
        let x = Array2::from_shape_fn((8, 5), |(i, j)| ((i >> (j % 3)) & 1) as f64);
        let mut x = x;
        for i in 0..8 {
            x[[i, 3]] = (i % 2) as f64;
        }
        // Make column 3 the only exact predictor.
        for i in 0..8 {
            x[[i, 0]] = ((i / 2) % 2) as f64;
        }
        let y = Array2::from_shape_fn((8, 3), |(i, _)| x[[i, 3]]);
        let t = fit_tree(x.view(), y.view(), params(1)).unwrap();
        assert_eq!(t.root_split(), Some((3, 0.5)));
        let imp = feature_importances(&t);
        assert_eq!(imp[3], 1.0);
        assert_eq!(imp.iter().sum::<f64>(), 1.0);
        assert_eq!(r_squared(&t, x.view(), y.view()).unwrap(), 1.0);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        let x = array![[0., 0.], [0., 0.], [1., 1.], [1., 1.]];
        let y = array![[0.], [0.], [1.], [1.]];
        let t = fit_tree(x.view(), y.view(), params(2)).unwrap();
        assert_eq!(t.root_split(), Some((0, 0.5)));
        assert_eq!(t.split_features().len(), 1);
    }

    #[test]
    fn thresholds_are_midpoints() {
        let x = array![[-3.], [-1.], [2.], [3.]];
        let y = array![[0.], [0.], [5.], [5.]];
        let t = fit_tree(x.view(), y.view(), params(1)).unwrap();
        assert_eq!(t.root_split(), Some((0, 0.5)));
    }

    #[test]
    fn shape_mismatch() {
        let x = Array2::<f64>::zeros((3, 2));
        let y = Array2::<f64>::zeros((4, 1));
        assert!(matches!(
            fit_tree(x.view(), y.view(), params(2)),
            Err(Error::ShapeMismatch(_))
        ));
        let t = fit_tree(x.view(), Array2::<f64>::zeros((3, 1)).view(), params(2)).unwrap();
        assert!(matches!(
            r_squared(&t, x.view(), y.view()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn hand_computed_r_squared() {
        // One split on feature 0: leaves {0,1} and {2,3}.
        let x = array![[0.], [0.], [1.], [1.]];
        let y = array![[1., 0.], [3., 0.], [5., 1.], [7., 1.]];
        let t = fit_tree(x.view(), y.view(), params(1)).unwrap();
        // column 0: mean 4, SS_tot = 9+1+1+9 = 20; preds 2,2,6,6 → SS_res = 1+1+1+1 = 4 → 0.8
        // column 1: split is exact → 1.0
        assert_relative_eq!(r_squared(&t, x.view(), y.view()).unwrap(), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn constant_outputs() {
        let x = array![[0.], [1.]];
        let y = array![[2.], [2.]];
        let t = fit_tree(x.view(), y.view(), params(3)).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(r_squared(&t, x.view(), y.view()).unwrap(), 1.0);
    }

    #[test]
    fn min_samples_split_stops_growth() {
        let x = array![[0.], [1.], [2.], [3.]];
        let y = array![[0.], [1.], [2.], [3.]];
        let t = fit_tree(
            x.view(),
            y.view(),
            TreeParams {
                max_depth: 10,
                min_samples_split: 4,
            },
        )
        .unwrap();
        assert_eq!(t.depth(), 1);
    }

    fn data() -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
        (2usize..14, 1usize..6, 1usize..4).prop_flat_map(|(n, d, h)| {
            (
                proptest::collection::vec(0u8..3, n * d),
                proptest::collection::vec(-2.0f64..2.0, n * h),
            )
                .prop_map(move |(xv, yv)| {
                    (
                        Array2::from_shape_vec((n, d), xv.into_iter().map(f64::from).collect()).unwrap(),
                        Array2::from_shape_vec((n, h), yv).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn structural_invariants((x, y) in data(), depth in 0usize..6) {
            let t = fit_tree(x.view(), y.view(), params(depth)).unwrap();
            prop_assert!(t.depth() <= depth);
            let imp = feature_importances(&t);
            prop_assert!(imp.iter().all(|&v| v >= 0.0));
            if t.root_split().is_some() {
                prop_assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            // every prediction is the mean of training rows sharing its leaf
            for i in 0..x.nrows() {
                let leaf = t.leaf_index(x.row(i));
                let peers: Vec<usize> = (0..x.nrows()).filter(|&k| t.leaf_index(x.row(k)) == leaf).collect();
                for c in 0..y.ncols() {
                    let m = peers.iter().map(|&k| y[[k, c]]).sum::<f64>() / peers.len() as f64;
                    prop_assert!((t.predict_row(x.row(i))[c] - m).abs() < 1e-12);
                }
            }
            for node in t.nodes() {
                if let Node::Split { gain, .. } = node {
                    prop_assert!(*gain > 0.0);
                }
            }
            prop_assert_eq!(&t, &fit_tree(x.view(), y.view(), params(depth)).unwrap());
        }

        #[test]
        fn deeper_never_fits_worse((x, y) in data()) {
            let mut prev = f64::NEG_INFINITY;
            for depth in 0..6 {
                let t = fit_tree(x.view(), y.view(), params(depth)).unwrap();
                let r2 = r_squared(&t, x.view(), y.view()).unwrap();
                prop_assert!(r2 >= prev - 1e-12);
                prev = r2;
            }
        }
    }
}
