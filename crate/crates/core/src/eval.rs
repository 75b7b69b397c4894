//! The two evaluation metrics: least-squares linear reconstruction of all
//! features from the selected subset, and downstream classification
//! accuracy with extremely randomized trees.

use serde::{Deserialize, Serialize};

use crate::error::{FaeError, Result};
use crate::matrix::{lstsq, Matrix};
use crate::model::SelectionResult;
use crate::rng::SeededRng;

/// Ridge jitter applied when fitting the reconstruction decoder; purely for
/// conditioning of the normal equations.
pub const DECODER_RIDGE: f64 = 1e-8;

/// A `k x m` linear map from selected features back to all features.
#[derive(Debug, Clone)]
pub struct LinearDecoder {
    pub coef: Matrix,
}

/// Fits an (effectively unregularized) least-squares map from the selected
/// columns of the training split to all of its columns.
pub fn fit_linear_decoder(train: &Matrix, sel: &SelectionResult) -> Result<LinearDecoder> {
    if sel.k() == 0 {
        return Err(FaeError::InvalidArgument("empty selection".into()));
    }
    if train.rows() < sel.k() {
        return Err(FaeError::InvalidArgument(format!(
            "{} training rows for {} selected features",
            train.rows(),
            sel.k()
        )));
    }
    let a = train.select_cols(&sel.indices)?;
    let coef = lstsq(&a, train, DECODER_RIDGE)?;
    Ok(LinearDecoder { coef })
}

/// Mean squared error of reconstructing `test` from its selected columns:
/// `||test - test[:, sel] coef||_F^2 / (n * m)`.
pub fn recon_error(test: &Matrix, sel: &SelectionResult, dec: &LinearDecoder) -> Result<f64> {
    if dec.coef.rows() != sel.k() || dec.coef.cols() != test.cols() {
        return Err(FaeError::dim(
            "recon_error",
            format!(
                "decoder {}x{} for {} selected of {} features",
                dec.coef.rows(),
                dec.coef.cols(),
                sel.k(),
                test.cols()
            ),
        ));
    }
    let recon = test.select_cols(&sel.indices)?.matmul(&dec.coef)?;
    let resid = recon.sub(test)?;
    Ok(resid.frob_sq() / (test.rows() as f64 * test.cols() as f64))
}

/// How many candidate features each split draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// `round(sqrt(m))`, the classification default.
    Sqrt,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    fn resolve(&self, m: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (m as f64).sqrt().round() as usize,
            MaxFeatures::All => m,
            MaxFeatures::Fixed(k) => *k,
        };
        k.clamp(1, m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtraTreesParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl ExtraTreesParams {
    /// 100 trees, sqrt(m) candidates per split, split nodes of >= 2
    /// samples, grown to purity.
    pub fn new(seed: u64) -> Self {
        ExtraTreesParams {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        hist: Vec<u32>,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf_hist(&self, row: &[f64]) -> &[u32] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { hist } => return hist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature as usize] < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

/// A forest of extremely randomized trees: every tree sees the full
/// training set, each split draws a random candidate feature subset with
/// one uniform-random threshold per candidate and keeps the best-scoring
/// cut (Gini), and leaves store class histograms.
#[derive(Debug, Clone)]
pub struct ExtraTreesModel {
    trees: Vec<Tree>,
    pub n_classes: usize,
    pub n_features: usize,
    pub params: ExtraTreesParams,
}

impl ExtraTreesModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

fn gini(hist: &[u32], total: f64) -> f64 {
    let mut s = 0.0;
    for &c in hist {
        let p = c as f64 / total;
        s += p * p;
    }
    1.0 - s
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    labels: &'a [u32],
    n_classes: usize,
    k_candidates: usize,
    min_samples_split: usize,
    rng: SeededRng,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn histogram(&self, samples: &[u32]) -> Vec<u32> {
        let mut hist = vec![0u32; self.n_classes];
        for &i in samples {
            hist[self.labels[i as usize] as usize] += 1;
        }
        hist
    }

    fn feature_range(&self, samples: &[u32], feature: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in samples {
            let v = self.x.get(i as usize, feature);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Uniform threshold strictly inside `(lo, hi]` so both sides of
    /// `x < t` are non-empty within the node.
    fn draw_threshold(&mut self, lo: f64, hi: f64) -> f64 {
        let u = 1.0 - self.rng.uniform01(); // (0, 1]
        lo + u * (hi - lo)
    }

    /// Candidate features: a random draw of `k_candidates` distinct
    /// indices (partial Fisher-Yates over the feature range).
    fn draw_candidates(&mut self, m: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..m).collect();
        for slot in 0..self.k_candidates.min(m) {
            let j = slot + self.rng.below(m - slot);
            pool.swap(slot, j);
        }
        pool.truncate(self.k_candidates.min(m));
        pool
    }

    fn build(&mut self, samples: Vec<u32>) -> u32 {
        let hist = self.histogram(&samples);
        let total = samples.len() as f64;
        let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || samples.len() < self.min_samples_split {
            self.nodes.push(Node::Leaf { hist });
            return (self.nodes.len() - 1) as u32;
        }

        let m = self.x.cols();
        let mut best: Option<(f64, usize, f64)> = None; // (score, feature, threshold)
        for feature in self.draw_candidates(m) {
            let (lo, hi) = self.feature_range(&samples, feature);
            if !(hi > lo) {
                continue; // constant within the node
            }
            let threshold = self.draw_threshold(lo, hi);
            let mut left_hist = vec![0u32; self.n_classes];
            let mut left_n = 0u32;
            for &i in &samples {
                if self.x.get(i as usize, feature) < threshold {
                    left_hist[self.labels[i as usize] as usize] += 1;
                    left_n += 1;
                }
            }
            let right_n = samples.len() as u32 - left_n;
            debug_assert!(left_n > 0 && right_n > 0);
            let right_hist: Vec<u32> = hist
                .iter()
                .zip(&left_hist)
                .map(|(&a, &l)| a - l)
                .collect();
            let score = (left_n as f64 * gini(&left_hist, left_n as f64)
                + right_n as f64 * gini(&right_hist, right_n as f64))
                / total;
            // strictly-less keeps the first-drawn candidate on ties
            if best.map_or(true, |(b, ..)| score < b) {
                best = Some((score, feature, threshold));
            }
        }

        // All candidates constant: fall back to any non-constant feature so
        // impure nodes still grow to purity; if none exists, make a leaf.
        if best.is_none() {
            let non_constant: Vec<usize> = (0..m)
                .filter(|&f| {
                    let (lo, hi) = self.feature_range(&samples, f);
                    hi > lo
                })
                .collect();
            if non_constant.is_empty() {
                self.nodes.push(Node::Leaf { hist });
                return (self.nodes.len() - 1) as u32;
            }
            let feature = non_constant[self.rng.below(non_constant.len())];
            let (lo, hi) = self.feature_range(&samples, feature);
            let threshold = self.draw_threshold(lo, hi);
            best = Some((f64::INFINITY, feature, threshold));
        }

        let (_, feature, threshold) = best.unwrap();
        let (left_samples, right_samples): (Vec<u32>, Vec<u32>) = samples
            .iter()
            .partition(|&&i| self.x.get(i as usize, feature) < threshold);

        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { hist: vec![] }); // placeholder
        let left = self.build(left_samples);
        let right = self.build(right_samples);
        self.nodes[slot] = Node::Split {
            feature: feature as u32,
            threshold,
            left,
            right,
        };
        slot as u32
    }
}

/// Fits a forest. Per-tree generators derive from the master seed, so the
/// model is reproducible and trees are independent.
pub fn fit_extra_trees(
    x: &Matrix,
    labels: &[u32],
    params: &ExtraTreesParams,
) -> Result<ExtraTreesModel> {
    if labels.len() != x.rows() {
        return Err(FaeError::dim(
            "fit_extra_trees",
            format!("{} labels for {} rows", labels.len(), x.rows()),
        ));
    }
    if x.rows() < 2 {
        return Err(FaeError::InvalidArgument(
            "extra-trees needs at least 2 samples".into(),
        ));
    }
    if params.n_trees == 0 {
        return Err(FaeError::InvalidArgument("empty forest rejected".into()));
    }
    let n_classes = labels.iter().max().map_or(0, |&c| c as usize + 1);
    let master = SeededRng::new(params.seed);
    let k_candidates = params.max_features.resolve(x.cols());

    let mut trees = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let mut builder = TreeBuilder {
            x,
            labels,
            n_classes,
            k_candidates,
            min_samples_split: params.min_samples_split.max(2),
            rng: master.derive(t as u64),
            nodes: Vec::new(),
        };
        let root = builder.build((0..x.rows() as u32).collect());
        debug_assert_eq!(root, 0);
        trees.push(Tree {
            nodes: builder.nodes,
        });
    }
    Ok(ExtraTreesModel {
        trees,
        n_classes,
        n_features: x.cols(),
        params: *params,
    })
}

/// Majority vote: each tree contributes its leaf's class distribution
/// (histogram normalized to the leaf's sample count), votes are summed and
/// the largest wins; ties go to the lower class id. With trees grown to
/// purity this is exactly one vote per tree.
pub fn predict(model: &ExtraTreesModel, x: &Matrix) -> Result<Vec<u32>> {
    if x.cols() != model.n_features {
        return Err(FaeError::dim(
            "predict",
            format!(
                "{} features, model fitted on {}",
                x.cols(),
                model.n_features
            ),
        ));
    }
    if model.trees.is_empty() {
        return Err(FaeError::InvalidArgument("empty forest".into()));
    }
    let mut out = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let row = x.row(i);
        let mut votes = vec![0.0f64; model.n_classes.max(1)];
        for tree in &model.trees {
            let hist = tree.leaf_hist(row);
            let total: u32 = hist.iter().sum();
            if total > 0 {
                for (v, &c) in votes.iter_mut().zip(hist) {
                    *v += c as f64 / total as f64;
                }
            }
        }
        let best = votes
            .iter()
            .enumerate()
            .max_by(|(ia, va), (ib, vb)| va.total_cmp(vb).then(ib.cmp(ia)))
            .map(|(i, _)| i as u32)
            .unwrap_or(0);
        out.push(best);
    }
    Ok(out)
}

/// Fraction of agreeing entries.
pub fn accuracy(pred: &[u32], truth: &[u32]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(FaeError::dim(
            "accuracy",
            format!("{} predictions for {} labels", pred.len(), truth.len()),
        ));
    }
    if pred.is_empty() {
        return Err(FaeError::InvalidArgument("empty prediction vector".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}
