//! CART classification trees (Gini impurity) with depth selection by
//! cross-validated AUC.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::eval::auc;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// Root has depth 0; `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    /// Minimum training instances on each side of a split.
    pub min_leaf: usize,
    /// Features tried per split; `None` tries all.
    pub mtry: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_leaf: 5,
            mtry: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Split feature; `None` for leaves.
    pub feature: Option<usize>,
    /// Instances with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    pub depth: u32,
    pub n: u32,
    pub n_positive: u32,
    /// Hard class prediction were this node a leaf.
    pub vote: bool,
}

impl TreeNode {
    pub fn probability(&self) -> f64 {
        f64::from(self.n_positive) / f64::from(self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
    /// Sorted indices of the features used in splits.
    pub features_used: Vec<usize>,
    pub depth: usize,
    pub n_features: usize,
}

/// `n · Gini` of a node with `pos` positives.
fn impurity(n: f64, pos: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n - (pos * pos + (n - pos) * (n - pos)) / n
    }
}

fn vote(p: f64, parent: Option<bool>) -> bool {
    if p > 0.5 {
        true
    } else if p < 0.5 {
        false
    } else {
        parent.unwrap_or(true)
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct Grower<'a, R> {
    data: &'a Dataset,
    params: &'a TreeParams,
    rng: Option<&'a mut R>,
    nodes: Vec<TreeNode>,
    buf: Vec<(f64, bool)>,
}

impl<R: Rng> Grower<'_, R> {
    fn best_split(&mut self, sample: &[u32], pos: usize) -> Option<Candidate> {
        let m = self.data.n_cols();
        let features: Vec<usize> = match (self.params.mtry, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < m => {
                let mut f = index::sample(rng, m, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..m).collect(),
        };
        let n = sample.len();
        let min_leaf = self.params.min_leaf.max(1);
        let parent = impurity(n as f64, pos as f64);
        let mut best: Option<Candidate> = None;
        for f in features {
            self.buf.clear();
            self.buf
                .extend(sample.iter().map(|&r| (self.data.get(r as usize, f), self.data.y()[r as usize])));
            self.buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.buf[0].0 == self.buf[n - 1].0 {
                continue;
            }
            let mut left_pos = 0usize;
            for i in 0..n - 1 {
                left_pos += usize::from(self.buf[i].1);
                let nl = i + 1;
                if nl < min_leaf {
                    continue;
                }
                if n - nl < min_leaf {
                    break;
                }
                let (a, b) = (self.buf[i].0, self.buf[i + 1].0);
                if a == b {
                    continue;
                }
                let score = impurity(nl as f64, left_pos as f64)
                    + impurity((n - nl) as f64, (pos - left_pos) as f64);
                if score < parent - 1e-12 && best.as_ref().is_none_or(|c| score < c.score) {
                    let mid = a + (b - a) / 2.0;
                    // guard against a midpoint that rounds onto the upper value
                    let threshold = if mid < b { mid } else { a };
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, root_sample: Vec<u32>) {
        let mut stack: Vec<(u32, Vec<u32>)> = Vec::new();
        let root = self.push_node(&root_sample, 0, None);
        stack.push((root, root_sample));
        while let Some((id, sample)) = stack.pop() {
            let node = self.nodes[id as usize];
            let n = sample.len();
            let pos = node.n_positive as usize;
            let depth_ok = self.params.max_depth.is_none_or(|d| (node.depth as usize) < d);
            if !depth_ok || pos == 0 || pos == n || n < 2 * self.params.min_leaf.max(1) {
                continue;
            }
            let Some(split) = self.best_split(&sample, pos) else {
                continue;
            };
            let (left, right): (Vec<u32>, Vec<u32>) = sample
                .into_iter()
                .partition(|&r| self.data.get(r as usize, split.feature) <= split.threshold);
            let l = self.push_node(&left, node.depth + 1, Some(node.vote));
            let r = self.push_node(&right, node.depth + 1, Some(node.vote));
            let parent = &mut self.nodes[id as usize];
            parent.feature = Some(split.feature);
            parent.threshold = split.threshold;
            parent.left = l;
            parent.right = r;
            stack.push((r, right));
            stack.push((l, left));
        }
    }

    fn push_node(&mut self, sample: &[u32], depth: u32, parent_vote: Option<bool>) -> u32 {
        let n_positive = sample.iter().filter(|&&r| self.data.y()[r as usize]).count() as u32;
        let n = sample.len() as u32;
        self.nodes.push(TreeNode {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            depth,
            n,
            n_positive,
            vote: vote(f64::from(n_positive) / f64::from(n), parent_vote),
        });
        (self.nodes.len() - 1) as u32
    }
}

impl TreeModel {
    /// Fits on all rows of `data`.
    pub fn fit(data: &Dataset, params: &TreeParams) -> Result<Self> {
        let sample: Vec<u32> = (0..data.n_rows() as u32).collect();
        Self::fit_sample::<rand_chacha::ChaCha8Rng>(data, sample, params, None)
    }

    /// Fits on `sample` (row indices, repeats allowed), drawing per-split
    /// feature subsets from `rng` when `params.mtry` is set.
    pub fn fit_sample<R: Rng>(data: &Dataset, sample: Vec<u32>, params: &TreeParams, rng: Option<&mut R>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::invalid("cannot fit a tree on no instances"));
        }
        if let Some(k) = params.mtry {
            if k == 0 || k > data.n_cols() {
                return Err(Error::invalid(format!("mtry {k} outside 1..={}", data.n_cols())));
            }
        }
        let mut g = Grower {
            data,
            params,
            rng,
            nodes: Vec::new(),
            buf: Vec::with_capacity(sample.len()),
        };
        g.grow(sample);
        let nodes = g.nodes;
        let mut features_used: Vec<usize> = nodes.iter().filter_map(|n| n.feature).collect();
        features_used.sort_unstable();
        features_used.dedup();
        let depth = nodes.iter().map(|n| n.depth as usize).max().unwrap_or(0);
        Ok(TreeModel {
            nodes,
            features_used,
            depth,
            n_features: data.n_cols(),
        })
    }

    fn leaf(&self, row: &[f64], max_depth: usize) -> &TreeNode {
        let mut node = &self.nodes[0];
        while let Some(f) = node.feature {
            if node.depth as usize >= max_depth {
                break;
            }
            node = &self.nodes[if row[f] <= node.threshold { node.left } else { node.right } as usize];
        }
        node
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.leaf(row, usize::MAX).probability()
    }

    pub fn vote_row(&self, row: &[f64]) -> bool {
        self.leaf(row, usize::MAX).vote
    }

    /// Prediction of this tree cut back to `depth`.
    pub fn predict_row_at_depth(&self, row: &[f64], depth: usize) -> f64 {
        self.leaf(row, depth).probability()
    }

    pub fn predict(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n_rows()).map(|r| self.predict_row(data.row(r))).collect()
    }

    pub fn uses_feature(&self, f: usize) -> bool {
        self.features_used.binary_search(&f).is_ok()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeCvParams {
    pub folds: usize,
    pub depth_grid: Vec<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for TreeCvParams {
    fn default() -> Self {
        TreeCvParams {
            folds: 10,
            depth_grid: vec![2, 3, 4, 5, 6, 8, 10, 12],
            min_leaf: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeCvReport {
    pub chosen_depth: usize,
    /// `(depth, mean held-out AUC)` over the grid.
    pub mean_auc: Vec<(usize, f64)>,
}

/// Stratified fold assignment of the rows of `y`.
pub fn stratified_folds(y: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least two folds"));
    }
    let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let mut neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    if pos.len() < folds || neg.len() < folds {
        return Err(Error::invalid(format!(
            "{folds}-fold cross-validation needs {folds} instances of each class"
        )));
    }
    let mut rng = rng::substream(seed, "cv-folds");
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold = vec![0; y.len()];
    for (k, &i) in pos.iter().chain(&neg).enumerate() {
        fold[i] = k % folds;
    }
    Ok(fold)
}

/// Chooses the depth with the best mean held-out AUC (ties to the shallower
/// tree) and refits on all of `data`.
///
/// Greedy growth makes a depth-`d` tree equal to the deepest tree cut back
/// to `d`, so each fold grows one tree.
pub fn train_tree_cv(data: &Dataset, cv: &TreeCvParams) -> Result<(TreeModel, TreeCvReport)> {
    if cv.depth_grid.is_empty() {
        return Err(Error::invalid("empty depth grid"));
    }
    let fold = stratified_folds(data.y(), cv.folds, cv.seed)?;
    let deepest = *cv.depth_grid.iter().max().unwrap();
    let params = TreeParams {
        max_depth: Some(deepest),
        min_leaf: cv.min_leaf,
        mtry: None,
    };
    let mut sums = vec![0.0; cv.depth_grid.len()];
    for k in 0..cv.folds {
        let train: Vec<usize> = (0..data.n_rows()).filter(|&i| fold[i] != k).collect();
        let held: Vec<usize> = (0..data.n_rows()).filter(|&i| fold[i] == k).collect();
        let tree = TreeModel::fit(&data.subset(&train), &params)?;
        let y_held: Vec<bool> = held.iter().map(|&i| data.y()[i]).collect();
        for (g, &d) in cv.depth_grid.iter().enumerate() {
            let s: Vec<f64> = held.iter().map(|&i| tree.predict_row_at_depth(data.row(i), d)).collect();
            sums[g] += auc(&s, &y_held)?;
        }
    }
    let mut mean_auc: Vec<(usize, f64)> = cv
        .depth_grid
        .iter()
        .zip(&sums)
        .map(|(&d, s)| (d, s / cv.folds as f64))
        .collect();
    mean_auc.sort_by_key(|&(d, _)| d);
    let chosen_depth = mean_auc
        .iter()
        .fold(None::<(usize, f64)>, |best, &(d, a)| match best {
            Some((_, b)) if b >= a => best,
            _ => Some((d, a)),
        })
        .unwrap()
        .0;
    let tree = TreeModel::fit(
        data,
        &TreeParams {
            max_depth: Some(chosen_depth),
            ..params
        },
    )?;
    Ok((tree, TreeCvReport { chosen_depth, mean_auc }))
}
