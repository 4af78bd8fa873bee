//! Classifiers and the train/test protocol.

pub mod forest;
pub mod logistic;
pub mod tree;

use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng;

pub use forest::{ForestModel, ForestParams};
pub use logistic::{LogisticModel, LogisticParams};
pub use tree::{TreeCvParams, TreeModel, TreeParams};

/// Dense row-major design matrix with boolean targets (`true` = default).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    n_cols: usize,
    y: Vec<bool>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, n_cols: usize, y: Vec<bool>) -> Result<Self> {
        if x.len() != n_cols * y.len() {
            return Err(Error::invalid(format!(
                "{} values do not form {} rows of {n_cols}",
                x.len(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features must be finite"));
        }
        Ok(Dataset { x, n_cols, y })
    }

    pub fn from_matrix(m: &FeatureMatrix) -> Self {
        Dataset {
            x: m.values().to_vec(),
            n_cols: m.n_features(),
            y: m.y().to_vec(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn y(&self) -> &[bool] {
        &self.y
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.x[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.x[r * self.n_cols + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[f64]) {
        assert_eq!(values.len(), self.n_rows());
        for (r, v) in values.iter().enumerate() {
            self.x[r * self.n_cols + c] = *v;
        }
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            x.extend_from_slice(self.row(r));
        }
        Dataset {
            x,
            n_cols: self.n_cols,
            y: rows.iter().map(|&r| self.y[r]).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(self.n_rows() * cols.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            x.extend(cols.iter().map(|&c| row[c]));
        }
        Dataset {
            x,
            n_cols: cols.len(),
            y: self.y.clone(),
        }
    }

    pub fn n_positive(&self) -> usize {
        self.y.iter().filter(|&&v| v).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed: 0,
            stratified: true,
        }
    }
}

/// Partitions row indices into sorted (train, test) sets.
///
/// With stratification the training set takes the rounded share of
/// positives and the remainder of the overall rounded training size from the
/// negatives.
pub fn split(y: &[bool], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction must lie in (0,1), got {}", spec.train_fraction)));
    }
    if y.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    let mut rng = rng::substream(spec.seed, "split");
    let n_train = (spec.train_fraction * y.len() as f64).round() as usize;
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::new();
    if spec.stratified {
        let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
        let mut neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
        if pos.len().min(neg.len()) < 2 {
            return Err(Error::invalid("stratified split needs at least two instances of each class"));
        }
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let pos_train = ((spec.train_fraction * pos.len() as f64).round() as usize).clamp(1, pos.len() - 1);
        let neg_train = n_train.saturating_sub(pos_train).clamp(1, neg.len() - 1);
        train.extend_from_slice(&pos[..pos_train]);
        train.extend_from_slice(&neg[..neg_train]);
        test.extend_from_slice(&pos[pos_train..]);
        test.extend_from_slice(&neg[neg_train..]);
    } else {
        let mut all: Vec<usize> = (0..y.len()).collect();
        all.shuffle(&mut rng);
        train.extend_from_slice(&all[..n_train]);
        test.extend_from_slice(&all[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Randomly thins the majority class of `rows` so that
/// minority : majority = `ratio`. Returns sorted row indices.
pub fn undersample(rows: &[usize], y: &[bool], ratio: f64, seed: u64) -> Result<Vec<usize>> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::invalid(format!("undersampling ratio must be positive, got {ratio}")));
    }
    let (pos, neg): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| y[r]);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("undersampling needs both classes"));
    }
    let (minority, mut majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let target = (minority.len() as f64 / ratio).round() as usize;
    if target > majority.len() {
        return Err(Error::invalid(format!(
            "ratio {ratio} unreachable: {} minority against {} majority instances",
            minority.len(),
            majority.len()
        )));
    }
    majority.shuffle(&mut rng::substream(seed, "undersample"));
    let mut out = minority;
    out.extend_from_slice(&majority[..target]);
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logit,
    Tree,
    Forest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Logit, ModelKind::Tree, ModelKind::Forest];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logit => "logit",
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "logit" | "logistic" | "lr" => Ok(ModelKind::Logit),
            "tree" | "dt" => Ok(ModelKind::Tree),
            "forest" | "rf" => Ok(ModelKind::Forest),
            _ => Err(format!("unknown model `{s}` (logit, tree, forest)")),
        }
    }
}

/// A fitted classifier together with the names of its input columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub features: Vec<String>,
    pub model: Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Logit(LogisticModel),
    Tree(TreeModel),
    Forest(ForestModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Logit(_) => ModelKind::Logit,
            Model::Tree(_) => ModelKind::Tree,
            Model::Forest(_) => ModelKind::Forest,
        }
    }

    /// Predicted default probabilities.
    pub fn predict(&self, data: &Dataset) -> Vec<f64> {
        match self {
            Model::Logit(m) => m.predict(data),
            Model::Tree(m) => m.predict(data),
            Model::Forest(m) => m.predict(data),
        }
    }

    /// Scores plus, for forests, per-tree hard votes.
    pub fn score(&self, data: &Dataset) -> ScoredDataset {
        let per_tree_votes = match self {
            Model::Forest(f) => Some(f.per_tree_votes(data)),
            _ => None,
        };
        ScoredDataset {
            y: data.y().to_vec(),
            score: self.predict(data),
            per_tree_votes,
        }
    }
}

/// Predictions on a labelled set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDataset {
    pub y: Vec<bool>,
    pub score: Vec<f64>,
    /// `trees × instances` hard votes (`true` = default), forests only.
    pub per_tree_votes: Option<Vec<Vec<bool>>>,
}
