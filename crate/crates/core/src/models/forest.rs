//! Random forests: bootstrap samples, random feature subsets per split.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{TreeModel, TreeParams};
use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features per split; defaults to `ceil(sqrt(M))`.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            mtry: None,
            max_depth: None,
            min_leaf: 5,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    /// Seed of each tree's bootstrap and feature draws.
    pub tree_seeds: Vec<u64>,
    pub mtry: usize,
}

impl ForestModel {
    pub fn fit(data: &Dataset, params: &ForestParams) -> Result<Self> {
        if params.n_trees == 0 {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        let m = data.n_cols();
        if m == 0 || data.n_rows() == 0 {
            return Err(Error::invalid("cannot fit a forest on an empty dataset"));
        }
        let mtry = params.mtry.unwrap_or_else(|| (m as f64).sqrt().ceil() as usize);
        if mtry == 0 || mtry > m {
            return Err(Error::invalid(format!("mtry {mtry} outside 1..={m}")));
        }
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            mtry: Some(mtry),
        };
        let tree_seeds: Vec<u64> = (0..params.n_trees as u64)
            .map(|i| rng::child_seed(params.seed, "forest-tree", i))
            .collect();
        let n = data.n_rows();
        let trees = tree_seeds
            .par_iter()
            .map(|&s| {
                let mut r = ChaCha8Rng::seed_from_u64(s);
                let sample: Vec<u32> = if params.bootstrap {
                    (0..n).map(|_| r.random_range(0..n as u32)).collect()
                } else {
                    (0..n as u32).collect()
                };
                TreeModel::fit_sample(data, sample, &tree_params, Some(&mut r))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ForestModel {
            trees,
            tree_seeds,
            mtry,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Mean of the trees' leaf probabilities, summed in tree order.
    pub fn predict(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n_rows())
            .into_par_iter()
            .map(|r| {
                let row = data.row(r);
                self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
            })
            .collect()
    }

    /// `trees × instances` leaf probabilities.
    pub fn per_tree_proba(&self, data: &Dataset) -> Vec<Vec<f64>> {
        self.trees.par_iter().map(|t| t.predict(data)).collect()
    }

    /// `trees × instances` hard class votes.
    pub fn per_tree_votes(&self, data: &Dataset) -> Vec<Vec<bool>> {
        self.trees
            .par_iter()
            .map(|t| (0..data.n_rows()).map(|r| t.vote_row(data.row(r))).collect())
            .collect()
    }

    /// Indices of the trees that split on feature `f`.
    pub fn trees_using(&self, f: usize) -> Vec<usize> {
        (0..self.trees.len()).filter(|&i| self.trees[i].uses_feature(f)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auc;
    use crate::models::tree::TreeModel;

    fn data(n: usize, seed: u64) -> Dataset {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..6).map(|_| r.random::<f64>()).collect();
            y.push(row[0] + 0.3 * r.random::<f64>() > 0.7);
            x.extend(row);
        }
        Dataset::new(x, 6, y).unwrap()
    }

    #[test]
    fn single_unsampled_tree_equals_plain_tree() {
        let d = data(300, 1);
        let params = ForestParams {
            n_trees: 1,
            mtry: Some(6),
            bootstrap: false,
            ..Default::default()
        };
        let f = ForestModel::fit(&d, &params).unwrap();
        let t = TreeModel::fit(&d, &TreeParams::default()).unwrap();
        assert_eq!(f.predict(&d), t.predict(&d));
    }

    #[test]
    fn score_is_mean_of_tree_probabilities() {
        let d = data(300, 2);
        let f = ForestModel::fit(&d, &ForestParams { n_trees: 25, seed: 3, ..Default::default() }).unwrap();
        let per = f.per_tree_proba(&d);
        let score = f.predict(&d);
        for (i, s) in score.iter().enumerate() {
            let mean = per.iter().map(|t| t[i]).sum::<f64>() / 25.0;
            assert_eq!(*s, mean);
        }
        let votes = f.per_tree_votes(&d);
        assert_eq!((votes.len(), votes[0].len()), (25, 300));
        for (t, row) in per.iter().zip(&votes) {
            for (p, v) in t.iter().zip(row) {
                if *p != 0.5 {
                    assert_eq!(*v, *p > 0.5);
                }
            }
        }
    }

    #[test]
    fn learns_and_is_deterministic() {
        let train = data(600, 4);
        let test = data(400, 5);
        let p = ForestParams { n_trees: 60, seed: 11, ..Default::default() };
        let f = ForestModel::fit(&train, &p).unwrap();
        assert!(auc(&f.predict(&test), test.y()).unwrap() > 0.85);
        assert_eq!(ForestModel::fit(&train, &p).unwrap(), f);
        assert_eq!(f.mtry, 3);
        assert!(ForestModel::fit(&train, &ForestParams { mtry: Some(7), ..p.clone() }).is_err());
        assert!(ForestModel::fit(&train, &ForestParams { n_trees: 0, ..p }).is_err());
    }
}
