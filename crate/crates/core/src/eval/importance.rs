//! Forest feature importance by profit and by accuracy.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::emp::loan_profit;
use crate::error::{Error, Result};
use crate::loans::LoanOutcome;
use crate::models::{Dataset, ForestModel};
use crate::money::Money;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: usize,
    /// `None` when the feature appears in every tree or in none.
    pub value: Option<f64>,
}

/// Descending by value; undefined values last; ties by feature index.
pub fn rank_importances(mut v: Vec<FeatureImportance>) -> Vec<FeatureImportance> {
    v.sort_by(|a, b| match (a.value, b.value) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.feature.cmp(&b.feature)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.feature.cmp(&b.feature),
    });
    v
}

/// Mean of `per_tree` over trees using feature `f` minus the mean over the
/// others.
fn membership_difference(forest: &ForestModel, per_tree: &[f64], f: usize) -> Option<f64> {
    let (mut with, mut n_with, mut without, mut n_without) = (0.0, 0usize, 0.0, 0usize);
    for (t, v) in forest.trees.iter().zip(per_tree) {
        if t.uses_feature(f) {
            with += v;
            n_with += 1;
        } else {
            without += v;
            n_without += 1;
        }
    }
    (n_with > 0 && n_without > 0).then(|| with / n_with as f64 - without / n_without as f64)
}

/// Profit of each tree when its own hard votes decide: a predicted
/// defaulter is rejected.
pub fn per_tree_profit(votes: &[Vec<bool>], loans: &[LoanOutcome], roi: f64, lgd: f64) -> Result<Vec<Money>> {
    votes
        .iter()
        .map(|row| {
            if row.len() != loans.len() {
                return Err(Error::invalid(format!("{} votes for {} loans", row.len(), loans.len())));
            }
            Ok(row.iter().zip(loans).map(|(&v, l)| loan_profit(l, v, roi, lgd)).sum())
        })
        .collect()
}

/// Mean profit of trees containing a feature minus that of trees without
/// it, in currency units, ranked.
pub fn profit_feature_importance(
    forest: &ForestModel,
    votes: &[Vec<bool>],
    loans: &[LoanOutcome],
    roi: f64,
    lgd: f64,
    n_features: usize,
) -> Result<Vec<FeatureImportance>> {
    if votes.len() != forest.n_trees() {
        return Err(Error::invalid(format!("{} vote rows for {} trees", votes.len(), forest.n_trees())));
    }
    let profits: Vec<f64> = per_tree_profit(votes, loans, roi, lgd)?.into_iter().map(Money::as_f64).collect();
    Ok(rank_importances(
        (0..n_features)
            .map(|f| FeatureImportance {
                feature: f,
                value: membership_difference(forest, &profits, f),
            })
            .collect(),
    ))
}

/// Accuracy of forest scores at the 0.5 decision threshold.
pub fn accuracy(scores: &[f64], y: &[bool]) -> f64 {
    scores.iter().zip(y).filter(|(s, &t)| (**s >= 0.5) == t).count() as f64 / y.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyImportanceKind {
    /// Accuracy drop when the feature's test column is shuffled.
    Permutation,
    /// Mean accuracy of trees containing the feature minus trees without.
    TreeMembership,
}

/// Mean decrease in accuracy per feature, ranked.
///
/// The permutation variant only re-scores the trees that split on the
/// shuffled feature; features used by no tree get exactly 0.
pub fn accuracy_feature_importance(
    forest: &ForestModel,
    test: &Dataset,
    kind: AccuracyImportanceKind,
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    let n = test.n_rows();
    if n == 0 {
        return Err(Error::invalid("empty test set"));
    }
    let y = test.y();
    let values: Vec<FeatureImportance> = match kind {
        AccuracyImportanceKind::TreeMembership => {
            let acc: Vec<f64> = forest
                .per_tree_votes(test)
                .iter()
                .map(|v| v.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / n as f64)
                .collect();
            (0..test.n_cols())
                .map(|f| FeatureImportance {
                    feature: f,
                    value: membership_difference(forest, &acc, f),
                })
                .collect()
        }
        AccuracyImportanceKind::Permutation => {
            let per_tree = forest.per_tree_proba(test);
            let k = forest.n_trees() as f64;
            let sums: Vec<f64> = (0..n).map(|i| per_tree.iter().map(|t| t[i]).sum()).collect();
            let base = accuracy(&sums.iter().map(|s| s / k).collect::<Vec<_>>(), y);
            (0..test.n_cols())
                .into_par_iter()
                .map(|f| {
                    let users = forest.trees_using(f);
                    if users.is_empty() {
                        return FeatureImportance { feature: f, value: Some(0.0) };
                    }
                    let column = test.column(f);
                    let mut rng = rng::substream(rng::child_seed(seed, "permutation-importance", f as u64), "shuffle");
                    let mut drop = 0.0;
                    for _ in 0..repeats.max(1) {
                        let mut perm = column.clone();
                        perm.shuffle(&mut rng);
                        let mut row = vec![0.0; test.n_cols()];
                        let scores: Vec<f64> = (0..n)
                            .map(|i| {
                                row.copy_from_slice(test.row(i));
                                row[f] = perm[i];
                                let mut s = sums[i];
                                for &t in &users {
                                    s += forest.trees[t].predict_row(&row) - per_tree[t][i];
                                }
                                s / k
                            })
                            .collect();
                        drop += base - accuracy(&scores, y);
                    }
                    FeatureImportance {
                        feature: f,
                        value: Some(drop / repeats.max(1) as f64),
                    }
                })
                .collect()
        }
    };
    Ok(rank_importances(values))
}
