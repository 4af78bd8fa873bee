//! ROC curves and AUC.
//!
//! Scores are predicted default probabilities; defaulters (`y = true`) are
//! the positive class. `F0(t)` is the share of defaulters scoring at least
//! `t` and `F1(t)` the same share of non-defaulters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Instances scoring at or above this value are flagged.
    pub threshold: f64,
    /// Share of non-defaulters flagged.
    pub f1: f64,
    /// Share of defaulters flagged.
    pub f0: f64,
}

pub(crate) fn class_counts(scores: &[f64], y: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != y.len() {
        return Err(Error::invalid(format!("{} scores for {} labels", scores.len(), y.len())));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("non-finite score {s}")));
    }
    let pos = y.iter().filter(|&&v| v).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("ROC analysis needs both defaulters and non-defaulters"));
    }
    Ok((pos, neg))
}

/// ROC points from the strictest threshold (nobody flagged) to the most
/// lenient (everybody flagged), one per distinct score.
pub fn roc_curve(scores: &[f64], y: &[bool]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = class_counts(scores, y)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        f1: 0.0,
        f0: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if y[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            f1: fp as f64 / neg as f64,
            f0: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Area under the ROC curve by the trapezoid rule over tied score groups.
pub fn auc(scores: &[f64], y: &[bool]) -> Result<f64> {
    let pts = roc_curve(scores, y)?;
    Ok(pts
        .windows(2)
        .map(|w| (w[1].f1 - w[0].f1) * (w[1].f0 + w[0].f0) / 2.0)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn separable_hand_case() {
        assert_eq!(auc(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.1, 0.2, 0.3, 0.4], &[true, true, false, false]).unwrap(), 0.0);
    }

    #[test]
    fn ties_count_half() {
        assert_eq!(auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        let pts = roc_curve(&[0.5, 0.5, 0.2], &[true, false, false]).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[1].f1, 0.5);
        assert_eq!(pts[2].f1, 1.0);
    }

    #[test]
    fn single_class_rejected() {
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(auc(&[0.1], &[true, false]).is_err());
    }

    proptest! {
        #[test]
        fn trapezoid_equals_pair_count(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| f64::from(d.0) / 5.0).collect();
            let y: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(y.iter().any(|&v| v) && y.iter().any(|&v| !v));
            let mut wins = 0.0;
            let mut pairs = 0.0;
            for i in 0..y.len() {
                for j in 0..y.len() {
                    if y[i] && !y[j] {
                        pairs += 1.0;
                        wins += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                    }
                }
            }
            assert_abs_diff_eq!(auc(&scores, &y).unwrap(), wins / pairs, epsilon = 1e-12);
        }
    }
}
