//! Paired comparison of two AUCs on the same instances.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::roc::class_counts;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    /// `auc_a - auc_b`.
    pub auc_diff: f64,
    pub variance: f64,
    pub z: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Midranks (1-based, ties averaged) of `v`.
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Structural components `(V10 over positives, V01 over negatives)` of one
/// score vector, from midranks.
pub fn structural_components(scores: &[f64], y: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let pos: Vec<f64> = scores.iter().zip(y).filter(|p| *p.1).map(|p| *p.0).collect();
    let neg: Vec<f64> = scores.iter().zip(y).filter(|p| !*p.1).map(|p| *p.0).collect();
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let all: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    let r_all = midranks(&all);
    let r_pos = midranks(&pos);
    let r_neg = midranks(&neg);
    let v10 = (0..pos.len()).map(|i| (r_all[i] - r_pos[i]) / n).collect();
    let v01 = (0..neg.len())
        .map(|j| 1.0 - (r_all[pos.len() + j] - r_neg[j]) / m)
        .collect();
    (v10, v01)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() < 2 {
        return 0.0;
    }
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64
}

/// DeLong test of `AUC(a) = AUC(b)`.
pub fn delong_test(scores_a: &[f64], scores_b: &[f64], y: &[bool]) -> Result<DelongResult> {
    let (m, n) = class_counts(scores_a, y)?;
    class_counts(scores_b, y)?;
    if m < 2 || n < 2 {
        return Err(Error::invalid("the DeLong variance needs two instances of each class"));
    }
    let (a10, a01) = structural_components(scores_a, y);
    let (b10, b01) = structural_components(scores_b, y);
    let auc_a = mean(&a10);
    let auc_b = mean(&b10);
    let s10 = covariance(&a10, &a10) + covariance(&b10, &b10) - 2.0 * covariance(&a10, &b10);
    let s01 = covariance(&a01, &a01) + covariance(&b01, &b01) - 2.0 * covariance(&a01, &b01);
    let variance = (s10 / m as f64 + s01 / n as f64).max(0.0);
    let diff = auc_a - auc_b;
    let (z, p_value) = if variance > 1e-300 && diff.is_finite() {
        let z = diff / variance.sqrt();
        (z, (2.0 * Normal::standard().cdf(-z.abs())).min(1.0))
    } else {
        (0.0, 1.0)
    };
    Ok(DelongResult {
        auc_a,
        auc_b,
        auc_diff: diff,
        variance,
        z,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auc;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn psi(x: f64, y: f64) -> f64 {
        if x > y {
            1.0
        } else if x == y {
            0.5
        } else {
            0.0
        }
    }

    /// Direct O(mn) structural components.
    fn brute_components(s: &[f64], y: &[bool]) -> (Vec<f64>, Vec<f64>) {
        let pos: Vec<f64> = s.iter().zip(y).filter(|p| *p.1).map(|p| *p.0).collect();
        let neg: Vec<f64> = s.iter().zip(y).filter(|p| !*p.1).map(|p| *p.0).collect();
        let v10 = pos.iter().map(|&x| neg.iter().map(|&v| psi(x, v)).sum::<f64>() / neg.len() as f64).collect();
        let v01 = neg.iter().map(|&v| pos.iter().map(|&x| psi(x, v)).sum::<f64>() / pos.len() as f64).collect();
        (v10, v01)
    }

    #[test]
    fn identical_scores() {
        let s = [0.1, 0.4, 0.35, 0.8, 0.5];
        let y = [false, false, true, true, false];
        let r = delong_test(&s, &s, &y).unwrap();
        assert_eq!((r.z, r.p_value, r.auc_diff), (0.0, 1.0, 0.0));
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    proptest! {
        #[test]
        fn components_match_brute_force(
            data in prop::collection::vec((0u8..20, 0u8..20, any::<bool>()), 4..200)
        ) {
            let a: Vec<f64> = data.iter().map(|d| f64::from(d.0) / 7.0).collect();
            let b: Vec<f64> = data.iter().map(|d| f64::from(d.1) / 3.0).collect();
            let y: Vec<bool> = data.iter().map(|d| d.2).collect();
            let pos = y.iter().filter(|&&v| v).count();
            prop_assume!(pos >= 2 && y.len() - pos >= 2);
            let (fa10, fa01) = structural_components(&a, &y);
            let (ba10, ba01) = brute_components(&a, &y);
            for (x, z) in fa10.iter().zip(&ba10).chain(fa01.iter().zip(&ba01)) {
                prop_assert!((x - z).abs() < 1e-12);
            }
            let r = delong_test(&a, &b, &y).unwrap();
            assert_abs_diff_eq!(r.auc_a, auc(&a, &y).unwrap(), epsilon = 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
