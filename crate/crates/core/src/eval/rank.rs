//! Agreement between two rankings of the same items.

use serde::{Deserialize, Serialize};

use super::delong::midranks;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelations {
    pub spearman_rho: f64,
    /// Kendall's tau-b.
    pub kendall_tau: f64,
    pub goodman_kruskal_gamma: f64,
}

/// Correlations between two score vectors over the same items (larger
/// means ranked higher). Ties are handled by midranks, tau-b and by leaving
/// tied pairs out of gamma.
pub fn rank_correlations(a: &[f64], b: &[f64]) -> Result<RankCorrelations> {
    if a.len() != b.len() {
        return Err(Error::invalid("rankings cover different numbers of items"));
    }
    if a.len() < 2 {
        return Err(Error::invalid("rank correlation needs at least two items"));
    }
    let ra = midranks(a);
    let rb = midranks(b);
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    let spearman_rho = if va > 0.0 && vb > 0.0 { cov / (va * vb).sqrt() } else { f64::NAN };

    let (mut conc, mut disc, mut tie_a, mut tie_b) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let da = a[i].total_cmp(&a[j]) as i8;
            let db = b[i].total_cmp(&b[j]) as i8;
            match (da, db) {
                (0, 0) => {}
                (0, _) => tie_a += 1,
                (_, 0) => tie_b += 1,
                _ if da == db => conc += 1,
                _ => disc += 1,
            }
        }
    }
    let (c, d) = (conc as f64, disc as f64);
    let denom = ((c + d + tie_a as f64) * (c + d + tie_b as f64)).sqrt();
    Ok(RankCorrelations {
        spearman_rho,
        kendall_tau: if denom > 0.0 { (c - d) / denom } else { f64::NAN },
        goodman_kruskal_gamma: if c + d > 0.0 { (c - d) / (c + d) } else { f64::NAN },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_and_reversed() {
        let a = [4.0, 3.0, 2.0, 1.0, 0.5];
        let r = rank_correlations(&a, &a).unwrap();
        assert_eq!((r.spearman_rho, r.kendall_tau, r.goodman_kruskal_gamma), (1.0, 1.0, 1.0));
        let rev: Vec<f64> = a.iter().map(|x| -x).collect();
        let r = rank_correlations(&a, &rev).unwrap();
        assert_eq!((r.spearman_rho, r.kendall_tau, r.goodman_kruskal_gamma), (-1.0, -1.0, -1.0));
    }

    #[test]
    fn one_swap_among_four() {
        let r = rank_correlations(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert_abs_diff_eq!(r.kendall_tau, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.goodman_kruskal_gamma, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.spearman_rho, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn ties_and_errors() {
        // tau-b with a tie in the first ranking: C=2, D=0, one pair tied in a
        let r = rank_correlations(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(r.kendall_tau, 2.0 / (3.0f64 * 2.0).sqrt(), epsilon = 1e-12);
        assert_eq!(r.goodman_kruskal_gamma, 1.0);
        assert!(rank_correlations(&[1.0], &[1.0]).is_err());
        assert!(rank_correlations(&[1.0, 2.0], &[1.0]).is_err());
    }
}
