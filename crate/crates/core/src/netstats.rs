//! Label dependence on the call network: proportion test for homophily,
//! dyadicity and heterophilicity of the default label.
//!
//! Only nodes with a known default label (bank customers) take part; edges
//! touching telco-only nodes are ignored. Expected edge fractions follow the
//! random node-pair model.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::{CallGraph, EdgeMode};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyReport {
    pub n_default: usize,
    pub n_nondefault: usize,
    pub m_total: usize,
    pub m_cross: usize,
    pub m_dyadic: usize,
    pub m_nondefault: usize,
    pub expected_cross_fraction: f64,
    pub observed_cross_fraction: f64,
    pub z_statistic: f64,
    /// One-tailed, for fewer cross edges than expected.
    pub p_value: f64,
    /// `None` with fewer than two defaulters.
    pub dyadicity: Option<f64>,
    pub heterophilicity: f64,
}

impl HomophilyReport {
    pub fn is_dyadic(&self) -> bool {
        self.dyadicity.is_some_and(|d| d > 1.0)
    }

    pub fn is_heterophilic(&self) -> bool {
        self.heterophilicity < 1.0
    }

    /// For example "not dyadic, heterophilic".
    pub fn classification(&self) -> String {
        format!(
            "{}, {}",
            if self.is_dyadic() { "dyadic" } else { "not dyadic" },
            if self.is_heterophilic() { "heterophilic" } else { "not heterophilic" }
        )
    }

    pub fn to_text(&self) -> String {
        let fmt_opt = |x: Option<f64>| x.map_or("undefined".to_string(), |v| format!("{v:.4}"));
        let rows = [
            ("defaulters", self.n_default.to_string()),
            ("non-defaulters", self.n_nondefault.to_string()),
            ("edges", self.m_total.to_string()),
            ("defaulter-defaulter edges", self.m_dyadic.to_string()),
            ("cross edges", self.m_cross.to_string()),
            ("non-defaulter edges", self.m_nondefault.to_string()),
            ("expected cross fraction", format!("{:.6}", self.expected_cross_fraction)),
            ("observed cross fraction", format!("{:.6}", self.observed_cross_fraction)),
            ("z", format!("{:.4}", self.z_statistic)),
            ("p (one-tailed)", format!("{:.6}", self.p_value)),
            ("dyadicity", fmt_opt(self.dyadicity)),
            ("heterophilicity", format!("{:.4}", self.heterophilicity)),
            ("classification", self.classification()),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}

/// Labelled sub-network: node labels and edges between labelled nodes.
struct Labelled {
    labels: Vec<bool>,
    edges: Vec<(u32, u32)>,
}

impl Labelled {
    fn new(graph: &CallGraph, labels: &[Option<bool>]) -> Result<Self> {
        if graph.mode() != EdgeMode::Undirected {
            return Err(Error::invalid("network statistics need the undirected graph"));
        }
        if labels.len() != graph.n_nodes() {
            return Err(Error::invalid("labels do not match the graph"));
        }
        let mut compact = vec![u32::MAX; labels.len()];
        let mut kept = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(l) = l {
                compact[i] = kept.len() as u32;
                kept.push(*l);
            }
        }
        let edges = graph
            .edges()
            .filter(|&(s, d, _)| s < d)
            .filter_map(|(s, d, _)| {
                let (a, b) = (compact[s as usize], compact[d as usize]);
                (a != u32::MAX && b != u32::MAX).then_some((a, b))
            })
            .collect();
        Ok(Labelled { labels: kept, edges })
    }

    fn counts(&self) -> (usize, usize, usize) {
        let mut dyadic = 0;
        let mut cross = 0;
        let mut good = 0;
        for &(a, b) in &self.edges {
            match (self.labels[a as usize], self.labels[b as usize]) {
                (true, true) => dyadic += 1,
                (false, false) => good += 1,
                _ => cross += 1,
            }
        }
        (dyadic, cross, good)
    }

    fn report(&self) -> Result<HomophilyReport> {
        let n1 = self.labels.iter().filter(|&&l| l).count();
        let n0 = self.labels.len() - n1;
        if n1 == 0 || n0 == 0 {
            return Err(Error::invalid("homophily statistics need both defaulters and non-defaulters"));
        }
        let m = self.edges.len();
        if m == 0 {
            return Err(Error::invalid("no edges between labelled nodes"));
        }
        let (m_dyadic, m_cross, m_nondefault) = self.counts();
        let n = (n1 + n0) as f64;
        let pairs = n * (n - 1.0);
        let expected_cross = 2.0 * n1 as f64 * n0 as f64 / pairs;
        let expected_dyadic = n1 as f64 * (n1 as f64 - 1.0) / pairs;
        let observed = m_cross as f64 / m as f64;
        let var = expected_cross * (1.0 - expected_cross) / m as f64;
        let z = if var > 0.0 {
            (observed - expected_cross) / var.sqrt()
        } else {
            0.0
        };
        let p = Normal::standard().cdf(z);
        Ok(HomophilyReport {
            n_default: n1,
            n_nondefault: n0,
            m_total: m,
            m_cross,
            m_dyadic,
            m_nondefault,
            expected_cross_fraction: expected_cross,
            observed_cross_fraction: observed,
            z_statistic: z,
            p_value: p,
            dyadicity: (n1 >= 2).then(|| m_dyadic as f64 / (m as f64 * expected_dyadic)),
            heterophilicity: m_cross as f64 / (m as f64 * expected_cross),
        })
    }
}

/// Proportion test, dyadicity and heterophilicity of `labels` on an
/// undirected graph. Unlabelled nodes (`None`) are left out.
pub fn homophily_test(graph: &CallGraph, labels: &[Option<bool>]) -> Result<HomophilyReport> {
    Labelled::new(graph, labels)?.report()
}

pub fn dyadicity(graph: &CallGraph, labels: &[Option<bool>]) -> Result<f64> {
    homophily_test(graph, labels)?
        .dyadicity
        .ok_or_else(|| Error::invalid("dyadicity needs at least two defaulters"))
}

pub fn heterophilicity(graph: &CallGraph, labels: &[Option<bool>]) -> Result<f64> {
    Ok(homophily_test(graph, labels)?.heterophilicity)
}

/// Mean dyadicity and heterophilicity over random permutations of the
/// labels among the labelled nodes.
pub fn permutation_null(graph: &CallGraph, labels: &[Option<bool>], permutations: usize, seed: u64) -> Result<(f64, f64)> {
    let mut net = Labelled::new(graph, labels)?;
    let mut rng = rng::substream(seed, "netstats-permutation");
    let mut sum_d = 0.0;
    let mut sum_h = 0.0;
    for _ in 0..permutations {
        net.labels.shuffle(&mut rng);
        let r = net.report()?;
        sum_d += r.dyadicity.ok_or_else(|| Error::invalid("dyadicity needs at least two defaulters"))?;
        sum_h += r.heterophilicity;
    }
    let k = permutations.max(1) as f64;
    Ok((sum_d / k, sum_h / k))
}
