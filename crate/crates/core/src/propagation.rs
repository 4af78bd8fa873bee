//! Default-exposure scores from delinquent seeds.
//!
//! Two propagation schemes run over a [`CallGraph`]:
//!
//! * Personalized PageRank iterates `ξ ← αW̃ξ + (1−α)z`, where `W̃` is the
//!   weight matrix normalised by column sums (`W̃_ij = w_ij / Σ_s w_sj`) and
//!   `z` is the restart distribution over the seeds. Mass sitting on a node
//!   that nobody lists as a neighbour (a dangling column) is returned to `z`,
//!   so the scores stay a probability vector.
//! * Spreading activation pushes energy along edges. Each round every active
//!   node keeps `1−d` of the energy it received and hands `d` to its
//!   neighbours in proportion to edge weight. Energy that reaches a node with
//!   no neighbours, or too little energy to activate a node, stays put. Total
//!   energy is conserved throughout.
//!
//! Both are gathers over node ids (PageRank over rows, spreading activation
//! over the transposed rows), so the parallel path sums in the same order as
//! the sequential one and produces identical bits.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CallGraph, NodeId};
use crate::labels::NodeLabelSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "pr")]
    PageRank,
    #[serde(rename = "spa")]
    SpreadingActivation,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::PageRank => "PR",
            Method::SpreadingActivation => "SPA",
        }
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pr" | "pagerank" => Ok(Method::PageRank),
            "spa" => Ok(Method::SpreadingActivation),
            _ => Err(format!("unknown method `{s}` (pr, spa)")),
        }
    }
}

/// Which delinquent customers act as seeds: at least 1, 2 or 3 late payments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SeedCriterion {
    #[serde(rename = "ge1")]
    AtLeast1,
    #[serde(rename = "ge2")]
    AtLeast2,
    #[serde(rename = "ge3")]
    AtLeast3,
}

impl SeedCriterion {
    pub const ALL: [SeedCriterion; 3] = [SeedCriterion::AtLeast1, SeedCriterion::AtLeast2, SeedCriterion::AtLeast3];

    pub fn min_late_payments(self) -> u8 {
        match self {
            SeedCriterion::AtLeast1 => 1,
            SeedCriterion::AtLeast2 => 2,
            SeedCriterion::AtLeast3 => 3,
        }
    }

    pub fn matches(self, level: Option<u8>) -> bool {
        level.is_some_and(|l| l >= self.min_late_payments())
    }
}

impl fmt::Display for SeedCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ge{}", self.min_late_payments())
    }
}

impl FromStr for SeedCriterion {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ge1" | "1" => Ok(SeedCriterion::AtLeast1),
            "ge2" | "2" => Ok(SeedCriterion::AtLeast2),
            "ge3" | "3" => Ok(SeedCriterion::AtLeast3),
            _ => Err(format!("unknown seed criterion `{s}` (ge1, ge2, ge3)")),
        }
    }
}

/// Initial energy of spreading-activation seeds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedEnergy {
    /// One unit per seed.
    #[default]
    Uniform,
    /// Energy equal to the seed's delinquency level.
    Severity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    /// PageRank: probability of following an edge rather than restarting.
    pub alpha: f64,
    /// Spreading activation: fraction of received energy passed on.
    pub d: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed_energy: SeedEnergy,
    pub parallel: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            alpha: 0.85,
            d: 0.85,
            tolerance: 1e-6,
            max_iterations: 100,
            seed_energy: SeedEnergy::Uniform,
            parallel: false,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if !(self.d > 0.0 && self.d < 1.0) {
            return Err(Error::invalid(format!("d must lie in (0,1), got {}", self.d)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureVector {
    pub scores: Vec<f64>,
    pub method: Method,
    pub seed_spec: Option<SeedCriterion>,
    pub iterations_run: usize,
    /// PageRank: L1 change of the last update. Spreading activation: largest
    /// energy still in transit when propagation stopped.
    pub residual: f64,
}

impl ExposureVector {
    pub fn write_csv<W: Write>(&self, graph: &CallGraph, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["node_id", "score"])?;
        for (i, s) in self.scores.iter().enumerate() {
            out.write_record([graph.nodes().id(i as NodeId), &s.to_string()])?;
        }
        out.flush().map_err(|e| Error::io("<exposure>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(graph: &CallGraph, r: R, method: Method, seed_spec: Option<SeedCriterion>) -> Result<Self> {
        let mut scores = vec![0.0; graph.n_nodes()];
        let mut seen = vec![false; graph.n_nodes()];
        for (k, rec) in csv::Reader::from_reader(r).records().enumerate() {
            let rec = rec?;
            let bad = || Error::Parse {
                row: k + 2,
                reason: "expected `node_id,score`".into(),
            };
            let node = graph.nodes().get(rec.get(0).ok_or_else(bad)?).ok_or_else(bad)?;
            scores[node as usize] = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            seen[node as usize] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("no score for node `{}`", graph.nodes().id(i as NodeId))));
        }
        Ok(ExposureVector {
            scores,
            method,
            seed_spec,
            iterations_run: 0,
            residual: 0.0,
        })
    }
}

/// Restart vector: equal mass on every node meeting `criterion`.
pub fn restart_vector(labels: &NodeLabelSet, criterion: SeedCriterion) -> Vec<f64> {
    (0..labels.len() as NodeId)
        .map(|i| if criterion.matches(labels.delinquency(i)) { 1.0 } else { 0.0 })
        .collect()
}

/// Spreading-activation seeds for `criterion`.
pub fn seed_energies(labels: &NodeLabelSet, criterion: SeedCriterion, energy: SeedEnergy) -> Vec<(NodeId, f64)> {
    (0..labels.len() as NodeId)
        .filter_map(|i| {
            let lvl = labels.delinquency(i);
            criterion.matches(lvl).then(|| {
                let e = match energy {
                    SeedEnergy::Uniform => 1.0,
                    SeedEnergy::Severity => f64::from(lvl.unwrap()),
                };
                (i, e)
            })
        })
        .collect()
}

fn map_nodes<F>(n: usize, parallel: bool, out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if parallel {
        out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
    } else {
        for (i, v) in out.iter_mut().enumerate().take(n) {
            *v = f(i);
        }
    }
}

/// Personalized PageRank by power iteration from `restart`.
///
/// `restart` is normalised to sum 1. Iteration stops once the L1 change of
/// an update drops below `config.tolerance`.
pub fn personalized_pagerank(graph: &CallGraph, restart: &[f64], config: &PropagationConfig) -> Result<ExposureVector> {
    config.validate()?;
    let n = graph.n_nodes();
    if restart.len() != n {
        return Err(Error::invalid(format!(
            "restart vector has {} entries for {n} nodes",
            restart.len()
        )));
    }
    if restart.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::invalid("restart entries must be finite and non-negative"));
    }
    let total: f64 = restart.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("restart vector has no positive entry"));
    }
    let z: Vec<f64> = restart.iter().map(|&x| x / total).collect();
    let alpha = config.alpha;

    let col = graph.column_sums();
    let inv_col: Vec<f64> = col.iter().map(|&c| if c > 0.0 { 1.0 / c } else { 0.0 }).collect();
    let dangling: Vec<usize> = (0..n).filter(|&j| col[j] == 0.0).collect();

    let mut xi = z.clone();
    let mut next = vec![0.0; n];
    let mut flow = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=config.max_iterations {
        for j in 0..n {
            flow[j] = xi[j] * inv_col[j];
        }
        let dangling_mass: f64 = dangling.iter().map(|&j| xi[j]).sum();
        let restart_scale = (1.0 - alpha) + alpha * dangling_mass;
        let flow_ref = &flow;
        let z_ref = &z;
        map_nodes(n, config.parallel, &mut next, |i| {
            let i = i as NodeId;
            let gathered: f64 = graph
                .neighbor_ids(i)
                .iter()
                .zip(graph.neighbor_weights(i))
                .map(|(&j, &w)| w * flow_ref[j as usize])
                .sum();
            alpha * gathered + restart_scale * z_ref[i as usize]
        });
        residual = xi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut xi, &mut next);
        if residual < config.tolerance {
            return Ok(ExposureVector {
                scores: xi,
                method: Method::PageRank,
                seed_spec: None,
                iterations_run: iter,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: config.max_iterations,
        residual,
    })
}

/// Spreading activation from `seeds` (node, initial energy).
pub fn spreading_activation(graph: &CallGraph, seeds: &[(NodeId, f64)], config: &PropagationConfig) -> Result<ExposureVector> {
    spreading_activation_traced(graph, seeds, config).map(|(e, _)| e)
}

/// As [`spreading_activation`], also returning the total energy held in the
/// network after every round.
pub fn spreading_activation_traced(
    graph: &CallGraph,
    seeds: &[(NodeId, f64)],
    config: &PropagationConfig,
) -> Result<(ExposureVector, Vec<f64>)> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::invalid("spreading activation needs at least one seed"));
    }
    let n = graph.n_nodes();
    let mut pending = vec![0.0; n];
    for &(s, e) in seeds {
        if s as usize >= n {
            return Err(Error::invalid(format!("seed {s} is not a node")));
        }
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::invalid(format!("seed {s} has non-positive energy {e}")));
        }
        pending[s as usize] += e;
    }
    let d = config.d;
    let tol = config.tolerance;
    let out_strength = graph.row_sums();
    let reverse = graph.reverse_adjacency();

    let mut retained = vec![0.0; n];
    let mut share = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut totals = Vec::new();
    let mut residual = 0.0;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        // energy each node sends per unit of edge weight this round
        for i in 0..n {
            let e = pending[i];
            if e == 0.0 {
                share[i] = 0.0;
            } else if out_strength[i] == 0.0 || e <= tol {
                retained[i] += e;
                share[i] = 0.0;
            } else {
                retained[i] += (1.0 - d) * e;
                share[i] = d * e / out_strength[i];
            }
        }
        let share_ref = &share;
        let reverse_ref = &reverse;
        map_nodes(n, config.parallel, &mut next, |j| {
            let j = j as NodeId;
            reverse_ref
                .sources(j)
                .iter()
                .zip(reverse_ref.weights(j))
                .map(|(&i, &w)| share_ref[i as usize] * w)
                .sum()
        });

        std::mem::swap(&mut pending, &mut next);
        totals.push(retained.iter().sum::<f64>() + pending.iter().sum::<f64>());
        residual = pending.iter().copied().fold(0.0, f64::max);
        if residual <= tol {
            break;
        }
    }
    for i in 0..n {
        retained[i] += pending[i];
    }
    Ok((
        ExposureVector {
            scores: retained,
            method: Method::SpreadingActivation,
            seed_spec: None,
            iterations_run: iterations,
            residual,
        },
        totals,
    ))
}

/// Runs `method` seeded by the delinquent customers meeting `criterion`.
pub fn propagate(
    graph: &CallGraph,
    labels: &NodeLabelSet,
    method: Method,
    criterion: SeedCriterion,
    config: &PropagationConfig,
) -> Result<ExposureVector> {
    let mut ev = match method {
        Method::PageRank => personalized_pagerank(graph, &restart_vector(labels, criterion), config)?,
        Method::SpreadingActivation => {
            spreading_activation(graph, &seed_energies(labels, criterion, config.seed_energy), config)?
        }
    };
    ev.seed_spec = Some(criterion);
    Ok(ev)
}

/// Smallest exposure among customers with three or more late payments.
pub fn exposure_cutoff(exposure: &ExposureVector, labels: &NodeLabelSet) -> Result<f64> {
    (0..labels.len() as NodeId)
        .filter(|&i| labels.delinquency(i) == Some(3))
        .map(|i| exposure.scores[i as usize])
        .min_by(f64::total_cmp)
        .ok_or_else(|| {
            Error::invalid("no customer with three or more late payments in the graph; supply an explicit exposure cutoff")
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskRelabeling {
    pub cutoff: f64,
    pub high_risk: Vec<bool>,
}

impl RiskRelabeling {
    pub fn n_high_risk(&self) -> usize {
        self.high_risk.iter().filter(|&&h| h).count()
    }
}

/// Marks nodes with `score >= cutoff` as high risk.
pub fn relabel_high_risk(exposure: &ExposureVector, cutoff: f64) -> RiskRelabeling {
    let high_risk: Vec<bool> = exposure.scores.iter().map(|&s| s >= cutoff).collect();
    let r = RiskRelabeling { cutoff, high_risk };
    log::debug!("{} of {} nodes high risk at cutoff {cutoff}", r.n_high_risk(), r.high_risk.len());
    r
}
