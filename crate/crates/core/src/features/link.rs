//! Neighbourhood label summaries: delinquency links and exposure links.

use rayon::prelude::*;

use crate::graph::{CallGraph, EdgeMode, NodeId};
use crate::labels::NodeLabelSet;
use crate::propagation::{ExposureVector, Method, RiskRelabeling, SeedCriterion};

/// Delinquency classes 0..=3 (3 meaning three or more late payments).
pub const N_CLASSES: usize = 4;

/// Link features per mode: binary, count and mode indicator per class.
pub const N_LINK_PER_MODE: usize = 3 * N_CLASSES;

pub const EXPOSURE_LINK_FEATURES: [&str; 6] = [
    "Exposure",
    "Binary High Risk",
    "Binary Low Risk",
    "Count High Risk",
    "Count Low Risk",
    "Mode High Risk",
];

pub fn link_based_names(mode: EdgeMode) -> Vec<String> {
    let mut names = Vec::with_capacity(N_LINK_PER_MODE);
    for kind in ["Binary", "Count", "Mode"] {
        for c in 0..N_CLASSES {
            names.push(format!("{kind} Link {c} {}", mode.tag()));
        }
    }
    names
}

/// Class counts among the labelled neighbours of `node`.
pub fn neighbor_class_counts(graph: &CallGraph, labels: &NodeLabelSet, node: NodeId) -> [usize; N_CLASSES] {
    let mut counts = [0; N_CLASSES];
    for &nb in graph.neighbor_ids(node) {
        if let Some(c) = labels.delinquency(nb) {
            counts[c as usize] += 1;
        }
    }
    counts
}

/// Most frequent class among labelled neighbours; ties go to the lower class.
/// `None` when no neighbour carries a label.
pub fn mode_class(counts: &[usize; N_CLASSES]) -> Option<usize> {
    let (best, &n) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    (n > 0).then_some(best)
}

/// Link features of `subjects` in one edge mode, row-major.
pub fn link_based_features(graph: &CallGraph, labels: &NodeLabelSet, subjects: &[NodeId]) -> Vec<f64> {
    let mut out = vec![0.0; subjects.len() * N_LINK_PER_MODE];
    out.par_chunks_mut(N_LINK_PER_MODE)
        .zip(subjects.par_iter())
        .for_each(|(row, &s)| {
            let counts = neighbor_class_counts(graph, labels, s);
            for c in 0..N_CLASSES {
                row[c] = if counts[c] > 0 { 1.0 } else { 0.0 };
                row[N_CLASSES + c] = counts[c] as f64;
            }
            if let Some(m) = mode_class(&counts) {
                row[2 * N_CLASSES + m] = 1.0;
            }
        });
    out
}

pub fn exposure_link_names(method: Method, criterion: SeedCriterion, mode: EdgeMode) -> Vec<String> {
    EXPOSURE_LINK_FEATURES
        .iter()
        .map(|f| format!("{} {f} {criterion} {}", method.tag(), mode.tag()))
        .collect()
}

/// Exposure-link features of `subjects`, row-major with
/// [`EXPOSURE_LINK_FEATURES`] per row.
pub fn exposure_link_features(
    graph: &CallGraph,
    exposure: &ExposureVector,
    relabeling: &RiskRelabeling,
    subjects: &[NodeId],
) -> Vec<f64> {
    let k = EXPOSURE_LINK_FEATURES.len();
    let mut out = vec![0.0; subjects.len() * k];
    out.par_chunks_mut(k).zip(subjects.par_iter()).for_each(|(row, &s)| {
        let high = graph
            .neighbor_ids(s)
            .iter()
            .filter(|&&nb| relabeling.high_risk[nb as usize])
            .count();
        let low = graph.degree(s) - high;
        row[0] = exposure.scores[s as usize];
        row[1] = f64::from(u8::from(high > 0));
        row[2] = f64::from(u8::from(low > 0));
        row[3] = high as f64;
        row[4] = low as f64;
        row[5] = f64::from(u8::from(high > low));
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeWeighting, NodeIndex};
    use crate::ingest::CdrRecord;
    use chrono::{NaiveDate, NaiveTime};
    use std::sync::Arc;

    fn star(n_leaves: usize, mode: EdgeMode) -> CallGraph {
        let ids: Vec<String> = (0..=n_leaves).map(|i| format!("n{i:02}")).collect();
        let calls: Vec<CdrRecord> = (1..=n_leaves)
            .map(|i| CdrRecord {
                start_date: NaiveDate::from_ymd_opt(2015, 1, 5).unwrap(),
                start_time: NaiveTime::from_hms_opt(9, 0, 0).unwrap(),
                duration: 10,
                from_id: ids[0].clone(),
                to_id: ids[i].clone(),
            })
            .collect();
        CallGraph::from_calls(Arc::new(NodeIndex::from_ids(ids)), &calls, mode, EdgeWeighting::CallCount)
    }

    fn labels(levels: Vec<Option<u8>>) -> NodeLabelSet {
        let n = levels.len();
        let default = levels.iter().map(|l| l.map(|x| x >= 3)).collect();
        NodeLabelSet::new(levels, vec![false; n], default).unwrap()
    }

    fn feature(row: &[f64], mode: EdgeMode, name: &str) -> f64 {
        row[link_based_names(mode).iter().position(|n| n == name).unwrap()]
    }

    #[test]
    fn levels_zero_zero_one() {
        let g = star(3, EdgeMode::Undirected);
        let l = labels(vec![Some(0), Some(0), Some(0), Some(1)]);
        let row = link_based_features(&g, &l, &[0]);
        let ud = EdgeMode::Undirected;
        assert_eq!(feature(&row, ud, "Binary Link 0 UD"), 1.0);
        assert_eq!(feature(&row, ud, "Count Link 0 UD"), 2.0);
        assert_eq!(feature(&row, ud, "Binary Link 1 UD"), 1.0);
        assert_eq!(feature(&row, ud, "Count Link 1 UD"), 1.0);
        assert_eq!(feature(&row, ud, "Binary Link 2 UD"), 0.0);
        assert_eq!(feature(&row, ud, "Mode Link 0 UD"), 1.0);
        assert_eq!(feature(&row, ud, "Mode Link 1 UD"), 0.0);
    }

    #[test]
    fn one_delinquent_among_nine() {
        let g = star(9, EdgeMode::Undirected);
        let mut lv = vec![Some(0); 10];
        lv[4] = Some(3);
        let row = link_based_features(&g, &labels(lv), &[0]);
        assert_eq!(feature(&row, EdgeMode::Undirected, "Count Link 3 UD"), 1.0);
        assert_eq!(feature(&row, EdgeMode::Undirected, "Binary Link 3 UD"), 1.0);
        assert_eq!(feature(&row, EdgeMode::Undirected, "Count Link 0 UD"), 8.0);
    }

    #[test]
    fn direction_matters() {
        // centre calls the leaves: leaves are its callees, not callers
        let out = star(2, EdgeMode::Outgoing);
        let inc = star(2, EdgeMode::Incoming);
        let l = labels(vec![Some(0), Some(2), Some(2)]);
        assert_eq!(link_based_features(&out, &l, &[0])[N_CLASSES + 2], 2.0);
        assert_eq!(link_based_features(&inc, &l, &[0])[N_CLASSES + 2], 0.0);
    }

    #[test]
    fn unlabeled_neighbourhood_has_no_mode() {
        let g = star(3, EdgeMode::Undirected);
        let l = labels(vec![Some(0), None, None, None]);
        let row = link_based_features(&g, &l, &[0]);
        assert!(row.iter().all(|&x| x == 0.0));
        assert_eq!(mode_class(&[0, 0, 0, 0]), None);
        assert_eq!(mode_class(&[0, 2, 2, 1]), Some(1));
    }

    #[test]
    fn exposure_links() {
        let g = star(5, EdgeMode::Undirected);
        let ev = ExposureVector {
            scores: vec![0.7, 0.9, 0.8, 0.1, 0.1, 0.1],
            method: Method::PageRank,
            seed_spec: None,
            iterations_run: 1,
            residual: 0.0,
        };
        let rl = crate::propagation::relabel_high_risk(&ev, 0.75);
        let row = exposure_link_features(&g, &ev, &rl, &[0]);
        assert_eq!(row, vec![0.7, 1.0, 1.0, 2.0, 3.0, 0.0]);

        let lonely = star(0, EdgeMode::Undirected);
        let ev1 = ExposureVector {
            scores: vec![0.3],
            ..ev.clone()
        };
        let rl1 = crate::propagation::relabel_high_risk(&ev1, 0.5);
        assert_eq!(exposure_link_features(&lonely, &ev1, &rl1, &[0]), vec![0.3, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let all_low = crate::propagation::relabel_high_risk(&ev, 0.95);
        assert_eq!(exposure_link_features(&g, &ev, &all_low, &[0])[1], 0.0);
    }

    #[test]
    fn exposure_names() {
        let names = exposure_link_names(Method::SpreadingActivation, SeedCriterion::AtLeast2, EdgeMode::Incoming);
        assert_eq!(names[0], "SPA Exposure ge2 IN");
        assert_eq!(names[3], "SPA Count High Risk ge2 IN");
    }
}
