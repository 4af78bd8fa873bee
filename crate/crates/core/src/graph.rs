//! Weighted call networks in compressed sparse row form.
//!
//! Nodes are dense `u32` ids assigned in lexicographic order of the opaque
//! phone identities, so any permutation of the same calls yields the same
//! graph. Row `i` of the adjacency holds the first-order neighbourhood of
//! node `i` under the graph's [`EdgeMode`]:
//!
//! * `Outgoing`: the people `i` called,
//! * `Incoming`: the people who called `i`,
//! * `Undirected`: both, with call counts summed over the two directions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calendar::DateWindow;
use crate::error::{Error, Result};
use crate::ingest::CdrRecord;

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    Incoming,
    Outgoing,
    Undirected,
}

impl EdgeMode {
    pub const ALL: [EdgeMode; 3] = [EdgeMode::Incoming, EdgeMode::Outgoing, EdgeMode::Undirected];

    /// Short tag used in feature names.
    pub fn tag(self) -> &'static str {
        match self {
            EdgeMode::Incoming => "IN",
            EdgeMode::Outgoing => "OUT",
            EdgeMode::Undirected => "UD",
        }
    }
}

impl fmt::Display for EdgeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeMode::Incoming => "in",
            EdgeMode::Outgoing => "out",
            EdgeMode::Undirected => "ud",
        })
    }
}

impl FromStr for EdgeMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "in" | "incoming" => Ok(EdgeMode::Incoming),
            "out" | "outgoing" => Ok(EdgeMode::Outgoing),
            "ud" | "undirected" => Ok(EdgeMode::Undirected),
            _ => Err(format!("unknown edge mode `{s}` (in, out, ud)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeighting {
    #[default]
    CallCount,
    /// Total seconds.
    Duration,
}

/// Bijection between opaque identities and dense node ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeIndex {
    ids: Vec<String>,
    lookup: HashMap<String, NodeId>,
}

impl NodeIndex {
    pub fn from_ids<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        ids.sort_unstable();
        ids.dedup();
        let lookup = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as NodeId))
            .collect();
        NodeIndex { ids, lookup }
    }

    /// All identities appearing on either end of `records`.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a CdrRecord>) -> Self {
        let mut seen: Vec<&str> = Vec::new();
        for r in records {
            seen.push(&r.from_id);
            seen.push(&r.to_id);
        }
        seen.sort_unstable();
        seen.dedup();
        NodeIndex::from_ids(seen)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<NodeId> {
        self.lookup.get(id).copied()
    }

    pub fn id(&self, node: NodeId) -> &str {
        &self.ids[node as usize]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

#[derive(Debug, Clone)]
pub struct CallGraph {
    nodes: Arc<NodeIndex>,
    mode: EdgeMode,
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    weights: Vec<f64>,
    n_edges: usize,
    timeframe: Option<String>,
}

/// Result of [`build_graph`].
#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub graph: CallGraph,
    /// Records dropped because their date fell outside the window.
    pub outside_window: usize,
}

/// Builds the call network over the calls dated inside `window`.
///
/// Records are expected to be duration-filtered already. Edge weight is the
/// number of calls between the pair (direction per `mode`).
pub fn build_graph(records: &[CdrRecord], window: DateWindow, mode: EdgeMode) -> GraphBuild {
    let kept: Vec<&CdrRecord> = records.iter().filter(|r| window.contains(r.start_date)).collect();
    let outside_window = records.len() - kept.len();
    let nodes = Arc::new(NodeIndex::from_records(kept.iter().copied()));
    let graph = CallGraph::from_calls(nodes, kept, mode, EdgeWeighting::CallCount);
    GraphBuild {
        graph,
        outside_window,
    }
}

impl CallGraph {
    /// Aggregates calls into a graph over a given node index.
    ///
    /// Panics if a call endpoint is missing from `nodes`.
    pub fn from_calls<'a>(
        nodes: Arc<NodeIndex>,
        calls: impl IntoIterator<Item = &'a CdrRecord>,
        mode: EdgeMode,
        weighting: EdgeWeighting,
    ) -> Self {
        let mut entries: Vec<(NodeId, NodeId, u64)> = Vec::new();
        for c in calls {
            let from = nodes.get(&c.from_id).expect("caller in node index");
            let to = nodes.get(&c.to_id).expect("callee in node index");
            let w = match weighting {
                EdgeWeighting::CallCount => 1,
                EdgeWeighting::Duration => u64::from(c.duration),
            };
            match mode {
                EdgeMode::Outgoing => entries.push((from, to, w)),
                EdgeMode::Incoming => entries.push((to, from, w)),
                EdgeMode::Undirected => {
                    entries.push((from, to, w));
                    entries.push((to, from, w));
                }
            }
        }
        Self::from_entries(nodes, entries, mode)
    }

    fn from_entries(nodes: Arc<NodeIndex>, mut entries: Vec<(NodeId, NodeId, u64)>, mode: EdgeMode) -> Self {
        entries.sort_unstable_by_key(|&(s, d, _)| (s, d));
        let n = nodes.len();
        let mut offsets = vec![0usize; n + 1];
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        let mut i = 0;
        while i < entries.len() {
            let (s, d, _) = entries[i];
            let mut w = 0u64;
            while i < entries.len() && entries[i].0 == s && entries[i].1 == d {
                w += entries[i].2;
                i += 1;
            }
            if w == 0 || s == d {
                continue;
            }
            offsets[s as usize + 1] += 1;
            targets.push(d);
            weights.push(w as f64);
        }
        for k in 0..n {
            offsets[k + 1] += offsets[k];
        }
        let n_edges = match mode {
            EdgeMode::Undirected => targets.len() / 2,
            _ => targets.len(),
        };
        CallGraph {
            nodes,
            mode,
            offsets,
            targets,
            weights,
            n_edges,
            timeframe: None,
        }
    }

    pub fn with_timeframe(mut self, id: impl Into<String>) -> Self {
        self.timeframe = Some(id.into());
        self
    }

    pub fn timeframe(&self) -> Option<&str> {
        self.timeframe.as_deref()
    }

    pub fn mode(&self) -> EdgeMode {
        self.mode
    }

    pub fn nodes(&self) -> &Arc<NodeIndex> {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Distinct edges; an undirected edge counts once.
    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Stored adjacency entries (undirected edges appear in both rows).
    pub fn n_entries(&self) -> usize {
        self.targets.len()
    }

    /// Neighbour ids of `node`, ascending.
    #[inline]
    pub fn neighbor_ids(&self, node: NodeId) -> &[NodeId] {
        let i = node as usize;
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn neighbor_weights(&self, node: NodeId) -> &[f64] {
        let i = node as usize;
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        let i = node as usize;
        self.offsets[i + 1] - self.offsets[i]
    }

    /// First-order neighbourhood with weights, ascending by node id.
    pub fn neighbors(&self, node: NodeId) -> Result<Vec<(NodeId, f64)>> {
        if node as usize >= self.n_nodes() {
            return Err(Error::invalid(format!("unknown node {node}")));
        }
        Ok(self
            .neighbor_ids(node)
            .iter()
            .copied()
            .zip(self.neighbor_weights(node).iter().copied())
            .collect())
    }

    /// Same as [`CallGraph::neighbors`], addressed by identity.
    pub fn neighbors_of(&self, id: &str) -> Result<Vec<(&str, f64)>> {
        let node = self
            .nodes
            .get(id)
            .ok_or_else(|| Error::invalid(format!("unknown node `{id}`")))?;
        Ok(self
            .neighbors(node)?
            .into_iter()
            .map(|(j, w)| (self.nodes.id(j), w))
            .collect())
    }

    pub fn weight(&self, from: NodeId, to: NodeId) -> Option<f64> {
        let ids = self.neighbor_ids(from);
        ids.binary_search(&to).ok().map(|k| self.neighbor_weights(from)[k])
    }

    /// Sum of row weights (out-strength in this mode).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_nodes() as NodeId)
            .map(|i| self.neighbor_weights(i).iter().sum())
            .collect()
    }

    /// Sum of column weights: `col[j] = Σ_i w_ij`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut col = vec![0.0; self.n_nodes()];
        for i in 0..self.n_nodes() as NodeId {
            for (&j, &w) in self.neighbor_ids(i).iter().zip(self.neighbor_weights(i)) {
                col[j as usize] += w;
            }
        }
        col
    }

    /// Transposed adjacency: for each node, the nodes that list it as a
    /// neighbour, with the corresponding weights.
    pub fn reverse_adjacency(&self) -> ReverseAdjacency {
        let n = self.n_nodes();
        let mut offsets = vec![0usize; n + 1];
        for &j in &self.targets {
            offsets[j as usize + 1] += 1;
        }
        for k in 0..n {
            offsets[k + 1] += offsets[k];
        }
        let mut fill = offsets.clone();
        let mut sources = vec![0 as NodeId; self.targets.len()];
        let mut weights = vec![0.0; self.targets.len()];
        // rows visited in ascending order, so each column's sources stay sorted
        for i in 0..n as NodeId {
            for (&j, &w) in self.neighbor_ids(i).iter().zip(self.neighbor_weights(i)) {
                let slot = &mut fill[j as usize];
                sources[*slot] = i;
                weights[*slot] = w;
                *slot += 1;
            }
        }
        ReverseAdjacency {
            offsets,
            sources,
            weights,
        }
    }

    /// Total stored weight, counting an undirected edge once.
    pub fn total_weight(&self) -> f64 {
        let s: f64 = self.weights.iter().sum();
        match self.mode {
            EdgeMode::Undirected => s / 2.0,
            _ => s,
        }
    }

    /// Each edge once: `(src, dst, weight)`; undirected edges with `src < dst`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.n_nodes() as NodeId).flat_map(move |i| {
            self.neighbor_ids(i)
                .iter()
                .zip(self.neighbor_weights(i))
                .filter(move |(&j, _)| self.mode != EdgeMode::Undirected || i < j)
                .map(move |(&j, &w)| (i, j, w))
        })
    }

    /// Keeps only nodes for which `keep` is true; ids are re-densified.
    pub fn induced_subgraph(&self, keep: impl Fn(NodeId) -> bool) -> CallGraph {
        let kept: Vec<NodeId> = (0..self.n_nodes() as NodeId).filter(|&i| keep(i)).collect();
        let nodes = Arc::new(NodeIndex::from_ids(kept.iter().map(|&i| self.nodes.id(i).to_string())));
        let mut entries = Vec::new();
        for &i in &kept {
            let ni = nodes.get(self.nodes.id(i)).unwrap();
            for (&j, &w) in self.neighbor_ids(i).iter().zip(self.neighbor_weights(i)) {
                if let Some(nj) = nodes.get(self.nodes.id(j)) {
                    entries.push((ni, nj, w as u64));
                }
            }
        }
        let mut g = CallGraph::from_entries(nodes, entries, self.mode);
        g.timeframe = self.timeframe.clone();
        g
    }

    pub fn save(&self, prefix: &Path) -> Result<()> {
        let nodes_path = with_suffix(prefix, "nodes.csv");
        let mut w = BufWriter::new(create(&nodes_path)?);
        let io = |e| Error::io(&nodes_path, e);
        writeln!(w, "node,id").map_err(io)?;
        for (i, id) in self.nodes.ids().iter().enumerate() {
            writeln!(w, "{i},{id}").map_err(io)?;
        }
        w.flush().map_err(io)?;

        let edges_path = with_suffix(prefix, "edges.csv");
        let mut w = BufWriter::new(create(&edges_path)?);
        let io = |e| Error::io(&edges_path, e);
        writeln!(w, "# mode={}", self.mode).map_err(io)?;
        if let Some(t) = &self.timeframe {
            writeln!(w, "# timeframe={t}").map_err(io)?;
        }
        writeln!(w, "src,dst,weight").map_err(io)?;
        for (i, j, wt) in self.edges() {
            writeln!(w, "{i},{j},{wt}").map_err(io)?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    /// Reads a graph written by [`CallGraph::save`].
    pub fn load(prefix: &Path) -> Result<CallGraph> {
        let nodes_path = with_suffix(prefix, "nodes.csv");
        let mut ids = Vec::new();
        for (k, line) in BufReader::new(open(&nodes_path)?).lines().enumerate().skip(1) {
            let line = line.map_err(|e| Error::io(&nodes_path, e))?;
            let (_, id) = line.split_once(',').ok_or(Error::Parse {
                row: k + 1,
                reason: "expected `node,id`".into(),
            })?;
            ids.push(id.to_string());
        }
        let nodes = Arc::new(NodeIndex::from_ids(ids));

        let edges_path = with_suffix(prefix, "edges.csv");
        let mut mode = None;
        let mut timeframe = None;
        let mut entries = Vec::new();
        for (k, line) in BufReader::new(open(&edges_path)?).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&edges_path, e))?;
            if let Some(meta) = line.strip_prefix("# ") {
                if let Some(m) = meta.strip_prefix("mode=") {
                    mode = Some(m.parse::<EdgeMode>().map_err(Error::InvalidInput)?);
                } else if let Some(t) = meta.strip_prefix("timeframe=") {
                    timeframe = Some(t.to_string());
                }
                continue;
            }
            if line.starts_with("src,") || line.is_empty() {
                continue;
            }
            let bad = || Error::Parse {
                row: k + 1,
                reason: format!("bad edge line `{line}`"),
            };
            let mut it = line.split(',');
            let s: NodeId = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let d: NodeId = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let w: f64 = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            if s as usize >= nodes.len() || d as usize >= nodes.len() || w <= 0.0 || w.fract() != 0.0 {
                return Err(bad());
            }
            entries.push((s, d, w as u64));
        }
        let mode = mode.ok_or_else(|| Error::invalid(format!("{}: missing mode line", edges_path.display())))?;
        if mode == EdgeMode::Undirected {
            let mirrored: Vec<_> = entries.iter().map(|&(s, d, w)| (d, s, w)).collect();
            entries.extend(mirrored);
        }
        let mut g = CallGraph::from_entries(nodes, entries, mode);
        g.timeframe = timeframe;
        Ok(g)
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn create(p: &Path) -> Result<std::fs::File> {
    std::fs::File::create(p).map_err(|e| Error::io(p, e))
}

fn open(p: &Path) -> Result<std::fs::File> {
    std::fs::File::open(p).map_err(|e| Error::io(p, e))
}

/// Column view of a [`CallGraph`]; see [`CallGraph::reverse_adjacency`].
#[derive(Debug, Clone)]
pub struct ReverseAdjacency {
    offsets: Vec<usize>,
    sources: Vec<NodeId>,
    weights: Vec<f64>,
}

impl ReverseAdjacency {
    #[inline]
    pub fn sources(&self, node: NodeId) -> &[NodeId] {
        let j = node as usize;
        &self.sources[self.offsets[j]..self.offsets[j + 1]]
    }

    #[inline]
    pub fn weights(&self, node: NodeId) -> &[f64] {
        let j = node as usize;
        &self.weights[self.offsets[j]..self.offsets[j + 1]]
    }
}

/// `degree -> number of nodes with that degree`.
pub fn degree_distribution(graph: &CallGraph) -> BTreeMap<usize, usize> {
    let mut dist = BTreeMap::new();
    for i in 0..graph.n_nodes() as NodeId {
        *dist.entry(graph.degree(i)).or_insert(0) += 1;
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{NaiveDate, NaiveTime};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn call(from: &str, to: &str) -> CdrRecord {
        CdrRecord {
            start_date: NaiveDate::from_ymd_opt(2015, 2, 3).unwrap(),
            start_time: NaiveTime::from_hms_opt(10, 0, 0).unwrap(),
            duration: 60,
            from_id: from.into(),
            to_id: to.into(),
        }
    }

    fn window() -> DateWindow {
        DateWindow::new(
            NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2015, 4, 1).unwrap(),
        )
    }

    fn build(calls: &[CdrRecord], mode: EdgeMode) -> CallGraph {
        build_graph(calls, window(), mode).graph
    }

    fn undirected(edges: &[(&str, &str)]) -> CallGraph {
        let calls: Vec<_> = edges.iter().map(|(a, b)| call(a, b)).collect();
        build(&calls, EdgeMode::Undirected)
    }

    #[test]
    fn undirected_weights_sum_both_directions() {
        let g = build(&[call("A", "B"), call("A", "B"), call("B", "A")], EdgeMode::Undirected);
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.neighbors_of("A").unwrap(), vec![("B", 3.0)]);
        assert_eq!(g.neighbors_of("B").unwrap(), vec![("A", 3.0)]);
    }

    #[test]
    fn outgoing_splits_directions() {
        let g = build(&[call("A", "B"), call("A", "B"), call("B", "A")], EdgeMode::Outgoing);
        assert_eq!(g.n_edges(), 2);
        assert_eq!(g.neighbors_of("A").unwrap(), vec![("B", 2.0)]);
        assert_eq!(g.neighbors_of("B").unwrap(), vec![("A", 1.0)]);
    }

    #[test]
    fn incoming_lists_callers() {
        let g = build(&[call("A", "B")], EdgeMode::Incoming);
        assert_eq!(g.neighbors_of("B").unwrap(), vec![("A", 1.0)]);
        assert!(g.neighbors_of("A").unwrap().is_empty());
    }

    #[test]
    fn records_outside_window_are_counted() {
        let mut late = call("A", "C");
        late.start_date = NaiveDate::from_ymd_opt(2015, 4, 1).unwrap();
        let b = build_graph(&[call("A", "B"), late], window(), EdgeMode::Outgoing);
        assert_eq!(b.outside_window, 1);
        assert_eq!(b.graph.n_nodes(), 2);
    }

    #[test]
    fn neighbor_queries() {
        let star = undirected(&[("H", "a"), ("H", "b"), ("H", "c")]);
        let h = star.nodes().get("H").unwrap();
        assert_eq!(star.neighbors(h).unwrap().len(), 3);
        let path = undirected(&[("A", "B"), ("B", "C")]);
        assert_eq!(path.neighbors_of("B").unwrap(), vec![("A", 1.0), ("C", 1.0)]);
        assert!(path.neighbors(99).is_err());
        assert!(path.neighbors_of("Z").is_err());
    }

    #[test]
    fn isolated_node_has_no_neighbors() {
        let nodes = Arc::new(NodeIndex::from_ids(["A", "B", "C"]));
        let calls = [call("A", "B")];
        let g = CallGraph::from_calls(nodes, &calls, EdgeMode::Undirected, EdgeWeighting::CallCount);
        assert!(g.neighbors_of("C").unwrap().is_empty());
    }

    #[test]
    fn degree_distributions() {
        let tri = undirected(&[("A", "B"), ("B", "C"), ("C", "A")]);
        assert_eq!(degree_distribution(&tri), BTreeMap::from([(2, 3)]));
        let empty = build(&[], EdgeMode::Undirected);
        assert!(degree_distribution(&empty).is_empty());
        let star = undirected(&[("H", "a"), ("H", "b"), ("H", "c"), ("H", "d")]);
        assert_eq!(degree_distribution(&star), BTreeMap::from([(1, 4), (4, 1)]));
    }

    #[test]
    fn duration_weighting() {
        let mut c = call("A", "B");
        c.duration = 30;
        let calls = [c, call("A", "B")];
        let nodes = Arc::new(NodeIndex::from_records(&calls));
        let g = CallGraph::from_calls(nodes, &calls, EdgeMode::Outgoing, EdgeWeighting::Duration);
        assert_eq!(g.neighbors_of("A").unwrap(), vec![("B", 90.0)]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for mode in EdgeMode::ALL {
            let g = build(&[call("A", "B"), call("A", "B"), call("C", "A")], mode).with_timeframe("t1");
            let prefix = dir.path().join(format!("g_{mode}"));
            g.save(&prefix).unwrap();
            let h = CallGraph::load(&prefix).unwrap();
            assert_eq!(h.mode(), mode);
            assert_eq!(h.timeframe(), Some("t1"));
            assert_eq!(h.nodes().ids(), g.nodes().ids());
            assert_eq!(h.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
        }
    }

    fn random_calls(edges: &[(u8, u8)]) -> Vec<CdrRecord> {
        edges
            .iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| call(&format!("n{a}"), &format!("n{b}")))
            .collect()
    }

    proptest! {
        #[test]
        fn weight_conservation(edges in prop::collection::vec((0u8..20, 0u8..20), 0..80)) {
            let calls = random_calls(&edges);
            for mode in EdgeMode::ALL {
                let g = build(&calls, mode);
                prop_assert_eq!(g.total_weight(), calls.len() as f64);
                for i in 0..g.n_nodes() as NodeId {
                    prop_assert!(!g.neighbor_ids(i).contains(&i));
                    prop_assert!(g.neighbor_weights(i).iter().all(|&w| w > 0.0));
                }
            }
        }

        #[test]
        fn incoming_is_reverse_of_outgoing(edges in prop::collection::vec((0u8..20, 0u8..20), 0..80)) {
            let calls = random_calls(&edges);
            let inc = build(&calls, EdgeMode::Incoming);
            let out = build(&calls, EdgeMode::Outgoing);
            for i in 0..inc.n_nodes() as NodeId {
                let mut rev: Vec<(NodeId, f64)> = (0..out.n_nodes() as NodeId)
                    .filter_map(|j| out.weight(j, i).map(|w| (j, w)))
                    .collect();
                rev.sort_by_key(|p| p.0);
                prop_assert_eq!(inc.neighbors(i).unwrap(), rev);
            }
        }

        #[test]
        fn shuffled_input_builds_same_graph(edges in prop::collection::vec((0u8..20, 0u8..20), 0..80), seed in any::<u64>()) {
            let calls = random_calls(&edges);
            let mut shuffled = calls.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            for mode in EdgeMode::ALL {
                let a = build(&calls, mode);
                let b = build(&shuffled, mode);
                prop_assert_eq!(a.nodes().ids(), b.nodes().ids());
                prop_assert_eq!(a.edges().collect::<Vec<_>>(), b.edges().collect::<Vec<_>>());
            }
        }
    }
}
