//! Subject features and the modelling matrix.
//!
//! Five groups describe a subject: sociodemographics and spending (`SD`),
//! calling behaviour (`CB`), delinquency links (`LB`) and exposure links from
//! PageRank (`PR`) and spreading activation (`SPA`).

pub mod calling;
pub mod link;
pub mod spending;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::{DateWindow, YearMonth};
use crate::error::{Error, Result};
use crate::graph::{CallGraph, EdgeMode, NodeId};
use crate::ingest::{BankData, CdrRecord};
use crate::labels::NodeLabelSet;
use crate::loans::LoanOutcome;
use crate::propagation::{ExposureVector, Method, RiskRelabeling, SeedCriterion};

pub use calling::DayPeriod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    SD,
    CB,
    LB,
    PR,
    SPA,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::SD,
        FeatureGroup::CB,
        FeatureGroup::LB,
        FeatureGroup::PR,
        FeatureGroup::SPA,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FeatureGroup::SD => "SD",
            FeatureGroup::CB => "CB",
            FeatureGroup::LB => "LB",
            FeatureGroup::PR => "PR",
            FeatureGroup::SPA => "SPA",
        }
    }

    pub fn of_method(m: Method) -> Self {
        match m {
            Method::PageRank => FeatureGroup::PR,
            Method::SpreadingActivation => FeatureGroup::SPA,
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureGroup {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown feature group `{s}` (sd, cb, lb, pr, spa)"))
    }
}

/// Parses a comma-separated group list such as `sd,cb,lb`.
pub fn parse_groups(s: &str) -> std::result::Result<Vec<FeatureGroup>, String> {
    let mut groups = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(FeatureGroup::from_str)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    groups.sort();
    groups.dedup();
    Ok(groups)
}

/// Dense row-major feature matrix with a missing-value mask.
///
/// Missing entries hold 0 in `values` and `true` in `missing`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    row_ids: Vec<String>,
    names: Vec<String>,
    groups: Vec<FeatureGroup>,
    values: Vec<f64>,
    missing: Vec<bool>,
    y: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(
        row_ids: Vec<String>,
        names: Vec<String>,
        groups: Vec<FeatureGroup>,
        values: Vec<f64>,
        missing: Vec<bool>,
        y: Vec<bool>,
    ) -> Result<Self> {
        let (n, m) = (row_ids.len(), names.len());
        if groups.len() != m || values.len() != n * m || missing.len() != n * m || y.len() != n {
            return Err(Error::invalid("feature matrix parts disagree in shape"));
        }
        let mut sorted: Vec<&String> = names.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateKey(format!("feature `{}`", w[0])));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value for `{}` in row `{}`",
                names[k % m],
                row_ids[k / m]
            )));
        }
        Ok(FeatureMatrix {
            row_ids,
            names,
            groups,
            values,
            missing,
            y,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    pub fn y(&self) -> &[bool] {
        &self.y
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let m = self.n_features();
        &self.values[r * m..(r + 1) * m]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n_features() + c]
    }

    pub fn is_missing(&self, r: usize, c: usize) -> bool {
        self.missing[r * self.n_features() + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, c)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Number of features per group, in group order.
    pub fn group_counts(&self) -> Vec<(FeatureGroup, usize)> {
        FeatureGroup::ALL
            .into_iter()
            .map(|g| (g, self.groups.iter().filter(|&&x| x == g).count()))
            .filter(|&(_, n)| n > 0)
            .collect()
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let m = self.n_features();
        let mut values = Vec::with_capacity(self.n_rows() * cols.len());
        let mut missing = Vec::with_capacity(values.capacity());
        for r in 0..self.n_rows() {
            for &c in cols {
                values.push(self.values[r * m + c]);
                missing.push(self.missing[r * m + c]);
            }
        }
        FeatureMatrix {
            row_ids: self.row_ids.clone(),
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            groups: cols.iter().map(|&c| self.groups[c]).collect(),
            values,
            missing,
            y: self.y.clone(),
        }
    }

    pub fn select_groups(&self, groups: &[FeatureGroup]) -> FeatureMatrix {
        let cols: Vec<usize> = (0..self.n_features()).filter(|&c| groups.contains(&self.groups[c])).collect();
        self.select_columns(&cols)
    }

    pub fn select_names(&self, names: &[String]) -> Result<FeatureMatrix> {
        let cols = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::invalid(format!("feature `{n}` not in matrix")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&cols))
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let m = self.n_features();
        let mut values = Vec::with_capacity(rows.len() * m);
        let mut missing = Vec::with_capacity(rows.len() * m);
        for &r in rows {
            values.extend_from_slice(&self.values[r * m..(r + 1) * m]);
            missing.extend_from_slice(&self.missing[r * m..(r + 1) * m]);
        }
        FeatureMatrix {
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
            names: self.names.clone(),
            groups: self.groups.clone(),
            values,
            missing,
            y: rows.iter().map(|&r| self.y[r]).collect(),
        }
    }

    /// Stacks matrices with identical columns.
    pub fn vstack(parts: &[FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts.first().ok_or_else(|| Error::invalid("nothing to stack"))?;
        let mut out = FeatureMatrix {
            row_ids: Vec::new(),
            names: first.names.clone(),
            groups: first.groups.clone(),
            values: Vec::new(),
            missing: Vec::new(),
            y: Vec::new(),
        };
        for p in parts {
            if p.names != first.names || p.groups != first.groups {
                return Err(Error::invalid("cannot stack matrices with different columns"));
            }
            out.row_ids.extend_from_slice(&p.row_ids);
            out.values.extend_from_slice(&p.values);
            out.missing.extend_from_slice(&p.missing);
            out.y.extend_from_slice(&p.y);
        }
        let mut ids: Vec<&String> = out.row_ids.iter().collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateKey(format!("row `{}`", w[0])));
        }
        Ok(out)
    }

    /// Writes the matrix as CSV: `row_id`, one `name:group` column per
    /// feature, then `y_default`. Missing values are written as `NA`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["row_id".to_string()];
        header.extend(self.names.iter().zip(&self.groups).map(|(n, g)| format!("{n}:{g}")));
        header.push("y_default".into());
        out.write_record(&header)?;
        let m = self.n_features();
        let mut rec = Vec::with_capacity(m + 2);
        for r in 0..self.n_rows() {
            rec.clear();
            rec.push(self.row_ids[r].clone());
            for c in 0..m {
                rec.push(if self.missing[r * m + c] {
                    "NA".to_string()
                } else {
                    self.values[r * m + c].to_string()
                });
            }
            rec.push(u8::from(self.y[r]).to_string());
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<features>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<FeatureMatrix> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 2 || &header[0] != "row_id" || &header[header.len() - 1] != "y_default" {
            return Err(Error::Parse {
                row: 1,
                reason: "header must start with `row_id` and end with `y_default`".into(),
            });
        }
        let mut names = Vec::new();
        let mut groups = Vec::new();
        for h in header.iter().skip(1).take(header.len() - 2) {
            let (name, group) = h.rsplit_once(':').ok_or_else(|| Error::Parse {
                row: 1,
                reason: format!("column `{h}` lacks a `:group` suffix"),
            })?;
            names.push(name.to_string());
            groups.push(group.parse().map_err(|e: String| Error::Parse { row: 1, reason: e })?);
        }
        let m = names.len();
        let (mut row_ids, mut values, mut missing, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = k + 2;
            if rec.len() != m + 2 {
                return Err(Error::Parse {
                    row,
                    reason: format!("expected {} fields, found {}", m + 2, rec.len()),
                });
            }
            row_ids.push(rec[0].to_string());
            for field in rec.iter().skip(1).take(m) {
                if field == "NA" {
                    values.push(0.0);
                    missing.push(true);
                } else {
                    values.push(field.parse().map_err(|_| Error::Parse {
                        row,
                        reason: format!("bad number `{field}`"),
                    })?);
                    missing.push(false);
                }
            }
            y.push(match &rec[m + 1] {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Parse {
                        row,
                        reason: format!("y_default must be 0 or 1, found `{other}`"),
                    })
                }
            });
        }
        FeatureMatrix::new(row_ids, names, groups, values, missing, y)
    }
}

/// Greedy correlation pruning over the columns of `m`, in column order.
///
/// Constant columns go first. A column then survives if its absolute
/// Pearson correlation with every column kept so far is at most `threshold`.
/// Returns the indices of the surviving columns.
pub fn correlated_keep(m: &FeatureMatrix, threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid(format!("correlation threshold must lie in (0,1], got {threshold}")));
    }
    let n = m.n_rows();
    let mut kept: Vec<usize> = Vec::new();
    let mut kept_cols: Vec<Vec<f64>> = Vec::new();
    for c in 0..m.n_features() {
        let col = m.column(c);
        let mean = col.iter().sum::<f64>() / n.max(1) as f64;
        let centered: Vec<f64> = col.iter().map(|x| x - mean).collect();
        let norm = centered.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 2 || norm <= 1e-12 * (1.0 + mean.abs()) * (n as f64).sqrt() {
            continue;
        }
        let unit: Vec<f64> = centered.iter().map(|x| x / norm).collect();
        let correlated = kept_cols.iter().any(|k| {
            let rho: f64 = k.iter().zip(&unit).map(|(a, b)| a * b).sum();
            rho.abs() > threshold
        });
        if !correlated {
            kept.push(c);
            kept_cols.push(unit);
        }
    }
    Ok(kept)
}

/// [`correlated_keep`] applied to the matrix.
pub fn drop_correlated(m: &FeatureMatrix, threshold: f64) -> Result<FeatureMatrix> {
    Ok(m.select_columns(&correlated_keep(m, threshold)?))
}

/// Exposure scores of one (method, seed criterion, edge mode) run.
#[derive(Debug, Clone, Copy)]
pub struct ExposureInput<'a> {
    pub method: Method,
    pub criterion: SeedCriterion,
    pub mode: EdgeMode,
    pub exposure: &'a ExposureVector,
    pub relabeling: &'a RiskRelabeling,
}

/// Everything needed to featurize the subjects of one timeframe.
///
/// `graphs` must share one node index and cover each [`EdgeMode`] once.
pub struct TimeframeInputs<'a> {
    pub name: &'a str,
    pub card_month: YearMonth,
    pub window: DateWindow,
    pub records: &'a [CdrRecord],
    pub bank: &'a BankData,
    pub graphs: &'a [CallGraph],
    pub labels: &'a NodeLabelSet,
    pub exposures: &'a [ExposureInput<'a>],
    pub day: DayPeriod,
}

#[derive(Debug, Clone)]
pub struct TimeframeFeatures {
    pub matrix: FeatureMatrix,
    pub loans: Vec<LoanOutcome>,
    /// Subjects without calls in the timeframe's window.
    pub dropped_subjects: usize,
}

fn graph_for<'a>(graphs: &'a [CallGraph], mode: EdgeMode) -> Result<&'a CallGraph> {
    graphs
        .iter()
        .find(|g| g.mode() == mode)
        .ok_or_else(|| Error::invalid(format!("no {mode} graph supplied")))
}

struct Block {
    names: Vec<String>,
    group: FeatureGroup,
    values: Vec<f64>,
    missing: Option<Vec<bool>>,
}

/// Builds the requested feature groups for the subjects of one timeframe.
///
/// Subjects are card holders whose card was issued in `card_month`; those
/// absent from the call graph are dropped and counted.
pub fn featurize_timeframe(inputs: &TimeframeInputs<'_>, groups: &[FeatureGroup]) -> Result<TimeframeFeatures> {
    let base = graph_for(inputs.graphs, EdgeMode::Undirected)?;
    for g in inputs.graphs {
        if g.nodes().ids() != base.nodes().ids() {
            return Err(Error::invalid("graphs of one timeframe must share their node index"));
        }
    }
    if inputs.labels.len() != base.n_nodes() {
        return Err(Error::invalid("labels do not match the graph"));
    }
    let mut subjects: Vec<NodeId> = Vec::new();
    let mut records = Vec::new();
    let mut dropped = 0;
    for rec in &inputs.bank.records {
        if rec.issue_month() != inputs.card_month {
            continue;
        }
        match base.nodes().get(&rec.customer_id) {
            Some(node) => {
                subjects.push(node);
                records.push(rec);
            }
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::info!("{}: {dropped} subjects without calls in the window dropped", inputs.name);
    }
    let n = subjects.len();
    let mut blocks: Vec<Block> = Vec::new();
    for &group in groups {
        match group {
            FeatureGroup::SD => {
                let mut values = Vec::with_capacity(n * spending::N_SOCIODEMOGRAPHIC);
                let mut missing = Vec::with_capacity(values.capacity());
                for rec in &records {
                    let (v, m) = spending::sociodemographic_features(rec);
                    values.extend(v);
                    missing.extend(m);
                }
                blocks.push(Block {
                    names: spending::sociodemographic_names(),
                    group,
                    values,
                    missing: Some(missing),
                });
            }
            FeatureGroup::CB => {
                let ids: Vec<&str> = records.iter().map(|r| r.customer_id.as_str()).collect();
                blocks.push(Block {
                    names: calling::calling_behavior_names(),
                    group,
                    values: calling::calling_behavior_features(inputs.records, inputs.window, &ids, &inputs.day),
                    missing: None,
                });
            }
            FeatureGroup::LB => {
                for mode in EdgeMode::ALL {
                    blocks.push(Block {
                        names: link::link_based_names(mode),
                        group,
                        values: link::link_based_features(graph_for(inputs.graphs, mode)?, inputs.labels, &subjects),
                        missing: None,
                    });
                }
            }
            FeatureGroup::PR | FeatureGroup::SPA => {
                let method = if group == FeatureGroup::PR {
                    Method::PageRank
                } else {
                    Method::SpreadingActivation
                };
                for criterion in SeedCriterion::ALL {
                    for mode in EdgeMode::ALL {
                        let input = inputs
                            .exposures
                            .iter()
                            .find(|e| e.method == method && e.criterion == criterion && e.mode == mode)
                            .ok_or_else(|| {
                                Error::invalid(format!(
                                    "{}: no {} exposure for seeds {criterion} on the {mode} graph",
                                    inputs.name,
                                    method.tag()
                                ))
                            })?;
                        let graph = graph_for(inputs.graphs, mode)?;
                        if input.exposure.scores.len() != graph.n_nodes() {
                            return Err(Error::invalid("exposure vector does not match the graph"));
                        }
                        blocks.push(Block {
                            names: link::exposure_link_names(method, criterion, mode),
                            group,
                            values: link::exposure_link_features(graph, input.exposure, input.relabeling, &subjects),
                            missing: None,
                        });
                    }
                }
            }
        }
    }

    let m: usize = blocks.iter().map(|b| b.names.len()).sum();
    let mut values = vec![0.0; n * m];
    let mut missing = vec![false; n * m];
    let mut names = Vec::with_capacity(m);
    let mut tags = Vec::with_capacity(m);
    let mut offset = 0;
    for b in &blocks {
        let k = b.names.len();
        for r in 0..n {
            values[r * m + offset..r * m + offset + k].copy_from_slice(&b.values[r * k..(r + 1) * k]);
            if let Some(mask) = &b.missing {
                missing[r * m + offset..r * m + offset + k].copy_from_slice(&mask[r * k..(r + 1) * k]);
            }
        }
        names.extend(b.names.iter().cloned());
        tags.extend(std::iter::repeat_n(b.group, k));
        offset += k;
    }
    let row_ids = records
        .iter()
        .map(|r| format!("{}:{}", inputs.name, r.customer_id))
        .collect();
    let y = records.iter().map(|r| r.is_default()).collect();
    let loans = records.iter().map(|r| LoanOutcome::from_record(r)).collect();
    Ok(TimeframeFeatures {
        matrix: FeatureMatrix::new(row_ids, names, tags, values, missing, y)?,
        loans,
        dropped_subjects: dropped,
    })
}

/// Stacks the per-timeframe matrices (and their loans) into one dataset.
pub fn assemble(parts: Vec<TimeframeFeatures>) -> Result<TimeframeFeatures> {
    let matrices: Vec<FeatureMatrix> = parts.iter().map(|p| p.matrix.clone()).collect();
    let matrix = FeatureMatrix::vstack(&matrices)?;
    let dropped_subjects = parts.iter().map(|p| p.dropped_subjects).sum();
    let loans = parts.into_iter().flat_map(|p| p.loans).collect();
    Ok(TimeframeFeatures {
        matrix,
        loans,
        dropped_subjects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: Vec<Vec<f64>>) -> FeatureMatrix {
        let n = cols[0].len();
        let m = cols.len();
        let mut values = Vec::new();
        for r in 0..n {
            for c in &cols {
                values.push(c[r]);
            }
        }
        FeatureMatrix::new(
            (0..n).map(|i| format!("r{i}")).collect(),
            (0..m).map(|i| format!("f{i}")).collect(),
            vec![FeatureGroup::CB; m],
            values,
            vec![false; n * m],
            (0..n).map(|i| i % 3 == 0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn correlation_pruning() {
        let a: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let b: Vec<f64> = (0..50).map(|i| ((i * 13) % 7) as f64).collect();
        let twice: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
        let constant = vec![3.0; 50];
        let m = matrix(vec![constant, a.clone(), b, a, twice]);
        assert_eq!(correlated_keep(&m, 0.95).unwrap(), vec![1, 2]);
        assert!(correlated_keep(&m, 0.0).is_err());
        assert_eq!(drop_correlated(&m, 1.0).unwrap().names(), &["f1".to_string(), "f2".to_string()]);
    }

    #[test]
    fn csv_round_trip_with_missing() {
        let mut m = matrix(vec![vec![1.5, 2.0, -0.25], vec![0.1, 0.2, 0.3]]);
        m.missing[1] = true;
        m.values[1] = 0.0;
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("row_id,f0:CB,f1:CB,y_default\nr0,1.5,NA,1\n"), "{text}");
        assert_eq!(FeatureMatrix::read_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn rejects_duplicates_and_non_finite() {
        let bad = FeatureMatrix::new(
            vec!["r".into()],
            vec!["x".into(), "x".into()],
            vec![FeatureGroup::SD; 2],
            vec![0.0, 1.0],
            vec![false; 2],
            vec![false],
        );
        assert!(matches!(bad, Err(Error::DuplicateKey(_))));
        let nan = FeatureMatrix::new(
            vec!["r".into()],
            vec!["x".into()],
            vec![FeatureGroup::SD],
            vec![f64::NAN],
            vec![false],
            vec![false],
        );
        assert!(nan.is_err());
    }

    #[test]
    fn stacking() {
        let a = matrix(vec![vec![1.0, 2.0]]);
        let mut b = matrix(vec![vec![3.0]]);
        b.row_ids = vec!["other".into()];
        let s = FeatureMatrix::vstack(&[a.clone(), b]).unwrap();
        assert_eq!(s.n_rows(), 3);
        assert_eq!(s.column(0), vec![1.0, 2.0, 3.0]);
        assert!(FeatureMatrix::vstack(&[a.clone(), a]).is_err());
    }

    #[test]
    fn group_parsing() {
        assert_eq!(
            parse_groups("spa, sd,CB,sd").unwrap(),
            vec![FeatureGroup::SD, FeatureGroup::CB, FeatureGroup::SPA]
        );
        assert!(parse_groups("xx").is_err());
    }
}
