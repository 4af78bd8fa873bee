//! Per-node customer labels for one timeframe.

use std::io::{Read, Write};

use crate::calendar::YearMonth;
use crate::error::{Error, Result};
use crate::graph::{CallGraph, NodeId};
use crate::ingest::BankData;

/// Delinquency labelling of the nodes of one call graph.
///
/// `delinquency[i]` is `None` for telco-only nodes; for bank customers it is
/// the number of late payments seen before the timeframe's card month,
/// capped at 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeLabelSet {
    delinquency: Vec<Option<u8>>,
    is_subject: Vec<bool>,
    /// Target for subjects, observed default for other customers.
    default: Vec<Option<bool>>,
}

impl NodeLabelSet {
    pub fn new(delinquency: Vec<Option<u8>>, is_subject: Vec<bool>, default: Vec<Option<bool>>) -> Result<Self> {
        let n = delinquency.len();
        if is_subject.len() != n || default.len() != n {
            return Err(Error::invalid("label vectors differ in length"));
        }
        for i in 0..n {
            if let Some(l) = delinquency[i] {
                if l > 3 {
                    return Err(Error::invalid(format!("delinquency level {l} > 3 at node {i}")));
                }
            }
            if is_subject[i] && delinquency[i].is_none() {
                return Err(Error::invalid(format!("subject node {i} is not a bank customer")));
            }
            if delinquency[i].is_none() && default[i].is_some() {
                return Err(Error::invalid(format!("default label on non-customer node {i}")));
            }
        }
        Ok(NodeLabelSet {
            delinquency,
            is_subject,
            default,
        })
    }

    /// Labels for the timeframe whose subjects received their card in
    /// `card_month`.
    pub fn for_timeframe(graph: &CallGraph, bank: &BankData, card_month: YearMonth) -> Self {
        let n = graph.n_nodes();
        let mut delinquency = vec![None; n];
        let mut is_subject = vec![false; n];
        let mut default = vec![None; n];
        for i in 0..n {
            let id = graph.nodes().id(i as NodeId);
            if let Some(rec) = bank.get(id) {
                let subject = rec.issue_month() == card_month;
                is_subject[i] = subject;
                delinquency[i] = Some(rec.delinquency_level_before(card_month));
                default[i] = Some(if subject {
                    rec.is_default()
                } else {
                    rec.delinquency_level_before(card_month) >= 3
                });
            } else if bank.is_customer(id) {
                delinquency[i] = Some(0);
                default[i] = Some(false);
            }
        }
        NodeLabelSet {
            delinquency,
            is_subject,
            default,
        }
    }

    pub fn len(&self) -> usize {
        self.delinquency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delinquency.is_empty()
    }

    pub fn delinquency(&self, node: NodeId) -> Option<u8> {
        self.delinquency[node as usize]
    }

    pub fn is_subject(&self, node: NodeId) -> bool {
        self.is_subject[node as usize]
    }

    pub fn is_bank_customer(&self, node: NodeId) -> bool {
        self.delinquency[node as usize].is_some()
    }

    pub fn default_label(&self, node: NodeId) -> Option<bool> {
        self.default[node as usize]
    }

    pub fn default_labels(&self) -> &[Option<bool>] {
        &self.default
    }

    pub fn subjects(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len() as NodeId).filter(|&i| self.is_subject(i))
    }

    /// Writes `node_id,is_bank_customer,is_subject,delinquency_level,default`.
    pub fn write_csv<W: Write>(&self, graph: &CallGraph, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["node_id", "is_bank_customer", "is_subject", "delinquency_level", "default"])?;
        for i in 0..self.len() as NodeId {
            out.write_record([
                graph.nodes().id(i).to_string(),
                u8::from(self.is_bank_customer(i)).to_string(),
                u8::from(self.is_subject(i)).to_string(),
                self.delinquency(i).map(|l| l.to_string()).unwrap_or_default(),
                self.default_label(i).map(|d| u8::from(d).to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<labels>", e))?;
        Ok(())
    }

    /// Reads labels written by [`NodeLabelSet::write_csv`], aligned to `graph`.
    /// Nodes absent from the file are telco-only.
    pub fn read_csv<R: Read>(graph: &CallGraph, r: R) -> Result<Self> {
        let n = graph.n_nodes();
        let mut delinquency = vec![None; n];
        let mut is_subject = vec![false; n];
        let mut default = vec![None; n];
        let mut reader = csv::Reader::from_reader(r);
        for (k, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = k + 2;
            let bad = |what: &str| Error::Parse {
                row,
                reason: format!("bad {what}"),
            };
            let Some(node) = graph.nodes().get(rec.get(0).ok_or_else(|| bad("node_id"))?) else {
                continue;
            };
            let flag = |idx: usize| -> Result<Option<bool>> {
                match rec.get(idx).map(str::trim) {
                    None | Some("") => Ok(None),
                    Some("0") => Ok(Some(false)),
                    Some("1") => Ok(Some(true)),
                    Some(_) => Err(bad("flag")),
                }
            };
            let i = node as usize;
            let customer = flag(1)?.unwrap_or(false);
            is_subject[i] = flag(2)?.unwrap_or(false);
            if customer {
                let lvl = rec.get(3).map(str::trim).unwrap_or("");
                delinquency[i] = Some(if lvl.is_empty() {
                    0
                } else {
                    lvl.parse().map_err(|_| bad("delinquency_level"))?
                });
                default[i] = flag(4)?;
            }
        }
        NodeLabelSet::new(delinquency, is_subject, default)
    }
}
