//! Report tables of an experiment run, as CSV, aligned text and JSON.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_atomic, write_json};
use crate::error::{Error, Result};
use crate::eval::{rank_correlations, DelongResult, EmpParams, FeatureImportance, RankCorrelations, SweepRow};
use crate::ingest::IngestStats;
use crate::models::ModelKind;
use crate::money::Money;
use crate::netstats::HomophilyReport;

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub cdr: IngestStats,
    pub card_holders: usize,
    pub cardless_customers: usize,
    pub orphan_transactions: usize,
    pub orphan_cards: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeframeSummary {
    pub timeframe: String,
    pub card_month: String,
    pub subjects: usize,
    pub defaults: usize,
    pub dropped_subjects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub timeframes: Vec<TimeframeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainInfo {
    pub n_features: usize,
    pub n_fit: usize,
    pub chosen_depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetstatsRow {
    pub timeframe: String,
    pub report: HomophilyReport,
    pub null_dyadicity: Option<f64>,
    pub null_heterophilicity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRow {
    pub model: String,
    pub classifier: ModelKind,
    pub groups: String,
    pub n_features: usize,
    pub n_fit: usize,
    pub n_test: usize,
    pub n_test_defaults: usize,
    pub chosen_depth: Option<usize>,
    pub auc: f64,
    pub emp: f64,
    pub emp_fraction: f64,
    pub cutoff: f64,
    pub n_rejected: usize,
    pub model_profit: Money,
    pub no_model_profit: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelongRow {
    pub classifier: ModelKind,
    pub model_a: String,
    pub model_b: String,
    pub result: DelongResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub classifier: ModelKind,
    pub n_models: usize,
    /// Agreement of the AUC and EMP orderings of the models.
    pub correlations: RankCorrelations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub group: String,
    pub profit: Option<f64>,
    pub profit_rank: usize,
    pub accuracy: Option<f64>,
    pub accuracy_rank: usize,
}

/// Per-feature profit and accuracy importance of one forest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceTable {
    /// Ordered by profit rank.
    pub rows: Vec<ImportanceRow>,
}

impl ImportanceTable {
    /// Combines two ranked importance lists over the same features.
    pub fn new(names: &[String], groups: &[String], profit: &[FeatureImportance], accuracy: &[FeatureImportance]) -> Self {
        let mut rows: Vec<ImportanceRow> = names
            .iter()
            .zip(groups)
            .map(|(n, g)| ImportanceRow {
                feature: n.clone(),
                group: g.clone(),
                profit: None,
                profit_rank: 0,
                accuracy: None,
                accuracy_rank: 0,
            })
            .collect();
        for (k, f) in profit.iter().enumerate() {
            rows[f.feature].profit = f.value;
            rows[f.feature].profit_rank = k + 1;
        }
        for (k, f) in accuracy.iter().enumerate() {
            rows[f.feature].accuracy = f.value;
            rows[f.feature].accuracy_rank = k + 1;
        }
        rows.sort_by_key(|r| r.profit_rank);
        ImportanceTable { rows }
    }

    /// Rank agreement of the two measures over features where both are
    /// defined; `None` with fewer than two such features.
    pub fn agreement(&self) -> Option<RankCorrelations> {
        let (p, a): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter_map(|r| Some((r.profit?, r.accuracy?)))
            .unzip();
        rank_correlations(&p, &a).ok()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["feature", "group", "profit", "profit_rank", "accuracy", "accuracy_rank"])?;
        for r in &self.rows {
            out.write_record([
                r.feature.clone(),
                r.group.clone(),
                opt(r.profit),
                r.profit_rank.to_string(),
                opt(r.accuracy),
                r.accuracy_rank.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<importance>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (k, rec) in csv::Reader::from_reader(r).records().enumerate() {
            let rec = rec?;
            let bad = || Error::Parse {
                row: k + 2,
                reason: "bad importance row".into(),
            };
            let num = |i: usize| -> Result<Option<f64>> {
                match rec.get(i) {
                    Some("") => Ok(None),
                    Some(s) => s.parse().map(Some).map_err(|_| bad()),
                    None => Err(bad()),
                }
            };
            let rank = |i: usize| -> Result<usize> { rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(bad) };
            rows.push(ImportanceRow {
                feature: rec.get(0).ok_or_else(bad)?.to_string(),
                group: rec.get(1).ok_or_else(bad)?.to_string(),
                profit: num(2)?,
                profit_rank: rank(3)?,
                accuracy: num(4)?,
                accuracy_rank: rank(5)?,
            });
        }
        Ok(ImportanceTable { rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelImportance {
    pub model: String,
    pub table: ImportanceTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    /// ROI, LGD and the loss point masses used for every EMP figure.
    pub emp_params: EmpParams,
    pub primary_classifier: ModelKind,
    pub n_rows: usize,
    pub n_train: usize,
    /// Training rows after undersampling.
    pub n_fit: usize,
    pub n_test: usize,
    pub features: FeatureSummary,
    pub models: Vec<ModelRow>,
    pub delong: Vec<DelongRow>,
    pub rank_correlations: Vec<RankRow>,
    pub importance: Vec<ModelImportance>,
    pub netstats: Vec<NetstatsRow>,
    pub sweep_model: String,
    pub sweep_roi: Vec<SweepRow>,
    pub sweep_lgd: Vec<SweepRow>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_file(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header)?;
        for r in rows {
            out.write_record(&r)?;
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}

fn text_file(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e)))
}

/// Left-aligned first column, right-aligned others.
pub fn aligned_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut s = String::new();
    let line = |s: &mut String, cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{c:<w$}", w = width[i])
                } else {
                    format!("{c:>w$}", w = width[i])
                }
            })
            .collect();
        let _ = writeln!(s, "{}", parts.join("  ").trim_end());
    };
    line(&mut s, header.to_vec());
    let _ = writeln!(s, "{}", "-".repeat(width.iter().sum::<usize>() + 2 * (width.len() - 1)));
    for r in rows {
        line(&mut s, r.iter().map(String::as_str).collect());
    }
    s
}

impl ExperimentReport {
    /// A report with no results yet.
    pub fn empty(cfg: &super::ExperimentConfig) -> Self {
        ExperimentReport {
            seed: cfg.seed,
            emp_params: cfg.emp.params(),
            primary_classifier: cfg.primary_classifier,
            n_rows: 0,
            n_train: 0,
            n_fit: 0,
            n_test: 0,
            features: FeatureSummary { timeframes: Vec::new() },
            models: Vec::new(),
            delong: Vec::new(),
            rank_correlations: Vec::new(),
            importance: Vec::new(),
            netstats: Vec::new(),
            sweep_model: cfg.sweep.model.clone(),
            sweep_roi: Vec::new(),
            sweep_lgd: Vec::new(),
        }
    }

    pub fn model_row(&self, model: &str, classifier: ModelKind) -> Option<&ModelRow> {
        self.models.iter().find(|r| r.model == model && r.classifier == classifier)
    }

    /// DeLong result for a pair of models, oriented as `a` against `b`.
    pub fn delong(&self, a: &str, b: &str, classifier: ModelKind) -> Option<DelongResult> {
        self.delong.iter().filter(|d| d.classifier == classifier).find_map(|d| {
            if d.model_a == a && d.model_b == b {
                Some(d.result)
            } else if d.model_a == b && d.model_b == a {
                let r = d.result;
                Some(DelongResult {
                    auc_a: r.auc_b,
                    auc_b: r.auc_a,
                    auc_diff: -r.auc_diff,
                    z: -r.z,
                    ..r
                })
            } else {
                None
            }
        })
    }

    pub fn models_table(&self) -> String {
        let header = [
            "model", "classifier", "groups", "features", "AUC", "EMP", "EMP fraction", "cutoff", "rejected", "profit",
            "no-model profit",
        ];
        let rows: Vec<Vec<String>> = self
            .models
            .iter()
            .map(|r| {
                vec![
                    r.model.clone(),
                    r.classifier.name().to_string(),
                    r.groups.clone(),
                    r.n_features.to_string(),
                    format!("{:.4}", r.auc),
                    format!("{:.5}", r.emp),
                    format!("{:.4}", r.emp_fraction),
                    format!("{:.4}", r.cutoff),
                    r.n_rejected.to_string(),
                    r.model_profit.to_string(),
                    r.no_model_profit.to_string(),
                ]
            })
            .collect();
        aligned_table(&header, &rows)
    }

    /// Writes every table into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("summary.json"), self)?;
        csv_file(
            &dir.join("models.csv"),
            &[
                "model", "classifier", "groups", "n_features", "n_fit", "n_test", "n_test_defaults", "tree_depth", "auc",
                "emp", "emp_fraction", "cutoff", "n_rejected", "model_profit", "no_model_profit",
            ],
            self.models
                .iter()
                .map(|r| {
                    vec![
                        r.model.clone(),
                        r.classifier.name().into(),
                        r.groups.clone(),
                        r.n_features.to_string(),
                        r.n_fit.to_string(),
                        r.n_test.to_string(),
                        r.n_test_defaults.to_string(),
                        r.chosen_depth.map(|d| d.to_string()).unwrap_or_default(),
                        r.auc.to_string(),
                        r.emp.to_string(),
                        r.emp_fraction.to_string(),
                        r.cutoff.to_string(),
                        r.n_rejected.to_string(),
                        r.model_profit.to_string(),
                        r.no_model_profit.to_string(),
                    ]
                })
                .collect(),
        )?;
        csv_file(
            &dir.join("delong.csv"),
            &["classifier", "model_a", "model_b", "auc_a", "auc_b", "auc_diff", "variance", "z", "p_value"],
            self.delong
                .iter()
                .map(|d| {
                    vec![
                        d.classifier.name().into(),
                        d.model_a.clone(),
                        d.model_b.clone(),
                        d.result.auc_a.to_string(),
                        d.result.auc_b.to_string(),
                        d.result.auc_diff.to_string(),
                        d.result.variance.to_string(),
                        d.result.z.to_string(),
                        d.result.p_value.to_string(),
                    ]
                })
                .collect(),
        )?;
        csv_file(
            &dir.join("rank_correlation.csv"),
            &["classifier", "n_models", "spearman_rho", "kendall_tau", "goodman_kruskal_gamma"],
            self.rank_correlations
                .iter()
                .map(|r| {
                    vec![
                        r.classifier.name().into(),
                        r.n_models.to_string(),
                        r.correlations.spearman_rho.to_string(),
                        r.correlations.kendall_tau.to_string(),
                        r.correlations.goodman_kruskal_gamma.to_string(),
                    ]
                })
                .collect(),
        )?;
        for m in &self.importance {
            write_atomic(&dir.join(format!("importance_{}.csv", m.model)), |w| m.table.write_csv(w))?;
        }
        csv_file(
            &dir.join("importance_agreement.csv"),
            &["model", "spearman_rho", "kendall_tau", "goodman_kruskal_gamma"],
            self.importance
                .iter()
                .map(|m| {
                    let c = m.table.agreement();
                    vec![
                        m.model.clone(),
                        opt(c.map(|c| c.spearman_rho)),
                        opt(c.map(|c| c.kendall_tau)),
                        opt(c.map(|c| c.goodman_kruskal_gamma)),
                    ]
                })
                .collect(),
        )?;
        for (name, rows) in [("sweep_roi.csv", &self.sweep_roi), ("sweep_lgd.csv", &self.sweep_lgd)] {
            csv_file(
                &dir.join(name),
                &["value", "emp", "emp_fraction"],
                rows.iter()
                    .map(|r| vec![r.value.to_string(), r.emp.to_string(), r.emp_fraction.to_string()])
                    .collect(),
            )?;
        }
        text_file(&dir.join("report.txt"), &self.to_text())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "seed {}  rows {}  train {} (fit {})  test {}",
            self.seed, self.n_rows, self.n_train, self.n_fit, self.n_test
        );
        let _ = writeln!(
            s,
            "ROI {}  LGD {}  p0 {:.4}  p1 {:.4}\n",
            self.emp_params.roi, self.emp_params.lgd, self.emp_params.p0, self.emp_params.p1
        );
        let _ = writeln!(s, "Subjects per timeframe");
        let rows: Vec<Vec<String>> = self
            .features
            .timeframes
            .iter()
            .map(|t| {
                vec![
                    t.timeframe.clone(),
                    t.card_month.clone(),
                    t.subjects.to_string(),
                    t.defaults.to_string(),
                    t.dropped_subjects.to_string(),
                ]
            })
            .collect();
        s.push_str(&aligned_table(&["timeframe", "card month", "subjects", "defaults", "dropped"], &rows));
        let _ = writeln!(s, "\nModels");
        s.push_str(&self.models_table());
        let _ = writeln!(s, "\nDeLong comparisons ({})", self.primary_classifier.name());
        let rows: Vec<Vec<String>> = self
            .delong
            .iter()
            .filter(|d| d.classifier == self.primary_classifier)
            .map(|d| {
                vec![
                    format!("{} vs {}", d.model_a, d.model_b),
                    format!("{:+.4}", d.result.auc_diff),
                    format!("{:.3}", d.result.z),
                    format!("{:.4}", d.result.p_value),
                ]
            })
            .collect();
        s.push_str(&aligned_table(&["pair", "AUC diff", "z", "p"], &rows));
        let _ = writeln!(s, "\nAUC and EMP rank agreement");
        let rows: Vec<Vec<String>> = self
            .rank_correlations
            .iter()
            .map(|r| {
                vec![
                    r.classifier.name().to_string(),
                    format!("{:.4}", r.correlations.spearman_rho),
                    format!("{:.4}", r.correlations.kendall_tau),
                    format!("{:.4}", r.correlations.goodman_kruskal_gamma),
                ]
            })
            .collect();
        s.push_str(&aligned_table(&["classifier", "spearman", "kendall", "gamma"], &rows));
        for m in &self.importance {
            let _ = writeln!(s, "\nTop features of forest {} (profit / accuracy)", m.model);
            let rows: Vec<Vec<String>> = m
                .table
                .rows
                .iter()
                .take(10)
                .map(|r| {
                    vec![
                        r.feature.clone(),
                        r.group.clone(),
                        r.profit.map_or("-".into(), |v| format!("{v:.2}")),
                        r.accuracy.map_or("-".into(), |v| format!("{v:.5}")),
                        r.accuracy_rank.to_string(),
                    ]
                })
                .collect();
            s.push_str(&aligned_table(&["feature", "group", "profit", "accuracy", "acc. rank"], &rows));
        }
        for n in &self.netstats {
            let _ = writeln!(s, "\nNetwork statistics {}", n.timeframe);
            s.push_str(&n.report.to_text());
            if let (Some(d), Some(h)) = (n.null_dyadicity, n.null_heterophilicity) {
                let _ = writeln!(s, "permutation null: D {d:.4}  H {h:.4}");
            }
        }
        if !self.sweep_roi.is_empty() {
            let _ = writeln!(s, "\nROI sensitivity of model {}", self.sweep_model);
            let rows: Vec<Vec<String>> = self
                .sweep_roi
                .iter()
                .map(|r| vec![format!("{:.3}", r.value), format!("{:.5}", r.emp), format!("{:.4}", r.emp_fraction)])
                .collect();
            s.push_str(&aligned_table(&["ROI", "EMP", "EMP fraction"], &rows));
        }
        s
    }
}
