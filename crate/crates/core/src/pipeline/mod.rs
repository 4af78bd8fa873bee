//! The experiment pipeline: ingest, graphs, labels, propagation, features,
//! network statistics, models and evaluation.
//!
//! Each stage writes its outputs under the run's output directory and is
//! skipped when they are already there, so an interrupted run resumes where
//! it stopped and a deleted intermediate is rebuilt identically. Files are
//! written to a temporary name first and renamed when complete. Changing the
//! configuration clears the cache.

mod config;
mod report;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::calendar::Timeframe;
use crate::error::{Error, Result};
use crate::eval::{
    accuracy_feature_importance, auc, delong_test, evaluate_profit, profit_feature_importance, rank_correlations,
    sensitivity_sweep, EmpParams, FeatureImportance, SweepParameter,
};
use crate::features::{assemble, correlated_keep, featurize_timeframe, ExposureInput, FeatureMatrix, TimeframeInputs};
use crate::graph::{build_graph, CallGraph, EdgeMode, NodeId};
use crate::ingest::{ingest_bank, ingest_cdr, write_cdr, BankData, CdrRecord, IngestOptions};
use crate::labels::NodeLabelSet;
use crate::loans::{read_loans, write_loans, LoanOutcome};
use crate::models::{
    split, tree::train_tree_cv, undersample, Dataset, FittedModel, ForestModel, LogisticModel, Model, ModelKind,
    SplitSpec,
};
use crate::netstats::{homophily_test, permutation_null};
use crate::propagation::{exposure_cutoff, propagate, relabel_high_risk, ExposureVector, Method, SeedCriterion};
use crate::rng;

pub use config::*;
pub use report::*;

/// Runs `f`, tagging any error with the stage name.
pub fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("stage {name}");
    f().map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: name,
            source: Box::new(other),
        },
    })
}

/// Writes `path` through a temporary sibling renamed into place on success.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let mut w = BufWriter::new(File::create(&tmp).map_err(|e| Error::io(&tmp, e))?);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(&tmp, e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w).map_err(|e| Error::io(path, e))
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

/// Reads the three bank extracts.
pub fn load_bank(paths: &Paths) -> Result<BankData> {
    ingest_bank(open(&paths.accounts)?, open(&paths.transactions)?, open(&paths.card_activity)?)
}

/// Propagation runs needed by the feature groups in `methods`.
fn exposure_runs(methods: &[Method]) -> Vec<(Method, SeedCriterion, EdgeMode)> {
    let mut runs = Vec::new();
    for &m in methods {
        for c in SeedCriterion::ALL {
            for mode in EdgeMode::ALL {
                runs.push((m, c, mode));
            }
        }
    }
    runs
}

/// Writes one method's exposure vectors over a shared node index as
/// `node_id,<criterion>:<mode>...`.
pub fn write_exposures<W: Write>(graph: &CallGraph, vectors: &[(SeedCriterion, EdgeMode, &ExposureVector)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["node_id".to_string()];
    header.extend(vectors.iter().map(|(c, m, _)| format!("{c}:{m}")));
    out.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for i in 0..graph.n_nodes() {
        rec.clear();
        rec.push(graph.nodes().id(i as NodeId).to_string());
        rec.extend(vectors.iter().map(|(_, _, v)| v.scores[i].to_string()));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<exposure>", e))?;
    Ok(())
}

/// Reads a file written by [`write_exposures`].
pub fn read_exposures<R: std::io::Read>(
    graph: &CallGraph,
    method: Method,
    r: R,
) -> Result<Vec<(SeedCriterion, EdgeMode, ExposureVector)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let mut cols = Vec::new();
    for h in header.iter().skip(1) {
        let (c, m) = h
            .split_once(':')
            .ok_or_else(|| Error::Parse {
                row: 1,
                reason: format!("bad exposure column `{h}`"),
            })?;
        let c: SeedCriterion = c.parse().map_err(|e: String| Error::Parse { row: 1, reason: e })?;
        let m: EdgeMode = m.parse().map_err(|e: String| Error::Parse { row: 1, reason: e })?;
        cols.push((c, m));
    }
    let n = graph.n_nodes();
    let mut scores = vec![vec![0.0; n]; cols.len()];
    let mut rows = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || Error::Parse {
            row: k + 2,
            reason: "bad exposure row".into(),
        };
        let node = graph.nodes().get(rec.get(0).ok_or_else(bad)?).ok_or_else(bad)? as usize;
        for (j, s) in scores.iter_mut().enumerate() {
            s[node] = rec.get(j + 1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::invalid(format!("exposure file covers {rows} of {n} nodes")));
    }
    Ok(cols
        .into_iter()
        .zip(scores)
        .map(|((c, m), scores)| {
            (
                c,
                m,
                ExposureVector {
                    scores,
                    method,
                    seed_spec: Some(c),
                    iterations_run: 0,
                    residual: 0.0,
                },
            )
        })
        .collect())
}

/// Writes `row_id,y,score`.
pub fn write_scores<W: Write>(row_ids: &[String], y: &[bool], scores: &[f64], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["row_id", "y", "score"])?;
    for ((id, &t), s) in row_ids.iter().zip(y).zip(scores) {
        out.write_record([id.as_str(), if t { "1" } else { "0" }, &s.to_string()])?;
    }
    out.flush().map_err(|e| Error::io("<scores>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFile {
    pub row_ids: Vec<String>,
    pub y: Vec<bool>,
    pub scores: Vec<f64>,
}

pub fn read_scores<R: std::io::Read>(r: R) -> Result<ScoreFile> {
    let mut out = ScoreFile {
        row_ids: Vec::new(),
        y: Vec::new(),
        scores: Vec::new(),
    };
    for (k, rec) in csv::Reader::from_reader(r).records().enumerate() {
        let rec = rec?;
        let bad = || Error::Parse {
            row: k + 2,
            reason: "expected `row_id,y,score`".into(),
        };
        out.row_ids.push(rec.get(0).ok_or_else(bad)?.to_string());
        out.y.push(match rec.get(1) {
            Some("1") => true,
            Some("0") => false,
            _ => return Err(bad()),
        });
        out.scores.push(rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?);
    }
    Ok(out)
}

/// Training and test rows of the assembled dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub train: Vec<usize>,
    /// `train` after undersampling.
    pub fit: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn partition(y: &[bool], cfg: &ExperimentConfig) -> Result<Partition> {
    let spec = SplitSpec {
        train_fraction: cfg.split.train_fraction,
        seed: rng::child_seed(cfg.seed, "split", 0),
        stratified: cfg.split.stratified,
    };
    let (train, test) = split(y, &spec)?;
    let fit = match cfg.split.undersample_ratio {
        Some(r) => undersample(&train, y, r, rng::child_seed(cfg.seed, "undersample", 0))?,
        None => train.clone(),
    };
    Ok(Partition { train, fit, test })
}

/// Columns of `matrix` a model uses: its groups, minus features pruned for
/// correlation on the training rows.
pub fn model_columns(matrix: &FeatureMatrix, model: &str, train: &[usize], threshold: Option<f64>) -> Result<Vec<usize>> {
    let groups = model_groups(model).ok_or_else(|| Error::Config(format!("unknown model id `{model}`")))?;
    let cols: Vec<usize> = (0..matrix.n_features())
        .filter(|&c| groups.contains(&matrix.groups()[c]))
        .collect();
    if cols.is_empty() {
        return Err(Error::invalid(format!("model {model}: the feature matrix lacks its groups")));
    }
    match threshold {
        None => Ok(cols),
        Some(t) => {
            let sub = matrix.select_columns(&cols).select_rows(train);
            let keep = correlated_keep(&sub, t)?;
            if keep.is_empty() {
                return Err(Error::invalid(format!("model {model}: every feature is constant on the training set")));
            }
            Ok(keep.into_iter().map(|k| cols[k]).collect())
        }
    }
}

/// Fits one classifier on `data`.
pub fn fit_classifier(kind: ModelKind, data: &Dataset, cfg: &ExperimentConfig) -> Result<(Model, Option<usize>)> {
    Ok(match kind {
        ModelKind::Logit => (Model::Logit(LogisticModel::fit(data, &cfg.logistic)?), None),
        ModelKind::Tree => {
            let mut cv = cfg.tree.clone();
            cv.seed = rng::child_seed(cfg.seed, "tree-cv", 0);
            let (tree, report) = train_tree_cv(data, &cv)?;
            (Model::Tree(tree), Some(report.chosen_depth))
        }
        ModelKind::Forest => {
            let mut p = cfg.forest.clone();
            p.seed = rng::child_seed(cfg.seed, "forest", 0);
            (Model::Forest(ForestModel::fit(data, &p)?), None)
        }
    })
}

/// Profit and accuracy importance of a forest's features on the test set.
pub fn forest_importance(
    forest: &ForestModel,
    test: &Dataset,
    loans: &[LoanOutcome],
    names: &[String],
    groups: &[String],
    cfg: &ExperimentConfig,
) -> Result<ImportanceTable> {
    let votes = forest.per_tree_votes(test);
    let profit = profit_feature_importance(forest, &votes, loans, cfg.emp.roi, cfg.emp.lgd, test.n_cols())?;
    let accuracy = accuracy_feature_importance(
        forest,
        test,
        cfg.importance.accuracy_kind,
        cfg.importance.repeats,
        rng::child_seed(cfg.seed, "importance", 0),
    )?;
    Ok(ImportanceTable::new(names, groups, &profit, &accuracy))
}

/// Stage directories holding data derived from the inputs.
const DATA_DIRS: [&str; 6] = ["ingest", "graphs", "labels", "exposure", "features", "netstats"];
/// Stage directories holding fitted models and their scores.
const MODEL_DIRS: [&str; 2] = ["models", "scores"];

/// Configuration fields each group of cached stages depends on.
fn stamps(cfg: &ExperimentConfig) -> Result<(String, String)> {
    let data = serde_json::json!({
        "seed": cfg.seed,
        "inputs": cfg.paths.inputs(),
        "timeframes": cfg.timeframes,
        "ingest": cfg.ingest,
        "propagation": cfg.propagation,
        "day": cfg.features.day,
        "groups": cfg.feature_groups(),
        "netstats": cfg.netstats,
    });
    let models = serde_json::json!({
        "correlation_threshold": cfg.features.correlation_threshold,
        "split": cfg.split,
        "logistic": cfg.logistic,
        "tree": cfg.tree,
        "forest": cfg.forest,
        "emp": cfg.emp,
        "importance": {
            "accuracy_kind": cfg.importance.accuracy_kind,
            "repeats": cfg.importance.repeats,
        },
    });
    Ok((serde_json::to_string_pretty(&data)?, serde_json::to_string_pretty(&models)?))
}

/// Clears `dirs` under `out` when `stamp` holds different text, then
/// records `text`. Returns whether anything was cleared.
fn refresh_stamp(out: &Path, stamp: &str, text: &str, dirs: &[&str]) -> Result<bool> {
    let path = out.join(stamp);
    let stale = match fs::read_to_string(&path) {
        Ok(old) => old != text,
        Err(_) => dirs.iter().any(|d| out.join(d).exists()),
    };
    if stale {
        for d in dirs {
            let p = out.join(d);
            if p.exists() {
                fs::remove_dir_all(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    write_atomic(&path, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e)))?;
    Ok(stale)
}

/// The feature matrix of all timeframes with what goes with it.
#[derive(Debug, Clone)]
pub struct Features {
    pub matrix: FeatureMatrix,
    pub loans: Vec<LoanOutcome>,
    pub summary: FeatureSummary,
    pub netstats: Vec<NetstatsRow>,
}

/// Train/test partition and the EMP parameters evaluation uses.
#[derive(Debug, Clone)]
pub struct Split {
    pub partition: Partition,
    pub emp: EmpParams,
}

/// One (model, classifier) pair evaluated on the test rows.
#[derive(Debug, Clone)]
pub struct Trained {
    pub row: ModelRow,
    pub scores: Vec<f64>,
}

/// An output directory with its cached stages.
///
/// Every stage method returns the cached result when its files exist and
/// computes and stores it otherwise.
pub struct Experiment<'a> {
    cfg: &'a ExperimentConfig,
    out: PathBuf,
    records: Option<Vec<CdrRecord>>,
    bank: Option<BankData>,
}

impl<'a> Experiment<'a> {
    /// Validates the configuration, checks the inputs and prepares the
    /// output directory, clearing stages the configuration invalidates.
    pub fn open(cfg: &'a ExperimentConfig) -> Result<Self> {
        stage("config", || {
            cfg.validate()?;
            cfg.check_inputs()?;
            let out = cfg.paths.output.clone();
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let (data, models) = stamps(cfg)?;
            if refresh_stamp(&out, ".stamp-data.json", &data, &DATA_DIRS)? {
                log::warn!("inputs or data settings changed; clearing cached stages in {}", out.display());
                for d in MODEL_DIRS {
                    let p = out.join(d);
                    if p.exists() {
                        fs::remove_dir_all(&p).map_err(|e| Error::io(&p, e))?;
                    }
                }
            }
            if refresh_stamp(&out, ".stamp-models.json", &models, &MODEL_DIRS)? {
                log::warn!("model settings changed; clearing cached models in {}", out.display());
            }
            let text = cfg.to_toml();
            let path = out.join("config.toml");
            write_atomic(&path, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e)))?;
            Ok(Experiment {
                cfg,
                out,
                records: None,
                bank: None,
            })
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    /// Cleans the call records and joins the bank extracts.
    pub fn ingest(&mut self) -> Result<()> {
        let calls = self.path("ingest/calls.csv");
        if calls.is_file() {
            return Ok(());
        }
        stage("ingest", || {
            let opts = self.cfg.ingest.options();
            let result = ingest_cdr(open(&self.cfg.paths.cdr)?, opts)?;
            let rejections = self.path("ingest/rejections.csv");
            write_atomic(&rejections, |w| {
                result.write_rejection_log(w).map_err(|e| Error::io(&rejections, e))
            })?;
            let bank = load_bank(&self.cfg.paths)?;
            let summary = IngestSummary {
                cdr: result.stats,
                card_holders: bank.records.len(),
                cardless_customers: bank.cardless_customers.len(),
                orphan_transactions: bank.orphan_transactions.len(),
                orphan_cards: bank.orphan_cards.len(),
            };
            write_json(&self.path("ingest/summary.json"), &summary)?;
            write_atomic(&calls, |w| write_cdr(&result.records, w, ',').map_err(|e| Error::io(&calls, e)))?;
            self.records = Some(result.records);
            self.bank = Some(bank);
            Ok(())
        })
    }

    fn ensure_records(&mut self) -> Result<()> {
        self.ingest()?;
        if self.records.is_none() {
            let opts = IngestOptions {
                min_duration: self.cfg.ingest.min_duration,
                delimiter: ',',
            };
            self.records = Some(ingest_cdr(open(&self.path("ingest/calls.csv"))?, opts)?.records);
        }
        Ok(())
    }

    fn ensure_bank(&mut self) -> Result<()> {
        if self.bank.is_none() {
            self.bank = Some(load_bank(&self.cfg.paths)?);
        }
        Ok(())
    }

    /// Drops the call records and bank data held in memory.
    pub fn release_inputs(&mut self) {
        self.records = None;
        self.bank = None;
    }

    /// Incoming, outgoing and undirected graphs of a timeframe.
    pub fn graphs(&mut self, tf: &Timeframe) -> Result<Vec<CallGraph>> {
        let dir = self.path("graphs");
        let prefix = |m: EdgeMode| dir.join(format!("{}.{m}", tf.name));
        let cached = EdgeMode::ALL.iter().all(|&m| {
            let p = prefix(m);
            ["nodes.csv", "edges.csv"]
                .iter()
                .all(|s| PathBuf::from(format!("{}.{s}", p.display())).is_file())
        });
        if cached {
            return EdgeMode::ALL.iter().map(|&m| CallGraph::load(&prefix(m))).collect();
        }
        stage("build-graph", || {
            self.ensure_records()?;
            let records = self.records.as_deref().unwrap();
            let window = tf.window();
            let mut graphs = Vec::new();
            for mode in EdgeMode::ALL {
                let g = build_graph(records, window, mode).graph.with_timeframe(&tf.name);
                log::info!("{} {mode}: {} nodes, {} edges", tf.name, g.n_nodes(), g.n_edges());
                save_graph(&g, &prefix(mode))?;
                graphs.push(g);
            }
            Ok(graphs)
        })
    }

    /// Node labels of a timeframe over the undirected graph's nodes.
    pub fn labels(&mut self, tf: &Timeframe, graph: &CallGraph) -> Result<NodeLabelSet> {
        let path = self.path(&format!("labels/{}.csv", tf.name));
        if path.is_file() {
            return NodeLabelSet::read_csv(graph, open(&path)?);
        }
        stage("labels", || {
            self.ensure_bank()?;
            let labels = NodeLabelSet::for_timeframe(graph, self.bank.as_ref().unwrap(), tf.card_month);
            write_atomic(&path, |w| labels.write_csv(graph, w))?;
            Ok(labels)
        })
    }

    /// Exposure vectors of `methods` for every seed criterion and edge mode.
    pub fn exposures(
        &mut self,
        tf: &Timeframe,
        graphs: &[CallGraph],
        labels: &NodeLabelSet,
        methods: &[Method],
    ) -> Result<Vec<(Method, SeedCriterion, EdgeMode, ExposureVector)>> {
        let graph_of = |m: EdgeMode| graphs.iter().find(|g| g.mode() == m).expect("all modes built");
        let mut out = Vec::new();
        for &method in methods {
            let path = self.path(&format!("exposure/{}.{}.csv", tf.name, method.tag().to_ascii_lowercase()));
            let base = graph_of(EdgeMode::Undirected);
            if path.is_file() {
                for (c, m, v) in read_exposures(base, method, open(&path)?)? {
                    out.push((method, c, m, v));
                }
                continue;
            }
            let runs = stage("propagate", || {
                exposure_runs(&[method])
                    .into_iter()
                    .map(|(method, c, mode)| {
                        let v = propagate(graph_of(mode), labels, method, c, &self.cfg.propagation)?;
                        log::debug!("{} {} {c} {mode}: {} iterations", tf.name, method.tag(), v.iterations_run);
                        Ok((c, mode, v))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let refs: Vec<(SeedCriterion, EdgeMode, &ExposureVector)> = runs.iter().map(|(c, m, v)| (*c, *m, v)).collect();
            write_atomic(&path, |w| write_exposures(base, &refs, w))?;
            out.extend(runs.into_iter().map(|(c, m, v)| (method, c, m, v)));
        }
        Ok(out)
    }

    /// Homophily statistics of a timeframe's undirected graph.
    pub fn netstats(&mut self, tf: &Timeframe, graphs: &[CallGraph], labels: &NodeLabelSet) -> Result<NetstatsRow> {
        let path = self.path(&format!("netstats/{}.json", tf.name));
        if path.is_file() {
            return read_json(&path);
        }
        stage("netstats", || {
            let g = graphs.iter().find(|g| g.mode() == EdgeMode::Undirected).unwrap();
            let report = homophily_test(g, labels.default_labels())?;
            let null = match self.cfg.netstats.permutations {
                0 => None,
                k => Some(permutation_null(
                    g,
                    labels.default_labels(),
                    k,
                    rng::child_seed(self.cfg.seed, "netstats", 0),
                )?),
            };
            let row = NetstatsRow {
                timeframe: tf.name.clone(),
                report,
                null_dyadicity: null.map(|n| n.0),
                null_heterophilicity: null.map(|n| n.1),
            };
            write_json(&path, &row)?;
            Ok(row)
        })
    }

    /// Features over all timeframes plus network statistics per timeframe.
    pub fn features(&mut self) -> Result<Features> {
        let timeframes = self.cfg.timeframes.timeframes();
        let groups = self.cfg.feature_groups();
        let methods: Vec<Method> = [Method::PageRank, Method::SpreadingActivation]
            .into_iter()
            .filter(|m| groups.contains(&crate::features::FeatureGroup::of_method(*m)))
            .collect();
        let matrix_path = self.path("features/matrix.csv");
        let loans_path = self.path("features/loans.csv");
        let summary_path = self.path("features/summary.json");
        let features_cached = matrix_path.is_file() && loans_path.is_file() && summary_path.is_file();
        let mut parts = Vec::new();
        let mut netstats = Vec::new();
        for tf in &timeframes {
            let ns_path = self.path(&format!("netstats/{}.json", tf.name));
            if features_cached && ns_path.is_file() {
                netstats.push(read_json(&ns_path)?);
                continue;
            }
            let graphs = self.graphs(tf)?;
            let base = graphs.iter().find(|g| g.mode() == EdgeMode::Undirected).unwrap();
            let labels = self.labels(tf, base)?;
            netstats.push(self.netstats(tf, &graphs, &labels)?);
            if features_cached {
                continue;
            }
            let exposures = self.exposures(tf, &graphs, &labels, &methods)?;
            let relabelings = stage("propagate", || {
                exposures
                    .iter()
                    .map(|(_, _, _, v)| Ok(relabel_high_risk(v, exposure_cutoff(v, &labels)?)))
                    .collect::<Result<Vec<_>>>()
            })?;
            let inputs: Vec<ExposureInput<'_>> = exposures
                .iter()
                .zip(&relabelings)
                .map(|((method, criterion, mode, exposure), relabeling)| ExposureInput {
                    method: *method,
                    criterion: *criterion,
                    mode: *mode,
                    exposure,
                    relabeling,
                })
                .collect();
            let cfg = self.cfg;
            let part = stage("featurize", || {
                self.ensure_records()?;
                self.ensure_bank()?;
                featurize_timeframe(
                    &TimeframeInputs {
                        name: &tf.name,
                        card_month: tf.card_month,
                        window: tf.window(),
                        records: self.records.as_deref().unwrap(),
                        bank: self.bank.as_ref().unwrap(),
                        graphs: &graphs,
                        labels: &labels,
                        exposures: &inputs,
                        day: cfg.features.day,
                    },
                    &groups,
                )
            })?;
            log::info!("{}: {} subjects featurized", tf.name, part.matrix.n_rows());
            parts.push(part);
        }
        if features_cached {
            return stage("featurize", || {
                let matrix = FeatureMatrix::read_csv(open(&matrix_path)?)?;
                let (ids, loans) = read_loans(open(&loans_path)?)?;
                if ids != matrix.row_ids() {
                    return Err(Error::invalid("cached loans do not match the feature matrix"));
                }
                Ok(Features {
                    matrix,
                    loans,
                    summary: read_json(&summary_path)?,
                    netstats,
                })
            });
        }
        stage("featurize", || {
            let summary = FeatureSummary {
                timeframes: timeframes
                    .iter()
                    .zip(&parts)
                    .map(|(tf, p)| TimeframeSummary {
                        timeframe: tf.name.clone(),
                        card_month: tf.card_month.to_string(),
                        subjects: p.matrix.n_rows(),
                        defaults: p.matrix.y().iter().filter(|&&d| d).count(),
                        dropped_subjects: p.dropped_subjects,
                    })
                    .collect(),
            };
            let all = assemble(parts)?;
            write_atomic(&loans_path, |w| write_loans(all.matrix.row_ids(), &all.loans, w))?;
            write_json(&summary_path, &summary)?;
            write_atomic(&matrix_path, |w| all.matrix.write_csv(w))?;
            Ok(Features {
                matrix: all.matrix,
                loans: all.loans,
                summary,
                netstats,
            })
        })
    }

    /// Partitions the rows and fixes the EMP parameters; the loss point
    /// masses come from the training loans when so configured.
    pub fn split(&self, f: &Features) -> Result<Split> {
        let cfg = self.cfg;
        let partition = stage("split", || partition(f.matrix.y(), cfg))?;
        let emp = stage("evaluate", || {
            let p = cfg.emp.params();
            if cfg.emp.estimate_point_masses {
                let train_loans: Vec<LoanOutcome> = partition.train.iter().map(|&r| f.loans[r]).collect();
                p.with_point_masses(&train_loans)
            } else {
                Ok(p)
            }
        })?;
        Ok(Split { partition, emp })
    }

    /// Columns, fitted model and test subset of one (model, classifier) pair.
    fn fitted(&self, f: &Features, s: &Split, model: &str, kind: ModelKind) -> Result<(FeatureMatrix, FittedModel)> {
        let part = &s.partition;
        let tag = format!("{model}.{}", kind.name());
        let model_path = self.path(&format!("models/{tag}.json"));
        let cols = model_columns(&f.matrix, model, &part.train, self.cfg.features.correlation_threshold)?;
        let sub = f.matrix.select_columns(&cols);
        if model_path.is_file() {
            let fitted: FittedModel = read_json(&model_path)?;
            if fitted.features != sub.names() || fitted.model.kind() != kind {
                return Err(Error::invalid(format!("cached model {tag} does not match its features")));
            }
            return Ok((sub, fitted));
        }
        let fit_set = Dataset::from_matrix(&sub).subset(&part.fit);
        let (m, _) = stage("train", || fit_classifier(kind, &fit_set, self.cfg))?;
        let fitted = FittedModel {
            features: sub.names().to_vec(),
            model: m,
        };
        write_atomic(&model_path, |w| Ok(serde_json::to_writer(w, &fitted)?))?;
        Ok((sub, fitted))
    }

    /// Fits (or loads) one model and evaluates it on the test rows.
    pub fn train(&self, f: &Features, s: &Split, model: &str, kind: ModelKind) -> Result<Trained> {
        let part = &s.partition;
        let tag = format!("{model}.{}", kind.name());
        let scores_path = self.path(&format!("scores/{tag}.csv"));
        let info_path = self.path(&format!("models/{tag}.info.json"));
        let test_ids: Vec<String> = part.test.iter().map(|&r| f.matrix.row_ids()[r].clone()).collect();
        let y_test: Vec<bool> = part.test.iter().map(|&r| f.matrix.y()[r]).collect();
        let test_loans: Vec<LoanOutcome> = part.test.iter().map(|&r| f.loans[r]).collect();

        let (scores, info) = if scores_path.is_file() && info_path.is_file() {
            let sf = read_scores(open(&scores_path)?)?;
            if sf.row_ids != test_ids {
                return Err(Error::invalid(format!("cached scores {tag} do not match the test rows")));
            }
            (sf.scores, read_json::<TrainInfo>(&info_path)?)
        } else {
            log::info!("model {tag}");
            let (sub, fitted) = self.fitted(f, s, model, kind)?;
            let scores = fitted.model.predict(&Dataset::from_matrix(&sub).subset(&part.test));
            let info = TrainInfo {
                n_features: sub.n_features(),
                n_fit: part.fit.len(),
                chosen_depth: match &fitted.model {
                    Model::Tree(t) => Some(t.depth),
                    _ => None,
                },
            };
            write_json(&info_path, &info)?;
            write_atomic(&scores_path, |w| write_scores(&test_ids, &y_test, &scores, w))?;
            (scores, info)
        };

        let row = stage("evaluate", || {
            let profit = evaluate_profit(&scores, &test_loans, &s.emp)?;
            Ok(ModelRow {
                model: model.to_string(),
                classifier: kind,
                groups: model_groups(model)
                    .unwrap()
                    .iter()
                    .map(|g| g.tag())
                    .collect::<Vec<_>>()
                    .join("+"),
                n_features: info.n_features,
                n_fit: info.n_fit,
                n_test: scores.len(),
                n_test_defaults: y_test.iter().filter(|&&d| d).count(),
                chosen_depth: info.chosen_depth,
                auc: auc(&scores, &y_test)?,
                emp: profit.emp,
                emp_fraction: profit.emp_fraction,
                cutoff: profit.implied_cutoff,
                n_rejected: profit.n_rejected,
                model_profit: profit.model_profit,
                no_model_profit: profit.no_model_profit,
            })
        })?;
        Ok(Trained { row, scores })
    }

    /// Trains and evaluates every configured (classifier, model) pair.
    pub fn train_all(&mut self) -> Result<Vec<ModelRow>> {
        let f = self.features()?;
        self.release_inputs();
        let s = self.split(&f)?;
        let mut rows = Vec::new();
        for &kind in &self.cfg.classifiers {
            for model in &self.cfg.models {
                rows.push(self.train(&f, &s, model, kind)?.row);
            }
        }
        Ok(rows)
    }

    /// Profit and accuracy importance of a model's forest on the test rows.
    fn importance_with(&self, f: &Features, s: &Split, model: &str) -> Result<ImportanceTable> {
        let path = self.path(&format!("models/{model}.forest.importance.csv"));
        if path.is_file() {
            return ImportanceTable::read_csv(open(&path)?);
        }
        let (sub, fitted) = self.fitted(f, s, model, ModelKind::Forest)?;
        let Model::Forest(forest) = &fitted.model else {
            return Err(Error::invalid(format!("model {model}.forest is not a forest")));
        };
        let test_set = Dataset::from_matrix(&sub).subset(&s.partition.test);
        let test_loans: Vec<LoanOutcome> = s.partition.test.iter().map(|&r| f.loans[r]).collect();
        let groups: Vec<String> = sub.groups().iter().map(|g| g.to_string()).collect();
        let table = stage("importance", || {
            forest_importance(forest, &test_set, &test_loans, sub.names(), &groups, self.cfg)
        })?;
        write_atomic(&path, |w| table.write_csv(w))?;
        Ok(table)
    }

    /// Importance table of a model's forest; `None` when forests are not
    /// among the configured classifiers.
    pub fn importance(&mut self, model: &str) -> Result<Option<ImportanceTable>> {
        if !self.cfg.classifiers.contains(&ModelKind::Forest) {
            return Ok(None);
        }
        let f = self.features()?;
        self.release_inputs();
        let s = self.split(&f)?;
        self.importance_with(&f, &s, model).map(Some)
    }
}

fn save_graph(g: &CallGraph, prefix: &Path) -> Result<()> {
    // save to a temporary prefix, then move both files into place
    let mut tmp = prefix.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    if let Some(dir) = prefix.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    g.save(&tmp)?;
    for s in ["nodes.csv", "edges.csv"] {
        let from = PathBuf::from(format!("{}.{s}", tmp.display()));
        let to = PathBuf::from(format!("{}.{s}", prefix.display()));
        fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
    }
    Ok(())
}

/// Runs every stage and writes the reports under `<output>/report`.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut exp = Experiment::open(cfg)?;
    exp.ingest()?;
    let f = exp.features()?;
    exp.release_inputs();
    let s = exp.split(&f)?;
    let y_test: Vec<bool> = s.partition.test.iter().map(|&r| f.matrix.y()[r]).collect();

    let mut rows = Vec::new();
    let mut scores: Vec<(String, ModelKind, Vec<f64>)> = Vec::new();
    for &kind in &cfg.classifiers {
        for model in &cfg.models {
            let t = exp.train(&f, &s, model, kind)?;
            rows.push(t.row);
            scores.push((model.clone(), kind, t.scores));
        }
    }
    let mut importance = Vec::new();
    if cfg.classifiers.contains(&ModelKind::Forest) {
        for model in cfg.importance.models.iter().filter(|m| cfg.models.contains(m)) {
            let table = exp.importance_with(&f, &s, model)?;
            importance.push(ModelImportance {
                model: model.clone(),
                table,
            });
        }
    }

    let report = stage("compare", || {
        let mut delong = Vec::new();
        let mut ranks = Vec::new();
        for &kind in &cfg.classifiers {
            let of_kind: Vec<&(String, ModelKind, Vec<f64>)> = scores.iter().filter(|s| s.1 == kind).collect();
            for (i, a) in of_kind.iter().enumerate() {
                for b in &of_kind[i + 1..] {
                    let d = delong_test(&a.2, &b.2, &y_test)?;
                    delong.push(DelongRow {
                        classifier: kind,
                        model_a: a.0.clone(),
                        model_b: b.0.clone(),
                        result: d,
                    });
                }
            }
            let kind_rows: Vec<&ModelRow> = rows.iter().filter(|r| r.classifier == kind).collect();
            if kind_rows.len() >= 2 {
                let a: Vec<f64> = kind_rows.iter().map(|r| r.auc).collect();
                let e: Vec<f64> = kind_rows.iter().map(|r| r.emp).collect();
                ranks.push(RankRow {
                    classifier: kind,
                    n_models: kind_rows.len(),
                    correlations: rank_correlations(&a, &e)?,
                });
            }
        }
        let sweep_scores = scores
            .iter()
            .find(|x| x.0 == cfg.sweep.model && x.1 == cfg.primary_classifier);
        let (sweep_roi, sweep_lgd) = match sweep_scores {
            Some(x) if !cfg.sweep.model.is_empty() => (
                sensitivity_sweep(&x.2, &y_test, &s.emp, SweepParameter::Roi, &cfg.sweep.roi_grid)?,
                sensitivity_sweep(&x.2, &y_test, &s.emp, SweepParameter::Lgd, &cfg.sweep.lgd_grid)?,
            ),
            _ => (Vec::new(), Vec::new()),
        };
        Ok(ExperimentReport {
            models: rows,
            delong,
            rank_correlations: ranks,
            importance,
            netstats: f.netstats.clone(),
            sweep_roi,
            sweep_lgd,
            n_rows: f.matrix.n_rows(),
            n_train: s.partition.train.len(),
            n_fit: s.partition.fit.len(),
            n_test: s.partition.test.len(),
            features: f.summary.clone(),
            emp_params: s.emp,
            ..ExperimentReport::empty(cfg)
        })
    })?;
    stage("report", || report.write_dir(&exp.path("report")))?;
    Ok(report)
}

/// EMP over a grid of ROI or LGD values on the test scores of one model.
pub fn sweep_scores(scores: &ScoreFile, emp: &EmpParams, parameter: SweepParameter, grid: &[f64]) -> Result<Vec<crate::eval::SweepRow>> {
    sensitivity_sweep(&scores.scores, &scores.y, emp, parameter, grid)
}

/// Ranked importances with their feature names.
pub fn named_importances<'n>(ranked: &[FeatureImportance], names: &'n [String]) -> Vec<(&'n str, Option<f64>)> {
    ranked.iter().map(|f| (names[f.feature].as_str(), f.value)).collect()
}
