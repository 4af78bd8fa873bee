//! `callnet`: call-network credit scoring from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 convergence failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use callnet::calendar::Timeframe;
use callnet::eval::{auc, delong_test, evaluate_profit, roc_curve, EmpParams, SweepParameter};
use callnet::features::{parse_groups, FeatureMatrix};
use callnet::graph::EdgeMode;
use callnet::loans::{read_loans, LoanOutcome};
use callnet::models::{Dataset, FittedModel, ModelKind};
use callnet::pipeline::{
    self, aligned_table, open, read_scores, run_pipeline, write_scores, Experiment, ExperimentConfig, ScoreFile,
};
use callnet::propagation::Method;
use callnet::synth::{generate, SynthConfig};
use callnet::{Error, Result};

#[derive(Parser)]
#[command(name = "callnet", version, about = "Credit scoring with call networks")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment configuration file (TOML).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Directory with cdr.csv, accounts.csv, transactions.csv, card_activity.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a configuration key, e.g. `--set emp.roi=0.1` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic CDR and bank dataset.
    Synth {
        /// Generator configuration file (TOML).
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the CSV files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a generator key, e.g. `--set n_nodes=5000` (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Clean the call records and join the bank extracts.
    Ingest(ConfigArgs),
    /// Build the incoming, outgoing and undirected call graphs per timeframe.
    BuildGraph {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Only this timeframe (t1, t2, ...).
        #[arg(long)]
        timeframe: Option<String>,
    },
    /// Compute exposure scores from delinquent seeds.
    Propagate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        timeframe: Option<String>,
        /// pr or spa; both by default.
        #[arg(long)]
        method: Option<Method>,
    },
    /// Build the subject feature matrix over all timeframes.
    Featurize {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Feature groups, e.g. `sd,cb,lb,pr,spa`.
        #[arg(long)]
        groups: Option<String>,
        /// Correlation pruning threshold.
        #[arg(long)]
        corr_threshold: Option<f64>,
    },
    /// Homophily test, dyadicity and heterophilicity per timeframe.
    Netstats {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        timeframe: Option<String>,
        /// Label permutations for the null means.
        #[arg(long)]
        permutations: Option<usize>,
    },
    /// Fit models and score the test set.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Model ids A..H (repeatable); the configured ones by default.
        #[arg(long)]
        model: Vec<String>,
        /// logit, tree or forest (repeatable).
        #[arg(long)]
        classifier: Vec<ModelKind>,
    },
    /// Score a feature matrix with a saved model.
    Predict {
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Feature matrix CSV.
        #[arg(long)]
        features: PathBuf,
        /// Scores CSV; standard output by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// AUC, EMP, EMP fraction, cutoff and profit of a score file.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        /// Loans CSV (row_id, credit_limit, ead, default).
        #[arg(long)]
        loans: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        roi: f64,
        #[arg(long, default_value_t = 0.8)]
        lgd: f64,
        /// Loss point masses; estimated from the loans when omitted.
        #[arg(long)]
        p0: Option<f64>,
        #[arg(long)]
        p1: Option<f64>,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Feature importance of a forest model.
    Importance {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Model id.
        #[arg(long, default_value = "H")]
        model: String,
        #[arg(long, value_enum, default_value_t = ImportanceKind::Profit)]
        kind: ImportanceKind,
        /// Rows to print (0 prints all).
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Compare score files on the same test set.
    Compare {
        /// Score files (at least two).
        #[arg(long, num_args = 2.., required = true)]
        scores: Vec<PathBuf>,
        /// Pairwise DeLong tests.
        #[arg(long)]
        delong: bool,
    },
    /// EMP over a grid of ROI or LGD values on fixed scores.
    Sweep {
        #[arg(long)]
        scores: PathBuf,
        /// Loans CSV used to estimate the loss point masses.
        #[arg(long)]
        loans: Option<PathBuf>,
        #[arg(long, default_value = "roi")]
        parameter: SweepParameter,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0.01:0.2:0.01")]
        grid: String,
        #[arg(long, default_value_t = 0.05)]
        roi: f64,
        #[arg(long, default_value_t = 0.8)]
        lgd: f64,
    },
    /// The full pipeline with reports.
    Run(ConfigArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ImportanceKind {
    Profit,
    Accuracy,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_sets(sets: &[String]) -> Result<Vec<(String, String)>> {
    sets.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| usage(format!("expected KEY=VALUE, got `{s}`")))
        })
        .collect()
}

fn load_config(a: &ConfigArgs) -> Result<ExperimentConfig> {
    let (text, base) = match &a.config {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            p.parent().map(PathBuf::from).unwrap_or_default(),
        ),
        None => (String::new(), PathBuf::new()),
    };
    let mut cfg = ExperimentConfig::from_toml(&text, &base, &parse_sets(&a.set)?)?;
    if let Some(d) = &a.data {
        cfg.paths = pipeline::Paths::inputs_in(d, cfg.paths.output.clone());
    }
    if let Some(o) = &a.out {
        cfg.paths.output = o.clone();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn select_timeframes(cfg: &ExperimentConfig, only: &Option<String>) -> Result<Vec<Timeframe>> {
    let all = cfg.timeframes.timeframes();
    match only {
        None => Ok(all),
        Some(name) => all
            .into_iter()
            .find(|t| &t.name == name)
            .map(|t| vec![t])
            .ok_or_else(|| usage(format!("no timeframe `{name}`"))),
    }
}

fn print_config(cfg: &ExperimentConfig) {
    print!("{}", cfg.to_toml());
}

fn grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || usage(format!("bad grid `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
        let (start, stop, step) = (v[0], v[1], v[2]);
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| start + k as f64 * step).collect());
    }
    spec.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

fn loans_for(scores: &ScoreFile, path: &PathBuf) -> Result<Vec<LoanOutcome>> {
    let (ids, loans) = read_loans(open(path)?)?;
    let index: std::collections::HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    scores
        .row_ids
        .iter()
        .zip(&scores.y)
        .map(|(id, &y)| {
            let l = *index
                .get(id.as_str())
                .map(|&i| &loans[i])
                .ok_or_else(|| Error::invalid(format!("no loan for row `{id}`")))?;
            if l.is_defaulter != y {
                return Err(Error::invalid(format!("row `{id}`: score label disagrees with the loan")));
            }
            Ok(l)
        })
        .collect()
}

fn emp_params(roi: f64, lgd: f64, p0: Option<f64>, p1: Option<f64>, loans: Option<&[LoanOutcome]>) -> Result<EmpParams> {
    let mut p = EmpParams {
        roi,
        lgd,
        ..Default::default()
    };
    if let Some(l) = loans {
        p = p.with_point_masses(l)?;
    }
    if let Some(v) = p0 {
        p.p0 = v;
    }
    if let Some(v) = p1 {
        p.p1 = v;
    }
    p.validate()?;
    Ok(p)
}

fn execute(command: Command) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    let mut out = |s: String| {
        let _ = stdout.write_all(s.as_bytes());
    };
    match command {
        Command::Synth {
            config,
            seed,
            out: dir,
            set,
            print_config: print,
        } => {
            let text = match &config {
                Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
                None => String::new(),
            };
            let mut cfg = SynthConfig::from_toml(&text, &parse_sets(&set)?)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if print {
                out(toml::to_string(&cfg).expect("config serialises"));
                return Ok(());
            }
            let dir = dir.ok_or_else(|| usage("synth needs --out"))?;
            let data = generate(&cfg)?;
            data.write_to_dir(&dir)?;
            out(format!(
                "{} calls, {} card holders, {} subjects, realised default rate {:.4}\n",
                data.records.len(),
                data.bank_records.len(),
                cfg.n_subjects,
                data.realized_default_rate()
            ));
        }
        Command::Ingest(a) => {
            let cfg = load_config(&a)?;
            if a.print_config {
                print_config(&cfg);
                return Ok(());
            }
            let mut exp = Experiment::open(&cfg)?;
            exp.ingest()?;
            out(std::fs::read_to_string(exp.path("ingest/summary.json")).map_err(|e| Error::io("summary.json", e))?);
        }
        Command::BuildGraph { cfg: a, timeframe } => {
            let cfg = load_config(&a)?;
            if a.print_config {
                print_config(&cfg);
                return Ok(());
            }
            let mut exp = Experiment::open(&cfg)?;
            exp.ingest()?;
            let mut rows = Vec::new();
            for tf in select_timeframes(&cfg, &timeframe)? {
                for g in exp.graphs(&tf)? {
                    rows.push(vec![
                        tf.name.clone(),
                        g.mode().to_string(),
                        g.n_nodes().to_string(),
                        g.n_edges().to_string(),
                        g.total_weight().to_string(),
                    ]);
                }
            }
            out(aligned_table(&["timeframe", "mode", "nodes", "edges", "calls"], &rows));
        }
        Command::Propagate {
            cfg: a,
            timeframe,
            method,
        } => {
            let cfg = load_config(&a)?;
            if a.print_config {
                print_config(&cfg);
                return Ok(());
            }
            let methods = match method {
                Some(m) => vec![m],
                None => vec![Method::PageRank, Method::SpreadingActivation],
            };
            let mut exp = Experiment::open(&cfg)?;
            exp.ingest()?;
            let mut rows = Vec::new();
            for tf in select_timeframes(&cfg, &timeframe)? {
                let graphs = exp.graphs(&tf)?;
                let base = graphs.iter().find(|g| g.mode() == EdgeMode::Undirected).unwrap();
                let labels = exp.labels(&tf, base)?;
                for (m, c, mode, v) in exp.exposures(&tf, &graphs, &labels, &methods)? {
                    let cutoff = callnet::propagation::exposure_cutoff(&v, &labels)?;
                    let high = callnet::propagation::relabel_high_risk(&v, cutoff).n_high_risk();
                    rows.push(vec![
                        tf.name.clone(),
                        m.tag().to_string(),
                        c.to_string(),
                        mode.to_string(),
                        format!("{cutoff:.3e}"),
                        high.to_string(),
                    ]);
                }
            }
            out(aligned_table(&["timeframe", "method", "seeds", "mode", "cutoff", "high risk"], &rows));
        }
        Command::Featurize {
            cfg: a,
            groups,
            corr_threshold,
        } => {
            let mut cfg = load_config(&a)?;
            if let Some(g) = groups {
                cfg.features.groups = Some(parse_groups(&g).map_err(usage)?);
            }
            if corr_threshold.is_some() {
                cfg.features.correlation_threshold = corr_threshold;
            }
            cfg.validate()?;
            if a.print_config {
                print_config(&cfg);
                return Ok(());
            }
            let mut exp = Experiment::open(&cfg)?;
            exp.ingest()?;
            let f = exp.features()?;
            let counts: Vec<Vec<String>> = f
                .matrix
                .group_counts()
                .into_iter()
                .map(|(g, n)| vec![g.to_string(), n.to_string()])
                .collect();
            out(format!(
                "{} subjects, {} features -> {}\n",
                f.matrix.n_rows(),
                f.matrix.n_features(),
                exp.path("features/matrix.csv").display()
            ));
            out(aligned_table(&["group", "features"], &counts));
        }
        Command::Netstats {
            cfg: a,
            timeframe,
            permutations,
        } => {
            let mut cfg = load_config(&a)?;
            if let Some(p) = permutations {
                cfg.netstats.permutations = p;
            }
            if a.print_config {
                print_config(&cfg);
                return Ok(());
            }
            let mut exp = Experiment::open(&cfg)?;
            exp.ingest()?;
            for tf in select_timeframes(&cfg, &timeframe)? {
                let graphs = exp.graphs(&tf)?;
                let base = graphs.iter().find(|g| g.mode() == EdgeMode::Undirected).unwrap();
                let labels = exp.labels(&tf, base)?;
                let row = exp.netstats(&tf, &graphs, &labels)?;
                out(format!("timeframe {}\n{}", tf.name, row.report.to_text()));
                if let (Some(d), Some(h)) = (row.null_dyadicity, row.null_heterophilicity) {
                    out(format!("permutation null: D {d:.4}  H {h:.4}\n"));
                }
            }
        }
        Command::Train {
            cfg: a,
            model,
            classifier,
        } => {
            let mut cfg = load_config(&a)?;
            if !model.is_empty() {
                cfg.models = model;
            }
            if !classifier.is_empty() {
                cfg.primary_classifier = classifier[0];
                cfg.classifiers = classifier;
            }
            if !cfg.models.contains(&cfg.sweep.model) {
                cfg.sweep.model.clear();
            }
            cfg.validate()?;
            if a.print_config {
                print_config(&cfg);
                return Ok(());
            }
            let mut exp = Experiment::open(&cfg)?;
            exp.ingest()?;
            let rows = exp.train_all()?;
            let report = pipeline::ExperimentReport {
                models: rows,
                ..pipeline::ExperimentReport::empty(&cfg)
            };
            out(report.models_table());
        }
        Command::Predict {
            model,
            features,
            out: path,
        } => {
            let fitted: FittedModel = pipeline::read_json(&model)?;
            let matrix = FeatureMatrix::read_csv(open(&features)?)?.select_names(&fitted.features)?;
            let scores = fitted.model.predict(&Dataset::from_matrix(&matrix));
            match path {
                Some(p) => pipeline::write_atomic(&p, |w| write_scores(matrix.row_ids(), matrix.y(), &scores, w))?,
                None => {
                    let mut buf = Vec::new();
                    write_scores(matrix.row_ids(), matrix.y(), &scores, &mut buf)?;
                    out(String::from_utf8(buf).expect("utf-8 csv"));
                }
            }
        }
        Command::Evaluate {
            scores,
            loans,
            roi,
            lgd,
            p0,
            p1,
            json,
        } => {
            let s = read_scores(open(&scores)?)?;
            let l = loans_for(&s, &loans)?;
            let params = emp_params(roi, lgd, p0, p1, Some(&l))?;
            let r = evaluate_profit(&s.scores, &l, &params)?;
            let a = auc(&s.scores, &s.y)?;
            if json {
                let v = serde_json::json!({ "auc": a, "params": params, "profit": r });
                out(format!("{}\n", serde_json::to_string_pretty(&v)?));
            } else {
                let rows = vec![
                    vec!["instances".into(), s.scores.len().to_string()],
                    vec!["defaulters".into(), s.y.iter().filter(|&&d| d).count().to_string()],
                    vec!["ROC points".into(), roc_curve(&s.scores, &s.y)?.len().to_string()],
                    vec!["AUC".into(), format!("{a:.4}")],
                    vec!["p0 / p1".into(), format!("{:.4} / {:.4}", params.p0, params.p1)],
                    vec!["EMP".into(), format!("{:.6}", r.emp)],
                    vec!["EMP fraction".into(), format!("{:.4}", r.emp_fraction)],
                    vec!["cutoff".into(), format!("{:.6}", r.implied_cutoff)],
                    vec!["rejected".into(), r.n_rejected.to_string()],
                    vec!["model profit".into(), r.model_profit.to_string()],
                    vec!["no-model profit".into(), r.no_model_profit.to_string()],
                ];
                out(aligned_table(&["measure", "value"], &rows));
            }
        }
        Command::Importance {
            cfg: a,
            model,
            kind,
            top,
        } => {
            let mut cfg = load_config(&a)?;
            cfg.models = vec![model.clone()];
            cfg.classifiers = vec![ModelKind::Forest];
            cfg.primary_classifier = ModelKind::Forest;
            cfg.sweep.model = model.clone();
            cfg.validate()?;
            if a.print_config {
                print_config(&cfg);
                return Ok(());
            }
            let mut exp = Experiment::open(&cfg)?;
            exp.ingest()?;
            let table = exp
                .importance(&model)?
                .ok_or_else(|| Error::invalid("importance needs a forest model"))?;
            let mut rows = table.rows;
            if let ImportanceKind::Accuracy = kind {
                rows.sort_by_key(|r| r.accuracy_rank);
            }
            let n = if top == 0 { rows.len() } else { top.min(rows.len()) };
            let lines: Vec<Vec<String>> = rows[..n]
                .iter()
                .map(|r| {
                    let (rank, v) = match kind {
                        ImportanceKind::Profit => (r.profit_rank, r.profit),
                        ImportanceKind::Accuracy => (r.accuracy_rank, r.accuracy),
                    };
                    vec![
                        rank.to_string(),
                        r.feature.clone(),
                        r.group.clone(),
                        v.map_or("undefined".into(), |x| format!("{x:.6}")),
                    ]
                })
                .collect();
            out(aligned_table(&["rank", "feature", "group", "importance"], &lines));
        }
        Command::Compare { scores, delong } => {
            let files: Vec<ScoreFile> = scores.iter().map(|p| read_scores(open(p)?)).collect::<Result<_>>()?;
            for (p, f) in scores.iter().zip(&files).skip(1) {
                if f.row_ids != files[0].row_ids || f.y != files[0].y {
                    return Err(Error::invalid(format!("{} scores a different test set", p.display())));
                }
            }
            let names: Vec<String> = scores.iter().map(|p| p.display().to_string()).collect();
            let rows: Vec<Vec<String>> = names
                .iter()
                .zip(&files)
                .map(|(n, f)| Ok(vec![n.clone(), format!("{:.4}", auc(&f.scores, &f.y)?)]))
                .collect::<Result<_>>()?;
            out(aligned_table(&["scores", "AUC"], &rows));
            if delong {
                let mut rows = Vec::new();
                for i in 0..files.len() {
                    for j in i + 1..files.len() {
                        let d = delong_test(&files[i].scores, &files[j].scores, &files[0].y)?;
                        rows.push(vec![
                            format!("{} vs {}", names[i], names[j]),
                            format!("{:+.4}", d.auc_diff),
                            format!("{:.3}", d.z),
                            format!("{:.4}", d.p_value),
                        ]);
                    }
                }
                out("\n".into());
                out(aligned_table(&["pair", "AUC diff", "z", "p"], &rows));
            }
        }
        Command::Sweep {
            scores,
            loans,
            parameter,
            grid: spec,
            roi,
            lgd,
        } => {
            let s = read_scores(open(&scores)?)?;
            let l = loans.as_ref().map(|p| loans_for(&s, p)).transpose()?;
            let params = emp_params(roi, lgd, None, None, l.as_deref())?;
            let rows = pipeline::sweep_scores(&s, &params, parameter, &grid(&spec)?)?;
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["value", "emp", "emp_fraction"])?;
                for r in rows {
                    w.write_record([r.value.to_string(), r.emp.to_string(), r.emp_fraction.to_string()])?;
                }
                w.flush().map_err(|e| Error::io("<stdout>", e))?;
            }
            out(String::from_utf8(buf).expect("utf-8 csv"));
        }
        Command::Run(a) => {
            let cfg = load_config(&a)?;
            if a.print_config {
                print_config(&cfg);
                return Ok(());
            }
            let report = run_pipeline(&cfg)?;
            out(report.to_text());
            out(format!("\nreports in {}\n", cfg.paths.output.join("report").display()));
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 1,
        Error::NoConvergence { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
