//! Synthetic call-detail and bank data with controllable homophily and
//! planted default signal.
//!
//! Every node carries a latent risk type. Edges are drawn Chung–Lu style from
//! per-node degree weights, and an edge joining nodes of different risk type
//! is kept with probability `1 / homophily_strength`. Risky nodes call more
//! at night and for longer, and older card holders who are risky fall into
//! arrears more often. A subject's default probability is logistic in its
//! own risk type, a financial-stress score that also shapes its spending
//! and demographics, and the delinquency of its neighbours:
//!
//! ```text
//! logit P(default) = b0 + effect · (risk_weight · (r − share) + stress_weight · stress + contagion · c)
//! ```
//!
//! `b0` is calibrated so the mean probability over subjects equals
//! `default_rate`; `effect = 0` removes all signal.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, LogNormal, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::{Timeframe, YearMonth};
use crate::error::{Error, Result};
use crate::ingest::{write_bank, write_cdr, BankRecord, CdrRecord, Sociodemographics, ARREARS_MONTHS};
use crate::loans::LoanOutcome;
use crate::models::Dataset;
use crate::money::Money;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeModel {
    /// Truncated Pareto weights with the given exponent; `cutoff` is the
    /// largest weight relative to the smallest.
    PowerLaw { exponent: f64, cutoff: f64 },
    /// Equal weights, giving roughly Poisson degrees.
    Poisson,
}

impl Default for DegreeModel {
    fn default() -> Self {
        DegreeModel::PowerLaw {
            exponent: 2.5,
            cutoff: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_nodes: usize,
    /// Card holders scored across all timeframes.
    pub n_subjects: usize,
    /// Share of the remaining nodes holding an older card.
    pub card_holder_share: f64,
    /// Share of the remaining nodes with an account but no card.
    pub cardless_share: f64,
    /// First month of call records.
    pub start_month: YearMonth,
    /// Months of call records.
    pub months: u32,
    /// Months of calls preceding each card month.
    pub window_months: u32,
    pub default_rate: f64,
    pub homophily_strength: f64,
    /// Share of nodes of the risky type.
    pub risky_share: f64,
    pub degree: DegreeModel,
    pub mean_degree: f64,
    pub calls_per_edge: f64,
    /// Share of calls shorter than five seconds.
    pub short_call_share: f64,
    pub planted_feature_effect: f64,
    pub risk_weight: f64,
    pub stress_weight: f64,
    pub contagion: f64,
    /// Monthly arrears probability of older card holders by risk type.
    pub arrears_rate_safe: f64,
    pub arrears_rate_risky: f64,
    /// Shares of defaults that lose nothing and that lose the full limit.
    pub zero_loss_share: f64,
    pub full_loss_share: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_nodes: 20_000,
            n_subjects: 4_500,
            card_holder_share: 0.3,
            cardless_share: 0.05,
            start_month: YearMonth::new(2015, 1).unwrap(),
            months: 5,
            window_months: 3,
            default_rate: 0.0449,
            homophily_strength: 4.0,
            risky_share: 0.15,
            degree: DegreeModel::default(),
            mean_degree: 8.0,
            calls_per_edge: 3.0,
            short_call_share: 0.05,
            planted_feature_effect: 1.0,
            risk_weight: 2.8,
            stress_weight: 0.8,
            contagion: 2.5,
            arrears_rate_safe: 0.02,
            arrears_rate_risky: 0.3,
            zero_loss_share: 0.15,
            full_loss_share: 0.35,
        }
    }
}

impl SynthConfig {
    /// Parses TOML text with `key = value` overrides applied on top.
    pub fn from_toml(text: &str, sets: &[(String, String)]) -> Result<Self> {
        let cfg: SynthConfig = crate::pipeline::parse_with_overrides(text, sets)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n_timeframes(&self) -> usize {
        (self.months + 1).saturating_sub(self.window_months) as usize
    }

    pub fn timeframes(&self) -> Vec<Timeframe> {
        Timeframe::consecutive(self.start_month, self.window_months, self.n_timeframes())
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0,1], got {v}")))
            }
        };
        if !(self.default_rate > 0.0 && self.default_rate < 1.0) {
            return Err(Error::Config(format!("default_rate must lie in (0,1), got {}", self.default_rate)));
        }
        if self.n_subjects == 0 || self.n_subjects > self.n_nodes {
            return Err(Error::Config(format!(
                "n_subjects must lie in 1..=n_nodes ({}), got {}",
                self.n_nodes, self.n_subjects
            )));
        }
        if self.window_months == 0 || self.months < self.window_months {
            return Err(Error::Config("months must cover at least one window".into()));
        }
        if !(self.homophily_strength > 0.0 && self.homophily_strength.is_finite()) {
            return Err(Error::Config("homophily_strength must be positive".into()));
        }
        unit("card_holder_share", self.card_holder_share)?;
        unit("cardless_share", self.cardless_share)?;
        unit("risky_share", self.risky_share)?;
        unit("short_call_share", self.short_call_share)?;
        unit("arrears_rate_safe", self.arrears_rate_safe)?;
        unit("arrears_rate_risky", self.arrears_rate_risky)?;
        unit("zero_loss_share", self.zero_loss_share)?;
        unit("full_loss_share", self.full_loss_share)?;
        if self.card_holder_share + self.cardless_share > 1.0 {
            return Err(Error::Config("card_holder_share + cardless_share exceeds 1".into()));
        }
        if self.zero_loss_share + self.full_loss_share > 1.0 {
            return Err(Error::Config("zero_loss_share + full_loss_share exceeds 1".into()));
        }
        if !(self.mean_degree > 0.0) || self.mean_degree >= (self.n_nodes.saturating_sub(1)) as f64 {
            return Err(Error::Config(format!(
                "mean_degree {} infeasible for {} nodes",
                self.mean_degree, self.n_nodes
            )));
        }
        if !(self.calls_per_edge >= 1.0) {
            return Err(Error::Config("calls_per_edge must be at least 1".into()));
        }
        if let DegreeModel::PowerLaw { exponent, cutoff } = self.degree {
            if !(exponent > 1.0 && cutoff >= 1.0) {
                return Err(Error::Config("power law needs exponent > 1 and cutoff >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Subject,
    CardHolder,
    Cardless,
    TelcoOnly,
}

/// Generator-side truth for one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTruth {
    pub node_id: String,
    pub role: NodeRole,
    pub risky: bool,
    pub stress: f64,
    /// Subjects only.
    pub timeframe: Option<String>,
    pub default_probability: Option<f64>,
    pub default: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub config: SynthConfig,
    /// Sorted by time, then caller, callee and duration.
    pub records: Vec<CdrRecord>,
    /// Card holders (subjects and older cards), sorted by id.
    pub bank_records: Vec<BankRecord>,
    pub cardless_accounts: Vec<(String, Sociodemographics)>,
    pub truth: Vec<NodeTruth>,
    /// Undirected edges drawn, as indices into `truth`.
    pub edges: Vec<(u32, u32)>,
    pub intercept: f64,
}

impl SynthData {
    pub fn realized_default_rate(&self) -> f64 {
        let subjects: Vec<bool> = self.truth.iter().filter_map(|t| t.default).collect();
        subjects.iter().filter(|&&d| d).count() as f64 / subjects.len().max(1) as f64
    }

    /// Writes `cdr.csv`, `accounts.csv`, `transactions.csv`,
    /// `card_activity.csv` and `truth.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            std::fs::File::create(&p)
                .map(std::io::BufWriter::new)
                .map_err(|e| Error::io(p, e))
        };
        let mut cdr = create("cdr.csv")?;
        write_cdr(&self.records, &mut cdr, ',').map_err(|e| Error::io(dir.join("cdr.csv"), e))?;
        cdr.flush().map_err(|e| Error::io(dir.join("cdr.csv"), e))?;
        write_bank(
            &self.bank_records,
            &self.cardless_accounts,
            create("accounts.csv")?,
            create("transactions.csv")?,
            create("card_activity.csv")?,
        )?;
        let mut truth = csv::Writer::from_writer(create("truth.csv")?);
        truth.write_record(["node_id", "role", "risky", "stress", "timeframe", "default_probability", "default"])?;
        for t in &self.truth {
            truth.write_record([
                t.node_id.clone(),
                serde_json::to_value(t.role)?.as_str().unwrap_or_default().to_string(),
                u8::from(t.risky).to_string(),
                format!("{:.6}", t.stress),
                t.timeframe.clone().unwrap_or_default(),
                t.default_probability.map(|p| format!("{p:.6}")).unwrap_or_default(),
                t.default.map(|d| u8::from(d).to_string()).unwrap_or_default(),
            ])?;
        }
        truth.flush().map_err(|e| Error::io(dir.join("truth.csv"), e))?;
        Ok(())
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn degree_weights(cfg: &SynthConfig) -> Vec<f64> {
    let mut r = rng::substream(cfg.seed, "degrees");
    let raw: Vec<f64> = match cfg.degree {
        DegreeModel::Poisson => vec![1.0; cfg.n_nodes],
        DegreeModel::PowerLaw { exponent, cutoff } => {
            let a = exponent - 1.0;
            let tail = cutoff.powf(-a);
            (0..cfg.n_nodes)
                .map(|_| {
                    let u: f64 = r.random();
                    (1.0 - u * (1.0 - tail)).powf(-1.0 / a)
                })
                .collect()
        }
    };
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.into_iter().map(|w| w * cfg.mean_degree / mean).collect()
}

fn draw_edges(cfg: &SynthConfig, weights: &[f64], risky: &[bool]) -> Result<Vec<(u32, u32)>> {
    let mut r = rng::substream(cfg.seed, "edges");
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let target = (acc / 2.0).round() as usize;
    let s = cfg.homophily_strength;
    let (p_same, p_cross) = if s >= 1.0 { (1.0, 1.0 / s) } else { (s, 1.0) };
    let mut seen: HashSet<u64> = HashSet::with_capacity(target * 2);
    let mut edges = Vec::with_capacity(target);
    let max_attempts = 200 * target.max(1);
    let mut attempts = 0;
    let pick = |r: &mut ChaCha8Rng| {
        let x = r.random::<f64>() * acc;
        cumulative.partition_point(|&c| c <= x).min(weights.len() - 1)
    };
    while edges.len() < target {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Config(format!(
                "could only place {} of {target} edges; lower mean_degree or homophily_strength",
                edges.len()
            )));
        }
        let (a, b) = (pick(&mut r), pick(&mut r));
        let keep = if risky[a] == risky[b] { p_same } else { p_cross };
        if a == b || r.random::<f64>() >= keep {
            continue;
        }
        let (lo, hi) = (a.min(b) as u32, a.max(b) as u32);
        if seen.insert((u64::from(lo) << 32) | u64::from(hi)) {
            edges.push((lo, hi));
        }
    }
    edges.sort_unstable();
    Ok(edges)
}

fn random_day(r: &mut ChaCha8Rng, month: YearMonth) -> NaiveDate {
    month.first_day() + Duration::days(r.random_range(0..month.days()) as i64)
}

fn sociodemographics(r: &mut ChaCha8Rng, stress: f64) -> Sociodemographics {
    let noise = Normal::new(0.0, 9.0).unwrap();
    let age = (44.0 - 7.0 * stress + noise.sample(r)).round().clamp(18.0, 85.0) as u32;
    let marital = {
        let u: f64 = r.random();
        let single = 0.3 + 0.08 * stress.clamp(-2.0, 2.0);
        if u < single {
            "single"
        } else if u < single + 0.45 {
            "married"
        } else if u < single + 0.6 {
            "divorced"
        } else {
            "widowed"
        }
    };
    Sociodemographics {
        age: (r.random::<f64>() >= 0.01).then_some(age),
        marital_status: (r.random::<f64>() >= 0.01).then(|| marital.to_string()),
        postcode: (r.random::<f64>() >= 0.01).then(|| format!("{}", r.random_range(1000..10000))),
    }
}

/// Debit transactions in `month`, shaped by financial stress: stressed
/// customers spend more per purchase, on fewer and less varied days.
fn debit_month(r: &mut ChaCha8Rng, stress: f64, month: YearMonth) -> Vec<(NaiveDate, Money)> {
    let count = Poisson::new(16.0 * (-0.3 * stress).exp()).unwrap().sample(r) as usize;
    let amount = LogNormal::new(3.2 + 0.35 * stress, 0.7).unwrap();
    let favourite: Vec<u32> = {
        let mut days: Vec<u32> = (0..7).collect();
        days.shuffle(r);
        days.truncate(2);
        days
    };
    let focus = 0.2 + 0.6 * sigmoid(1.5 * stress);
    let mut out: Vec<(NaiveDate, Money)> = (0..count)
        .map(|_| {
            let mut d = random_day(r, month);
            if r.random::<f64>() < focus {
                let want = favourite[r.random_range(0..favourite.len())];
                while chrono::Datelike::weekday(&d).num_days_from_monday() != want {
                    d += Duration::days(1);
                    if YearMonth::of(d) != month {
                        d = month.first_day();
                    }
                }
            }
            (d, Money::from_f64(amount.sample(r).max(0.5)))
        })
        .collect();
    out.sort();
    out
}

const CREDIT_LIMITS: [i64; 6] = [100_000, 150_000, 200_000, 250_000, 300_000, 500_000];

fn card_history(r: &mut ChaCha8Rng, arrears: Vec<bool>, default_month: Option<usize>, cfg: &SynthConfig) -> (Money, Vec<Money>) {
    let limit = Money(CREDIT_LIMITS[r.random_range(0..CREDIT_LIMITS.len())]);
    let mut drawn: Vec<Money> = (0..ARREARS_MONTHS)
        .map(|_| limit.scale(r.random_range(0.0..0.9)))
        .collect();
    if let Some(m) = default_month {
        let u: f64 = r.random();
        drawn[m] = if u < cfg.zero_loss_share {
            Money::ZERO
        } else if u < cfg.zero_loss_share + cfg.full_loss_share {
            limit
        } else {
            Money(r.random_range(1..limit.cents()))
        };
    }
    debug_assert_eq!(arrears.len(), ARREARS_MONTHS);
    (limit, drawn)
}

/// Arrears flags with exactly `k` late months whose third (if any) falls in
/// month `third`.
fn arrears_flags(r: &mut ChaCha8Rng, k: usize, third: Option<usize>) -> Vec<bool> {
    let mut flags = vec![false; ARREARS_MONTHS];
    match third {
        Some(t) => {
            let mut before: Vec<usize> = (0..t).collect();
            before.shuffle(r);
            for &i in &before[..2] {
                flags[i] = true;
            }
            flags[t] = true;
            let mut after: Vec<usize> = (t + 1..ARREARS_MONTHS).collect();
            after.shuffle(r);
            for &i in after.iter().take(k.saturating_sub(3)) {
                flags[i] = true;
            }
        }
        None => {
            let mut all: Vec<usize> = (0..ARREARS_MONTHS).collect();
            all.shuffle(r);
            for &i in &all[..k.min(2)] {
                flags[i] = true;
            }
        }
    }
    flags
}

fn calibrate_intercept(linear: &[f64], rate: f64) -> f64 {
    let mean = |b: f64| linear.iter().map(|&x| sigmoid(b + x)).sum::<f64>() / linear.len() as f64;
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn generate_calls(cfg: &SynthConfig, edges: &[(u32, u32)], ids: &[String], risky: &[bool]) -> Vec<CdrRecord> {
    const SHARD: usize = 4096;
    let first = cfg.start_month.first_day();
    let n_days = (cfg.start_month.plus(cfg.months as i32).first_day() - first).num_days() as u64;
    let extra = Geometric::new(1.0 / cfg.calls_per_edge).unwrap();
    let mut records: Vec<CdrRecord> = edges
        .par_chunks(SHARD)
        .enumerate()
        .flat_map_iter(|(shard, chunk)| {
            let mut r = ChaCha8Rng::seed_from_u64(rng::child_seed(cfg.seed, "calls", shard as u64));
            let mut out = Vec::new();
            for &(a, b) in chunk {
                let k = 1 + extra.sample(&mut r) as usize;
                for _ in 0..k {
                    let (from, to) = if r.random::<bool>() { (a, b) } else { (b, a) };
                    let caller_risky = risky[from as usize];
                    let night = r.random::<f64>() < if caller_risky { 0.4 } else { 0.15 };
                    let secs = if night {
                        (20 * 3600 + r.random_range(0..12 * 3600)) % (24 * 3600)
                    } else {
                        8 * 3600 + r.random_range(0..12 * 3600)
                    };
                    let duration = if r.random::<f64>() < cfg.short_call_share {
                        r.random_range(1..5)
                    } else {
                        let mu = if caller_risky { 90f64.ln() + 0.5 } else { 90f64.ln() };
                        (LogNormal::new(mu, 1.0).unwrap().sample(&mut r).round() as u32).clamp(5, 7200)
                    };
                    out.push(CdrRecord {
                        start_date: first + Duration::days(r.random_range(0..n_days) as i64),
                        start_time: NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).unwrap(),
                        duration,
                        from_id: ids[from as usize].clone(),
                        to_id: ids[to as usize].clone(),
                    });
                }
            }
            out
        })
        .collect();
    records.sort_unstable_by(|x, y| {
        (x.start_date, x.start_time, &x.from_id, &x.to_id, x.duration)
            .cmp(&(y.start_date, y.start_time, &y.from_id, &y.to_id, y.duration))
    });
    records
}

/// Generates a full dataset; deterministic in `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let n = cfg.n_nodes;
    let timeframes = cfg.timeframes();

    let ids: Vec<String> = {
        let mut numbers: Vec<u32> = (0..n as u32).collect();
        numbers.shuffle(&mut rng::substream(cfg.seed, "ids"));
        numbers.iter().map(|k| format!("P{:07}", k + 1)).collect()
    };
    let rest = n - cfg.n_subjects;
    let n_holders = (cfg.card_holder_share * rest as f64).round() as usize;
    let n_cardless = ((cfg.cardless_share * rest as f64).round() as usize).min(rest - n_holders);
    let role = |i: usize| {
        if i < cfg.n_subjects {
            NodeRole::Subject
        } else if i < cfg.n_subjects + n_holders {
            NodeRole::CardHolder
        } else if i < cfg.n_subjects + n_holders + n_cardless {
            NodeRole::Cardless
        } else {
            NodeRole::TelcoOnly
        }
    };

    let mut r = rng::substream(cfg.seed, "latent");
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let risky: Vec<bool> = (0..n).map(|_| r.random::<f64>() < cfg.risky_share).collect();
    let stress: Vec<f64> = (0..n).map(|_| std_normal.sample(&mut r)).collect();

    let weights = degree_weights(cfg);
    let edges = draw_edges(cfg, &weights, &risky)?;
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(a, b) in &edges {
        adjacency[a as usize].push(b);
        adjacency[b as usize].push(a);
    }

    // older card holders
    let mut r = rng::substream(cfg.seed, "card-holders");
    let mut bank_records: Vec<BankRecord> = Vec::new();
    let mut holder_record: Vec<Option<usize>> = vec![None; n];
    for i in (0..n).filter(|&i| role(i) == NodeRole::CardHolder) {
        let issue = cfg.start_month.plus(-(r.random_range(1..=12)));
        let q = if risky[i] { cfg.arrears_rate_risky } else { cfg.arrears_rate_safe };
        let arrears: Vec<bool> = (0..ARREARS_MONTHS).map(|_| r.random::<f64>() < q).collect();
        let third = arrears.iter().enumerate().filter(|p| *p.1).nth(2).map(|p| p.0);
        let (limit, drawn) = card_history(&mut r, arrears.clone(), third, cfg);
        holder_record[i] = Some(bank_records.len());
        bank_records.push(BankRecord {
            customer_id: ids[i].clone(),
            sociodemographics: sociodemographics(&mut r, stress[i]),
            debit_transactions: Vec::new(),
            card_issue_date: random_day(&mut r, issue),
            credit_limit: limit,
            monthly_drawn: drawn,
            monthly_arrears: arrears,
        });
    }

    // subjects: neighbour delinquency as seen before their card month
    let subject_tf = |i: usize| i % timeframes.len();
    let subjects: Vec<usize> = (0..cfg.n_subjects).collect();
    let linear: Vec<f64> = subjects
        .iter()
        .map(|&i| {
            let month = timeframes[subject_tf(i)].card_month;
            let nbrs = &adjacency[i];
            let c = if nbrs.is_empty() {
                0.0
            } else {
                nbrs.iter()
                    .filter_map(|&j| holder_record[j as usize])
                    .map(|k| f64::from(bank_records[k].delinquency_level_before(month)) / 3.0)
                    .sum::<f64>()
                    / nbrs.len() as f64
            };
            let r_term = f64::from(u8::from(risky[i])) - cfg.risky_share;
            cfg.planted_feature_effect * (cfg.risk_weight * r_term + cfg.stress_weight * stress[i] + cfg.contagion * c)
        })
        .collect();
    let intercept = calibrate_intercept(&linear, cfg.default_rate);

    let mut truth: Vec<NodeTruth> = (0..n)
        .map(|i| NodeTruth {
            node_id: ids[i].clone(),
            role: role(i),
            risky: risky[i],
            stress: stress[i],
            timeframe: None,
            default_probability: None,
            default: None,
        })
        .collect();

    let mut r = rng::substream(cfg.seed, "subjects");
    for (&i, lin) in subjects.iter().zip(&linear) {
        let tf = &timeframes[subject_tf(i)];
        let p = sigmoid(intercept + lin);
        let default = r.random::<f64>() < p;
        let (arrears, third) = if default {
            let third = r.random_range(2..ARREARS_MONTHS);
            let k = 3 + r.random_range(0..=(ARREARS_MONTHS - 1 - third).min(3));
            (arrears_flags(&mut r, k, Some(third)), Some(third))
        } else {
            let u: f64 = r.random();
            let k = if u < 0.85 { 0 } else if u < 0.95 { 1 } else { 2 };
            (arrears_flags(&mut r, k, None), None)
        };
        let (limit, drawn) = card_history(&mut r, arrears.clone(), third, cfg);
        bank_records.push(BankRecord {
            customer_id: ids[i].clone(),
            sociodemographics: sociodemographics(&mut r, stress[i]),
            debit_transactions: debit_month(&mut r, stress[i], tf.card_month.plus(-1)),
            card_issue_date: random_day(&mut r, tf.card_month),
            credit_limit: limit,
            monthly_drawn: drawn,
            monthly_arrears: arrears,
        });
        truth[i].timeframe = Some(tf.name.clone());
        truth[i].default_probability = Some(p);
        truth[i].default = Some(default);
    }
    bank_records.sort_by(|a, b| a.customer_id.cmp(&b.customer_id));

    let mut r = rng::substream(cfg.seed, "cardless");
    let mut cardless_accounts: Vec<(String, Sociodemographics)> = (0..n)
        .filter(|&i| role(i) == NodeRole::Cardless)
        .map(|i| (ids[i].clone(), sociodemographics(&mut r, stress[i])))
        .collect();
    cardless_accounts.sort_by(|a, b| a.0.cmp(&b.0));

    let records = generate_calls(cfg, &edges, &ids, &risky);
    log::info!(
        "synthesised {} nodes, {} edges, {} calls, {} card holders",
        n,
        edges.len(),
        records.len(),
        bank_records.len()
    );
    Ok(SynthData {
        config: cfg.clone(),
        records,
        bank_records,
        cardless_accounts,
        truth,
        edges,
        intercept,
    })
}

/// A classification set with one informative column among `n_noise` noise
/// columns, plus matching loan outcomes.
#[derive(Debug, Clone)]
pub struct PlantedSet {
    pub data: Dataset,
    pub names: Vec<String>,
    pub informative: usize,
    pub loans: Vec<LoanOutcome>,
}

/// Draws `n` rows where `P(default) = sigmoid(b0 + effect · x_informative)`
/// with `b0` set for the requested base rate. The informative column sits at
/// a random position.
pub fn planted_classification(n: usize, n_noise: usize, effect: f64, base_rate: f64, seed: u64) -> Result<PlantedSet> {
    if n == 0 || !(base_rate > 0.0 && base_rate < 1.0) {
        return Err(Error::Config("planted set needs rows and a base rate in (0,1)".into()));
    }
    let mut r = rng::substream(seed, "planted");
    let m = n_noise + 1;
    let informative = r.random_range(0..m);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let x: Vec<f64> = (0..n * m).map(|_| std_normal.sample(&mut r)).collect();
    let linear: Vec<f64> = (0..n).map(|i| effect * x[i * m + informative]).collect();
    let b0 = calibrate_intercept(&linear, base_rate);
    let mut y = Vec::with_capacity(n);
    let mut loans = Vec::with_capacity(n);
    for lin in &linear {
        let d = r.random::<f64>() < sigmoid(b0 + lin);
        let principal = Money(CREDIT_LIMITS[r.random_range(0..CREDIT_LIMITS.len())]);
        let ead = if d { principal.scale(r.random_range(0.0..=1.0)) } else { Money::ZERO };
        y.push(d);
        loans.push(LoanOutcome {
            principal,
            ead,
            is_defaulter: d,
        });
    }
    let mut names = Vec::with_capacity(m);
    let mut k = 0;
    for c in 0..m {
        if c == informative {
            names.push("planted".to_string());
        } else {
            k += 1;
            names.push(format!("noise_{k:02}"));
        }
    }
    Ok(PlantedSet {
        data: Dataset::new(x, m, y)?,
        names,
        informative,
        loans,
    })
}
