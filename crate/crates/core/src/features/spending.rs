//! Sociodemographic and spending features from the bank extract.

use chrono::{Datelike, Weekday};

use crate::ingest::BankRecord;

const WEEKDAYS: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];

/// Marital statuses with their own indicator column.
pub const MARITAL_STATUSES: [&str; 4] = ["single", "married", "divorced", "widowed"];

/// Number of sociodemographic features per subject.
pub const N_SOCIODEMOGRAPHIC: usize = 35;

/// Bins used by the top-k loyalty measure.
pub const LOYALTY_TOP_K: usize = 3;

/// Share of transactions per weekday bin (Monday first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinProfile {
    pub p: [f64; 7],
    /// Non-empty bins.
    pub m: usize,
}

impl BinProfile {
    /// `None` when the bins hold no mass.
    pub fn new(bins: &[f64; 7]) -> Option<Self> {
        let total: f64 = bins.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut p = [0.0; 7];
        for (pj, b) in p.iter_mut().zip(bins) {
            *pj = b / total;
        }
        let m = bins.iter().filter(|&&b| b > 0.0).count();
        Some(BinProfile { p, m })
    }

    /// Share held by the `k` largest bins (ties broken by bin index).
    pub fn top_share(&self, k: usize) -> f64 {
        let mut order: Vec<usize> = (0..7).collect();
        order.sort_by(|&a, &b| self.p[b].total_cmp(&self.p[a]).then(a.cmp(&b)));
        order[..k.min(7)].iter().map(|&j| self.p[j]).sum::<f64>().min(1.0)
    }
}

/// Which bins count toward the entropy normaliser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiversityScope {
    /// All seven weekdays.
    All,
    /// Only weekdays with at least one transaction.
    NonEmpty,
}

/// Normalised entropy of the bin shares, in `[0, 1]`. Zero when only one
/// bin counts; `None` without transactions.
pub fn diversity(bins: &[f64; 7], scope: DiversityScope) -> Option<f64> {
    let profile = BinProfile::new(bins)?;
    let m = match scope {
        DiversityScope::All => 7,
        DiversityScope::NonEmpty => profile.m,
    };
    if m <= 1 {
        return Some(0.0);
    }
    let h: f64 = profile.p.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    Some((h / (m as f64).ln()).clamp(0.0, 1.0))
}

/// Share of transactions in the `k` most active bins; `None` without
/// transactions.
pub fn loyalty(bins: &[f64; 7], k: usize) -> Option<f64> {
    BinProfile::new(bins).map(|p| p.top_share(k))
}

pub fn sociodemographic_names() -> Vec<String> {
    let mut names = vec!["Age".to_string()];
    for m in MARITAL_STATUSES {
        let mut cap = m.to_string();
        cap[..1].make_ascii_uppercase();
        names.push(format!("Marital {cap}"));
    }
    for r in 0..10 {
        names.push(format!("Postcode Region {r}"));
    }
    names.extend(
        [
            "Amount Spent",
            "Mean Spent p. Day",
            "Number of Transactions",
            "Mean Transaction Amount",
            "Max Transaction Amount",
            "Diversity-NE Number",
            "Diversity-NE Value",
            "Diversity-ALL Number",
            "Diversity-ALL Value",
            "Loyalty Number",
            "Loyalty Value",
        ]
        .map(String::from),
    );
    for d in WEEKDAYS {
        names.push(format!("{d} Amount Spent"));
    }
    names.push("Weekday Amount Spent".into());
    names.push("Weekend Amount Spent".into());
    debug_assert_eq!(names.len(), N_SOCIODEMOGRAPHIC);
    names
}

/// Sociodemographic vector of one card holder together with its missing
/// mask. Missing entries are zero in the values.
pub fn sociodemographic_features(rec: &BankRecord) -> (Vec<f64>, Vec<bool>) {
    let mut v = vec![0.0; N_SOCIODEMOGRAPHIC];
    let mut missing = vec![false; N_SOCIODEMOGRAPHIC];
    let sd = &rec.sociodemographics;

    match sd.age {
        Some(a) => v[0] = f64::from(a),
        None => missing[0] = true,
    }
    match &sd.marital_status {
        Some(s) => {
            if let Some(k) = MARITAL_STATUSES.iter().position(|m| m.eq_ignore_ascii_case(s.trim())) {
                v[1 + k] = 1.0;
            }
        }
        None => missing[1..5].fill(true),
    }
    match sd.postcode.as_deref().and_then(|p| p.trim().chars().next()).and_then(|c| c.to_digit(10)) {
        Some(r) => v[5 + r as usize] = 1.0,
        None => missing[5..15].fill(true),
    }

    let month = rec.issue_month().plus(-1);
    let mut count_bins = [0.0; 7];
    let mut value_bins = [0.0; 7];
    let mut total = 0.0;
    let mut n = 0usize;
    let mut max = 0.0f64;
    for (date, amount) in rec.transactions_in_month_before_card() {
        let a = amount.as_f64();
        let d = date.weekday().num_days_from_monday() as usize;
        count_bins[d] += 1.0;
        value_bins[d] += a.max(0.0);
        total += a;
        n += 1;
        max = if n == 1 { a } else { max.max(a) };
    }
    v[15] = total;
    v[16] = total / f64::from(month.days());
    v[17] = n as f64;
    v[18] = if n > 0 { total / n as f64 } else { 0.0 };
    v[19] = max;
    let derived = [
        diversity(&count_bins, DiversityScope::NonEmpty),
        diversity(&value_bins, DiversityScope::NonEmpty),
        diversity(&count_bins, DiversityScope::All),
        diversity(&value_bins, DiversityScope::All),
        loyalty(&count_bins, LOYALTY_TOP_K),
        loyalty(&value_bins, LOYALTY_TOP_K),
    ];
    for (k, x) in derived.into_iter().enumerate() {
        match x {
            Some(x) => v[20 + k] = x,
            None => missing[20 + k] = true,
        }
    }
    let mut weekday = 0.0;
    let mut weekend = 0.0;
    for (d, amount) in value_bins.iter().enumerate() {
        v[26 + d] = *amount;
        if d >= Weekday::Sat.num_days_from_monday() as usize {
            weekend += amount;
        } else {
            weekday += amount;
        }
    }
    v[33] = weekday;
    v[34] = weekend;
    (v, missing)
}
