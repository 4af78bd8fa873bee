//! Expected maximum profit (EMP) of a credit scorecard, the implied reject
//! fraction and cutoff, and realised portfolio profit.
//!
//! For a loss fraction `λ` and return `ROI`, rejecting the instances scoring
//! at or above `t` earns `λ·π0·F0(t) − ROI·π1·F1(t)` per applicant over
//! accepting everybody. EMP averages the best such profit over
//!
//! ```text
//! h(λ) = p0·δ(0) + p1·δ(LGD) + (1 − p0 − p1)·Uniform(0, LGD)
//! ```
//!
//! The optimum for a given `λ` is a vertex of the ROC convex hull. Moving
//! from one vertex to the next along a segment of slope `s` pays off once
//! `λ ≥ ROI·π1 / (π0·s)`, so the integral splits into closed-form pieces.

use serde::{Deserialize, Serialize};

use super::roc::{class_counts, roc_curve, RocPoint};
use crate::error::{Error, Result};
use crate::loans::LoanOutcome;
use crate::money::Money;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmpParams {
    pub roi: f64,
    pub lgd: f64,
    /// Probability that a default loses nothing.
    pub p0: f64,
    /// Probability that a default loses the full `LGD`.
    pub p1: f64,
}

impl Default for EmpParams {
    fn default() -> Self {
        EmpParams {
            roi: 0.05,
            lgd: 0.8,
            p0: 0.0,
            p1: 0.0,
        }
    }
}

impl EmpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.roi > 0.0 && self.roi.is_finite()) {
            return Err(Error::invalid(format!("ROI must be positive, got {}", self.roi)));
        }
        if !(self.lgd > 0.0 && self.lgd <= 1.0) {
            return Err(Error::invalid(format!("LGD must lie in (0,1], got {}", self.lgd)));
        }
        if !(self.p0 >= 0.0 && self.p1 >= 0.0 && self.p0 + self.p1 <= 1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "point masses p0={} p1={} must be non-negative with sum at most 1",
                self.p0, self.p1
            )));
        }
        Ok(())
    }

    /// Mean loss fraction under `h`.
    pub fn mean_lambda(&self) -> f64 {
        self.lgd * (self.p1 + (1.0 - self.p0 - self.p1) / 2.0)
    }

    /// Sets `p0` and `p1` to the shares of `defaulters` that lost nothing
    /// and that were fully drawn.
    pub fn with_point_masses(mut self, defaulters: &[LoanOutcome]) -> Result<Self> {
        let d: Vec<&LoanOutcome> = defaulters.iter().filter(|l| l.is_defaulter).collect();
        if d.is_empty() {
            return Err(Error::invalid("no defaulters to estimate the loss distribution from"));
        }
        let n = d.len() as f64;
        self.p0 = d.iter().filter(|l| l.ead == Money::ZERO).count() as f64 / n;
        self.p1 = d.iter().filter(|l| l.ead >= l.principal).count() as f64 / n;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpResult {
    /// Expected maximum profit per unit of loan amount.
    pub emp: f64,
    /// Expected share of applicants rejected at the optimum.
    pub emp_fraction: f64,
}

/// Upper convex hull of ROC points ordered by `f1`, without collinear
/// interior points.
pub fn roc_hull(points: &[RocPoint]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.f1, p.f0)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

fn priors(y: &[bool]) -> (f64, f64) {
    let pi0 = y.iter().filter(|&&v| v).count() as f64 / y.len() as f64;
    (pi0, 1.0 - pi0)
}

/// EMP and the EMP reject fraction by walking the ROC convex hull.
pub fn emp(scores: &[f64], y: &[bool], params: &EmpParams) -> Result<EmpResult> {
    params.validate()?;
    let hull = roc_hull(&roc_curve(scores, y)?);
    let (pi0, pi1) = priors(y);
    let (roi, lgd) = (params.roi, params.lgd);
    let uniform = (1.0 - params.p0 - params.p1).max(0.0);
    let density = uniform / lgd;

    // λ at which the walk moves onto vertex k (vertex 0 is (0,0))
    let mut entry = vec![0.0; hull.len()];
    for k in 1..hull.len() {
        let (dx, dy) = (hull[k].0 - hull[k - 1].0, hull[k].1 - hull[k - 1].1);
        entry[k] = if dx == 0.0 {
            0.0
        } else if dy <= 0.0 {
            f64::INFINITY
        } else {
            roi * pi1 * dx / (pi0 * dy)
        };
    }

    let profit = |k: usize, lambda: f64| lambda * pi0 * hull[k].1 - roi * pi1 * hull[k].0;
    let reject = |k: usize| pi0 * hull[k].1 + pi1 * hull[k].0;
    // vertex chosen at a given λ; ties move on to the larger reject set
    let vertex_at = |lambda: f64| (0..hull.len()).rev().find(|&k| entry[k] <= lambda).unwrap_or(0);

    let mut total = 0.0;
    let mut fraction = 0.0;
    for (mass, lambda) in [(params.p0, 0.0), (params.p1, lgd)] {
        if mass > 0.0 {
            let k = vertex_at(lambda);
            total += mass * profit(k, lambda);
            fraction += mass * reject(k);
        }
    }
    if density > 0.0 {
        for k in 0..hull.len() {
            let a = entry[k].clamp(0.0, lgd);
            let b = entry.get(k + 1).copied().unwrap_or(f64::INFINITY).clamp(0.0, lgd);
            if b > a {
                total += density * (pi0 * hull[k].1 * (b * b - a * a) / 2.0 - roi * pi1 * hull[k].0 * (b - a));
                fraction += density * (b - a) * reject(k);
            }
        }
    }
    Ok(EmpResult {
        emp: total,
        emp_fraction: fraction.clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    /// Instances scoring at or above this value are rejected.
    pub value: f64,
    pub n_rejected: usize,
}

/// Score cutoff rejecting the achievable number of instances closest to
/// `fraction · n` (ties to fewer rejections).
pub fn fraction_to_cutoff(scores: &[f64], fraction: f64) -> Result<Cutoff> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("reject fraction must lie in [0,1], got {fraction}")));
    }
    if scores.is_empty() {
        return Err(Error::invalid("no scores"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let target = fraction * sorted.len() as f64;
    let mut best = Cutoff {
        value: sorted[0].next_up(),
        n_rejected: 0,
    };
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
        if (i as f64 - target).abs() < (best.n_rejected as f64 - target).abs() {
            best = Cutoff {
                value: v,
                n_rejected: i,
            };
        }
    }
    Ok(best)
}

/// Profit of one loan given the accept/reject decision.
pub fn loan_profit(loan: &LoanOutcome, rejected: bool, roi: f64, lgd: f64) -> Money {
    match (loan.is_defaulter, rejected) {
        (false, false) => loan.principal.scale(roi),
        (false, true) => -loan.principal.scale(roi),
        (true, false) => -loan.ead.scale(lgd),
        (true, true) => Money::ZERO,
    }
}

/// Portfolio profit when every instance scoring at or above `cutoff` is
/// rejected.
pub fn model_profit(scores: &[f64], loans: &[LoanOutcome], roi: f64, lgd: f64, cutoff: f64) -> Result<Money> {
    if scores.len() != loans.len() {
        return Err(Error::invalid(format!("{} scores for {} loans", scores.len(), loans.len())));
    }
    Ok(scores
        .iter()
        .zip(loans)
        .map(|(&s, l)| loan_profit(l, s >= cutoff, roi, lgd))
        .sum())
}

/// Profit of accepting every applicant.
pub fn no_model_profit(loans: &[LoanOutcome], roi: f64, lgd: f64) -> Money {
    loans.iter().map(|l| loan_profit(l, false, roi, lgd)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpReport {
    pub emp: f64,
    pub emp_fraction: f64,
    pub implied_cutoff: f64,
    pub n_rejected: usize,
    pub model_profit: Money,
    pub no_model_profit: Money,
}

/// EMP, its cutoff on these scores and the resulting portfolio profit.
pub fn evaluate_profit(scores: &[f64], loans: &[LoanOutcome], params: &EmpParams) -> Result<EmpReport> {
    let y: Vec<bool> = loans.iter().map(|l| l.is_defaulter).collect();
    class_counts(scores, &y)?;
    let r = emp(scores, &y, params)?;
    let cut = fraction_to_cutoff(scores, r.emp_fraction)?;
    Ok(EmpReport {
        emp: r.emp,
        emp_fraction: r.emp_fraction,
        implied_cutoff: cut.value,
        n_rejected: cut.n_rejected,
        model_profit: model_profit(scores, loans, params.roi, params.lgd, cut.value)?,
        no_model_profit: no_model_profit(loans, params.roi, params.lgd),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Roi,
    Lgd,
}

impl std::str::FromStr for SweepParameter {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "roi" => Ok(SweepParameter::Roi),
            "lgd" => Ok(SweepParameter::Lgd),
            _ => Err(format!("unknown sweep parameter `{s}` (roi, lgd)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub emp: f64,
    pub emp_fraction: f64,
}

/// EMP over a grid of one parameter on fixed scores.
pub fn sensitivity_sweep(
    scores: &[f64],
    y: &[bool],
    base: &EmpParams,
    parameter: SweepParameter,
    grid: &[f64],
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::invalid("empty sweep grid"));
    }
    grid.iter()
        .map(|&value| {
            let mut p = *base;
            match parameter {
                SweepParameter::Roi => p.roi = value,
                SweepParameter::Lgd => p.lgd = value,
            }
            let r = emp(scores, y, &p)?;
            Ok(SweepRow {
                value,
                emp: r.emp,
                emp_fraction: r.emp_fraction,
            })
        })
        .collect()
}
