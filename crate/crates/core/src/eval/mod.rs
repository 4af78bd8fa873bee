//! Statistical and profit-based evaluation of scorecards.

pub mod delong;
pub mod emp;
pub mod importance;
pub mod rank;
pub mod roc;

pub use delong::{delong_test, DelongResult};
pub use emp::{
    emp, evaluate_profit, fraction_to_cutoff, loan_profit, model_profit, no_model_profit,
    sensitivity_sweep, Cutoff, EmpParams, EmpReport, EmpResult, SweepParameter, SweepRow,
};
pub use importance::{
    accuracy_feature_importance, profit_feature_importance, AccuracyImportanceKind, FeatureImportance,
};
pub use rank::{rank_correlations, RankCorrelations};
pub use roc::{auc, roc_curve, RocPoint};
