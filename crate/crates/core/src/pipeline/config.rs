//! Experiment configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calendar::{Timeframe, YearMonth};
use crate::error::{Error, Result};
use crate::eval::{AccuracyImportanceKind, EmpParams};
use crate::features::{DayPeriod, FeatureGroup};
use crate::ingest::IngestOptions;
use crate::models::{ForestParams, LogisticParams, ModelKind, TreeCvParams};
use crate::propagation::PropagationConfig;

/// Feature groups of a model id: A=SD, B=CB, C=LB, D=PR, E=SPA, F=SD+CB,
/// G=CB+LB+PR+SPA, H=all.
pub fn model_groups(id: &str) -> Option<Vec<FeatureGroup>> {
    use FeatureGroup::*;
    Some(match id {
        "A" => vec![SD],
        "B" => vec![CB],
        "C" => vec![LB],
        "D" => vec![PR],
        "E" => vec![SPA],
        "F" => vec![SD, CB],
        "G" => vec![CB, LB, PR, SPA],
        "H" => vec![SD, CB, LB, PR, SPA],
        _ => return None,
    })
}

pub const MODEL_IDS: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub cdr: PathBuf,
    pub accounts: PathBuf,
    pub transactions: PathBuf,
    pub card_activity: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            cdr: "data/cdr.csv".into(),
            accounts: "data/accounts.csv".into(),
            transactions: "data/transactions.csv".into(),
            card_activity: "data/card_activity.csv".into(),
            output: "out".into(),
        }
    }
}

impl Paths {
    /// The four input files under `dir`, as written by the generator.
    pub fn inputs_in(dir: &Path, output: PathBuf) -> Self {
        Paths {
            cdr: dir.join("cdr.csv"),
            accounts: dir.join("accounts.csv"),
            transactions: dir.join("transactions.csv"),
            card_activity: dir.join("card_activity.csv"),
            output,
        }
    }

    pub fn inputs(&self) -> [&Path; 4] {
        [&self.cdr, &self.accounts, &self.transactions, &self.card_activity]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeframeSpec {
    /// First month of the first window.
    pub first_month: YearMonth,
    pub window_months: u32,
    pub count: usize,
}

impl Default for TimeframeSpec {
    fn default() -> Self {
        TimeframeSpec {
            first_month: YearMonth::new(2015, 1).unwrap(),
            window_months: 3,
            count: 3,
        }
    }
}

impl TimeframeSpec {
    pub fn timeframes(&self) -> Vec<Timeframe> {
        Timeframe::consecutive(self.first_month, self.window_months, self.count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub min_duration: u32,
    pub delimiter: char,
}

impl Default for IngestSection {
    fn default() -> Self {
        let o = IngestOptions::default();
        IngestSection {
            min_duration: o.min_duration,
            delimiter: o.delimiter,
        }
    }
}

impl IngestSection {
    pub fn options(&self) -> IngestOptions {
        IngestOptions {
            min_duration: self.min_duration,
            delimiter: self.delimiter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub day: DayPeriod,
    /// Groups to compute; all five when unset.
    pub groups: Option<Vec<FeatureGroup>>,
    /// Absolute Pearson correlation above which a later feature is dropped;
    /// unset disables pruning.
    pub correlation_threshold: Option<f64>,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            day: DayPeriod::default(),
            groups: None,
            correlation_threshold: Some(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train_fraction: f64,
    pub stratified: bool,
    /// Minority : majority ratio after undersampling the training set;
    /// unset keeps the training set as is.
    pub undersample_ratio: Option<f64>,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train_fraction: 0.7,
            stratified: true,
            undersample_ratio: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmpSection {
    pub roi: f64,
    pub lgd: f64,
    /// Estimate `p0`, `p1` from the training defaulters instead of using
    /// the values below.
    pub estimate_point_masses: bool,
    pub p0: f64,
    pub p1: f64,
}

impl Default for EmpSection {
    fn default() -> Self {
        EmpSection {
            roi: 0.05,
            lgd: 0.8,
            estimate_point_masses: true,
            p0: 0.0,
            p1: 0.0,
        }
    }
}

impl EmpSection {
    pub fn params(&self) -> EmpParams {
        EmpParams {
            roi: self.roi,
            lgd: self.lgd,
            p0: self.p0,
            p1: self.p1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceSection {
    /// Model ids whose forests get importance tables.
    pub models: Vec<String>,
    pub accuracy_kind: AccuracyImportanceKind,
    pub repeats: usize,
}

impl Default for ImportanceSection {
    fn default() -> Self {
        ImportanceSection {
            models: vec!["H".into()],
            accuracy_kind: AccuracyImportanceKind::Permutation,
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetstatsSection {
    /// Label permutations for the null mean of D and H; 0 skips them.
    pub permutations: usize,
}

impl Default for NetstatsSection {
    fn default() -> Self {
        NetstatsSection { permutations: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Model id whose test scores are swept.
    pub model: String,
    pub roi_grid: Vec<f64>,
    pub lgd_grid: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            model: "H".into(),
            roi_grid: (1..=20).map(|k| f64::from(k) / 100.0).collect(),
            lgd_grid: (1..=10).map(|k| f64::from(k) / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stage draws from a named child stream.
    pub seed: u64,
    pub paths: Paths,
    pub timeframes: TimeframeSpec,
    pub ingest: IngestSection,
    pub propagation: PropagationConfig,
    pub features: FeatureSection,
    /// Model ids A..H.
    pub models: Vec<String>,
    pub classifiers: Vec<ModelKind>,
    /// Classifier used for cross-model comparisons and the sweep.
    pub primary_classifier: ModelKind,
    pub split: SplitSection,
    pub logistic: LogisticParams,
    pub tree: TreeCvParams,
    pub forest: ForestParams,
    pub emp: EmpSection,
    pub importance: ImportanceSection,
    pub netstats: NetstatsSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            paths: Paths::default(),
            timeframes: TimeframeSpec::default(),
            ingest: IngestSection::default(),
            propagation: PropagationConfig::default(),
            features: FeatureSection::default(),
            models: MODEL_IDS.iter().map(|s| s.to_string()).collect(),
            classifiers: ModelKind::ALL.to_vec(),
            primary_classifier: ModelKind::Forest,
            split: SplitSection::default(),
            logistic: LogisticParams::default(),
            tree: TreeCvParams::default(),
            forest: ForestParams::default(),
            emp: EmpSection::default(),
            importance: ImportanceSection::default(),
            netstats: NetstatsSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new("")), &[])
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Parses TOML text with `key.path = value` overrides applied on top;
    /// relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path, sets: &[(String, String)]) -> Result<Self> {
        let mut cfg: ExperimentConfig = parse_with_overrides(text, sets)?;
        for p in [
            &mut cfg.paths.cdr,
            &mut cfg.paths.accounts,
            &mut cfg.paths.transactions,
            &mut cfg.paths.card_activity,
            &mut cfg.paths.output,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn model_ids(&self) -> Vec<&str> {
        self.models.iter().map(String::as_str).collect()
    }

    /// Groups the feature stage computes, in canonical order.
    pub fn feature_groups(&self) -> Vec<FeatureGroup> {
        match &self.features.groups {
            Some(gs) => FeatureGroup::ALL.into_iter().filter(|g| gs.contains(g)).collect(),
            None => FeatureGroup::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        for m in &self.models {
            if model_groups(m).is_none() {
                return Err(Error::Config(format!("unknown model id `{m}` (A..H)")));
            }
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(Error::Config("model ids repeat".into()));
        }
        if self.classifiers.is_empty() {
            return Err(Error::Config("no classifiers selected".into()));
        }
        if !self.classifiers.contains(&self.primary_classifier) {
            return Err(Error::Config(format!(
                "primary classifier {} is not among the classifiers",
                self.primary_classifier.name()
            )));
        }
        if self.timeframes.count == 0 || self.timeframes.window_months == 0 {
            return Err(Error::Config("need at least one timeframe of at least one month".into()));
        }
        if let Some(t) = self.features.correlation_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("correlation threshold must lie in (0,1], got {t}")));
            }
        }
        if self.features.groups.as_ref().is_some_and(|g| g.is_empty()) {
            return Err(Error::Config("empty feature group list".into()));
        }
        for m in &self.importance.models {
            if model_groups(m).is_none() {
                return Err(Error::Config(format!("unknown importance model id `{m}` (A..H)")));
            }
        }
        if !self.sweep.model.is_empty() && !self.models.contains(&self.sweep.model) {
            return Err(Error::Config(format!("sweep model `{}` is not among the models", self.sweep.model)));
        }
        self.propagation.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.emp.params().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Fails naming the first input file that does not exist.
    pub fn check_inputs(&self) -> Result<()> {
        for p in self.paths.inputs() {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                ));
            }
        }
        Ok(())
    }
}

/// Deserialises TOML text after applying `a.b.c = value` overrides. A
/// value that is not valid TOML is taken as a string.
pub fn parse_with_overrides<T: serde::de::DeserializeOwned>(text: &str, sets: &[(String, String)]) -> Result<T> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    for (key, raw) in sets {
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.clone()));
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("bad configuration key `{key}`")));
        }
        let mut cur = &mut table;
        for p in &parts[..parts.len() - 1] {
            let entry = cur
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{key}`: `{p}` is not a section")))?;
        }
        cur.insert(parts[parts.len() - 1].to_string(), value);
    }
    table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}
