//! Run configuration (TOML) and dry-run validation.
//!
//! Relative paths in a configuration file are resolved against the
//! directory holding it.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nowcast_core::data::MonthId;
use nowcast_core::decompose::PovertyUnit;
use nowcast_core::reweight::DEFAULT_TRIM_QUANTILE;
use nowcast_core::taxben::PolicyRegime;
use nowcast_core::transitions::Outcome;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::synthpop::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub baseline_month: MonthId,
    pub analysis_months: Vec<MonthId>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: DataSource,
    pub regimes: RegimePaths,
    pub indexation: IndexationConfig,
    #[serde(default)]
    pub alignment: Vec<AlignmentAnchor>,
    #[serde(default)]
    pub options: Options,
}

/// Exactly one of `synth` and `files`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub files: Option<DataFiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFiles {
    pub survey_persons: PathBuf,
    pub survey_households: PathBuf,
    pub panel_persons: PathBuf,
    pub panel_households: PathBuf,
    pub payroll: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimePaths {
    /// Rules before the shock.
    pub p0: PathBuf,
    /// Rules in force in the analysis months.
    pub p1: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexationConfig {
    /// CSV with `month,investment,cpi`.
    pub tables: PathBuf,
    #[serde(default = "one")]
    pub awe_factor: f64,
    #[serde(default = "one")]
    pub cpi_uprate: f64,
    #[serde(default)]
    pub years_to_baseline: f64,
    #[serde(default = "default_return")]
    pub annual_real_return: f64,
}

fn one() -> f64 {
    1.0
}

fn default_return() -> f64 {
    nowcast_core::indexation::DEFAULT_REAL_RETURN
}

/// Administrative count of an outcome in one month. Months between
/// anchors are interpolated linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentAnchor {
    pub outcome: Outcome,
    pub month: MonthId,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Quantile at which density ratios are capped; `1.0` disables trimming.
    #[serde(default = "default_trim")]
    pub trim_quantile: f64,
    #[serde(default = "one")]
    pub noise_scale: f64,
    #[serde(default)]
    pub poverty_unit: PovertyUnit,
    /// Drop failing covariate columns and refit instead of stopping.
    #[serde(default = "yes")]
    pub fallback: bool,
    /// Total household weight after calibration; the wave's total when omitted.
    #[serde(default)]
    pub population_target: Option<f64>,
}

fn default_trim() -> f64 {
    DEFAULT_TRIM_QUANTILE
}

fn yes() -> bool {
    true
}

impl Default for Options {
    fn default() -> Self {
        Options {
            trim_quantile: default_trim(),
            noise_scale: 1.0,
            poverty_unit: PovertyUnit::Person,
            fallback: true,
            population_target: None,
        }
    }
}

impl Options {
    pub fn trim(&self) -> Option<f64> {
        (self.trim_quantile < 1.0).then_some(self.trim_quantile)
    }
}

/// A parsed configuration with its source bytes and directory.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub path: PathBuf,
    pub base_dir: PathBuf,
    pub source: Vec<u8>,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let source = fs::read(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&source)
            .map_err(|_| Error::Config(format!("config {} is not UTF-8", path.display())))?;
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, path: path.to_path_buf(), base_dir, source })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn regime(&self, p: &Path) -> Result<PolicyRegime> {
        load_regime(&self.resolve(p))
    }
}

pub fn load_regime(path: &Path) -> Result<PolicyRegime> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read regime file {}: {e}", path.display())))?;
    let regime: PolicyRegime =
        toml::from_str(&text).map_err(|e| Error::Config(format!("regime file {}: {}", path.display(), e.message())))?;
    regime.check().map_err(|e| Error::Config(format!("regime file {}: {e}", path.display())))?;
    Ok(regime)
}

/// One problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

struct Report(Vec<Finding>);

impl Report {
    fn add(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.0.push(Finding { location: location.into(), message: message.into() });
    }

    fn rows(&mut self, path: &Path, issues: &[io::RowIssue]) {
        for i in issues {
            self.add(format!("{} row {}", path.display(), i.row), i.message.clone());
        }
    }
}

/// Months whose panel waves a run needs: every month from the baseline to
/// the last analysis month.
pub fn needed_waves(cfg: &RunConfig) -> Vec<MonthId> {
    let mut out = vec![cfg.baseline_month];
    let Some(&last) = cfg.analysis_months.iter().max() else {
        return out;
    };
    let mut m = cfg.baseline_month;
    while m < last {
        m = m.next();
        out.push(m);
    }
    out
}

/// Checks a configuration and the files it names without running anything.
pub fn validate(loaded: &LoadedConfig) -> Vec<Finding> {
    let cfg = &loaded.config;
    let mut r = Report(Vec::new());
    if cfg.analysis_months.is_empty() {
        r.add("analysis_months", "no analysis months");
    }
    for (k, m) in cfg.analysis_months.iter().enumerate() {
        if *m <= cfg.baseline_month {
            r.add("analysis_months", format!("month {m} does not follow the baseline month {}", cfg.baseline_month));
        }
        if cfg.analysis_months[..k].contains(m) {
            r.add("analysis_months", format!("month {m} is listed twice"));
        }
    }

    // months failing the ordering check are left out of the checks below
    let months: Vec<MonthId> = cfg.analysis_months.iter().copied().filter(|m| *m > cfg.baseline_month).collect();

    let mut regimes = Vec::new();
    for (name, p) in [("p0", &cfg.regimes.p0), ("p1", &cfg.regimes.p1)] {
        match loaded.regime(p) {
            Ok(reg) => regimes.push((name, reg)),
            Err(e) => r.add(format!("regimes.{name}"), e.to_string()),
        }
    }
    for (name, reg) in &regimes {
        let covered: Vec<MonthId> = if *name == "p0" {
            std::iter::once(cfg.baseline_month).chain(months.iter().copied()).collect()
        } else {
            months.clone()
        };
        for m in covered {
            if !reg.covers(m) {
                r.add(format!("regimes.{name}"), format!("regime `{}` is not in effect in {m}", reg.regime_id));
            }
        }
    }

    let ix = &cfg.indexation;
    if ![ix.awe_factor, ix.cpi_uprate].iter().all(|f| *f > 0.0 && f.is_finite()) {
        r.add("indexation", "awe_factor and cpi_uprate must be positive");
    }
    if !(ix.years_to_baseline >= 0.0) || !(ix.annual_real_return > -1.0) {
        r.add("indexation", "years_to_baseline must be nonnegative and annual_real_return above -1");
    }
    let tables = loaded.resolve(&ix.tables);
    match io::scan_index_tables(&tables) {
        Err(e) => r.add("indexation.tables", e.to_string()),
        Ok(s) => {
            r.rows(&tables, &s.issues);
            let present: Vec<MonthId> = s.rows.iter().filter_map(|x| x.1).collect();
            for m in std::iter::once(cfg.baseline_month).chain(months.iter().copied()) {
                if !present.contains(&m) {
                    r.add("indexation.tables", format!("no factors for {m}"));
                }
            }
        }
    }

    for (k, a) in cfg.alignment.iter().enumerate() {
        if !(a.count >= 0.0 && a.count.is_finite()) {
            r.add(format!("alignment[{k}]"), "count must be nonnegative");
        }
    }
    let o = &cfg.options;
    if !(o.trim_quantile > 0.0 && o.trim_quantile <= 1.0) {
        r.add("options.trim_quantile", "must lie in (0, 1]");
    }
    if !(o.noise_scale >= 0.0 && o.noise_scale.is_finite()) {
        r.add("options.noise_scale", "must be nonnegative");
    }
    if o.population_target.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
        r.add("options.population_target", "must be positive");
    }

    let waves = needed_waves(&RunConfig { analysis_months: months, ..cfg.clone() });
    match (&cfg.data.synth, &cfg.data.files) {
        (Some(_), Some(_)) | (None, None) => r.add("data", "give exactly one of [data.synth] and [data.files]"),
        (Some(s), None) => {
            if let Err(e) = s.check() {
                r.add("data.synth", e.to_string());
            }
            if s.baseline_month != cfg.baseline_month {
                r.add("data.synth", "baseline_month differs from the run's baseline month");
            }
            let months = s.panel_months();
            for m in &waves {
                if !months.contains(m) {
                    r.add("data.synth", format!("no panel wave for {m}; raise n_panel_waves"));
                }
            }
        }
        (None, Some(f)) => validate_files(loaded, f, &waves, &mut r),
    }
    r.0
}

fn validate_files(loaded: &LoadedConfig, f: &DataFiles, waves: &[MonthId], r: &mut Report) {
    for (name, p) in [("survey_persons", &f.survey_persons), ("panel_persons", &f.panel_persons)] {
        let path = loaded.resolve(p);
        match io::scan_persons(&path) {
            Err(e) => r.add(format!("data.files.{name}"), e.to_string()),
            Ok(s) => {
                r.rows(&path, &s.issues);
                for (row, _, p) in &s.rows {
                    if let Err(e) = p.check() {
                        r.add(format!("{} row {row}", path.display()), e.to_string());
                    }
                }
            }
        }
    }
    for (name, p) in [("survey_households", &f.survey_households), ("panel_households", &f.panel_households)] {
        let path = loaded.resolve(p);
        match io::scan_households(&path) {
            Err(e) => r.add(format!("data.files.{name}"), e.to_string()),
            Ok(s) => {
                r.rows(&path, &s.issues);
                if name == "panel_households" {
                    let months: Vec<MonthId> = s.rows.iter().filter_map(|x| x.1).collect();
                    for m in waves {
                        if !months.contains(m) {
                            r.add(format!("data.files.{name}"), format!("no panel wave for {m}"));
                        }
                    }
                }
            }
        }
    }
    let path = loaded.resolve(&f.payroll);
    match io::scan_payroll(&path) {
        Err(e) => r.add("data.files.payroll", e.to_string()),
        Ok(s) => r.rows(&path, &s.issues),
    }
}
