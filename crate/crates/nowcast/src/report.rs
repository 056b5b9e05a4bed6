//! Output tables, series and the run manifest, rendered in memory.
//!
//! Money amounts are monthly dollars with two decimals; Gini coefficients
//! and poverty rates carry six decimals.

use std::collections::BTreeMap;

use nowcast_core::data::fortnightly_to_monthly;
use nowcast_core::decompose::{Bound, Breakdown, DecompositionResult, IncomeConcept, MeasureKind, OutcomeMeasure};
use nowcast_core::stats::pct_change_of;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::pipeline::{Baseline, MonthResult};

pub const ENGINE_NAME: &str = "nowcast";
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const DECOMPOSITION_TOLERANCE: f64 = 1e-9;
pub const ACCOUNTING_TOLERANCE: f64 = 1e-9;

fn fixed(x: f64, dp: usize) -> String {
    let s = format!("{x:.dp$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn money(x: f64) -> String {
    fixed(fortnightly_to_monthly(x), 2)
}

fn ratio(x: f64) -> String {
    fixed(x, 6)
}

fn pct(x: f64) -> String {
    fixed(x, 2)
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(header).map_err(csv_err)?;
        Ok(Table { w })
    }

    fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        self.w.write_record(fields.iter().map(|f| f.as_ref())).map_err(csv_err)
    }

    fn finish(self) -> Result<Vec<u8>> {
        self.w.into_inner().map_err(|e| Error::Format { path: "<table>".into(), message: e.to_string() })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format { path: "<table>".into(), message: e.to_string() }
}

fn quintile_labels() -> [&'static str; 5] {
    ["Q1", "Q2", "Q3", "Q4", "Q5"]
}

fn scenario_levels(d: &DecompositionResult, i: usize) -> [(&'static str, &'static str, f64); 4] {
    let keep = d.bound(Bound::KeepJobs);
    let lose = d.bound(Bound::LoseJobs);
    [
        ("pre", "pre-shock", d.pre[i]),
        ("nowcast", "nowcast", d.nowcast[i]),
        (Bound::KeepJobs.name(), Bound::KeepJobs.estimate_label(), keep.counterfactual[i]),
        (Bound::LoseJobs.name(), Bound::LoseJobs.estimate_label(), lose.counterfactual[i]),
    ]
}

/// Quintile means under every scenario, with the change from pre-shock.
fn quintile_levels(d: &DecompositionResult) -> Result<Vec<u8>> {
    let mut t = Table::new(&["quintile", "scenario", "label", "monthly_mean", "pct_change_from_pre"])?;
    for (i, q) in quintile_labels().iter().enumerate() {
        for (name, label, v) in scenario_levels(d, i) {
            t.row(&[q.to_string(), name.into(), label.into(), money(v), pct(pct_change_of(v, d.pre[i]))])?;
        }
    }
    t.finish()
}

/// Effects A and B per quintile and bound, in dollars and as a share of pre-shock.
fn quintile_effects(d: &DecompositionResult) -> Result<Vec<u8>> {
    let mut t = Table::new(&[
        "quintile",
        "bound",
        "label",
        "effect_a",
        "effect_b",
        "total",
        "effect_a_pct",
        "effect_b_pct",
        "total_pct",
    ])?;
    for (i, q) in quintile_labels().iter().enumerate() {
        for b in Bound::ALL {
            let e = d.bound(b);
            let total = e.effect_a[i] + e.effect_b[i];
            let share = |x: f64| if d.pre[i] == 0.0 { f64::NAN } else { 100.0 * x / d.pre[i] };
            t.row(&[
                q.to_string(),
                b.name().into(),
                b.estimate_label().into(),
                money(e.effect_a[i]),
                money(e.effect_b[i]),
                money(total),
                pct(share(e.effect_a[i])),
                pct(share(e.effect_b[i])),
                pct(share(total)),
            ])?;
        }
    }
    t.finish()
}

fn breakdown_table(by_quintile: &Breakdown, mean: &Breakdown) -> Result<Vec<u8>> {
    let mut t = Table::new(&["group", "total_change", "free_childcare", "gross_income", "other_policy"])?;
    let rows = quintile_labels().into_iter().enumerate().map(|(i, q)| (q.to_string(), by_quintile, i));
    for (g, b, i) in rows.chain(std::iter::once(("all".to_string(), mean, 0))) {
        t.row(&[g, money(b.total[i]), money(b.free_childcare[i]), money(b.gross_income[i]), money(b.rest[i])])?;
    }
    t.finish()
}

/// Scalar measure (Gini or poverty rate) by bound.
fn scalar_effects(d: &DecompositionResult) -> Result<Vec<u8>> {
    let mut t = Table::new(&[
        "bound",
        "label",
        "pre",
        "counterfactual",
        "nowcast",
        "effect_a",
        "effect_b",
        "total_change",
        "identity_residual",
    ])?;
    for b in Bound::ALL {
        let e = d.bound(b);
        t.row(&[
            b.name().into(),
            b.impact_label().into(),
            ratio(d.pre[0]),
            ratio(e.counterfactual[0]),
            ratio(d.nowcast[0]),
            ratio(e.effect_a[0]),
            ratio(e.effect_b[0]),
            ratio(d.nowcast[0] - d.pre[0]),
            sci(e.identity_residual),
        ])?;
    }
    t.finish()
}

fn demographics(m: &MonthResult) -> Result<Vec<u8>> {
    let mut t = Table::new(&["variable", "baseline_pct", "panel_pct", "modelled_pct"])?;
    for r in &m.reweighted.report.rows {
        t.row(&[r.variable.clone(), pct(100.0 * r.baseline), pct(100.0 * r.panel), pct(100.0 * r.modelled)])?;
    }
    t.finish()
}

fn weight_diagnostics(m: &MonthResult) -> Result<Vec<u8>> {
    let r = &m.reweighted;
    let mut t = Table::new(&["statistic", "value"])?;
    t.row(&["gamma", &fixed(r.gamma, 6)])?;
    t.row(&["ratio_cap", &r.cap.map_or("none".into(), |c| fixed(c, 6))])?;
    t.row(&["n_capped", &r.n_capped.to_string()])?;
    t.row(&["population_target", &fixed(r.population_target, 2)])?;
    t.row(&["effective_sample_size", &fixed(r.report.effective_sample_size, 2)])?;
    t.row(&["max_min_weight_ratio", &fixed(r.report.max_min_weight_ratio, 4)])?;
    t.row(&["membership_iterations", &r.iterations.to_string()])?;
    t.row(&["removed_columns", &r.removed_columns.join("|")])?;
    t.finish()
}

fn unemployment(m: &MonthResult) -> Result<Vec<u8>> {
    let u = &m.reweighted.report.unemployment_rate;
    let mut t = Table::new(&["month", "baseline_pct", "panel_pct", "modelled_pct", "modelled_minus_panel_pp"])?;
    t.row(&[
        m.month.to_string(),
        pct(100.0 * u.baseline),
        pct(100.0 * u.panel),
        pct(100.0 * u.modelled),
        pct(100.0 * (u.modelled - u.panel)),
    ])?;
    t.finish()
}

fn transitions(m: &MonthResult) -> Result<Vec<u8>> {
    let mut t = Table::new(&["outcome", "target", "achieved", "selected_persons", "max_candidate_weight"])?;
    for a in &m.alignment {
        t.row(&[
            a.outcome.name().to_string(),
            fixed(a.target, 2),
            fixed(a.achieved, 2),
            a.selected.to_string(),
            fixed(a.max_weight, 2),
        ])?;
    }
    t.finish()
}

fn checks(m: &MonthResult) -> Result<Vec<u8>> {
    let mut t = Table::new(&["check", "value", "tolerance", "pass"])?;
    let decomp = m.decomposition.iter().flat_map(|d| d.bounds.iter()).map(|b| b.identity_residual).fold(0.0, f64::max);
    let mut add = |name: String, value: f64, tol: f64| {
        t.row(&[name, sci(value), sci(tol), (value <= tol).to_string()])
    };
    add("decomposition_identity".into(), decomp, DECOMPOSITION_TOLERANCE)?;
    add("accounting_identity".into(), m.accounting_residual, ACCOUNTING_TOLERANCE)?;
    let total = m.reweighted.sample.total_weight();
    add(
        "calibrated_total_relative_error".into(),
        (total - m.reweighted.population_target).abs() / m.reweighted.population_target,
        1e-9,
    )?;
    for a in &m.alignment {
        add(format!("alignment_{}", a.outcome.name()), (a.achieved - a.target).abs(), a.max_weight)?;
    }
    t.finish()
}

fn month_files(m: &MonthResult) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let get = |kind, concept| m.measure(&OutcomeMeasure::new(kind, concept));
    Ok(vec![
        ("table01_demographics.csv", demographics(m)?),
        ("table02_unemployment.csv", unemployment(m)?),
        ("weights_diagnostics.csv", weight_diagnostics(m)?),
        ("transitions.csv", transitions(m)?),
        ("table04_market_income_quintiles.csv", quintile_levels(get(MeasureKind::QuintileMeans, IncomeConcept::HouseholdMarket))?),
        ("table05_market_income_effects.csv", quintile_effects(get(MeasureKind::QuintileMeans, IncomeConcept::HouseholdMarket))?),
        (
            "table06_disposable_quintiles.csv",
            quintile_levels(get(MeasureKind::QuintileMeans, IncomeConcept::EquivalisedDisposable))?,
        ),
        (
            "table07_disposable_effects.csv",
            quintile_effects(get(MeasureKind::QuintileMeans, IncomeConcept::EquivalisedDisposable))?,
        ),
        ("table08_breakdown.csv", breakdown_table(&m.breakdown, &m.breakdown_mean)?),
        ("table09_market_gini.csv", scalar_effects(get(MeasureKind::Gini, IncomeConcept::Market15To64))?),
        ("table10_disposable_gini.csv", scalar_effects(get(MeasureKind::Gini, IncomeConcept::EquivalisedDisposable))?),
        ("table11_poverty.csv", scalar_effects(get(MeasureKind::PovertyRate, IncomeConcept::AfterHousing))?),
        ("checks.csv", checks(m)?),
    ])
}

fn scalar_series(months: &[MonthResult], measures: &[OutcomeMeasure]) -> Result<Vec<u8>> {
    let mut t = Table::new(&["month", "measure", "pre", "nowcast", "keep_jobs", "lose_jobs"])?;
    for m in months {
        for measure in measures {
            let d = m.measure(measure);
            t.row(&[
                m.month.to_string(),
                measure.label(),
                ratio(d.pre[0]),
                ratio(d.nowcast[0]),
                ratio(d.bound(Bound::KeepJobs).counterfactual[0]),
                ratio(d.bound(Bound::LoseJobs).counterfactual[0]),
            ])?;
        }
    }
    t.finish()
}

#[derive(Serialize)]
struct ManifestFile<'a> {
    path: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct Engine {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct PovertyLineEntry {
    value_fortnightly: String,
    anchor_month: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    engine: Engine,
    seed: u64,
    config_sha256: String,
    baseline_month: String,
    analysis_months: Vec<String>,
    poverty_line: PovertyLineEntry,
    files: Vec<ManifestFile<'a>>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub const MANIFEST: &str = "manifest.json";

/// All output files of a run keyed by relative path, manifest included.
pub fn render(
    cfg: &RunConfig,
    config_source: &[u8],
    baseline: &Baseline,
    months: &[MonthResult],
) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    for m in months {
        for (name, bytes) in month_files(m)? {
            files.insert(format!("months/{}/{name}", m.month), bytes);
        }
    }
    files.insert(
        "gini_series.csv".into(),
        scalar_series(
            months,
            &[
                OutcomeMeasure::new(MeasureKind::Gini, IncomeConcept::Market15To64),
                OutcomeMeasure::new(MeasureKind::Gini, IncomeConcept::EquivalisedDisposable),
            ],
        )?,
    );
    files.insert(
        "poverty_series.csv".into(),
        scalar_series(months, &[OutcomeMeasure::new(MeasureKind::PovertyRate, IncomeConcept::AfterHousing)])?,
    );
    let manifest = Manifest {
        engine: Engine { name: ENGINE_NAME, version: ENGINE_VERSION },
        seed: cfg.seed,
        config_sha256: sha256_hex(config_source),
        baseline_month: cfg.baseline_month.to_string(),
        analysis_months: months.iter().map(|m| m.month.to_string()).collect(),
        poverty_line: PovertyLineEntry {
            value_fortnightly: fixed(baseline.poverty_line.value, 6),
            anchor_month: baseline.poverty_line.anchor_month.to_string(),
        },
        files: files.iter().map(|(k, v)| ManifestFile { path: k, sha256: sha256_hex(v) }).collect(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Format { path: MANIFEST.into(), message: e.to_string() })?;
    json.push(b'\n');
    files.insert(MANIFEST.into(), json);
    Ok(files)
}
