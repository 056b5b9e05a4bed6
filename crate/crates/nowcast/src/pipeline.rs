//! Batch run: reweight, index, assign transitions, evaluate the rules and
//! decompose, once for the baseline month and independently for every
//! analysis month.

use std::collections::BTreeMap;

use nowcast_core::data::{equivalise, HouseholdId, MonthId, QuintileMap, RankedUnit, Sex, WeightedSample};
use nowcast_core::decompose::{
    breakdown_disposable, evaluate_scenario, run_decomposition, Breakdown, DecompositionResult, IncomeConcept,
    MeasureContext, MeasureKind, OutcomeMeasure, PovertyUnit,
};
use nowcast_core::design::CovariateSpec;
use nowcast_core::indexation::{index_sample, IndexTables, PayrollSeries};
use nowcast_core::reweight::{
    calibrate_total, compute_ratios, fit_membership, reweight_diagnostics, ReweightReport,
};
use nowcast_core::rng::stream;
use nowcast_core::stats::{anchor_poverty_line, PovertyLine};
use nowcast_core::taxben::PolicyRegime;
use nowcast_core::transitions::{
    align_binary, apply_transitions, fit_probit, interpolate_target, recent_employment_rows, retention_rows,
    score_baseline, AlignmentTarget, Candidate, Outcome, ProbitModel, Selection, Stratum, TrainingRow,
};
use rayon::prelude::*;

use crate::config::{needed_waves, LoadedConfig, Options, RunConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::synthpop::{gen_baseline_survey, gen_labour_panel, gen_payroll};

/// Everything a run reads, loaded once.
#[derive(Debug, Clone)]
pub struct Inputs {
    /// Survey records tagged with the baseline month, incomes at collection.
    pub survey: WeightedSample,
    pub waves: BTreeMap<MonthId, WeightedSample>,
    pub tables: IndexTables,
    pub p0: PolicyRegime,
    pub p1: PolicyRegime,
}

pub fn load_inputs(loaded: &LoadedConfig, cfg: &RunConfig) -> Result<Inputs> {
    let p0 = loaded.regime(&cfg.regimes.p0)?;
    let p1 = loaded.regime(&cfg.regimes.p1)?;
    let (survey, waves, payroll): (WeightedSample, Vec<WeightedSample>, PayrollSeries) =
        match (&cfg.data.synth, &cfg.data.files) {
            (Some(s), None) => {
                let mut s = s.clone();
                s.seed = cfg.seed;
                let survey = gen_baseline_survey(&s)?;
                let waves = gen_labour_panel(&s, &survey)?;
                (survey, waves, gen_payroll(&s)?)
            }
            (None, Some(f)) => (
                io::read_survey(&loaded.resolve(&f.survey_persons), &loaded.resolve(&f.survey_households), cfg.baseline_month)?,
                io::read_panel(&loaded.resolve(&f.panel_persons), &loaded.resolve(&f.panel_households))?,
                io::read_payroll(&loaded.resolve(&f.payroll))?,
            ),
            _ => return Err(Error::Config("give exactly one of [data.synth] and [data.files]".into())),
        };
    let waves: BTreeMap<MonthId, WeightedSample> = waves.into_iter().map(|w| (w.month, w)).collect();
    for m in needed_waves(cfg) {
        if !waves.contains_key(&m) {
            return Err(Error::Config(format!("no panel wave for {m}")));
        }
    }
    let factors = io::read_index_tables(&loaded.resolve(&cfg.indexation.tables))?;
    let ix = &cfg.indexation;
    let tables = IndexTables {
        baseline_month: cfg.baseline_month,
        awe_factor: ix.awe_factor,
        cpi_uprate: ix.cpi_uprate,
        years_to_baseline: ix.years_to_baseline,
        annual_real_return: ix.annual_real_return,
        payroll,
        investment: factors.investment,
        cpi: factors.cpi,
    };
    tables.check()?;
    Ok(Inputs { survey, waves, tables, p0, p1 })
}

/// Survey weights after reweighting toward one wave.
#[derive(Debug, Clone)]
pub struct Reweighted {
    pub sample: WeightedSample,
    pub report: ReweightReport,
    pub gamma: f64,
    pub cap: Option<f64>,
    pub n_capped: usize,
    pub population_target: f64,
    pub iterations: usize,
    pub removed_columns: Vec<String>,
}

pub fn reweight_toward(survey: &WeightedSample, wave: &WeightedSample, opts: &Options) -> Result<Reweighted> {
    let model = fit_membership(survey, wave, &CovariateSpec::membership_default(), opts.fallback)?;
    let update = compute_ratios(&model, survey, model.gamma(), opts.trim())?;
    let population_target = opts.population_target.unwrap_or_else(|| wave.total_weight());
    let sample = calibrate_total(&update, survey, population_target)?;
    let report = reweight_diagnostics(survey, &sample, wave);
    Ok(Reweighted {
        sample,
        report,
        gamma: update.gamma,
        cap: update.cap,
        n_capped: update.n_capped,
        population_target,
        iterations: model.model.fit.iterations,
        removed_columns: model.model.removed.clone(),
    })
}

/// Result of aligning one outcome in one month.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentOutcome {
    pub outcome: Outcome,
    pub target: f64,
    pub achieved: f64,
    pub selected: usize,
    /// Largest person weight among candidates, the alignment tolerance.
    pub max_weight: f64,
}

fn fit_by_sex<'a>(outcome: Outcome, month: MonthId, opts: &Options, rows: impl Fn(Sex) -> Vec<TrainingRow<'a>>) -> Result<Vec<ProbitModel>> {
    [Sex::Male, Sex::Female]
        .into_iter()
        .map(|sex| fit_probit(&rows(sex), &outcome.default_spec(), outcome, Stratum { sex, wave: month }, opts.fallback))
        .collect::<std::result::Result<_, _>>()
        .map_err(Error::from)
}

fn align(
    outcome: Outcome,
    candidates: &[Candidate],
    target: f64,
    opts: &Options,
    seed: u64,
    month: MonthId,
) -> Result<(Selection, AlignmentOutcome)> {
    let t = AlignmentTarget { outcome, target_count: target, noise_scale: opts.noise_scale };
    let mut rng = stream(seed, &format!("align/{}/{month}", outcome.name()));
    let sel = align_binary(candidates, &t, &mut rng)?;
    let max_weight = candidates.iter().map(|c| c.weight).fold(0.0, f64::max);
    let info = AlignmentOutcome { outcome, target, achieved: sel.achieved, selected: sel.selected.len(), max_weight };
    Ok((sel, info))
}

fn anchors(cfg: &RunConfig, outcome: Outcome) -> Vec<(MonthId, f64)> {
    cfg.alignment.iter().filter(|a| a.outcome == outcome).map(|a| (a.month, a.count)).collect()
}

/// Month-on-month retention rows stacked over every wave pair from the
/// baseline to `month`, so the model still sees job losses once exits
/// have stopped.
fn pooled_retention_rows(inputs: &Inputs, baseline: MonthId, month: MonthId, sex: Sex) -> Vec<TrainingRow<'_>> {
    let mut rows = Vec::new();
    let mut m = baseline;
    while m < month {
        rows.extend(retention_rows(&inputs.waves[&m], &inputs.waves[&m.next()], sex));
        m = m.next();
    }
    rows
}

/// Subsidy receipt and recent-employment eligibility for `month`, fitted
/// on the panel and aligned onto `sample`.
fn assign_transitions(
    cfg: &RunConfig,
    inputs: &Inputs,
    sample: &WeightedSample,
    month: MonthId,
) -> Result<(WeightedSample, Vec<AlignmentOutcome>)> {
    let opts = &cfg.options;
    let wave = &inputs.waves[&month];
    let mut outcomes = Vec::new();
    let mut jobkeeper = Vec::new();
    let mut eligibility = Vec::new();

    let jk_anchors = anchors(cfg, Outcome::JobkeeperReceipt);
    let jk_target = if jk_anchors.is_empty() { 0.0 } else { interpolate_target(&jk_anchors, month)? };
    if inputs.p1.covid_measures.jobkeeper.active && jk_target > 0.0 {
        let outcome = Outcome::JobkeeperReceipt;
        let models = fit_by_sex(outcome, month, opts, |sex| pooled_retention_rows(inputs, cfg.baseline_month, month, sex))?;
        let candidates = score_baseline(&models, sample)?;
        let (sel, info) = align(outcome, &candidates, jk_target, opts, cfg.seed, month)?;
        jobkeeper = sel.selected;
        outcomes.push(info);
    }

    if !inputs.p1.benefits.jobseeker.activity_test_active {
        let outcome = Outcome::RecentEmploymentEligibility;
        let models = fit_by_sex(outcome, month, opts, |sex| recent_employment_rows(wave, sex))?;
        let candidates = score_baseline(&models, sample)?;
        let el_anchors = anchors(cfg, outcome);
        let target = if el_anchors.is_empty() {
            candidates.iter().map(|c| c.weight * c.score).sum()
        } else {
            interpolate_target(&el_anchors, month)?
        };
        let (sel, info) = align(outcome, &candidates, target, opts, cfg.seed, month)?;
        eligibility = sel.selected;
        outcomes.push(info);
    }
    Ok((apply_transitions(sample, &jobkeeper, &eligibility)?, outcomes))
}

/// The baseline-month sample and the references frozen on it.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub reweighted: Reweighted,
    /// Reweighted to the baseline wave and indexed to the baseline month.
    pub sample: WeightedSample,
    pub quintiles: QuintileMap,
    pub poverty_line: PovertyLine,
}

pub fn prepare_baseline(cfg: &RunConfig, inputs: &Inputs) -> Result<Baseline> {
    let month = cfg.baseline_month;
    let reweighted = reweight_toward(&inputs.survey, &inputs.waves[&month], &cfg.options)?;
    let sample = index_sample(&reweighted.sample, month, &inputs.tables)?;
    let ev = evaluate_scenario(&sample, &inputs.p0, month)?;
    let units = ev
        .household_values(IncomeConcept::EquivalisedDisposable)?
        .into_iter()
        .map(|u| RankedUnit { id: u.id, value: u.value, weight: u.weight })
        .collect::<Vec<_>>();
    let quintiles = nowcast_core::data::assign_quintiles(&units)?;
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for (h, a) in sample.households.iter().zip(&ev.accounts) {
        let v = equivalise(a.after_housing_income, h)?;
        let w = match cfg.options.poverty_unit {
            PovertyUnit::Person => h.weight * h.size() as f64,
            PovertyUnit::Household => h.weight,
        };
        values.push(v);
        weights.push(w);
    }
    let poverty_line = anchor_poverty_line(&values, &weights, month)?;
    Ok(Baseline { reweighted, sample, quintiles, poverty_line })
}

/// Measures decomposed every month, in table order.
pub const MEASURES: [OutcomeMeasure; 7] = [
    OutcomeMeasure::new(MeasureKind::QuintileMeans, IncomeConcept::HouseholdMarket),
    OutcomeMeasure::new(MeasureKind::QuintileMeans, IncomeConcept::EquivalisedDisposable),
    OutcomeMeasure::new(MeasureKind::Gini, IncomeConcept::Market15To64),
    OutcomeMeasure::new(MeasureKind::Gini, IncomeConcept::EquivalisedDisposable),
    OutcomeMeasure::new(MeasureKind::PovertyRate, IncomeConcept::AfterHousing),
    OutcomeMeasure::new(MeasureKind::Mean, IncomeConcept::EquivalisedDisposable),
    OutcomeMeasure::new(MeasureKind::Mean, IncomeConcept::HouseholdMarket),
];

#[derive(Debug, Clone)]
pub struct MonthResult {
    pub month: MonthId,
    pub reweighted: Reweighted,
    pub alignment: Vec<AlignmentOutcome>,
    pub decomposition: Vec<DecompositionResult>,
    /// By baseline quintile of after-childcare equivalised income.
    pub breakdown: Breakdown,
    /// The same split for the mean over all persons.
    pub breakdown_mean: Breakdown,
    /// Largest accounting-identity violation across households and scenarios.
    pub accounting_residual: f64,
    pub sample: WeightedSample,
}

impl MonthResult {
    pub fn measure(&self, m: &OutcomeMeasure) -> &DecompositionResult {
        self.decomposition.iter().find(|d| d.measure == *m).expect("every listed measure is decomposed")
    }
}

pub fn run_month(cfg: &RunConfig, inputs: &Inputs, base: &Baseline, month: MonthId) -> Result<MonthResult> {
    let reweighted = reweight_toward(&inputs.survey, &inputs.waves[&month], &cfg.options)?;
    let indexed = index_sample(&reweighted.sample, month, &inputs.tables)?;
    let (sample, alignment) = assign_transitions(cfg, inputs, &indexed, month)?;
    let ctx = MeasureContext {
        quintiles: Some(&base.quintiles),
        poverty_line: Some(base.poverty_line),
        poverty_unit: cfg.options.poverty_unit,
    };
    let decomposition = run_decomposition(&base.sample, &sample, &inputs.p0, &inputs.p1, &MEASURES, &ctx)?;
    let after_childcare = OutcomeMeasure::new(MeasureKind::QuintileMeans, IncomeConcept::EquivalisedAfterChildcare);
    let breakdown = breakdown_disposable(&base.sample, &sample, &inputs.p0, &inputs.p1, &after_childcare, &ctx)?;
    let mean_after = OutcomeMeasure::new(MeasureKind::Mean, IncomeConcept::EquivalisedAfterChildcare);
    let breakdown_mean = breakdown_disposable(&base.sample, &sample, &inputs.p0, &inputs.p1, &mean_after, &ctx)?;
    let mut accounting_residual: f64 = 0.0;
    for (s, p, m) in [(&base.sample, &inputs.p0, cfg.baseline_month), (&sample, &inputs.p1, month)] {
        for a in evaluate_scenario(s, p, m)?.accounts {
            accounting_residual = accounting_residual.max(a.identity_residual());
        }
    }
    Ok(MonthResult { month, reweighted, alignment, decomposition, breakdown, breakdown_mean, accounting_residual, sample })
}

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub months: Option<Vec<MonthId>>,
}

/// In-memory result of a run: per-month results and every output file.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub baseline: Baseline,
    pub months: Vec<MonthResult>,
    /// Relative path → contents, including the manifest.
    pub files: BTreeMap<String, Vec<u8>>,
}

pub fn effective_config(loaded: &LoadedConfig, overrides: &Overrides) -> RunConfig {
    let mut cfg = loaded.config.clone();
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(m) = &overrides.months {
        cfg.analysis_months = m.clone();
    }
    cfg
}

/// Runs every stage and renders the outputs without touching the disk.
pub fn execute(loaded: &LoadedConfig, overrides: &Overrides) -> Result<RunOutput> {
    let cfg = effective_config(loaded, overrides);
    let findings = crate::config::validate(&LoadedConfig { config: cfg.clone(), ..loaded.clone() });
    if let Some(f) = findings.first() {
        return Err(Error::Config(f.to_string()));
    }
    let inputs = load_inputs(loaded, &cfg)?;
    let baseline = prepare_baseline(&cfg, &inputs)?;
    let mut months: Vec<MonthId> = cfg.analysis_months.clone();
    months.sort();
    let results: Vec<MonthResult> =
        months.par_iter().map(|&m| run_month(&cfg, &inputs, &baseline, m)).collect::<Result<_>>()?;
    let files = crate::report::render(&cfg, &loaded.source, &baseline, &results)?;
    Ok(RunOutput { config: cfg, baseline, months: results, files })
}

/// Writes a run's files under `dir`.
pub fn write_output(dir: &std::path::Path, out: &RunOutput) -> Result<()> {
    for (rel, bytes) in &out.files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Household ids in baseline quintile order, for tests and reports.
pub fn quintile_members(map: &QuintileMap, q: u8) -> Vec<HouseholdId> {
    map.quintile.iter().filter(|(_, v)| **v == q).map(|(k, _)| *k).collect()
}
