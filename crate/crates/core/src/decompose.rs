//! Sequential decomposition of a distributional change.
//!
//! With `I(p, y)` an outcome measure under rules `p` on sample `y`,
//!
//! ```text
//! I(p₁,y₁) − I(p₀,y₀) = [I(p₀,y₁*) − I(p₀,y₀)] + [I(p₁,y₁) − I(p₀,y₁*)]
//!                        (A: income shock)        (B: policy response)
//! ```
//!
//! where `y₁*` is the analysis-month sample with subsidised jobs either
//! kept without the subsidy or lost. The path is fixed: the counterfactual
//! is always the old rules on the new sample.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{equivalise, LabourState, MonthId, PersonRecord, QuintileMap, WeightedSample};
use crate::stats::{gini, poverty_rate, quintile_means, HouseholdValue, PovertyLine};
use crate::taxben::{compute_disposable, jobkeeper_wage, DisposableIncomeResult, PolicyRegime};
use crate::{Error, Result};

/// How subsidised jobs are treated when the subsidy is taken away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Every subsidised job survives at its usual wage.
    KeepJobs,
    /// Every subsidised job is lost.
    LoseJobs,
}

impl Bound {
    pub const ALL: [Bound; 2] = [Bound::KeepJobs, Bound::LoseJobs];

    pub fn name(self) -> &'static str {
        match self {
            Bound::KeepJobs => "keep_jobs",
            Bound::LoseJobs => "lose_jobs",
        }
    }

    /// Label of the bound in impact-style tables.
    pub fn impact_label(self) -> &'static str {
        match self {
            Bound::KeepJobs => "low impact",
            Bound::LoseJobs => "high impact",
        }
    }

    /// Label of the bound in income-level tables.
    pub fn estimate_label(self) -> &'static str {
        match self {
            Bound::KeepJobs => "upper estimate",
            Bound::LoseJobs => "lower estimate",
        }
    }
}

/// The analysis-month sample with the wage subsidy taken away.
///
/// `KeepJobs` clears the subsidy flags; wages are already stored at their
/// usual level. `LoseJobs` makes every flagged person unemployed with no
/// wage and no hours.
pub fn build_counterfactual(nowcast: &WeightedSample, bound: Bound) -> WeightedSample {
    let mut out = nowcast.clone();
    for h in &mut out.households {
        for p in &mut h.members {
            if !p.jobkeeper_flag {
                continue;
            }
            p.jobkeeper_flag = false;
            if bound == Bound::LoseJobs {
                p.labour_state = LabourState::Unemployed;
                p.wage_income = 0.0;
                p.usual_hours = 0.0;
                p.n_jobs = 0;
                p.unemployment_duration = 0;
            }
        }
    }
    out
}

/// Counterfactual for a given nowcast regime: when that regime pays no
/// subsidy, no job counts as subsidised and both bounds keep every job.
pub fn counterfactual_under(nowcast: &WeightedSample, bound: Bound, p1: &PolicyRegime) -> WeightedSample {
    if p1.covid_measures.jobkeeper.active {
        build_counterfactual(nowcast, bound)
    } else {
        build_counterfactual(nowcast, Bound::KeepJobs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Mean,
    Gini,
    PovertyRate,
    QuintileMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncomeConcept {
    /// Wage (as paid), business and investment income of persons aged 15-64.
    Market15To64,
    /// Household wage (as paid), business and investment income.
    HouseholdMarket,
    /// Household private income including any subsidy top-up.
    HouseholdGross,
    EquivalisedDisposable,
    EquivalisedAfterChildcare,
    /// Equivalised income after childcare and housing costs.
    AfterHousing,
}

impl IncomeConcept {
    pub fn name(self) -> &'static str {
        match self {
            IncomeConcept::Market15To64 => "market_income_15_64",
            IncomeConcept::HouseholdMarket => "household_market_income",
            IncomeConcept::HouseholdGross => "household_gross_income",
            IncomeConcept::EquivalisedDisposable => "equivalised_disposable",
            IncomeConcept::EquivalisedAfterChildcare => "equivalised_disposable_after_childcare",
            IncomeConcept::AfterHousing => "equivalised_after_housing",
        }
    }

    fn equivalised(self) -> bool {
        matches!(
            self,
            IncomeConcept::EquivalisedDisposable | IncomeConcept::EquivalisedAfterChildcare | IncomeConcept::AfterHousing
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeMeasure {
    pub kind: MeasureKind,
    pub concept: IncomeConcept,
}

impl OutcomeMeasure {
    pub const fn new(kind: MeasureKind, concept: IncomeConcept) -> Self {
        OutcomeMeasure { kind, concept }
    }

    pub fn label(&self) -> String {
        let kind = match self.kind {
            MeasureKind::Mean => "mean",
            MeasureKind::Gini => "gini",
            MeasureKind::PovertyRate => "poverty_rate",
            MeasureKind::QuintileMeans => "quintile_means",
        };
        alloc::format!("{kind}:{}", self.concept.name())
    }
}

/// Units a poverty rate counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PovertyUnit {
    /// Every member carries the household value; weights are household weight × size.
    #[default]
    Person,
    Household,
}

/// Fixed reference objects some measures need.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeasureContext<'a> {
    /// Baseline-month quintile map, for quintile means.
    pub quintiles: Option<&'a QuintileMap>,
    /// Anchored poverty line, for poverty rates.
    pub poverty_line: Option<PovertyLine>,
    pub poverty_unit: PovertyUnit,
}

/// One sample run through one set of rules.
#[derive(Debug, Clone)]
pub struct Evaluated<'a> {
    pub sample: &'a WeightedSample,
    pub month: MonthId,
    pub accounts: Vec<DisposableIncomeResult>,
    /// Market income of persons aged 15-64 with their household weight.
    pub market_15_64: Vec<(f64, f64)>,
    /// Market income per household, in sample order.
    pub household_market: Vec<f64>,
}

pub fn evaluate_scenario<'a>(sample: &'a WeightedSample, regime: &PolicyRegime, month: MonthId) -> Result<Evaluated<'a>> {
    let accounts = sample.households.iter().map(|h| compute_disposable(h, regime, month)).collect::<Result<Vec<_>>>()?;
    let market = |p: &PersonRecord| jobkeeper_wage(p, regime).paid + p.business_income + p.investment_income;
    let market_15_64 = sample.persons().filter(|(_, p)| (15..=64).contains(&p.age)).map(|(h, p)| (market(p), h.weight)).collect();
    let household_market = sample.households.iter().map(|h| h.members.iter().map(market).sum()).collect();
    Ok(Evaluated { sample, month, accounts, market_15_64, household_market })
}

impl Evaluated<'_> {
    /// Household-level value of `concept` in fortnightly units.
    pub fn household_values(&self, concept: IncomeConcept) -> Result<Vec<HouseholdValue>> {
        self.sample
            .households
            .iter()
            .zip(&self.accounts)
            .zip(&self.household_market)
            .map(|((h, a), market)| {
                let value = match concept {
                    IncomeConcept::Market15To64 => {
                        return Err(Error::Measure("market income 15-64 is a person-level concept".into()))
                    }
                    IncomeConcept::HouseholdMarket => *market,
                    IncomeConcept::HouseholdGross => a.gross_income(),
                    IncomeConcept::EquivalisedDisposable => equivalise(a.disposable_income, h)?,
                    IncomeConcept::EquivalisedAfterChildcare => equivalise(a.disposable_after_childcare, h)?,
                    IncomeConcept::AfterHousing => equivalise(a.after_housing_income, h)?,
                };
                Ok(HouseholdValue { id: h.household_id, value, weight: h.weight })
            })
            .collect()
    }

    /// Values and weights of the units a scalar measure is taken over:
    /// persons for equivalised concepts (each member carries the household
    /// value and weight), households for household gross income.
    pub fn unit_values(&self, concept: IncomeConcept) -> Result<(Vec<f64>, Vec<f64>)> {
        if concept == IncomeConcept::Market15To64 {
            return Ok(self.market_15_64.iter().copied().unzip());
        }
        let hv = self.household_values(concept)?;
        if concept.equivalised() {
            let sizes = self.sample.households.iter().map(|h| h.size() as f64);
            Ok(hv.iter().zip(sizes).map(|(u, n)| (u.value, u.weight * n)).unzip())
        } else {
            Ok(hv.iter().map(|u| (u.value, u.weight)).unzip())
        }
    }

    /// Value of `measure`: one number, or five for quintile means
    /// (fortnightly units).
    pub fn measure(&self, measure: &OutcomeMeasure, ctx: &MeasureContext<'_>) -> Result<Vec<f64>> {
        match measure.kind {
            MeasureKind::QuintileMeans => {
                let map = ctx.quintiles.ok_or_else(|| Error::Measure("quintile means need a quintile map".into()))?;
                Ok(quintile_means(&self.household_values(measure.concept)?, map)?.to_vec())
            }
            MeasureKind::Mean => {
                let (v, w) = self.unit_values(measure.concept)?;
                let total: f64 = w.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::ZeroWeight);
                }
                Ok(vec![v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / total])
            }
            MeasureKind::Gini => {
                let (mut v, w) = self.unit_values(measure.concept)?;
                if measure.concept.equivalised() {
                    // disposable incomes are bottom-coded at zero
                    v.iter_mut().for_each(|x| *x = x.max(0.0));
                }
                Ok(vec![gini(&v, &w)?])
            }
            MeasureKind::PovertyRate => {
                if !measure.concept.equivalised() {
                    return Err(Error::Measure("poverty needs an equivalised concept".into()));
                }
                let line = ctx.poverty_line.ok_or_else(|| Error::Measure("poverty rate needs a poverty line".into()))?;
                let (v, w) = match ctx.poverty_unit {
                    PovertyUnit::Person => self.unit_values(measure.concept)?,
                    PovertyUnit::Household => {
                        self.household_values(measure.concept)?.iter().map(|u| (u.value, u.weight)).unzip()
                    }
                };
                Ok(vec![poverty_rate(&v, &w, &line)?])
            }
        }
    }
}

/// Effects under one counterfactual bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEffects {
    pub bound: Bound,
    /// `I(p₀, y₁*)`.
    pub counterfactual: Vec<f64>,
    pub effect_a: Vec<f64>,
    pub effect_b: Vec<f64>,
    /// Largest relative violation of `A + B = I(p₁,y₁) − I(p₀,y₀)`.
    pub identity_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub measure: OutcomeMeasure,
    /// `I(p₀, y₀)`.
    pub pre: Vec<f64>,
    /// `I(p₁, y₁)`.
    pub nowcast: Vec<f64>,
    pub bounds: Vec<BoundEffects>,
}

impl DecompositionResult {
    pub fn bound(&self, b: Bound) -> &BoundEffects {
        self.bounds.iter().find(|x| x.bound == b).expect("both bounds are always present")
    }

    pub fn total_change(&self) -> Vec<f64> {
        self.nowcast.iter().zip(&self.pre).map(|(a, b)| a - b).collect()
    }
}

fn relative_residual(pre: &[f64], now: &[f64], cf: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for k in 0..pre.len() {
        let scale = pre[k].abs().max(now[k].abs()).max(cf[k].abs());
        let gap = ((a[k] + b[k]) - (now[k] - pre[k])).abs();
        if gap > 0.0 {
            worst = worst.max(gap / scale.max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// Evaluates the four scenarios once and decomposes every measure.
pub fn run_decomposition(
    baseline: &WeightedSample,
    nowcast: &WeightedSample,
    p0: &PolicyRegime,
    p1: &PolicyRegime,
    measures: &[OutcomeMeasure],
    ctx: &MeasureContext<'_>,
) -> Result<Vec<DecompositionResult>> {
    let pre = evaluate_scenario(baseline, p0, baseline.month)?;
    let now = evaluate_scenario(nowcast, p1, nowcast.month)?;
    let cf_samples: Vec<(Bound, WeightedSample)> =
        Bound::ALL.iter().map(|&b| (b, counterfactual_under(nowcast, b, p1))).collect();
    let cfs = cf_samples
        .iter()
        .map(|(b, s)| Ok((*b, evaluate_scenario(s, p0, nowcast.month)?)))
        .collect::<Result<Vec<_>>>()?;
    measures
        .iter()
        .map(|m| {
            let i0 = pre.measure(m, ctx)?;
            let i1 = now.measure(m, ctx)?;
            let bounds = cfs
                .iter()
                .map(|(bound, ev)| {
                    let cf = ev.measure(m, ctx)?;
                    let a: Vec<f64> = cf.iter().zip(&i0).map(|(x, y)| x - y).collect();
                    let b: Vec<f64> = i1.iter().zip(&cf).map(|(x, y)| x - y).collect();
                    let identity_residual = relative_residual(&i0, &i1, &cf, &a, &b);
                    Ok(BoundEffects { bound: *bound, counterfactual: cf, effect_a: a, effect_b: b, identity_residual })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DecompositionResult { measure: *m, pre: i0, nowcast: i1, bounds })
        })
        .collect()
}

/// Split of a total change into free childcare, gross income and the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub measure: OutcomeMeasure,
    pub total: Vec<f64>,
    /// `I(p₁,y₁) − I(p₁ without free childcare, y₁)`.
    pub free_childcare: Vec<f64>,
    /// `I(p₀ with p₁'s wage subsidy, y₁) − I(p₀,y₀)`.
    pub gross_income: Vec<f64>,
    pub rest: Vec<f64>,
}

pub fn breakdown_disposable(
    baseline: &WeightedSample,
    nowcast: &WeightedSample,
    p0: &PolicyRegime,
    p1: &PolicyRegime,
    measure: &OutcomeMeasure,
    ctx: &MeasureContext<'_>,
) -> Result<Breakdown> {
    let mut no_childcare = p1.clone();
    no_childcare.covid_measures.free_childcare.active = false;
    no_childcare.regime_id = no_childcare.regime_id.to_string() + " without free childcare";
    let mut subsidy_only = p0.clone();
    subsidy_only.covid_measures.jobkeeper = p1.covid_measures.jobkeeper;
    let month = nowcast.month;
    let i0 = evaluate_scenario(baseline, p0, baseline.month)?.measure(measure, ctx)?;
    let i1 = evaluate_scenario(nowcast, p1, month)?.measure(measure, ctx)?;
    let i_nc = evaluate_scenario(nowcast, &no_childcare, month)?.measure(measure, ctx)?;
    let i_gross = evaluate_scenario(nowcast, &subsidy_only, month)?.measure(measure, ctx)?;
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let total = diff(&i1, &i0);
    let free_childcare = diff(&i1, &i_nc);
    let gross_income = diff(&i_gross, &i0);
    let rest = (0..total.len()).map(|k| total[k] - free_childcare[k] - gross_income[k]).collect();
    Ok(Breakdown { measure: *measure, total, free_childcare, gross_income, rest })
}
