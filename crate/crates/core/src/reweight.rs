//! Reweights the baseline survey toward a labour-force wave.
//!
//! A logit model of membership in the pooled data (survey = 0, wave = 1)
//! turns into a density ratio by Bayes' rule:
//! `Pr(X | wave) / Pr(X | survey) = odds(X) · γ`, with γ the ratio of the
//! sources' (normalised) sizes. Each survey household's weight is scaled by
//! the ratio of its adults and then calibrated to a population total.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::data::{
    Education, HouseholdId, HouseholdRecord, LabourState, Marital, PersonId, PersonRecord, Sex,
    WeightedSample, ADULT_AGE,
};
use crate::design::CovariateSpec;
use crate::glm::{fit_spec, FitOptions, Link, SpecFit};
use crate::math::{ceil, exp, logistic};
use crate::stats::effective_sample_size;
use crate::{Error, Result};

/// Default nearest-rank quantile at which person ratios are capped.
pub const DEFAULT_TRIM_QUANTILE: f64 = 0.995;

fn adult_rows(sample: &WeightedSample) -> impl Iterator<Item = (&PersonRecord, &HouseholdRecord)> {
    sample.persons().filter(|(_, p)| p.age >= ADULT_AGE).map(|(h, p)| (p, h))
}

#[derive(Debug, Clone)]
pub struct MembershipModel {
    pub model: SpecFit,
    pub n_baseline: usize,
    pub n_panel: usize,
}

impl MembershipModel {
    /// Prior ratio of the normalised source sizes, `n_baseline / n_panel`.
    pub fn gamma(&self) -> f64 {
        self.n_baseline as f64 / self.n_panel as f64
    }

    pub fn converged(&self) -> bool {
        self.model.fit.converged
    }
}

/// Fits the membership logit on persons aged 15 and over from both sources.
///
/// Each source's person weights are normalised to sum to its record count,
/// so they act as frequency weights without letting the population totals
/// shift the intercept. With `fallback`, failing columns are removed and the
/// model refitted.
pub fn fit_membership(
    baseline: &WeightedSample,
    panel: &WeightedSample,
    spec: &CovariateSpec,
    fallback: bool,
) -> Result<MembershipModel> {
    let base: Vec<_> = adult_rows(baseline).collect();
    let wave: Vec<_> = adult_rows(panel).collect();
    if base.is_empty() {
        return Err(Error::EmptyStratum("baseline sample".into()));
    }
    if wave.is_empty() {
        return Err(Error::EmptyStratum("panel wave".into()));
    }
    let mass = |rows: &[(&PersonRecord, &HouseholdRecord)]| rows.iter().map(|(_, h)| h.weight).sum::<f64>();
    let (wb, wp) = (mass(&base), mass(&wave));
    if !(wb > 0.0 && wp > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let sb = base.len() as f64 / wb;
    let sp = wave.len() as f64 / wp;
    let mut weights: Vec<f64> = base.iter().map(|(_, h)| h.weight * sb).collect();
    weights.extend(wave.iter().map(|(_, h)| h.weight * sp));
    let mut y = alloc::vec![false; base.len()];
    y.resize(base.len() + wave.len(), true);
    let rows: Vec<_> = base.iter().chain(wave.iter()).copied().collect();
    let model = fit_spec(spec, &rows, &y, &weights, Link::Logit, &FitOptions::default(), fallback)?;
    Ok(MembershipModel { model, n_baseline: base.len(), n_panel: wave.len() })
}

/// New survey weights before calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightUpdate {
    pub gamma: f64,
    /// Cap applied to person ratios, if trimming was on.
    pub cap: Option<f64>,
    pub n_capped: usize,
    pub person_ratios: Vec<(PersonId, f64)>,
    /// Updated weight per household, in sample order.
    pub household_weights: Vec<(HouseholdId, f64)>,
}

/// Nearest-rank quantile of `values` (which it sorts).
fn nearest_rank(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let k = (ceil(q * n as f64) as usize).clamp(1, n);
    values[k - 1]
}

/// Density ratios `odds · γ` for every adult in the survey, capped at the
/// `trim` quantile when given, and the household weights they imply: the
/// old weight times the mean ratio of the household's adults (γ for a
/// household without adults).
pub fn compute_ratios(
    model: &MembershipModel,
    baseline: &WeightedSample,
    gamma: f64,
    trim: Option<f64>,
) -> Result<WeightUpdate> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Invalid("gamma must be positive".into()));
    }
    if !model.converged() {
        return Err(Error::NotConverged(model.model.fit.iterations));
    }
    if let Some(q) = trim {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Invalid("trim quantile must lie in (0, 1]".into()));
        }
    }
    let mut person_ratios = Vec::new();
    for (p, h) in adult_rows(baseline) {
        let eta = model.model.linear_index(p, h);
        if !(logistic(-eta) > 0.0) {
            return Err(Error::ZeroBaseProbability(p.person_id.0));
        }
        person_ratios.push((p.person_id, exp(eta) * gamma));
    }
    let cap = match trim {
        Some(q) if !person_ratios.is_empty() => {
            let mut r: Vec<f64> = person_ratios.iter().map(|x| x.1).collect();
            Some(nearest_rank(&mut r, q))
        }
        _ => None,
    };
    let mut n_capped = 0;
    if let Some(c) = cap {
        for r in &mut person_ratios {
            if r.1 > c {
                r.1 = c;
                n_capped += 1;
            }
        }
    }
    let mut household_weights = Vec::with_capacity(baseline.households.len());
    let mut k = 0;
    for h in &baseline.households {
        let adults = h.members.iter().filter(|p| p.age >= ADULT_AGE).count();
        let factor = if adults == 0 {
            gamma
        } else {
            person_ratios[k..k + adults].iter().map(|x| x.1).sum::<f64>() / adults as f64
        };
        k += adults;
        household_weights.push((h.household_id, h.weight * factor));
    }
    Ok(WeightUpdate { gamma, cap, n_capped, person_ratios, household_weights })
}

/// Applies the update's weights and rescales them so they sum to
/// `population_target`.
pub fn calibrate_total(update: &WeightUpdate, baseline: &WeightedSample, population_target: f64) -> Result<WeightedSample> {
    if !(population_target > 0.0 && population_target.is_finite()) {
        return Err(Error::Invalid("population target must be positive".into()));
    }
    if update.household_weights.len() != baseline.households.len() {
        return Err(Error::Invalid("weight update does not match the sample".into()));
    }
    let total: f64 = update.household_weights.iter().map(|x| x.1).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let scale = population_target / total;
    let mut out = baseline.clone();
    for (h, &(id, w)) in out.households.iter_mut().zip(&update.household_weights) {
        if h.household_id != id {
            return Err(Error::Invalid("weight update does not match the sample".into()));
        }
        h.weight = w * scale;
    }
    Ok(out)
}

/// Weighted shares of persons aged 15 and over.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareRow {
    pub variable: String,
    pub baseline: f64,
    pub panel: f64,
    pub modelled: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReweightReport {
    pub rows: Vec<ShareRow>,
    /// Unemployed over employed plus unemployed.
    pub unemployment_rate: ShareRow,
    pub effective_sample_size: f64,
    /// Largest over smallest positive household weight after reweighting.
    pub max_min_weight_ratio: f64,
}

type Indicator = fn(&PersonRecord, &HouseholdRecord) -> bool;

const INDICATORS: &[(&str, Indicator)] = &[
    ("aged 15-24", |p, _| p.age <= 24),
    ("aged 25-64", |p, _| (25..=64).contains(&p.age)),
    ("aged 65+", |p, _| p.age >= 65),
    ("male", |p, _| p.sex == Sex::Male),
    ("partnered", |p, _| p.marital == Marital::Partnered),
    ("overseas born", |p, _| p.overseas_born),
    ("bachelor degree or higher", |p, _| p.education == Education::BachelorOrHigher),
    ("employed", |p, _| p.labour_state == LabourState::Employed),
    ("employed full time", |p, _| p.is_employed() && p.usual_hours >= 35.0),
    ("unemployed", |p, _| p.labour_state == LabourState::Unemployed),
    ("not in labour force", |p, _| p.labour_state == LabourState::NotInLabourForce),
    ("children under 5 in household", |_, h| h.n_children_0_4 > 0),
];

/// Weighted share of adults satisfying `f` among adults satisfying `within`.
pub fn adult_share(sample: &WeightedSample, f: impl Fn(&PersonRecord, &HouseholdRecord) -> bool, within: impl Fn(&PersonRecord) -> bool) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (p, h) in adult_rows(sample) {
        if within(p) {
            den += h.weight;
            if f(p, h) {
                num += h.weight;
            }
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Weighted unemployment rate of persons aged 15 and over.
pub fn unemployment_rate(sample: &WeightedSample) -> f64 {
    adult_share(sample, |p, _| p.labour_state == LabourState::Unemployed, |p| p.labour_state != LabourState::NotInLabourForce)
}

/// Demographic profile of the survey before and after reweighting next to
/// the wave it was reweighted toward, with weight-dispersion diagnostics.
pub fn reweight_diagnostics(before: &WeightedSample, after: &WeightedSample, panel: &WeightedSample) -> ReweightReport {
    let row = |name: &str, f: &dyn Fn(&WeightedSample) -> f64| ShareRow {
        variable: name.to_string(),
        baseline: f(before),
        panel: f(panel),
        modelled: f(after),
    };
    let rows = INDICATORS.iter().map(|(name, f)| row(name, &|s| adult_share(s, f, |_| true))).collect();
    let weights: Vec<f64> = after.households.iter().map(|h| h.weight).collect();
    let positive = weights.iter().copied().filter(|w| *w > 0.0);
    let (lo, hi) = positive.fold((f64::INFINITY, 0.0_f64), |(lo, hi), w| (lo.min(w), hi.max(w)));
    ReweightReport {
        rows,
        unemployment_rate: row("unemployment rate", &unemployment_rate),
        effective_sample_size: effective_sample_size(&weights),
        max_min_weight_ratio: if hi > 0.0 { hi / lo } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixtures::*;
    use crate::data::{Industry, MonthId};
    use crate::design::{Factor, Term};
    use proptest::prelude::*;

    fn month() -> MonthId {
        MonthId::new(2020, 2).unwrap()
    }

    /// Single-adult households; `employed` of `n` are employed.
    fn sample(first_id: u64, n: usize, employed_n: usize, weight: f64) -> WeightedSample {
        let hs = (0..n)
            .map(|i| {
                let id = first_id + i as u64;
                let p = person(id, 0, 30 + (i % 7) as u32);
                let p = if i < employed_n { employed(p, 1_000.0, Industry::Mining) } else { p };
                let mut h = household_of(id, alloc::vec![p]);
                h.weight = weight;
                h
            })
            .collect();
        WeightedSample::new(month(), hs)
    }

    fn employment_cell() -> CovariateSpec {
        CovariateSpec::new(alloc::vec![Term::Cell(alloc::vec![Factor::LabourState])])
    }

    #[test]
    fn identical_sources_give_flat_model() {
        let s = sample(1, 40, 25, 3.0);
        let m = fit_membership(&s, &s, &employment_cell(), false).unwrap();
        for b in &m.model.fit.coefficients {
            assert!(b.abs() < 1e-8);
        }
        let u = compute_ratios(&m, &s, m.gamma(), Some(DEFAULT_TRIM_QUANTILE)).unwrap();
        for ((_, w), h) in u.household_weights.iter().zip(&s.households) {
            assert!((w - h.weight).abs() < 1e-9);
        }
    }

    #[test]
    fn binary_covariate_ratios_match_cell_proportions() {
        // survey: half employed; wave: a quarter employed
        let base = sample(1, 200, 100, 5.0);
        let wave = sample(1_000, 400, 100, 2.0);
        let m = fit_membership(&base, &wave, &employment_cell(), false).unwrap();
        let u = compute_ratios(&m, &base, m.gamma(), None).unwrap();
        for ((_, p), (_, r)) in base.persons().zip(&u.person_ratios) {
            let expected = if p.is_employed() { 0.5 } else { 1.5 };
            assert!((r - expected).abs() < 1e-8, "{r}");
        }
        let doubled = compute_ratios(&m, &base, 2.0 * m.gamma(), None).unwrap();
        for (a, b) in u.household_weights.iter().zip(&doubled.household_weights) {
            assert!((2.0 * a.1 - b.1).abs() < 1e-9 * b.1);
        }
        let cal = calibrate_total(&u, &base, wave.total_weight()).unwrap();
        let report = reweight_diagnostics(&base, &cal, &wave);
        let employed = report.rows.iter().find(|r| r.variable == "employed").unwrap();
        assert!((employed.modelled - 0.25).abs() < 1e-8);
        assert!((report.unemployment_rate.modelled - report.unemployment_rate.panel).abs() < 1e-8);
    }

    #[test]
    fn zero_coefficients_keep_weights() {
        let base = sample(1, 30, 10, 4.0);
        let wave = sample(100, 30, 10, 4.0);
        let mut m = fit_membership(&base, &wave, &employment_cell(), false).unwrap();
        for b in &mut m.model.fit.coefficients {
            *b = 0.0;
        }
        let u = compute_ratios(&m, &base, 1.0, None).unwrap();
        assert!(u.household_weights.iter().all(|(_, w)| *w == 4.0));
    }

    #[test]
    fn trimming_caps_extreme_ratios() {
        let mut r: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(nearest_rank(&mut r, 0.995), 995.0);
        assert_eq!(nearest_rank(&mut [3.0], 0.995), 3.0);
    }

    #[test]
    fn calibration_examples() {
        let base = sample(1, 8, 3, 100.0);
        let u = WeightUpdate {
            gamma: 1.0,
            cap: None,
            n_capped: 0,
            person_ratios: Vec::new(),
            household_weights: base.households.iter().map(|h| (h.household_id, h.weight)).collect(),
        };
        let cal = calibrate_total(&u, &base, 1_000.0).unwrap();
        assert!(cal.households.iter().all(|h| (h.weight - 125.0).abs() < 1e-12));
        let same = calibrate_total(&u, &base, 800.0).unwrap();
        assert_eq!(same, base);
        let zero = WeightUpdate { household_weights: u.household_weights.iter().map(|(i, _)| (*i, 0.0)).collect(), ..u };
        assert_eq!(calibrate_total(&zero, &base, 1.0), Err(Error::ZeroWeight));
    }

    #[test]
    fn neff_of_equal_weights() {
        let s = sample(1, 12, 4, 7.0);
        let r = reweight_diagnostics(&s, &s, &s);
        assert!((r.effective_sample_size - 12.0).abs() < 1e-9);
        assert_eq!(r.max_min_weight_ratio, 1.0);
        for row in &r.rows {
            assert_eq!(row.baseline, row.modelled);
        }
    }

    proptest! {
        #[test]
        fn calibration_hits_target(ws in prop::collection::vec(0.01f64..1e6, 1..50), target in 1.0f64..1e9) {
            let base = sample(1, ws.len(), 0, 1.0);
            let u = WeightUpdate {
                gamma: 1.0,
                cap: None,
                n_capped: 0,
                person_ratios: Vec::new(),
                household_weights: base.households.iter().zip(&ws).map(|(h, w)| (h.household_id, *w)).collect(),
            };
            let cal = calibrate_total(&u, &base, target).unwrap();
            prop_assert!((cal.total_weight() - target).abs() <= 1e-9 * target);
        }
    }
}
