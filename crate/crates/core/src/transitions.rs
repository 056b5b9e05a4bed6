//! Labour-market transition propensities fitted on the panel, scored on
//! the survey and aligned to administrative counts.
//!
//! Two outcomes are modelled, each separately by sex and wave:
//! remaining employed from one wave to the next (whose complement is the
//! wage-subsidy propensity of employed persons) and having worked since the
//! baseline month (for people now out of the labour force).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::data::{HouseholdRecord, LabourState, MonthId, PersonId, PersonRecord, Sex, WeightedSample, ADULT_AGE};
use crate::design::{CovariateSpec, Term};
use crate::glm::{fit_spec, FitOptions, Link, SpecFit};
use crate::math::logit;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Wage-subsidy receipt among the employed.
    JobkeeperReceipt,
    /// Worked at least once since the baseline month, among those out of
    /// the labour force.
    RecentEmploymentEligibility,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::JobkeeperReceipt => "jobkeeper_receipt",
            Outcome::RecentEmploymentEligibility => "recent_employment_eligibility",
        }
    }

    /// Whether a survey person belongs to the population scored for this outcome.
    pub fn conditions_on(self, p: &PersonRecord) -> bool {
        p.age >= ADULT_AGE
            && match self {
                Outcome::JobkeeperReceipt => p.labour_state == LabourState::Employed,
                Outcome::RecentEmploymentEligibility => p.labour_state == LabourState::NotInLabourForce,
            }
    }

    pub fn default_spec(self) -> CovariateSpec {
        match self {
            Outcome::JobkeeperReceipt => CovariateSpec::employment_retention(),
            Outcome::RecentEmploymentEligibility => CovariateSpec::recent_employment(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Stratum {
    pub sex: Sex,
    pub wave: MonthId,
}

/// One panel observation entering a transition model.
#[derive(Debug, Clone, Copy)]
pub struct TrainingRow<'a> {
    pub person: &'a PersonRecord,
    pub household: &'a HouseholdRecord,
    pub outcome: bool,
    pub weight: f64,
}

/// Persons employed in `previous` and observed again in `current`; the
/// outcome is still being employed. Covariates come from `previous`.
pub fn retention_rows<'a>(previous: &'a WeightedSample, current: &WeightedSample, sex: Sex) -> Vec<TrainingRow<'a>> {
    let now: BTreeMap<PersonId, LabourState> = current.persons().map(|(_, p)| (p.person_id, p.labour_state)).collect();
    previous
        .persons()
        .filter(|(_, p)| p.sex == sex && p.age >= ADULT_AGE && p.is_employed())
        .filter_map(|(h, p)| {
            now.get(&p.person_id).map(|s| TrainingRow {
                person: p,
                household: h,
                outcome: *s == LabourState::Employed,
                weight: h.weight,
            })
        })
        .collect()
}

/// Persons out of the labour force in `wave`; the outcome is having been
/// employed since the baseline month.
pub fn recent_employment_rows(wave: &WeightedSample, sex: Sex) -> Vec<TrainingRow<'_>> {
    wave.persons()
        .filter(|(_, p)| p.sex == sex && p.age >= ADULT_AGE && p.labour_state == LabourState::NotInLabourForce)
        .map(|(h, p)| TrainingRow { person: p, household: h, outcome: p.employed_since_baseline_flag, weight: h.weight })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ProbitModel {
    pub outcome: Outcome,
    pub stratum: Stratum,
    pub model: SpecFit,
}

impl ProbitModel {
    /// Probability of the modelled event for one survey person. For the
    /// subsidy outcome this is the probability of not remaining employed.
    pub fn propensity(&self, p: &PersonRecord, h: &HouseholdRecord) -> f64 {
        let pr = self.model.probability(p, h);
        match self.outcome {
            Outcome::JobkeeperReceipt => 1.0 - pr,
            Outcome::RecentEmploymentEligibility => pr,
        }
    }
}

/// Maximum-likelihood probit on one stratum's rows.
pub fn fit_probit(
    rows: &[TrainingRow<'_>],
    spec: &CovariateSpec,
    outcome: Outcome,
    stratum: Stratum,
    fallback: bool,
) -> Result<ProbitModel> {
    if rows.is_empty() {
        return Err(Error::EmptyStratum(alloc::format!("{} {} {}", outcome.name(), stratum.sex, stratum.wave)));
    }
    let pairs: Vec<_> = rows.iter().map(|r| (r.person, r.household)).collect();
    let y: Vec<bool> = rows.iter().map(|r| r.outcome).collect();
    let w: Vec<f64> = rows.iter().map(|r| r.weight).collect();
    let model = fit_spec(spec, &pairs, &y, &w, Link::Probit, &FitOptions::default(), fallback).map_err(|e| match e {
        Error::DegenerateOutcome(_) => {
            Error::DegenerateOutcome(alloc::format!("{} {} {}", outcome.name(), stratum.sex, stratum.wave))
        }
        other => other,
    })?;
    Ok(ProbitModel { outcome, stratum, model })
}

/// A scored survey person.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub person: PersonId,
    pub score: f64,
    pub weight: f64,
}

/// Propensities for every survey person in the model's conditioning
/// population; one model per sex. Persons outside it get no score.
pub fn score_baseline(models: &[ProbitModel], sample: &WeightedSample) -> Result<Vec<Candidate>> {
    let mut out = Vec::new();
    for (h, p) in sample.persons() {
        let Some(m) = models.iter().find(|m| m.stratum.sex == p.sex && m.outcome.conditions_on(p)) else {
            continue;
        };
        check_resolvable(m, p)?;
        out.push(Candidate { person: p.person_id, score: m.propensity(p, h), weight: h.weight });
    }
    Ok(out)
}

fn check_resolvable(m: &ProbitModel, p: &PersonRecord) -> Result<()> {
    for term in &m.model.layout.spec.terms {
        let missing = match term {
            Term::Industry => p.is_employed() && p.industry.is_none(),
            Term::Occupation => p.is_employed() && p.occupation.is_none(),
            _ => false,
        };
        if missing {
            return Err(Error::Invalid(alloc::format!("person {}: covariate {} is missing", p.person_id, term.label())));
        }
    }
    Ok(())
}

/// Administrative count a binary outcome is aligned to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTarget {
    pub outcome: Outcome,
    pub target_count: f64,
    /// Scale of the logistic noise added on the latent-index scale.
    pub noise_scale: f64,
}

/// Persons chosen by alignment and their weighted count.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub selected: Vec<PersonId>,
    pub achieved: f64,
}

const SCORE_CLAMP: f64 = 1e-12;

/// Sorts candidates by `logit(score) + noise_scale·ε` (ε standard
/// logistic, drawn in person-id order), descending with ties broken by id,
/// and selects until the selected weight first reaches the target.
pub fn align_binary<R: RngCore + ?Sized>(candidates: &[Candidate], target: &AlignmentTarget, rng: &mut R) -> Result<Selection> {
    if !(target.noise_scale >= 0.0) || !(target.target_count >= 0.0) {
        return Err(Error::Invalid("alignment target and noise scale must be nonnegative".into()));
    }
    if candidates.iter().any(|c| !(c.weight >= 0.0) || !c.score.is_finite()) {
        return Err(Error::Invalid("candidate weights and scores must be finite".into()));
    }
    let eligible: f64 = candidates.iter().map(|c| c.weight).sum();
    if target.target_count > eligible * (1.0 + 1e-12) {
        return Err(Error::InfeasibleTarget { target: target.target_count, eligible });
    }
    let mut order: Vec<&Candidate> = candidates.iter().collect();
    order.sort_by_key(|c| c.person);
    let mut keyed: Vec<(f64, &Candidate)> = order
        .into_iter()
        .map(|c| {
            let noise = if target.noise_scale > 0.0 { target.noise_scale * rng::logistic(rng) } else { 0.0 };
            (logit(c.score.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)) + noise, c)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.person.cmp(&b.1.person)));
    let mut selected = Vec::new();
    let mut achieved = 0.0;
    for (_, c) in keyed {
        if achieved >= target.target_count {
            break;
        }
        selected.push(c.person);
        achieved += c.weight;
    }
    selected.sort();
    Ok(Selection { selected, achieved })
}

/// Target for `month` by linear interpolation between anchor months,
/// held constant outside the anchored range.
pub fn interpolate_target(anchors: &[(MonthId, f64)], month: MonthId) -> Result<f64> {
    let mut a: Vec<(MonthId, f64)> = anchors.to_vec();
    a.sort_by_key(|x| x.0);
    let (first, last) = match (a.first(), a.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::Invalid("no alignment anchors".into())),
    };
    if month <= first.0 {
        return Ok(first.1);
    }
    if month >= last.0 {
        return Ok(last.1);
    }
    for w in a.windows(2) {
        let ((m0, v0), (m1, v1)) = (w[0], w[1]);
        if month >= m0 && month <= m1 {
            let t = m0.months_until(month) as f64 / m0.months_until(m1) as f64;
            return Ok(v0 + t * (v1 - v0));
        }
    }
    unreachable!("month lies within the anchored range")
}

/// Sets the subsidy flag on selected employed persons and the
/// recent-employment flag on selected persons out of the labour force.
pub fn apply_transitions(sample: &WeightedSample, jobkeeper: &[PersonId], eligibility: &[PersonId]) -> Result<WeightedSample> {
    let index = sample.person_index();
    let mut out = sample.clone();
    let lists = [(jobkeeper, Outcome::JobkeeperReceipt), (eligibility, Outcome::RecentEmploymentEligibility)];
    for (ids, outcome) in lists {
        let unique: BTreeSet<PersonId> = ids.iter().copied().collect();
        for id in unique {
            let &(hi, pi) = index.get(&id).ok_or(Error::UnknownPerson(id.0))?;
            let p = &mut out.households[hi].members[pi];
            if !outcome.conditions_on(p) {
                return Err(Error::Ineligible { person: id.0, outcome: outcome.name() });
            }
            match outcome {
                Outcome::JobkeeperReceipt => p.jobkeeper_flag = true,
                Outcome::RecentEmploymentEligibility => p.employed_since_baseline_flag = true,
            }
        }
    }
    Ok(out)
}
