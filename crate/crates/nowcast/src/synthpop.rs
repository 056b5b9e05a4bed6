//! Synthetic stand-ins for the three data sources: a baseline income
//! survey, a rotating monthly labour-force panel without incomes, and
//! payroll wage and job indices.
//!
//! Every draw comes from a ChaCha stream derived from the seed and a fixed
//! label, so a configuration always regenerates the same records.

use std::collections::{BTreeMap, BTreeSet};

use nowcast_core::data::{
    AgeBand, Benefit, Education, HouseholdId, HouseholdRecord, Industry, Jurisdiction, LabourState, Marital,
    MonthId, Occupation, PersonId, PersonRecord, Sex, WeightedSample, WelfareFlags,
};
use nowcast_core::indexation::{PayrollCell, PayrollSeries};
use nowcast_core::rng::{standard_normal, stream, uniform, Stream as ChaCha8Rng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Employment exit hazard and wage level of one industry in one month.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockMonth {
    pub month: MonthId,
    /// Probability that an employed person leaves employment this month.
    #[serde(default)]
    pub exit_rate: f64,
    /// Average wage per job relative to the baseline month; carried
    /// forward to later months without an entry.
    #[serde(default = "one")]
    pub wage_multiplier: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndustryShock {
    pub industry: Industry,
    pub months: Vec<ShockMonth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReentryRate {
    pub month: MonthId,
    /// Probability that a person who lost a job since the baseline month
    /// is employed again this month.
    pub rate: f64,
}

/// Per-industry employment exits and wage changes by month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockProfile {
    #[serde(default)]
    pub industries: Vec<IndustryShock>,
    #[serde(default)]
    pub reentry: Vec<ReentryRate>,
    /// Share of exits into unemployment; the rest leave the labour force.
    #[serde(default = "default_unemployed_share")]
    pub unemployed_share: f64,
    /// Exit hazard multiplier for workers aged 15-24.
    #[serde(default = "one")]
    pub young_exit_multiplier: f64,
}

fn default_unemployed_share() -> f64 {
    0.45
}

/// Cumulative employment decline by industry three months into the shock,
/// qualitatively following the reported payroll job losses between
/// February and May 2020.
const DECLINE: [(Industry, f64); 19] = [
    (Industry::Agriculture, 0.05),
    (Industry::Mining, 0.02),
    (Industry::Manufacturing, 0.05),
    (Industry::Utilities, 0.02),
    (Industry::Construction, 0.06),
    (Industry::WholesaleTrade, 0.05),
    (Industry::RetailTrade, 0.06),
    (Industry::AccommodationFood, 0.297),
    (Industry::TransportPostal, 0.07),
    (Industry::InformationMedia, 0.09),
    (Industry::FinancialInsurance, 0.02),
    (Industry::RentalRealEstate, 0.10),
    (Industry::Professional, 0.07),
    (Industry::AdministrativeSupport, 0.09),
    (Industry::PublicAdministration, 0.03),
    (Industry::EducationTraining, 0.06),
    (Industry::HealthCare, 0.05),
    (Industry::ArtsRecreation, 0.365),
    (Industry::OtherServices, 0.10),
];

impl ShockProfile {
    pub fn none() -> Self {
        ShockProfile {
            industries: Vec::new(),
            reentry: Vec::new(),
            unemployed_share: default_unemployed_share(),
            young_exit_multiplier: 1.0,
        }
    }

    /// Default profile starting at `policy_month`: job losses spread 15/70/15
    /// over the first three months, average wages dipping with the size of
    /// the loss, and a tenth of lost jobs returning each month afterwards.
    pub fn default_from(policy_month: MonthId) -> Self {
        let shares = [0.15, 0.70, 0.15];
        let wage_dip = [0.0, 0.15, 0.10, 0.05];
        let industries = DECLINE
            .iter()
            .map(|&(industry, d)| {
                let months = (0..4)
                    .map(|k| ShockMonth {
                        month: policy_month.add_months(k as i64),
                        exit_rate: shares.get(k).map_or(0.0, |s| 1.0 - (1.0 - d).powf(*s)),
                        wage_multiplier: 1.0 - wage_dip[k] * d,
                    })
                    .collect();
                IndustryShock { industry, months }
            })
            .collect();
        let reentry = (3..12).map(|k| ReentryRate { month: policy_month.add_months(k), rate: 0.10 }).collect();
        ShockProfile { industries, reentry, unemployed_share: default_unemployed_share(), young_exit_multiplier: 1.6 }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("shock profile: {m}")));
        for s in &self.industries {
            for m in &s.months {
                if !(0.0..1.0).contains(&m.exit_rate) {
                    return bad(format!("{} {}: exit rate must lie in [0, 1)", s.industry, m.month));
                }
                if !(m.wage_multiplier > 0.0 && m.wage_multiplier.is_finite()) {
                    return bad(format!("{} {}: wage multiplier must be positive", s.industry, m.month));
                }
            }
        }
        if self.reentry.iter().any(|r| !(0.0..=1.0).contains(&r.rate)) {
            return bad("re-entry rates must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.unemployed_share) || !(self.young_exit_multiplier >= 0.0) {
            return bad("unemployed share must lie in [0, 1] and the young multiplier be nonnegative".into());
        }
        Ok(())
    }

    fn entry(&self, industry: Industry) -> Option<&IndustryShock> {
        self.industries.iter().find(|s| s.industry == industry)
    }

    pub fn exit_rate(&self, industry: Industry, month: MonthId) -> f64 {
        self.entry(industry)
            .and_then(|s| s.months.iter().find(|m| m.month == month))
            .map_or(0.0, |m| m.exit_rate)
    }

    /// Exit hazard for a worker of the given age, kept below one.
    pub fn exit_rate_at(&self, industry: Industry, age: u32, month: MonthId) -> f64 {
        let e = self.exit_rate(industry, month);
        let e = if age <= 24 { e * self.young_exit_multiplier } else { e };
        e.min(0.99)
    }

    pub fn wage_level(&self, industry: Industry, month: MonthId) -> f64 {
        self.entry(industry)
            .and_then(|s| s.months.iter().filter(|m| m.month <= month).max_by_key(|m| m.month))
            .map_or(1.0, |m| m.wage_multiplier)
    }

    pub fn reentry_rate(&self, month: MonthId) -> f64 {
        self.reentry.iter().find(|r| r.month == month).map_or(0.0, |r| r.rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default)]
    pub seed: u64,
    pub n_households: usize,
    /// Households per panel wave.
    pub panel_households: usize,
    /// Waves, one per month from the baseline month.
    pub n_panel_waves: usize,
    pub rotation_retention: f64,
    pub baseline_month: MonthId,
    /// First month of the shock.
    pub policy_month: MonthId,
    /// Households in the population; survey and panel weights sum to it.
    #[serde(default = "default_population")]
    pub population_households: f64,
    /// Omitted: the default profile starting at `policy_month`.
    #[serde(default)]
    pub shock_profile: Option<ShockProfile>,
}

fn default_population() -> f64 {
    10_000_000.0
}

impl SynthConfig {
    pub fn demo(seed: u64) -> Self {
        SynthConfig {
            seed,
            n_households: 10_000,
            panel_households: 10_000,
            n_panel_waves: 5,
            rotation_retention: 0.83,
            baseline_month: MonthId::new(2020, 2).expect("valid month"),
            policy_month: MonthId::new(2020, 3).expect("valid month"),
            population_households: default_population(),
            shock_profile: None,
        }
    }

    pub fn shock(&self) -> ShockProfile {
        self.shock_profile.clone().unwrap_or_else(|| ShockProfile::default_from(self.policy_month))
    }

    pub fn panel_months(&self) -> Vec<MonthId> {
        (0..self.n_panel_waves).map(|k| self.baseline_month.add_months(k as i64)).collect()
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.n_households == 0 {
            return bad("n_households must be positive");
        }
        if self.panel_households == 0 || self.n_panel_waves == 0 {
            return bad("panel_households and n_panel_waves must be positive");
        }
        if !(self.rotation_retention > 0.0 && self.rotation_retention <= 1.0) {
            return bad("rotation_retention must lie in (0, 1]");
        }
        if self.policy_month <= self.baseline_month {
            return bad("policy_month must follow baseline_month");
        }
        if !(self.population_households > 0.0 && self.population_households.is_finite()) {
            return bad("population_households must be positive");
        }
        self.shock().check()
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, table: &[(T, f64)]) -> T {
    let total: f64 = table.iter().map(|x| x.1).sum();
    let mut u = uniform(rng) * total;
    for &(v, w) in table {
        if u < w {
            return v;
        }
        u -= w;
    }
    table[table.len() - 1].0
}

fn chance(rng: &mut ChaCha8Rng, p: f64) -> bool {
    uniform(rng) < p
}

fn between(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> u32 {
    lo + (uniform(rng) * (hi - lo + 1) as f64) as u32
}

fn lognormal(rng: &mut ChaCha8Rng, median: f64, sigma: f64) -> f64 {
    median * (sigma * standard_normal(rng)).exp()
}

const INDUSTRY_SHARE: [(Industry, f64); 19] = [
    (Industry::Agriculture, 2.5),
    (Industry::Mining, 2.0),
    (Industry::Manufacturing, 7.0),
    (Industry::Utilities, 1.2),
    (Industry::Construction, 9.0),
    (Industry::WholesaleTrade, 3.0),
    (Industry::RetailTrade, 10.0),
    (Industry::AccommodationFood, 7.0),
    (Industry::TransportPostal, 5.0),
    (Industry::InformationMedia, 1.7),
    (Industry::FinancialInsurance, 3.5),
    (Industry::RentalRealEstate, 1.7),
    (Industry::Professional, 8.5),
    (Industry::AdministrativeSupport, 3.5),
    (Industry::PublicAdministration, 6.2),
    (Industry::EducationTraining, 8.0),
    (Industry::HealthCare, 14.0),
    (Industry::ArtsRecreation, 1.9),
    (Industry::OtherServices, 3.7),
];

fn industry_wage_effect(i: Industry) -> f64 {
    match i {
        Industry::Mining => 0.40,
        Industry::Utilities => 0.25,
        Industry::FinancialInsurance => 0.20,
        Industry::InformationMedia | Industry::Professional | Industry::PublicAdministration => 0.12,
        Industry::Construction | Industry::EducationTraining => 0.05,
        Industry::RetailTrade => -0.15,
        Industry::AccommodationFood => -0.30,
        Industry::ArtsRecreation | Industry::Agriculture => -0.10,
        _ => 0.0,
    }
}

const OCCUPATION_SHARE: [(Occupation, f64, f64); 8] = [
    (Occupation::Managers, 13.0, 0.35),
    (Occupation::Professionals, 24.0, 0.30),
    (Occupation::TechniciansTrades, 13.0, 0.05),
    (Occupation::CommunityPersonalService, 11.0, -0.20),
    (Occupation::ClericalAdministrative, 13.0, -0.05),
    (Occupation::Sales, 9.0, -0.25),
    (Occupation::MachineryOperators, 6.0, 0.0),
    (Occupation::Labourers, 11.0, -0.20),
];

const STATE_SHARE: [(Jurisdiction, f64); 8] = [
    (Jurisdiction::Nsw, 32.0),
    (Jurisdiction::Vic, 26.0),
    (Jurisdiction::Qld, 20.0),
    (Jurisdiction::Sa, 7.0),
    (Jurisdiction::Wa, 10.0),
    (Jurisdiction::Tas, 2.0),
    (Jurisdiction::Nt, 1.0),
    (Jurisdiction::Act, 2.0),
];

#[derive(Debug, Clone, Copy)]
enum Kind {
    Lone,
    Couple,
    CoupleKids,
    SingleParent,
    Group,
    CoupleAdultKids,
}

struct Draft {
    age: u32,
    sex: Sex,
    partnered: bool,
}

fn draft_members(rng: &mut ChaCha8Rng) -> Vec<Draft> {
    let kind = pick(
        rng,
        &[
            (Kind::Lone, 25.0),
            (Kind::Couple, 26.0),
            (Kind::CoupleKids, 27.0),
            (Kind::SingleParent, 9.0),
            (Kind::Group, 5.0),
            (Kind::CoupleAdultKids, 8.0),
        ],
    );
    let any_sex = |rng: &mut ChaCha8Rng| if chance(rng, 0.5) { Sex::Male } else { Sex::Female };
    let couple = |rng: &mut ChaCha8Rng, age: u32| {
        let gap = (3.0 * standard_normal(rng)).round() as i64;
        let other = (age as i64 + gap).clamp(18, 95) as u32;
        vec![
            Draft { age, sex: Sex::Male, partnered: true },
            Draft { age: other, sex: Sex::Female, partnered: true },
        ]
    };
    let child = |rng: &mut ChaCha8Rng, lo: u32, hi: u32| Draft { age: between(rng, lo, hi), sex: any_sex(rng), partnered: false };
    match kind {
        Kind::Lone => {
            let age = if chance(rng, 0.42) { between(rng, 65, 92) } else { between(rng, 20, 64) };
            vec![Draft { age, sex: any_sex(rng), partnered: false }]
        }
        Kind::Couple => {
            let age = pick(rng, &[(0u8, 0.45), (1, 0.17), (2, 0.38)]);
            let age = match age {
                0 => between(rng, 65, 88),
                1 => between(rng, 22, 34),
                _ => between(rng, 35, 64),
            };
            couple(rng, age)
        }
        Kind::CoupleKids => {
            let age = between(rng, 27, 55);
            let mut m = couple(rng, age);
            let n = pick(rng, &[(1u32, 0.40), (2, 0.42), (3, 0.18)]);
            let oldest = (age - 20).min(17);
            for _ in 0..n {
                m.push(child(rng, 0, oldest));
            }
            m
        }
        Kind::SingleParent => {
            let age = between(rng, 22, 55);
            let mut m = vec![Draft { age, sex: if chance(rng, 0.82) { Sex::Female } else { Sex::Male }, partnered: false }];
            let oldest = (age - 18).min(17);
            for _ in 0..pick(rng, &[(1u32, 0.55), (2, 0.45)]) {
                m.push(child(rng, 0, oldest));
            }
            m
        }
        Kind::Group => (0..pick(rng, &[(2u32, 0.6), (3, 0.4)])).map(|_| child(rng, 18, 32)).collect(),
        Kind::CoupleAdultKids => {
            let age = between(rng, 45, 66);
            let mut m = couple(rng, age);
            for _ in 0..pick(rng, &[(1u32, 0.6), (2, 0.4)]) {
                m.push(child(rng, 15, 24));
            }
            m
        }
    }
}

fn labour_state(rng: &mut ChaCha8Rng, age: u32, sex: Sex, young_child_carer: bool) -> LabourState {
    let (emp, unemp) = match age {
        0..=14 => (0.0, 0.0),
        15..=17 => (0.40, 0.08),
        18..=24 => (0.65, 0.08),
        25..=54 if young_child_carer => (0.50, 0.04),
        25..=54 => (if sex == Sex::Male { 0.86 } else { 0.76 }, 0.04),
        55..=64 => (0.63, 0.03),
        _ => (0.12, 0.003),
    };
    let u = uniform(rng);
    if u < emp {
        LabourState::Employed
    } else if u < emp + unemp {
        LabourState::Unemployed
    } else {
        LabourState::NotInLabourForce
    }
}

fn blank(id: u64, hh: u64, d: &Draft) -> PersonRecord {
    PersonRecord {
        person_id: PersonId(id),
        household_id: HouseholdId(hh),
        age: d.age,
        sex: d.sex,
        marital: if d.partnered { Marital::Partnered } else { Marital::Single },
        overseas_born: false,
        education: Education::BelowBachelor,
        labour_state: LabourState::NotInLabourForce,
        industry: None,
        occupation: None,
        usual_hours: 0.0,
        n_jobs: 0,
        unemployment_duration: 0,
        wage_income: 0.0,
        business_income: 0.0,
        investment_income: 0.0,
        other_income: 0.0,
        welfare_flags: WelfareFlags::empty(),
        jobkeeper_flag: false,
        employed_since_baseline_flag: false,
    }
}

/// Draws one household with incomes, costs and benefit flags.
fn draw_household(rng: &mut ChaCha8Rng, id: u64) -> HouseholdRecord {
    let drafts = draft_members(rng);
    let has_young = drafts.iter().any(|d| d.age <= 4);
    let n_adults = drafts.iter().filter(|d| d.age >= 15).count();
    let mut members = Vec::with_capacity(drafts.len());
    for (k, d) in drafts.iter().enumerate() {
        let mut p = blank(id * 10 + k as u64, id, d);
        if d.age >= 15 {
            p.overseas_born = chance(rng, 0.30);
            let degree = match d.age {
                15..=20 => 0.0,
                21..=24 => 0.20,
                25..=64 => 0.36,
                _ => 0.18,
            };
            if chance(rng, degree) {
                p.education = Education::BachelorOrHigher;
            }
            let carer = has_young && d.sex == Sex::Female && n_adults <= 2 && k <= 1;
            p.labour_state = labour_state(rng, d.age, d.sex, carer);
            match p.labour_state {
                LabourState::Employed => employ(rng, &mut p),
                LabourState::Unemployed => {
                    p.unemployment_duration = between(rng, 1, 24);
                    if chance(rng, 0.6) {
                        p.industry = Some(pick(rng, &INDUSTRY_SHARE));
                        p.occupation = Some(pick(rng, &OCCUPATION_SHARE.map(|o| (o.0, o.1))));
                    }
                }
                LabourState::NotInLabourForce => {}
            }
            private_income(rng, &mut p);
        }
        members.push(p);
    }
    let n_children_0_4 = members.iter().filter(|p| p.age <= 4).count() as u32;
    let n_children_5_14 = members.iter().filter(|p| (5..=14).contains(&p.age)).count() as u32;
    let oldest = members.iter().map(|p| p.age).max().unwrap_or(0);
    let tenure = if oldest >= 65 {
        pick(rng, &[(0u8, 0.80), (1, 0.08), (2, 0.12)])
    } else if oldest <= 32 {
        pick(rng, &[(0u8, 0.08), (1, 0.22), (2, 0.70)])
    } else {
        pick(rng, &[(0u8, 0.30), (1, 0.40), (2, 0.30)])
    };
    let size = members.len() as f64;
    let housing_cost = match tenure {
        0 => 0.0,
        1 => lognormal(rng, 900.0, 0.35),
        _ => lognormal(rng, 560.0 + 90.0 * (size - 1.0), 0.30),
    };
    let all_work = members.iter().filter(|p| p.is_adult()).take(2).all(|p| p.is_employed());
    let childcare_cost = if n_children_0_4 > 0 && chance(rng, if all_work { 0.70 } else { 0.20 }) {
        lognormal(rng, 160.0 * n_children_0_4 as f64, 0.35)
    } else {
        0.0
    };
    let assets = lognormal(rng, 40_000.0 + 6_000.0 * oldest.saturating_sub(20) as f64, 0.9);
    let mut h = HouseholdRecord {
        household_id: HouseholdId(id),
        members,
        n_children_0_4,
        n_children_5_14,
        housing_cost,
        childcare_cost,
        assets,
        state: pick(rng, &STATE_SHARE),
        weight: 1.0,
    };
    welfare_flags(rng, &mut h);
    h
}

fn employ(rng: &mut ChaCha8Rng, p: &mut PersonRecord) {
    let industry = pick(rng, &INDUSTRY_SHARE);
    let occupation = pick(rng, &OCCUPATION_SHARE.map(|o| (o.0, o.1)));
    let occ_effect = OCCUPATION_SHARE.iter().find(|o| o.0 == occupation).map_or(0.0, |o| o.2);
    let full_time = match p.age {
        15..=24 => 0.35,
        _ if p.sex == Sex::Male => 0.82,
        _ => 0.55,
    };
    let hours = if chance(rng, full_time) { between(rng, 35, 50) } else { between(rng, 8, 34) } as f64;
    let age_effect = match p.age {
        15..=24 => -0.35,
        25..=34 => -0.05,
        35..=54 => 0.05,
        _ => 0.0,
    };
    let hourly = (38.0_f64.ln() + occ_effect + industry_wage_effect(industry) + age_effect + 0.4 * standard_normal(rng)).exp();
    p.labour_state = LabourState::Employed;
    p.industry = Some(industry);
    p.occupation = Some(occupation);
    p.usual_hours = hours;
    p.n_jobs = if chance(rng, 0.07) { 2 } else { 1 };
    p.wage_income = hourly * hours * 2.0;
    if chance(rng, 0.09) {
        let b = lognormal(rng, 500.0, 0.9);
        p.business_income = if chance(rng, 0.12) { -0.4 * b } else { b };
    }
}

fn private_income(rng: &mut ChaCha8Rng, p: &mut PersonRecord) {
    let older = p.age >= 65;
    if chance(rng, if older { 0.75 } else { 0.50 }) {
        p.investment_income = lognormal(rng, if older { 120.0 } else { 25.0 }, 1.2);
    }
    if older && chance(rng, 0.30) {
        p.other_income = lognormal(rng, 700.0, 0.5);
    } else if chance(rng, 0.05) {
        p.other_income = lognormal(rng, 100.0, 0.6);
    }
}

fn welfare_flags(rng: &mut ChaCha8Rng, h: &mut HouseholdRecord) {
    let single_parent = h.n_children() > 0 && h.adults().filter(|p| p.age >= 18).count() == 1;
    let has_children = h.n_children() > 0;
    let mut ftb_given = false;
    for p in h.members.iter_mut().filter(|p| p.is_adult()) {
        if p.age >= 66 && !(p.is_employed() && p.usual_hours >= 35.0) && chance(rng, 0.80) {
            p.welfare_flags.insert(Benefit::Pension);
        }
        if p.labour_state == LabourState::Unemployed {
            p.welfare_flags.insert(if p.age >= 22 { Benefit::JobSeeker } else { Benefit::YouthAllowance });
        } else if (18..=24).contains(&p.age) && p.labour_state == LabourState::NotInLabourForce && chance(rng, 0.35) {
            p.welfare_flags.insert(Benefit::YouthAllowance);
        }
        if single_parent && p.age >= 18 && !(p.is_employed() && p.usual_hours >= 30.0) && chance(rng, 0.75) {
            p.welfare_flags.insert(Benefit::Parenting);
        }
        if has_children && !ftb_given && p.age >= 18 {
            p.welfare_flags.insert(Benefit::Ftb);
            ftb_given = true;
        }
    }
}

/// `n` households with ids `first_id..`, weights summing to `population`.
fn draw_population(rng: &mut ChaCha8Rng, first_id: u64, n: usize, population: f64) -> Vec<HouseholdRecord> {
    let mut hs: Vec<HouseholdRecord> = (0..n as u64).map(|k| draw_household(rng, first_id + k)).collect();
    for h in &mut hs {
        h.weight = 0.8 + 0.4 * uniform(rng);
    }
    let total: f64 = hs.iter().map(|h| h.weight).sum();
    for h in &mut hs {
        h.weight *= population / total;
    }
    hs
}

/// Survey records at the baseline month, deterministic in the seed.
pub fn gen_baseline_survey(cfg: &SynthConfig) -> Result<WeightedSample> {
    cfg.check()?;
    let mut rng = stream(cfg.seed, "synth/survey");
    let households = draw_population(&mut rng, 1, cfg.n_households, cfg.population_households);
    Ok(WeightedSample::new(cfg.baseline_month, households))
}

/// Household ids of the panel population start here, apart from the survey's.
const PANEL_ID_BASE: u64 = 100_000_000;

fn strip_incomes(h: &mut HouseholdRecord) {
    h.housing_cost = 0.0;
    h.childcare_cost = 0.0;
    h.assets = 0.0;
    for p in &mut h.members {
        p.wage_income = 0.0;
        p.business_income = 0.0;
        p.investment_income = 0.0;
        p.other_income = 0.0;
        p.welfare_flags = WelfareFlags::empty();
    }
}

/// Labour-market history of one panel person.
#[derive(Default, Clone, Copy)]
struct History {
    /// Usual hours of a job lost since the baseline month.
    lost_hours: Option<f64>,
}

fn step_month(rng: &mut ChaCha8Rng, shock: &ShockProfile, month: MonthId, h: &mut HouseholdRecord, hist: &mut BTreeMap<PersonId, History>) {
    let reentry = shock.reentry_rate(month);
    for p in &mut h.members {
        let (u1, u2) = (uniform(rng), uniform(rng));
        if !p.is_adult() {
            continue;
        }
        let rec = hist.entry(p.person_id).or_default();
        match p.labour_state {
            LabourState::Employed => {
                let e = p.industry.map_or(0.0, |i| shock.exit_rate_at(i, p.age, month));
                if u1 < e {
                    rec.lost_hours = Some(p.usual_hours);
                    p.labour_state =
                        if u2 < shock.unemployed_share { LabourState::Unemployed } else { LabourState::NotInLabourForce };
                    p.usual_hours = 0.0;
                    p.n_jobs = 0;
                    p.unemployment_duration = if p.labour_state == LabourState::Unemployed { 1 } else { 0 };
                    p.employed_since_baseline_flag = true;
                }
            }
            _ => {
                if let Some(hours) = rec.lost_hours.filter(|_| u1 < reentry) {
                    rec.lost_hours = None;
                    p.labour_state = LabourState::Employed;
                    p.usual_hours = hours;
                    p.n_jobs = 1;
                    p.unemployment_duration = 0;
                } else if p.labour_state == LabourState::Unemployed && rec.lost_hours.is_some() {
                    p.unemployment_duration += 1;
                }
            }
        }
    }
}

/// Monthly waves of the labour-force panel, starting at the baseline month.
///
/// A stable panel population evolves month by month under the shock
/// profile. Each wave keeps every household of the previous wave with
/// probability `rotation_retention` and tops up with households not sampled
/// before. Income, cost and benefit fields are zero. `baseline` only fixes
/// the month the panel starts in.
pub fn gen_labour_panel(cfg: &SynthConfig, baseline: &WeightedSample) -> Result<Vec<WeightedSample>> {
    cfg.check()?;
    if baseline.month != cfg.baseline_month {
        return Err(Error::Config("panel and survey disagree on the baseline month".into()));
    }
    let shock = cfg.shock();
    let n = cfg.panel_households;
    let refresh = ((1.0 - cfg.rotation_retention) * n as f64 * 1.3).ceil() as usize + 50;
    let pool_size = n + refresh * cfg.n_panel_waves.saturating_sub(1);
    let mut rng = stream(cfg.seed, "synth/panel-population");
    let mut pool = draw_population(&mut rng, PANEL_ID_BASE, pool_size, 1.0);
    pool.iter_mut().for_each(strip_incomes);

    let mut order: Vec<usize> = (0..pool.len()).collect();
    let mut shuffle = stream(cfg.seed, "synth/panel-order");
    for i in (1..order.len()).rev() {
        let j = (uniform(&mut shuffle) * (i + 1) as f64) as usize;
        order.swap(i, j.min(i));
    }
    let mut next_fresh = 0usize;
    let mut current: BTreeSet<usize> = BTreeSet::new();
    let mut history: BTreeMap<PersonId, History> = BTreeMap::new();
    let mut waves = Vec::with_capacity(cfg.n_panel_waves);
    for (t, month) in cfg.panel_months().into_iter().enumerate() {
        if t > 0 {
            let mut step = stream(cfg.seed, &format!("synth/panel-month/{month}"));
            for h in &mut pool {
                step_month(&mut step, &shock, month, h, &mut history);
            }
            let mut keep = stream(cfg.seed, &format!("synth/panel-rotation/{month}"));
            current.retain(|_| chance(&mut keep, cfg.rotation_retention));
        }
        while current.len() < n && next_fresh < order.len() {
            current.insert(order[next_fresh]);
            next_fresh += 1;
        }
        let weight = cfg.population_households / current.len() as f64;
        let households = current
            .iter()
            .map(|&k| {
                let mut h = pool[k].clone();
                h.weight = weight;
                h
            })
            .collect();
        waves.push(WeightedSample::new(month, households));
    }
    Ok(waves)
}

/// Payroll indices by industry, age band and panel month.
///
/// Wage indices follow the profile's wage levels. Job indices follow the
/// expected survival of baseline jobs under the exit hazards, with lost
/// jobs returning at the re-entry rate.
pub fn gen_payroll(cfg: &SynthConfig) -> Result<PayrollSeries> {
    cfg.check()?;
    let shock = cfg.shock();
    let mut cells = BTreeMap::new();
    for &industry in Industry::ALL {
        for &band in AgeBand::ALL {
            let age = match band {
                AgeBand::Under25 => 20,
                _ => 40,
            };
            let mut jobs = 1.0;
            for (t, month) in cfg.panel_months().into_iter().enumerate() {
                if t > 0 {
                    let e = shock.exit_rate_at(industry, age, month);
                    jobs = jobs * (1.0 - e) + (1.0 - jobs) * shock.reentry_rate(month);
                }
                let wage_index = if t == 0 { 1.0 } else { shock.wage_level(industry, month) };
                cells.insert((industry, band, month), PayrollCell { wage_index, job_index: jobs });
            }
        }
    }
    Ok(PayrollSeries::from_cells(cells))
}
