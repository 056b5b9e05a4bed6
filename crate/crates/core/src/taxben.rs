//! Parameterised tax-transfer rules producing household disposable income.
//!
//! Amounts are fortnightly unless a field says otherwise. Benefits are
//! treated as non-taxable, so income tax depends on private income only.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{
    equivalise, Benefit, HouseholdId, HouseholdRecord, LabourState, MonthId, PersonRecord,
    FORTNIGHTS_PER_YEAR,
};
use crate::{Error, Result};

/// One marginal-rate band starting at `threshold` (currency per year).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub threshold: f64,
    pub rate: f64,
}

/// Offset withdrawn linearly above a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TaxOffset {
    pub amount: f64,
    pub withdrawal_threshold: f64,
    pub withdrawal_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxSchedule {
    pub brackets: Vec<Bracket>,
    /// Flat levy on taxable income.
    #[serde(default)]
    pub levy_rate: f64,
    /// Below this income no levy is due; above it the levy phases in at
    /// `levy_phase_in_rate` until it reaches the full rate.
    #[serde(default)]
    pub levy_threshold: f64,
    #[serde(default)]
    pub levy_phase_in_rate: f64,
    #[serde(default)]
    pub offset: TaxOffset,
}

impl TaxSchedule {
    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Invalid(alloc::format!("tax schedule: {what}")));
        if self.brackets.is_empty() {
            return bad("no brackets");
        }
        if self.brackets.windows(2).any(|w| !(w[0].threshold < w[1].threshold)) {
            return bad("bracket thresholds must be strictly increasing");
        }
        let rates = self.brackets.iter().map(|b| b.rate).chain([self.levy_rate, self.levy_phase_in_rate, self.offset.withdrawal_rate]);
        for r in rates {
            if !(0.0..=1.0).contains(&r) {
                return bad("rates must lie in [0, 1]");
            }
        }
        if self.brackets[0].threshold < 0.0 || self.offset.amount < 0.0 || self.levy_threshold < 0.0 {
            return bad("thresholds and amounts must be nonnegative");
        }
        Ok(())
    }
}

/// Annual income tax: bracket tax plus levy less offset, floored at zero.
pub fn income_tax(annual_income: f64, schedule: &TaxSchedule) -> f64 {
    let y = annual_income;
    let mut tax = 0.0;
    for (k, b) in schedule.brackets.iter().enumerate() {
        let top = schedule.brackets.get(k + 1).map_or(f64::INFINITY, |n| n.threshold);
        if y > b.threshold {
            tax += b.rate * (y.min(top) - b.threshold);
        }
    }
    let levy = (schedule.levy_rate * y)
        .min(schedule.levy_phase_in_rate * (y - schedule.levy_threshold))
        .max(0.0);
    let o = &schedule.offset;
    let offset = (o.amount - o.withdrawal_rate * (y - o.withdrawal_threshold).max(0.0)).max(0.0);
    (tax + levy - offset).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AssetTest {
    pub threshold: f64,
    pub active: bool,
}

/// Single-rate means-tested payment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BenefitRule {
    pub base_rate: f64,
    /// Own private income free of the means test.
    pub free_area: f64,
    pub taper: f64,
    pub partner_threshold: f64,
    pub partner_taper: f64,
    #[serde(default)]
    pub asset_test: AssetTest,
    /// When inactive, people out of the labour force who worked since the
    /// baseline month may claim the unemployment payment.
    #[serde(default = "yes")]
    pub activity_test_active: bool,
    /// Whether the supplement is added to a positive payment.
    #[serde(default)]
    pub supplemented: bool,
}

fn yes() -> bool {
    true
}

impl BenefitRule {
    /// Means-tested amount before any supplement.
    pub fn means_tested(&self, own_income: f64, partner_income: f64, assets: f64) -> f64 {
        if self.asset_test.active && assets > self.asset_test.threshold {
            return 0.0;
        }
        let own = self.taper * (own_income - self.free_area).max(0.0);
        let partner = self.partner_taper * (partner_income - self.partner_threshold).max(0.0);
        (self.base_rate - own - partner).max(0.0)
    }
}

/// Family payment: a flat amount per child, tapered on family income.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FamilyRule {
    pub per_child: f64,
    pub free_area: f64,
    pub taper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenefitRules {
    pub pension: BenefitRule,
    pub parenting: BenefitRule,
    pub jobseeker: BenefitRule,
    pub youth_allowance: BenefitRule,
    pub ftb: FamilyRule,
    /// Unemployed persons below this age claim youth allowance instead of
    /// the unemployment payment.
    pub jobseeker_min_age: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OneOffPayment {
    pub amount: f64,
    pub months: Vec<MonthId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JobKeeperRule {
    pub rate: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FreeChildcare {
    pub active: bool,
    pub months: Vec<MonthId>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CovidMeasures {
    pub supplement_rate: f64,
    pub one_off: OneOffPayment,
    pub jobkeeper: JobKeeperRule,
    pub free_childcare: FreeChildcare,
}

/// Full parameter set of the transfer system in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRegime {
    pub regime_id: String,
    pub effective_from: MonthId,
    pub effective_to: MonthId,
    pub tax: TaxSchedule,
    pub benefits: BenefitRules,
    #[serde(default)]
    pub covid_measures: CovidMeasures,
}

fn ym(y: i32, m: u32) -> MonthId {
    MonthId::new(y, m).expect("valid literal month")
}

impl PolicyRegime {
    /// Stylised 2019-20 resident rules in force before the shock.
    pub fn baseline_feb2020() -> Self {
        let tax = TaxSchedule {
            brackets: alloc::vec![
                Bracket { threshold: 0.0, rate: 0.0 },
                Bracket { threshold: 18_200.0, rate: 0.19 },
                Bracket { threshold: 37_000.0, rate: 0.325 },
                Bracket { threshold: 90_000.0, rate: 0.37 },
                Bracket { threshold: 180_000.0, rate: 0.45 },
            ],
            levy_rate: 0.02,
            levy_threshold: 22_398.0,
            levy_phase_in_rate: 0.10,
            offset: TaxOffset { amount: 445.0, withdrawal_threshold: 37_000.0, withdrawal_rate: 0.015 },
        };
        let jobseeker = BenefitRule {
            base_rate: 557.85,
            free_area: 106.0,
            taper: 0.5,
            partner_threshold: 996.0,
            partner_taper: 0.6,
            asset_test: AssetTest { threshold: 268_000.0, active: true },
            activity_test_active: true,
            supplemented: true,
        };
        let benefits = BenefitRules {
            pension: BenefitRule {
                base_rate: 944.30,
                free_area: 174.0,
                taper: 0.5,
                partner_threshold: 1_500.0,
                partner_taper: 0.25,
                asset_test: AssetTest { threshold: 583_000.0, active: true },
                activity_test_active: false,
                supplemented: false,
            },
            parenting: BenefitRule {
                base_rate: 793.20,
                free_area: 190.40,
                taper: 0.4,
                partner_threshold: 996.0,
                partner_taper: 0.6,
                asset_test: AssetTest { threshold: 268_000.0, active: true },
                activity_test_active: true,
                supplemented: true,
            },
            jobseeker,
            youth_allowance: BenefitRule {
                base_rate: 462.50,
                free_area: 437.0,
                taper: 0.5,
                partner_threshold: 996.0,
                partner_taper: 0.6,
                asset_test: AssetTest { threshold: 268_000.0, active: true },
                activity_test_active: true,
                supplemented: true,
            },
            ftb: FamilyRule { per_child: 200.0, free_area: 2_150.0, taper: 0.2 },
            jobseeker_min_age: 22,
        };
        PolicyRegime {
            regime_id: "baseline_feb2020".into(),
            effective_from: ym(2017, 7),
            effective_to: ym(2020, 12),
            tax,
            benefits,
            covid_measures: CovidMeasures::default(),
        }
    }

    /// The baseline rules plus the temporary crisis measures: supplement,
    /// higher base rate, relaxed partner test, suspended asset and activity
    /// tests, one-off payments, the wage subsidy and free childcare.
    ///
    /// The relaxed partner-test parameters are an assumption.
    pub fn covid_package() -> Self {
        let mut r = Self::baseline_feb2020();
        r.regime_id = "covid_package".into();
        r.effective_from = ym(2020, 3);
        r.effective_to = ym(2020, 9);
        let js = &mut r.benefits.jobseeker;
        js.base_rate = 1_115.70;
        js.partner_threshold = 3_068.0;
        js.partner_taper = 0.25;
        js.asset_test.active = false;
        js.activity_test_active = false;
        for rule in [&mut r.benefits.parenting, &mut r.benefits.youth_allowance] {
            rule.asset_test.active = false;
        }
        r.covid_measures = CovidMeasures {
            supplement_rate: 550.0,
            one_off: OneOffPayment { amount: 750.0, months: alloc::vec![ym(2020, 4), ym(2020, 7)] },
            jobkeeper: JobKeeperRule { rate: 1_500.0, active: true },
            free_childcare: FreeChildcare { active: true, months: alloc::vec![ym(2020, 4), ym(2020, 5), ym(2020, 6)] },
        };
        r
    }

    pub fn check(&self) -> Result<()> {
        self.tax.check()?;
        if self.effective_from > self.effective_to {
            return Err(Error::Invalid(alloc::format!("regime {}: empty effective period", self.regime_id)));
        }
        let b = &self.benefits;
        let rules = [b.pension, b.parenting, b.jobseeker, b.youth_allowance];
        let c = &self.covid_measures;
        let amounts = rules
            .iter()
            .flat_map(|r| [r.base_rate, r.free_area, r.partner_threshold, r.asset_test.threshold])
            .chain([b.ftb.per_child, b.ftb.free_area, c.supplement_rate, c.one_off.amount, c.jobkeeper.rate]);
        let tapers = rules.iter().flat_map(|r| [r.taper, r.partner_taper]).chain([b.ftb.taper]);
        for a in amounts {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::Invalid(alloc::format!("regime {}: negative or non-finite amount", self.regime_id)));
            }
        }
        for t in tapers {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Invalid(alloc::format!("regime {}: taper outside [0, 1]", self.regime_id)));
            }
        }
        Ok(())
    }

    pub fn covers(&self, month: MonthId) -> bool {
        (self.effective_from..=self.effective_to).contains(&month)
    }

    fn ensure_covers(&self, month: MonthId) -> Result<()> {
        if self.covers(month) {
            Ok(())
        } else {
            Err(Error::RegimeNotEffective { regime: self.regime_id.clone(), month })
        }
    }

    pub fn childcare_free_in(&self, month: MonthId) -> bool {
        let fc = &self.covid_measures.free_childcare;
        fc.active && fc.months.contains(&month)
    }
}

/// Wage actually paid and the subsidy top-up within it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobKeeperPay {
    pub paid: f64,
    pub top_up: f64,
}

/// A flagged worker is paid at least the flat subsidy rate while the
/// subsidy is active; earners above it are unaffected.
pub fn jobkeeper_wage(p: &PersonRecord, regime: &PolicyRegime) -> JobKeeperPay {
    let jk = &regime.covid_measures.jobkeeper;
    if jk.active && p.jobkeeper_flag {
        let paid = p.wage_income.max(jk.rate);
        JobKeeperPay { paid, top_up: (paid - p.wage_income).max(0.0) }
    } else {
        JobKeeperPay { paid: p.wage_income, top_up: 0.0 }
    }
}

/// Amounts per benefit, indexed by `Benefit::index`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BenefitAmounts(pub [f64; 5]);

impl BenefitAmounts {
    pub fn get(&self, b: Benefit) -> f64 {
        self.0[b.index()]
    }

    pub fn add(&mut self, b: Benefit, amount: f64) {
        self.0[b.index()] += amount;
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Private income with any wage-subsidy top-up included.
fn own_income(p: &PersonRecord, regime: &PolicyRegime) -> f64 {
    jobkeeper_wage(p, regime).paid + p.business_income + p.investment_income + p.other_income
}

/// Which income-support payment a person qualifies for, highest priority
/// first: pension, parenting, unemployment, youth allowance.
fn income_support<'a>(p: &PersonRecord, regime: &'a PolicyRegime) -> Option<(Benefit, &'a BenefitRule)> {
    let b = &regime.benefits;
    let flags = p.welfare_flags;
    if !p.is_adult() {
        return None;
    }
    if flags.contains(Benefit::Pension) {
        return Some((Benefit::Pension, &b.pension));
    }
    if flags.contains(Benefit::Parenting) {
        return Some((Benefit::Parenting, &b.parenting));
    }
    let job_search = match p.labour_state {
        LabourState::Unemployed => true,
        LabourState::NotInLabourForce => !b.jobseeker.activity_test_active && p.employed_since_baseline_flag,
        LabourState::Employed => false,
    };
    if job_search {
        return Some(if p.age >= b.jobseeker_min_age {
            (Benefit::JobSeeker, &b.jobseeker)
        } else {
            (Benefit::YouthAllowance, &b.youth_allowance)
        });
    }
    if flags.contains(Benefit::YouthAllowance) {
        return Some((Benefit::YouthAllowance, &b.youth_allowance));
    }
    None
}

/// Income-support entitlement of one person, including any supplement.
/// Family payments are assessed per household by [`family_payment`].
pub fn benefit_entitlement(
    p: &PersonRecord,
    household: &HouseholdRecord,
    regime: &PolicyRegime,
    month: MonthId,
) -> Result<BenefitAmounts> {
    regime.ensure_covers(month)?;
    let mut out = BenefitAmounts::default();
    if let Some((kind, rule)) = income_support(p, regime) {
        let partner = household.partner_of(p).map_or(0.0, |q| own_income(q, regime));
        let amount = rule.means_tested(own_income(p, regime), partner, household.assets);
        if amount > 0.0 {
            let supplement = if rule.supplemented { regime.covid_measures.supplement_rate } else { 0.0 };
            out.add(kind, amount + supplement);
        }
    }
    Ok(out)
}

/// Family payment for a household with a flagged recipient.
pub fn family_payment(household: &HouseholdRecord, regime: &PolicyRegime) -> f64 {
    if !household.members.iter().any(|p| p.welfare_flags.contains(Benefit::Ftb)) {
        return 0.0;
    }
    let rule = &regime.benefits.ftb;
    let family_income: f64 = household.adults().map(|p| own_income(p, regime)).sum();
    (rule.per_child * household.n_children() as f64 - rule.taper * (family_income - rule.free_area).max(0.0)).max(0.0)
}

/// One-off payment due to a person in `month`.
pub fn one_off_payments(p: &PersonRecord, regime: &PolicyRegime, month: MonthId) -> f64 {
    let one_off = &regime.covid_measures.one_off;
    let qualifies = [Benefit::Pension, Benefit::JobSeeker, Benefit::Ftb]
        .iter()
        .any(|b| p.welfare_flags.contains(*b));
    if qualifies && one_off.months.contains(&month) {
        one_off.amount
    } else {
        0.0
    }
}

pub fn childcare_out_of_pocket(household: &HouseholdRecord, regime: &PolicyRegime, month: MonthId) -> f64 {
    if regime.childcare_free_in(month) {
        0.0
    } else {
        household.childcare_cost
    }
}

/// Household income account for one month (fortnightly amounts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisposableIncomeResult {
    pub household_id: HouseholdId,
    /// Private income before transfers, excluding any wage-subsidy top-up.
    pub gross_market_income: f64,
    pub jobkeeper_amount: f64,
    pub benefits_by_type: BenefitAmounts,
    pub one_off_payments: f64,
    pub income_tax: f64,
    pub disposable_income: f64,
    pub childcare_out_of_pocket: f64,
    pub disposable_after_childcare: f64,
    pub housing_cost: f64,
    pub after_housing_income: f64,
}

impl DisposableIncomeResult {
    pub fn benefits(&self) -> f64 {
        self.benefits_by_type.total()
    }

    /// Gross income including the wage-subsidy top-up.
    pub fn gross_income(&self) -> f64 {
        self.gross_market_income + self.jobkeeper_amount
    }

    /// Largest absolute violation of the accounting identities.
    pub fn identity_residual(&self) -> f64 {
        let d = self.gross_market_income + self.jobkeeper_amount + self.benefits() + self.one_off_payments
            - self.income_tax;
        let a = self.disposable_income - self.childcare_out_of_pocket;
        (self.disposable_income - d)
            .abs()
            .max((self.disposable_after_childcare - a).abs())
            .max((self.after_housing_income - (a - self.housing_cost)).abs())
    }
}

pub fn compute_disposable(household: &HouseholdRecord, regime: &PolicyRegime, month: MonthId) -> Result<DisposableIncomeResult> {
    regime.ensure_covers(month)?;
    if household.members.is_empty() {
        return Err(Error::EmptyHousehold);
    }
    let mut gross_market = 0.0;
    let mut jobkeeper = 0.0;
    let mut benefits = BenefitAmounts::default();
    let mut one_offs = 0.0;
    let mut tax = 0.0;
    for p in &household.members {
        let pay = jobkeeper_wage(p, regime);
        gross_market += p.private_income();
        jobkeeper += pay.top_up;
        let b = benefit_entitlement(p, household, regime, month)?;
        for kind in Benefit::ALL {
            benefits.add(*kind, b.get(*kind));
        }
        one_offs += one_off_payments(p, regime, month);
        let taxable = p.private_income() + pay.top_up;
        tax += income_tax(taxable * FORTNIGHTS_PER_YEAR, &regime.tax) / FORTNIGHTS_PER_YEAR;
    }
    benefits.add(Benefit::Ftb, family_payment(household, regime));
    let disposable = gross_market + jobkeeper + benefits.total() + one_offs - tax;
    let childcare = childcare_out_of_pocket(household, regime, month);
    let after_childcare = disposable - childcare;
    Ok(DisposableIncomeResult {
        household_id: household.household_id,
        gross_market_income: gross_market,
        jobkeeper_amount: jobkeeper,
        benefits_by_type: benefits,
        one_off_payments: one_offs,
        income_tax: tax,
        disposable_income: disposable,
        childcare_out_of_pocket: childcare,
        disposable_after_childcare: after_childcare,
        housing_cost: household.housing_cost,
        after_housing_income: after_childcare - household.housing_cost,
    })
}

impl DisposableIncomeResult {
    /// Equivalised disposable income.
    pub fn equivalised_disposable(&self, household: &HouseholdRecord) -> Result<f64> {
        equivalise(self.disposable_income, household)
    }
}
