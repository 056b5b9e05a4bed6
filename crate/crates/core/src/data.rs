//! Unit-record data model shared by every stage: persons, households,
//! weighted monthly samples, equivalisation and weighted quintiles.
//!
//! All currency amounts are fortnightly.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Fortnights per year.
pub const FORTNIGHTS_PER_YEAR: f64 = 26.0;

/// Converts a fortnightly amount into a monthly one.
pub fn fortnightly_to_monthly(x: f64) -> f64 {
    x * FORTNIGHTS_PER_YEAR / 12.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PersonId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HouseholdId(pub u64);

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for HouseholdId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Calendar month, totally ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthId {
    year: i32,
    month: u8,
}

impl MonthId {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidMonth { year, month });
        }
        Ok(MonthId { year, month: month as u8 })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month as u32
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(o: i64) -> Self {
        MonthId { year: o.div_euclid(12) as i32, month: (o.rem_euclid(12) + 1) as u8 }
    }

    pub fn next(self) -> Self {
        self.add_months(1)
    }

    pub fn prev(self) -> Self {
        self.add_months(-1)
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Signed number of months from `self` to `later`.
    pub fn months_until(self, later: MonthId) -> i64 {
        later.ordinal() - self.ordinal()
    }

    /// Inclusive range of months.
    pub fn range_inclusive(from: MonthId, to: MonthId) -> impl Iterator<Item = MonthId> {
        (from.ordinal()..=to.ordinal()).map(MonthId::from_ordinal)
    }
}

impl fmt::Display for MonthId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("month `{s}` is not YYYY-MM"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        MonthId::new(year, month)
    }
}

impl Serialize for MonthId {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! coded_enum {
    (
        $(#[$meta:meta])*
        $name:ident { $($variant:ident = $code:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn code(self) -> &'static str {
                match self { $($name::$variant => $code),+ }
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.code())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($code => Ok($name::$variant),)+
                    other => Err(Error::Invalid(format!(
                        concat!("unknown ", stringify!($name), " code `{}`"), other
                    ))),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.code())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

coded_enum!(Sex { Male = "M", Female = "F" });

coded_enum!(Marital { Partnered = "partnered", Single = "single" });

coded_enum!(Education { BelowBachelor = "below_bachelor", BachelorOrHigher = "bachelor_plus" });

coded_enum!(LabourState { Employed = "employed", Unemployed = "unemployed", NotInLabourForce = "nilf" });

coded_enum!(
    /// ANZSIC divisions, coded A to S.
    Industry {
        Agriculture = "A",
        Mining = "B",
        Manufacturing = "C",
        Utilities = "D",
        Construction = "E",
        WholesaleTrade = "F",
        RetailTrade = "G",
        AccommodationFood = "H",
        TransportPostal = "I",
        InformationMedia = "J",
        FinancialInsurance = "K",
        RentalRealEstate = "L",
        Professional = "M",
        AdministrativeSupport = "N",
        PublicAdministration = "O",
        EducationTraining = "P",
        HealthCare = "Q",
        ArtsRecreation = "R",
        OtherServices = "S",
    }
);

impl Industry {
    pub fn name(self) -> &'static str {
        match self {
            Industry::Agriculture => "Agriculture, Forestry and Fishing",
            Industry::Mining => "Mining",
            Industry::Manufacturing => "Manufacturing",
            Industry::Utilities => "Electricity, Gas, Water and Waste Services",
            Industry::Construction => "Construction",
            Industry::WholesaleTrade => "Wholesale Trade",
            Industry::RetailTrade => "Retail Trade",
            Industry::AccommodationFood => "Accommodation and Food Services",
            Industry::TransportPostal => "Transport, Postal and Warehousing",
            Industry::InformationMedia => "Information Media and Telecommunications",
            Industry::FinancialInsurance => "Financial and Insurance Services",
            Industry::RentalRealEstate => "Rental, Hiring and Real Estate Services",
            Industry::Professional => "Professional, Scientific and Technical Services",
            Industry::AdministrativeSupport => "Administrative and Support Services",
            Industry::PublicAdministration => "Public Administration and Safety",
            Industry::EducationTraining => "Education and Training",
            Industry::HealthCare => "Health Care and Social Assistance",
            Industry::ArtsRecreation => "Arts and Recreation Services",
            Industry::OtherServices => "Other Services",
        }
    }
}

coded_enum!(
    /// ANZSCO major groups.
    Occupation {
        Managers = "1",
        Professionals = "2",
        TechniciansTrades = "3",
        CommunityPersonalService = "4",
        ClericalAdministrative = "5",
        Sales = "6",
        MachineryOperators = "7",
        Labourers = "8",
    }
);

coded_enum!(
    Jurisdiction {
        Nsw = "NSW",
        Vic = "VIC",
        Qld = "QLD",
        Sa = "SA",
        Wa = "WA",
        Tas = "TAS",
        Nt = "NT",
        Act = "ACT",
    }
);

coded_enum!(
    Benefit {
        Pension = "pension",
        JobSeeker = "jobseeker",
        Parenting = "parenting",
        YouthAllowance = "youth_allowance",
        Ftb = "ftb",
    }
);

coded_enum!(
    /// Age bands used by payroll cells and several covariates.
    AgeBand {
        Under25 = "15-24",
        From25To34 = "25-34",
        From35To44 = "35-44",
        From45To54 = "45-54",
        From55To64 = "55-64",
        Over64 = "65+",
    }
);

impl AgeBand {
    pub fn of(age: u32) -> AgeBand {
        match age {
            0..=24 => AgeBand::Under25,
            25..=34 => AgeBand::From25To34,
            35..=44 => AgeBand::From35To44,
            45..=54 => AgeBand::From45To54,
            55..=64 => AgeBand::From55To64,
            _ => AgeBand::Over64,
        }
    }
}

/// Set of benefits currently received.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct WelfareFlags(u8);

impl WelfareFlags {
    pub const fn empty() -> Self {
        WelfareFlags(0)
    }

    pub fn with(mut self, b: Benefit) -> Self {
        self.insert(b);
        self
    }

    pub fn insert(&mut self, b: Benefit) {
        self.0 |= 1 << b.index();
    }

    pub fn remove(&mut self, b: Benefit) {
        self.0 &= !(1 << b.index());
    }

    pub fn contains(self, b: Benefit) -> bool {
        self.0 & (1 << b.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Benefit> {
        Benefit::ALL.iter().copied().filter(move |b| self.contains(*b))
    }
}

impl fmt::Display for WelfareFlags {
    /// Pipe-separated benefit codes, empty when none.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for b in self.iter() {
            if !first {
                f.write_str("|")?;
            }
            f.write_str(b.code())?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for WelfareFlags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut flags = WelfareFlags::empty();
        for part in s.split('|').map(str::trim).filter(|p| !p.is_empty()) {
            flags.insert(part.parse()?);
        }
        Ok(flags)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonRecord {
    pub person_id: PersonId,
    pub household_id: HouseholdId,
    pub age: u32,
    pub sex: Sex,
    pub marital: Marital,
    pub overseas_born: bool,
    pub education: Education,
    pub labour_state: LabourState,
    /// Current industry when employed, last industry when previously employed.
    pub industry: Option<Industry>,
    pub occupation: Option<Occupation>,
    pub usual_hours: f64,
    pub n_jobs: u32,
    /// Months.
    pub unemployment_duration: u32,
    pub wage_income: f64,
    pub business_income: f64,
    pub investment_income: f64,
    pub other_income: f64,
    pub welfare_flags: WelfareFlags,
    pub jobkeeper_flag: bool,
    pub employed_since_baseline_flag: bool,
}

impl PersonRecord {
    pub fn is_adult(&self) -> bool {
        self.age >= ADULT_AGE
    }

    pub fn is_employed(&self) -> bool {
        self.labour_state == LabourState::Employed
    }

    /// Wage, business and investment income.
    pub fn market_income(&self) -> f64 {
        self.wage_income + self.business_income + self.investment_income
    }

    /// Private income of every kind, before transfers.
    pub fn private_income(&self) -> f64 {
        self.market_income() + self.other_income
    }

    pub fn check(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::Invalid(format!("person {}: {what}", self.person_id)));
        let employed = self.is_employed();
        if !self.usual_hours.is_finite() || self.usual_hours < 0.0 {
            return fail("usual hours must be finite and nonnegative");
        }
        if (self.usual_hours == 0.0) == employed {
            return fail("usual hours are zero exactly when not employed");
        }
        if self.wage_income > 0.0 && !employed && !self.jobkeeper_flag {
            return fail("wage income without employment");
        }
        if self.industry.is_some() && self.labour_state == LabourState::NotInLabourForce
            && !self.employed_since_baseline_flag
        {
            return fail("industry set for a person never employed");
        }
        for (name, v) in [
            ("wage", self.wage_income),
            ("business", self.business_income),
            ("investment", self.investment_income),
            ("other", self.other_income),
        ] {
            if !v.is_finite() {
                return fail(&format!("{name} income is not finite"));
            }
        }
        if self.wage_income < 0.0 || self.other_income < 0.0 {
            return fail("wage and other income must be nonnegative");
        }
        Ok(())
    }
}

/// Persons aged this or older count as adults for equivalisation and are
/// in scope of the labour-force panel.
pub const ADULT_AGE: u32 = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdRecord {
    pub household_id: HouseholdId,
    pub members: Vec<PersonRecord>,
    pub n_children_0_4: u32,
    pub n_children_5_14: u32,
    pub housing_cost: f64,
    pub childcare_cost: f64,
    /// Household assets, used only by asset tests.
    pub assets: f64,
    pub state: Jurisdiction,
    pub weight: f64,
}

impl HouseholdRecord {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn adults(&self) -> impl Iterator<Item = &PersonRecord> {
        self.members.iter().filter(|p| p.is_adult())
    }

    pub fn n_children(&self) -> u32 {
        self.n_children_0_4 + self.n_children_5_14
    }

    /// The partner of `person`, if any: another partnered adult.
    pub fn partner_of(&self, person: &PersonRecord) -> Option<&PersonRecord> {
        if person.marital != Marital::Partnered {
            return None;
        }
        self.members.iter().find(|p| {
            p.person_id != person.person_id && p.is_adult() && p.marital == Marital::Partnered
        })
    }

    pub fn market_income(&self) -> f64 {
        self.members.iter().map(PersonRecord::market_income).sum()
    }

    pub fn check(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::Invalid(format!("household {}: {what}", self.household_id)));
        if self.members.is_empty() {
            return Err(Error::EmptyHousehold);
        }
        if !self.weight.is_finite() || self.weight < 0.0 {
            return fail("weight must be finite and nonnegative");
        }
        let under5 = self.members.iter().filter(|p| p.age <= 4).count() as u32;
        let from5 = self.members.iter().filter(|p| (5..=14).contains(&p.age)).count() as u32;
        if under5 != self.n_children_0_4 || from5 != self.n_children_5_14 {
            return fail("child counts disagree with member ages");
        }
        if self.housing_cost < 0.0 || self.childcare_cost < 0.0 {
            return fail("costs must be nonnegative");
        }
        for p in &self.members {
            if p.household_id != self.household_id {
                return fail("member carries another household id");
            }
            p.check()?;
        }
        Ok(())
    }
}

/// Population snapshot for one month.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub month: MonthId,
    pub households: Vec<HouseholdRecord>,
}

impl WeightedSample {
    pub fn new(month: MonthId, mut households: Vec<HouseholdRecord>) -> Self {
        households.sort_by_key(|h| h.household_id);
        WeightedSample { month, households }
    }

    pub fn total_weight(&self) -> f64 {
        self.households.iter().map(|h| h.weight).sum()
    }

    pub fn persons(&self) -> impl Iterator<Item = (&HouseholdRecord, &PersonRecord)> {
        self.households.iter().flat_map(|h| h.members.iter().map(move |p| (h, p)))
    }

    pub fn n_persons(&self) -> usize {
        self.households.iter().map(|h| h.members.len()).sum()
    }

    pub fn household(&self, id: HouseholdId) -> Option<&HouseholdRecord> {
        self.households
            .binary_search_by_key(&id, |h| h.household_id)
            .ok()
            .map(|i| &self.households[i])
    }

    /// Index of persons by id, as (household index, member index).
    pub fn person_index(&self) -> BTreeMap<PersonId, (usize, usize)> {
        let mut map = BTreeMap::new();
        for (hi, h) in self.households.iter().enumerate() {
            for (pi, p) in h.members.iter().enumerate() {
                map.insert(p.person_id, (hi, pi));
            }
        }
        map
    }

    pub fn check(&self) -> Result<()> {
        for h in &self.households {
            h.check()?;
        }
        if self.households.windows(2).any(|w| w[0].household_id >= w[1].household_id) {
            return Err(Error::Invalid("household ids must be unique".into()));
        }
        if !(self.total_weight() > 0.0) {
            return Err(Error::ZeroWeight);
        }
        Ok(())
    }
}

/// OECD-modified equivalence scale: 1 for the first adult, 0.5 for each
/// further person aged 15 or over and 0.3 for each child under 15.
pub fn equivalence_scale(household: &HouseholdRecord) -> Result<f64> {
    if household.members.is_empty() {
        return Err(Error::EmptyHousehold);
    }
    let adults = household.members.iter().filter(|p| p.is_adult()).count() as f64;
    let children = household.members.len() as f64 - adults;
    Ok(if adults >= 1.0 {
        1.0 + 0.5 * (adults - 1.0) + 0.3 * children
    } else {
        1.0 + 0.3 * (children - 1.0)
    })
}

pub fn equivalise(income: f64, household: &HouseholdRecord) -> Result<f64> {
    if !income.is_finite() {
        return Err(Error::Invalid(format!("income {income} is not finite")));
    }
    Ok(income / equivalence_scale(household)?)
}

/// Σ weight·value in household-id order.
pub fn weighted_total<F>(sample: &WeightedSample, field: F) -> f64
where
    F: Fn(&HouseholdRecord) -> f64,
{
    // `WeightedSample::new` keeps households sorted by id.
    sample.households.iter().map(|h| h.weight * field(h)).sum()
}

/// One unit entering a weighted ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedUnit {
    pub id: HouseholdId,
    pub value: f64,
    pub weight: f64,
}

/// Quintile (1..=5) of each household, frozen at the baseline month.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuintileMap {
    pub quintile: BTreeMap<HouseholdId, u8>,
}

impl QuintileMap {
    pub fn get(&self, id: HouseholdId) -> Option<u8> {
        self.quintile.get(&id).copied()
    }
}

/// Weighted quintiles from the left-continuous weighted empirical CDF.
///
/// Units are sorted by value with ties broken by id; a unit falls in
/// quintile q when the weight strictly before it lies in
/// `[(q-1)/5, q/5)` of the total.
pub fn assign_quintiles(units: &[RankedUnit]) -> Result<QuintileMap> {
    let total: f64 = units.iter().map(|u| u.weight).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let mut order: Vec<&RankedUnit> = units.iter().collect();
    order.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.id.cmp(&b.id)));
    let mut map = BTreeMap::new();
    let mut before = 0.0;
    for u in order {
        let mut q = 1u8;
        while q < 5 && before * 5.0 >= q as f64 * total {
            q += 1;
        }
        map.insert(u.id, q);
        before += u.weight;
    }
    Ok(QuintileMap { quintile: map })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn person(hh: u64, idx: u64, age: u32) -> PersonRecord {
        PersonRecord {
            person_id: PersonId(hh * 100 + idx),
            household_id: HouseholdId(hh),
            age,
            sex: if idx.is_multiple_of(2) { Sex::Male } else { Sex::Female },
            marital: Marital::Single,
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

    pub fn employed(mut p: PersonRecord, wage: f64, industry: Industry) -> PersonRecord {
        p.labour_state = LabourState::Employed;
        p.usual_hours = 38.0;
        p.n_jobs = 1;
        p.industry = Some(industry);
        p.occupation = Some(Occupation::ClericalAdministrative);
        p.wage_income = wage;
        p
    }

    pub fn household(id: u64, ages: &[u32]) -> HouseholdRecord {
        let members: Vec<PersonRecord> =
            ages.iter().enumerate().map(|(i, &a)| person(id, i as u64, a)).collect();
        household_of(id, members)
    }

    pub fn household_of(id: u64, members: Vec<PersonRecord>) -> HouseholdRecord {
        HouseholdRecord {
            household_id: HouseholdId(id),
            n_children_0_4: members.iter().filter(|p| p.age <= 4).count() as u32,
            n_children_5_14: members.iter().filter(|p| (5..=14).contains(&p.age)).count() as u32,
            members,
            housing_cost: 0.0,
            childcare_cost: 0.0,
            assets: 0.0,
            state: Jurisdiction::Nsw,
            weight: 1.0,
        }
    }
}
