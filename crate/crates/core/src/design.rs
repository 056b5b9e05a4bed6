//! Covariate terms and design matrices for the binary-choice models.
//!
//! Categorical terms draw their levels from fixed enums, so two datasets
//! always share level dictionaries. Dummy columns for levels that never
//! occur in the fitted rows are dropped; any other constant column is an
//! error.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{
    AgeBand, Education, HouseholdRecord, Industry, Jurisdiction, LabourState, Marital, Occupation,
    PersonRecord, Sex,
};
use crate::{Error, Result};

/// Categorical factors that can be crossed into a saturated cell term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Sex,
    LabourState,
    Marital,
    Education,
    OverseasBorn,
    AgeBand,
    State,
    /// Industry of employed and unemployed persons, `none` otherwise.
    Industry,
    /// Five-hour bands of usual hours for employed persons, `none` otherwise.
    HoursBand,
}

const HOURS_BANDS: usize = 13;

impl Factor {
    fn n_levels(self) -> usize {
        match self {
            Factor::Sex | Factor::Marital | Factor::Education | Factor::OverseasBorn => 2,
            Factor::LabourState => 3,
            Factor::AgeBand => AgeBand::ALL.len(),
            Factor::State => Jurisdiction::ALL.len(),
            Factor::Industry => Industry::ALL.len() + 1,
            Factor::HoursBand => HOURS_BANDS + 1,
        }
    }

    fn level(self, p: &PersonRecord, h: &HouseholdRecord) -> usize {
        match self {
            Factor::Sex => p.sex.index(),
            Factor::LabourState => p.labour_state.index(),
            Factor::Marital => p.marital.index(),
            Factor::Education => p.education.index(),
            Factor::OverseasBorn => p.overseas_born as usize,
            Factor::AgeBand => AgeBand::of(p.age).index(),
            Factor::State => h.state.index(),
            Factor::Industry => match (p.labour_state, p.industry) {
                (LabourState::NotInLabourForce, _) | (_, None) => Industry::ALL.len(),
                (_, Some(i)) => i.index(),
            },
            Factor::HoursBand => match hours_band(p) {
                Some(b) => b,
                None => HOURS_BANDS,
            },
        }
    }

    fn level_name(self, level: usize) -> String {
        match self {
            Factor::Sex => Sex::ALL[level].code().to_string(),
            Factor::LabourState => LabourState::ALL[level].code().to_string(),
            Factor::Marital => Marital::ALL[level].code().to_string(),
            Factor::Education => Education::ALL[level].code().to_string(),
            Factor::OverseasBorn => (if level == 1 { "overseas" } else { "local" }).to_string(),
            Factor::AgeBand => AgeBand::ALL[level].code().to_string(),
            Factor::State => Jurisdiction::ALL[level].code().to_string(),
            Factor::Industry => Industry::ALL.get(level).map_or("none".to_string(), |i| i.code().to_string()),
            Factor::HoursBand if level == HOURS_BANDS => "none".to_string(),
            Factor::HoursBand => format!("{}h", level * 5),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Factor::Sex => "sex",
            Factor::LabourState => "labour",
            Factor::Marital => "marital",
            Factor::Education => "education",
            Factor::OverseasBorn => "born",
            Factor::AgeBand => "age_band",
            Factor::State => "state",
            Factor::Industry => "industry",
            Factor::HoursBand => "hours",
        }
    }
}

fn hours_band(p: &PersonRecord) -> Option<usize> {
    if p.is_employed() {
        Some(((p.usual_hours / 5.0) as usize).min(HOURS_BANDS - 1))
    } else {
        None
    }
}

/// One covariate term; a term expands to one or more design columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Age,
    AgeSquared,
    Marital,
    Sex,
    OverseasBorn,
    LocallyBorn,
    Education,
    LabourState,
    Industry,
    Occupation,
    HoursBand,
    UsualHours,
    FullTime,
    NJobs,
    UnemploymentDuration,
    SexByEmployment,
    AgeByEmployment,
    ChildrenUnder5,
    Children5To14,
    HouseholdSize,
    State,
    /// Saturated crossing of categorical factors: one dummy per cell
    /// except the first.
    Cell(Vec<Factor>),
}

struct Column {
    name: String,
    dummy: bool,
}

fn dummies<I: IntoIterator<Item = String>>(prefix: &str, names: I) -> Vec<Column> {
    names.into_iter().map(|n| Column { name: format!("{prefix}={n}"), dummy: true }).collect()
}

fn single(name: &str, dummy: bool) -> Vec<Column> {
    vec![Column { name: name.to_string(), dummy }]
}

impl Term {
    /// Human-readable label used in error messages.
    pub fn label(&self) -> String {
        match self {
            Term::Cell(fs) => {
                let names: Vec<&str> = fs.iter().map(|f| f.name()).collect();
                format!("cell({})", names.join("×"))
            }
            other => format!("{other:?}"),
        }
    }

    fn columns(&self) -> Vec<Column> {
        match self {
            Term::Age => single("age/10", false),
            Term::AgeSquared => single("(age/10)^2", false),
            Term::Marital => single("partnered", true),
            Term::Sex => single("male", true),
            Term::OverseasBorn => single("overseas_born", true),
            Term::LocallyBorn => single("locally_born", true),
            Term::Education => single("bachelor_plus", true),
            Term::LabourState => dummies("labour", ["unemployed".to_string(), "nilf".to_string()]),
            Term::Industry => dummies("industry", Industry::ALL[1..].iter().map(|i| i.code().to_string())),
            Term::Occupation => {
                dummies("occupation", Occupation::ALL[1..].iter().map(|o| o.code().to_string()))
            }
            Term::HoursBand => dummies("hours", (1..HOURS_BANDS).map(|b| format!("{}h", b * 5))),
            Term::UsualHours => single("hours/10", false),
            Term::FullTime => single("full_time", true),
            Term::NJobs => single("n_jobs", false),
            Term::UnemploymentDuration => single("unemployment_years", false),
            Term::SexByEmployment => single("male×employed", true),
            Term::AgeByEmployment => single("age/10×employed", false),
            Term::ChildrenUnder5 => single("children_0_4", false),
            Term::Children5To14 => single("children_5_14", false),
            Term::HouseholdSize => single("household_size", false),
            Term::State => dummies("state", Jurisdiction::ALL[1..].iter().map(|s| s.code().to_string())),
            Term::Cell(factors) => {
                let n: usize = factors.iter().map(|f| f.n_levels()).product();
                (1..n)
                    .map(|cell| {
                        let mut rest = cell;
                        let mut parts = Vec::with_capacity(factors.len());
                        for f in factors.iter().rev() {
                            parts.push(format!("{}={}", f.name(), f.level_name(rest % f.n_levels())));
                            rest /= f.n_levels();
                        }
                        parts.reverse();
                        Column { name: parts.join("×"), dummy: true }
                    })
                    .collect()
            }
        }
    }

    fn fill(&self, p: &PersonRecord, h: &HouseholdRecord, out: &mut Vec<f64>) {
        let employed = p.is_employed();
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let age = p.age as f64 / 10.0;
        match self {
            Term::Age => out.push(age),
            Term::AgeSquared => out.push(age * age),
            Term::Marital => out.push(flag(p.marital == Marital::Partnered)),
            Term::Sex => out.push(flag(p.sex == Sex::Male)),
            Term::OverseasBorn => out.push(flag(p.overseas_born)),
            Term::LocallyBorn => out.push(flag(!p.overseas_born)),
            Term::Education => out.push(flag(p.education == Education::BachelorOrHigher)),
            Term::LabourState => {
                out.push(flag(p.labour_state == LabourState::Unemployed));
                out.push(flag(p.labour_state == LabourState::NotInLabourForce));
            }
            Term::Industry => {
                let level = Factor::Industry.level(p, h);
                out.extend((1..Industry::ALL.len()).map(|i| flag(i == level)));
            }
            Term::Occupation => {
                let level = if employed { p.occupation.map(|o| o.index()) } else { None };
                out.extend((1..Occupation::ALL.len()).map(|i| flag(Some(i) == level)));
            }
            Term::HoursBand => {
                let band = hours_band(p);
                out.extend((1..HOURS_BANDS).map(|b| flag(Some(b) == band)));
            }
            Term::UsualHours => out.push(p.usual_hours / 10.0),
            Term::FullTime => out.push(flag(employed && p.usual_hours >= 35.0)),
            Term::NJobs => out.push(p.n_jobs as f64),
            Term::UnemploymentDuration => out.push(p.unemployment_duration as f64 / 12.0),
            Term::SexByEmployment => out.push(flag(employed && p.sex == Sex::Male)),
            Term::AgeByEmployment => out.push(if employed { age } else { 0.0 }),
            Term::ChildrenUnder5 => out.push(h.n_children_0_4 as f64),
            Term::Children5To14 => out.push(h.n_children_5_14 as f64),
            Term::HouseholdSize => out.push(h.size() as f64),
            Term::State => out.extend((1..Jurisdiction::ALL.len()).map(|s| flag(s == h.state.index()))),
            Term::Cell(factors) => {
                let mut cell = 0;
                let mut n = 1;
                for f in factors {
                    cell = cell * f.n_levels() + f.level(p, h);
                    n *= f.n_levels();
                }
                out.extend((1..n).map(|c| flag(c == cell)));
            }
        }
    }
}

/// Ordered list of covariate terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub terms: Vec<Term>,
}

impl CovariateSpec {
    pub fn new(terms: Vec<Term>) -> Self {
        CovariateSpec { terms }
    }

    /// Demographic, employment and household characteristics used to
    /// reweight the income survey toward a labour-force wave.
    pub fn membership_default() -> Self {
        use Term::*;
        CovariateSpec::new(vec![
            Age,
            AgeSquared,
            Marital,
            Sex,
            OverseasBorn,
            LabourState,
            Industry,
            Occupation,
            HoursBand,
            NJobs,
            UnemploymentDuration,
            SexByEmployment,
            AgeByEmployment,
            ChildrenUnder5,
            Children5To14,
            HouseholdSize,
            State,
        ])
    }

    /// Covariates of the recent-employment model (out of the labour force).
    pub fn recent_employment() -> Self {
        use Term::*;
        CovariateSpec::new(vec![Age, AgeSquared, Education, LocallyBorn, ChildrenUnder5, Children5To14, State])
    }

    /// Covariates of the employment-retention model (previously employed).
    pub fn employment_retention() -> Self {
        use Term::*;
        let mut spec = Self::recent_employment();
        spec.terms.extend([FullTime, Industry, Occupation, UsualHours, NJobs]);
        spec
    }

    fn columns(&self) -> (Vec<Column>, Vec<usize>) {
        let mut cols = vec![Column { name: "intercept".to_string(), dummy: false }];
        let mut owner = vec![usize::MAX];
        for (t, term) in self.terms.iter().enumerate() {
            for c in term.columns() {
                cols.push(c);
                owner.push(t);
            }
        }
        (cols, owner)
    }

    fn fill_full(&self, p: &PersonRecord, h: &HouseholdRecord, out: &mut Vec<f64>) {
        out.push(1.0);
        for term in &self.terms {
            term.fill(p, h, out);
        }
    }
}

/// Columns of a fitted design: the spec plus the subset of its columns kept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignLayout {
    pub spec: CovariateSpec,
    pub names: Vec<String>,
    /// Index of the owning term for each kept column (`None` for the intercept).
    pub owners: Vec<Option<usize>>,
    /// Dummy columns dropped because their level never occurred.
    pub dropped: Vec<String>,
    kept: Vec<usize>,
    n_full: usize,
}

/// Row-major design matrix.
#[derive(Debug, Clone)]
pub struct Design {
    pub n: usize,
    pub p: usize,
    pub x: Vec<f64>,
}

impl Design {
    pub fn from_rows(p: usize, x: Vec<f64>) -> Self {
        assert_eq!(x.len() % p.max(1), 0);
        Design { n: x.len().checked_div(p).unwrap_or(0), p, x }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }
}

impl DesignLayout {
    /// Builds the design for `rows`, dropping never-observed dummy levels.
    pub fn build<'a, I>(spec: &CovariateSpec, rows: I) -> Result<(DesignLayout, Design)>
    where
        I: IntoIterator<Item = (&'a PersonRecord, &'a HouseholdRecord)>,
    {
        Self::build_excluding(spec, rows, &[])
    }

    /// As [`DesignLayout::build`], additionally leaving out the named columns.
    pub fn build_excluding<'a, I>(spec: &CovariateSpec, rows: I, exclude: &[String]) -> Result<(DesignLayout, Design)>
    where
        I: IntoIterator<Item = (&'a PersonRecord, &'a HouseholdRecord)>,
    {
        let (cols, owner) = spec.columns();
        let n_full = cols.len();
        let mut full = Vec::new();
        for (p, h) in rows {
            spec.fill_full(p, h, &mut full);
        }
        let n = full.len() / n_full;
        if n == 0 {
            return Err(Error::EmptyStratum("design".into()));
        }
        let mut kept = vec![0];
        let mut dropped = Vec::new();
        for j in 1..n_full {
            let first = full[j];
            let constant = (1..n).all(|i| full[i * n_full + j] == first);
            if exclude.contains(&cols[j].name) {
                dropped.push(cols[j].name.clone());
            } else if !constant {
                kept.push(j);
            } else if cols[j].dummy && first == 0.0 {
                dropped.push(cols[j].name.clone());
            } else {
                return Err(Error::ConstantCovariate(cols[j].name.clone()));
            }
        }
        let p = kept.len();
        let mut x = Vec::with_capacity(n * p);
        for i in 0..n {
            let row = &full[i * n_full..(i + 1) * n_full];
            x.extend(kept.iter().map(|&j| row[j]));
        }
        let layout = DesignLayout {
            spec: spec.clone(),
            names: kept.iter().map(|&j| cols[j].name.clone()).collect(),
            owners: kept.iter().map(|&j| (owner[j] != usize::MAX).then_some(owner[j])).collect(),
            dropped,
            kept,
            n_full,
        };
        Ok((layout, Design { n, p, x }))
    }

    pub fn p(&self) -> usize {
        self.kept.len()
    }

    /// Kept design columns for one record.
    pub fn row(&self, p: &PersonRecord, h: &HouseholdRecord) -> Vec<f64> {
        let mut full = Vec::with_capacity(self.n_full);
        self.spec.fill_full(p, h, &mut full);
        self.kept.iter().map(|&j| full[j]).collect()
    }

    /// Linear index `xᵀβ` for one record.
    pub fn linear_index(&self, beta: &[f64], p: &PersonRecord, h: &HouseholdRecord) -> f64 {
        self.row(p, h).iter().zip(beta).map(|(x, b)| x * b).sum()
    }

    /// Term labels owning the given columns, deduplicated, in column order.
    pub fn term_labels(&self, columns: &[usize]) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for &c in columns {
            let label = match self.owners.get(c).copied().flatten() {
                Some(t) => format!("{} ({})", self.spec.terms[t].label(), self.names[c]),
                None => "intercept".to_string(),
            };
            if !out.contains(&label) {
                out.push(label);
            }
        }
        out
    }
}
