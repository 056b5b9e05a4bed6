use alloc::string::String;
use alloc::vec::Vec;

use crate::data::MonthId;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty household")]
    EmptyHousehold,
    #[error("zero total weight")]
    ZeroWeight,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("invalid month {year}-{month}")]
    InvalidMonth { year: i32, month: u32 },
    #[error("separation: coefficients diverged for {}", .terms.join(", "))]
    Separation { terms: Vec<String> },
    #[error("singular information matrix; offending terms: {}", .terms.join(", "))]
    Singular { terms: Vec<String> },
    #[error("covariate `{0}` is constant across the fitted data")]
    ConstantCovariate(String),
    #[error("fit did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("outcome has a single class in {0}")]
    DegenerateOutcome(String),
    #[error("no observations in {0}")]
    EmptyStratum(String),
    #[error("predicted baseline membership probability is zero for person {0}")]
    ZeroBaseProbability(u64),
    #[error("missing {table} index for month {month}")]
    MissingIndex { table: &'static str, month: MonthId },
    #[error("month {month} precedes the baseline month {baseline}")]
    BeforeBaseline { month: MonthId, baseline: MonthId },
    #[error("infeasible alignment target {target} exceeds eligible weight {eligible}")]
    InfeasibleTarget { target: f64, eligible: f64 },
    #[error("person {person} is not eligible for {outcome}")]
    Ineligible { person: u64, outcome: &'static str },
    #[error("person {0} not found in sample")]
    UnknownPerson(u64),
    #[error("regime `{regime}` is not in effect in {month}")]
    RegimeNotEffective { regime: String, month: MonthId },
    #[error("empty quintile Q{0}")]
    EmptyQuintile(u8),
    #[error("non-positive mean income; Gini is undefined")]
    NonPositiveMean,
    #[error("negative income {0} where a nonnegative income is required")]
    NegativeIncome(f64),
    #[error("measure not defined: {0}")]
    Measure(String),
}

pub type Result<T> = core::result::Result<T, Error>;
