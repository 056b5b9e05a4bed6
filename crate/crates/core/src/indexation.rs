//! Moves income components from the survey's collection vintage to an
//! analysis month with component-specific factors.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{AgeBand, HouseholdRecord, Industry, MonthId, PersonRecord, WeightedSample};
use crate::math::powf;
use crate::{Error, Result};

/// Wage and job-count indices of one payroll cell, relative to the baseline month.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayrollCell {
    pub wage_index: f64,
    pub job_index: f64,
}

/// Payroll indices by industry × age band × month, with industry-wide and
/// economy-wide fallbacks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PayrollSeries {
    pub cells: BTreeMap<(Industry, AgeBand, MonthId), PayrollCell>,
    pub industry: BTreeMap<(Industry, MonthId), PayrollCell>,
    pub economy: BTreeMap<MonthId, PayrollCell>,
}

impl PayrollSeries {
    pub fn from_cells(cells: BTreeMap<(Industry, AgeBand, MonthId), PayrollCell>) -> Self {
        let mut s = PayrollSeries { cells, ..Default::default() };
        s.fill_aggregates();
        s
    }

    /// Fills any missing industry or economy-wide entry with the
    /// job-index-weighted mean wage index of the cells below it.
    pub fn fill_aggregates(&mut self) {
        let mut by_industry: BTreeMap<(Industry, MonthId), (f64, f64, f64)> = BTreeMap::new();
        let mut by_month: BTreeMap<MonthId, (f64, f64, f64)> = BTreeMap::new();
        for (&(ind, _, m), c) in &self.cells {
            for acc in [by_industry.entry((ind, m)).or_default(), by_month.entry(m).or_default()] {
                acc.0 += c.job_index * c.wage_index;
                acc.1 += c.job_index;
                acc.2 += 1.0;
            }
        }
        let mean = |(wj, j, n): (f64, f64, f64)| PayrollCell {
            wage_index: if j > 0.0 { wj / j } else { 1.0 },
            job_index: j / n,
        };
        for (k, acc) in by_industry {
            self.industry.entry(k).or_insert_with(|| mean(acc));
        }
        for (k, acc) in by_month {
            self.economy.entry(k).or_insert_with(|| mean(acc));
        }
    }

    /// Cell lookup falling back to the industry, then the whole economy.
    pub fn lookup(&self, industry: Option<Industry>, band: AgeBand, month: MonthId) -> Result<PayrollCell> {
        if let Some(ind) = industry {
            if let Some(c) = self.cells.get(&(ind, band, month)) {
                return Ok(*c);
            }
            if let Some(c) = self.industry.get(&(ind, month)) {
                return Ok(*c);
            }
        }
        self.economy.get(&month).copied().ok_or(Error::MissingIndex { table: "payroll", month })
    }

    pub fn months(&self) -> Vec<MonthId> {
        let mut m: Vec<MonthId> = self.economy.keys().copied().collect();
        m.extend(self.cells.keys().map(|k| k.2));
        m.sort();
        m.dedup();
        m
    }

    pub fn check(&self) -> Result<()> {
        let all = self.cells.values().chain(self.industry.values()).chain(self.economy.values());
        for c in all {
            if !(c.wage_index > 0.0 && c.wage_index.is_finite() && c.job_index > 0.0 && c.job_index.is_finite()) {
                return Err(Error::Invalid("payroll indices must be positive and finite".into()));
            }
        }
        Ok(())
    }
}

/// Index factors for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTables {
    pub baseline_month: MonthId,
    /// Average-earnings growth from collection to the baseline month.
    pub awe_factor: f64,
    /// Consumer-price growth from collection to the baseline month.
    pub cpi_uprate: f64,
    /// Years from collection to the baseline month, for investment returns.
    pub years_to_baseline: f64,
    /// Real return per year, compounded annually.
    pub annual_real_return: f64,
    pub payroll: PayrollSeries,
    /// Cumulative investment return factor by month.
    pub investment: BTreeMap<MonthId, f64>,
    /// Consumer-price factor by month.
    pub cpi: BTreeMap<MonthId, f64>,
}

pub const DEFAULT_REAL_RETURN: f64 = 0.025;

impl IndexTables {
    /// Tables with every factor equal to one for the given months.
    pub fn identity(baseline_month: MonthId, months: &[MonthId]) -> Self {
        let mut economy = BTreeMap::new();
        for &m in months {
            economy.insert(m, PayrollCell { wage_index: 1.0, job_index: 1.0 });
        }
        IndexTables {
            baseline_month,
            awe_factor: 1.0,
            cpi_uprate: 1.0,
            years_to_baseline: 0.0,
            annual_real_return: DEFAULT_REAL_RETURN,
            payroll: PayrollSeries { economy, ..Default::default() },
            investment: months.iter().map(|&m| (m, 1.0)).collect(),
            cpi: months.iter().map(|&m| (m, 1.0)).collect(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let scalars = [self.awe_factor, self.cpi_uprate];
        if scalars.iter().chain(self.investment.values()).chain(self.cpi.values()).any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::Invalid("index factors must be positive and finite".into()));
        }
        if !(self.years_to_baseline >= 0.0) || !(self.annual_real_return > -1.0) {
            return Err(Error::Invalid("invalid investment return parameters".into()));
        }
        self.payroll.check()
    }

    fn factor(table: &BTreeMap<MonthId, f64>, name: &'static str, month: MonthId) -> Result<f64> {
        table.get(&month).copied().ok_or(Error::MissingIndex { table: name, month })
    }

    fn ensure_after_baseline(&self, month: MonthId) -> Result<()> {
        if month < self.baseline_month {
            Err(Error::BeforeBaseline { month, baseline: self.baseline_month })
        } else {
            Ok(())
        }
    }

    pub fn cpi_factor(&self, month: MonthId) -> Result<f64> {
        Ok(self.cpi_uprate * Self::factor(&self.cpi, "cpi", month)?)
    }

    pub fn investment_factor(&self, month: MonthId) -> Result<f64> {
        let carried = powf(1.0 + self.annual_real_return, self.years_to_baseline);
        Ok(carried * Self::factor(&self.investment, "investment", month)?)
    }
}

/// Indexes one person's income components to `month`.
///
/// Wage and business income follow average earnings and the payroll cell
/// of the person's industry and age band; investment income follows the
/// real return and the monthly investment index; other income follows
/// consumer prices.
pub fn index_person(p: &PersonRecord, month: MonthId, tables: &IndexTables) -> Result<PersonRecord> {
    tables.ensure_after_baseline(month)?;
    let wage = tables.awe_factor * tables.payroll.lookup(p.industry, AgeBand::of(p.age), month)?.wage_index;
    let mut out = p.clone();
    out.wage_income *= wage;
    out.business_income *= wage;
    out.investment_income *= tables.investment_factor(month)?;
    out.other_income *= tables.cpi_factor(month)?;
    Ok(out)
}

pub fn index_household(h: &HouseholdRecord, month: MonthId, tables: &IndexTables) -> Result<HouseholdRecord> {
    let mut out = h.clone();
    out.members = h.members.iter().map(|p| index_person(p, month, tables)).collect::<Result<_>>()?;
    out.childcare_cost *= tables.cpi_factor(month)?;
    Ok(out)
}

/// Indexes every household and retags the sample with `month`.
pub fn index_sample(sample: &WeightedSample, month: MonthId, tables: &IndexTables) -> Result<WeightedSample> {
    let households = sample.households.iter().map(|h| index_household(h, month, tables)).collect::<Result<_>>()?;
    Ok(WeightedSample { month, households })
}
