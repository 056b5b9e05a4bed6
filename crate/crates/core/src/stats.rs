//! Distributional outcome measures: weighted Gini, weighted median,
//! anchored poverty lines and quintile mean tables.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{fortnightly_to_monthly, HouseholdId, MonthId, QuintileMap};
use crate::{Error, Result};

fn check_weights(weights: &[f64]) -> Result<f64> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Invalid("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    Ok(total)
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Weighted Gini coefficient in the sorted covariance form
/// `G = 2/(W·μ) · Σ wᵢ (yᵢ − μ)(Fᵢ − ½)`, where `Fᵢ` is the midpoint of unit
/// i's step in the weighted CDF.
///
/// Negative incomes are accepted; the result may then exceed 1.
pub fn gini(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::Invalid("values and weights differ in length".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("income values must be finite".into()));
    }
    let total = check_weights(weights)?;
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    if !(mean > 0.0) {
        return Err(Error::NonPositiveMean);
    }
    let mut cum = 0.0;
    let mut acc = 0.0;
    for i in sorted_order(values) {
        let w = weights[i];
        let f = (cum + 0.5 * w) / total;
        acc += w * (values[i] - mean) * (f - 0.5);
        cum += w;
    }
    Ok(2.0 * acc / (total * mean))
}

/// Weighted median. When the cumulative weight reaches exactly half the
/// total at a unit boundary, the two neighbouring values are averaged.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::Invalid("values and weights differ in length".into()));
    }
    let total = check_weights(weights)?;
    let order: Vec<usize> = sorted_order(values).into_iter().filter(|&i| weights[i] > 0.0).collect();
    let half = 0.5 * total;
    let mut cum = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cum += weights[i];
        if cum > half {
            return Ok(values[i]);
        }
        if cum == half {
            return Ok(match order.get(k + 1) {
                Some(&j) => 0.5 * (values[i] + values[j]),
                None => values[i],
            });
        }
    }
    // rounding left the running sum just short of the half
    Ok(values[*order.last().ok_or(Error::ZeroWeight)?])
}

/// Poverty line per equivalent adult, fixed at its anchor month.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PovertyLine {
    pub value: f64,
    pub anchor_month: MonthId,
}

/// Half the weighted median of person-level equivalised after-housing income.
pub fn anchor_poverty_line(values: &[f64], weights: &[f64], anchor_month: MonthId) -> Result<PovertyLine> {
    let value = 0.5 * weighted_median(values, weights)?;
    if !(value > 0.0) {
        return Err(Error::Invalid("median income is not positive; no poverty line".into()));
    }
    Ok(PovertyLine { value, anchor_month })
}

/// Weighted share of units strictly below the line.
pub fn poverty_rate(values: &[f64], weights: &[f64], line: &PovertyLine) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::Invalid("values and weights differ in length".into()));
    }
    let total = check_weights(weights)?;
    let below: f64 = values.iter().zip(weights).filter(|(v, _)| **v < line.value).map(|(_, w)| w).sum();
    Ok(below / total)
}

/// Weighted means by baseline quintile, in monthly currency units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuintileTable {
    pub month: MonthId,
    pub means: [f64; 5],
    /// Percentage change of each mean against the baseline table.
    pub pct_change: [f64; 5],
}

/// Household value entering a quintile table (fortnightly units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HouseholdValue {
    pub id: HouseholdId,
    pub value: f64,
    pub weight: f64,
}

/// Weighted quintile means against a frozen quintile map. Without a
/// baseline table the changes are measured against the table itself.
pub fn quintile_table(
    month: MonthId,
    units: &[HouseholdValue],
    quintiles: &QuintileMap,
    baseline: Option<&QuintileTable>,
) -> Result<QuintileTable> {
    let means = quintile_means(units, quintiles)?.map(fortnightly_to_monthly);
    let reference = baseline.map_or(means, |b| b.means);
    let mut pct_change = [0.0; 5];
    for q in 0..5 {
        pct_change[q] = pct_change_of(means[q], reference[q]);
    }
    Ok(QuintileTable { month, means, pct_change })
}

/// Weighted mean per quintile in the units of the input values. Units
/// missing from the map are ignored.
pub fn quintile_means(units: &[HouseholdValue], quintiles: &QuintileMap) -> Result<[f64; 5]> {
    let mut sum = [0.0; 5];
    let mut wsum = [0.0; 5];
    for u in units {
        if let Some(q) = quintiles.get(u.id) {
            let k = (q - 1) as usize;
            sum[k] += u.weight * u.value;
            wsum[k] += u.weight;
        }
    }
    let mut means = [0.0; 5];
    for k in 0..5 {
        if !(wsum[k] > 0.0) {
            return Err(Error::EmptyQuintile(k as u8 + 1));
        }
        means[k] = sum[k] / wsum[k];
    }
    Ok(means)
}

/// `100 · (value − reference) / |reference|`, zero when the reference is zero.
pub fn pct_change_of(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        0.0
    } else {
        100.0 * (value - reference) / reference.abs()
    }
}

/// Effective sample size `(Σw)² / Σw²`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}
