//! CSV unit-record files, payroll series and index tables.
//!
//! Every file is UTF-8 with a header row; columns are found by name.
//! Row numbers in messages count data rows from 1, header excluded.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::StringRecord;
use nowcast_core::data::{
    AgeBand, HouseholdId, HouseholdRecord, Industry, Jurisdiction, MonthId, PersonId, PersonRecord, WeightedSample,
};
use nowcast_core::indexation::{PayrollCell, PayrollSeries};

use crate::error::{Error, Result};

pub const PERSON_COLUMNS: [&str; 20] = [
    "person_id",
    "household_id",
    "age",
    "sex",
    "marital",
    "overseas_born",
    "education",
    "labour_state",
    "industry",
    "occupation",
    "usual_hours",
    "n_jobs",
    "unemployment_duration",
    "wage_income",
    "business_income",
    "investment_income",
    "other_income",
    "welfare_flags",
    "jobkeeper_flag",
    "employed_since_baseline_flag",
];

pub const HOUSEHOLD_COLUMNS: [&str; 8] =
    ["household_id", "n_children_0_4", "n_children_5_14", "housing_cost", "childcare_cost", "assets", "state", "weight"];

pub const PAYROLL_COLUMNS: [&str; 5] = ["industry", "age_band", "month", "wage_index", "job_index"];

pub const INDEX_COLUMNS: [&str; 3] = ["month", "investment", "cpi"];

/// A row that could not be read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub row: u64,
    pub message: String,
}

/// Household-file fields, before members are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdFields {
    pub household_id: HouseholdId,
    pub n_children_0_4: u32,
    pub n_children_5_14: u32,
    pub housing_cost: f64,
    pub childcare_cost: f64,
    pub assets: f64,
    pub state: Jurisdiction,
    pub weight: f64,
}

/// Rows of a file, each tagged with its `month` column when present.
pub struct Scan<T> {
    pub rows: Vec<(u64, Option<MonthId>, T)>,
    pub issues: Vec<RowIssue>,
}

struct Row<'a> {
    record: &'a StringRecord,
    columns: &'a BTreeMap<String, usize>,
}

impl Row<'_> {
    fn raw(&self, name: &str) -> std::result::Result<&str, String> {
        let k = self.columns.get(name).ok_or_else(|| format!("missing column `{name}`"))?;
        Ok(self.record.get(*k).unwrap_or("").trim())
    }

    fn get<T: FromStr>(&self, name: &str) -> std::result::Result<T, String>
    where
        T::Err: Display,
    {
        let s = self.raw(name)?;
        s.parse().map_err(|e| format!("column `{name}`: {e}"))
    }

    fn number(&self, name: &str) -> std::result::Result<f64, String> {
        let v: f64 = self.raw(name)?.parse().map_err(|_| format!("column `{name}`: not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("column `{name}`: not finite"))
        }
    }

    fn flag(&self, name: &str) -> std::result::Result<bool, String> {
        match self.raw(name)? {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            other => Err(format!("column `{name}`: `{other}` is not a boolean")),
        }
    }

    fn optional<T: FromStr>(&self, name: &str) -> std::result::Result<Option<T>, String>
    where
        T::Err: Display,
    {
        match self.raw(name)? {
            "" => Ok(None),
            _ => self.get(name).map(Some),
        }
    }

    fn month(&self) -> std::result::Result<Option<MonthId>, String> {
        if self.columns.contains_key("month") {
            self.get("month").map(Some)
        } else {
            Ok(None)
        }
    }
}

fn open(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file))
}

fn scan<T>(path: &Path, required: &[&str], parse: impl Fn(&Row<'_>) -> std::result::Result<T, String>) -> Result<Scan<T>> {
    let mut reader = open(path)?;
    let headers = reader.headers().map_err(|e| Error::Format { path: path.into(), message: e.to_string() })?.clone();
    let columns: BTreeMap<String, usize> = headers.iter().enumerate().map(|(k, h)| (h.trim().to_string(), k)).collect();
    if let Some(missing) = required.iter().find(|c| !columns.contains_key(**c)) {
        return Err(Error::Format { path: path.into(), message: format!("missing column `{missing}`") });
    }
    let mut out = Scan { rows: Vec::new(), issues: Vec::new() };
    let mut record = StringRecord::new();
    let mut row = 0u64;
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                row += 1;
                let r = Row { record: &record, columns: &columns };
                match r.month().and_then(|m| parse(&r).map(|v| (m, v))) {
                    Ok((m, v)) => out.rows.push((row, m, v)),
                    Err(message) => out.issues.push(RowIssue { row, message }),
                }
            }
            Err(e) => {
                row += 1;
                out.issues.push(RowIssue { row, message: e.to_string() });
            }
        }
    }
    Ok(out)
}

fn parse_person(r: &Row<'_>) -> std::result::Result<PersonRecord, String> {
    Ok(PersonRecord {
        person_id: PersonId(r.get("person_id")?),
        household_id: HouseholdId(r.get("household_id")?),
        age: r.get("age")?,
        sex: r.get("sex")?,
        marital: r.get("marital")?,
        overseas_born: r.flag("overseas_born")?,
        education: r.get("education")?,
        labour_state: r.get("labour_state")?,
        industry: r.optional("industry")?,
        occupation: r.optional("occupation")?,
        usual_hours: r.number("usual_hours")?,
        n_jobs: r.get("n_jobs")?,
        unemployment_duration: r.get("unemployment_duration")?,
        wage_income: r.number("wage_income")?,
        business_income: r.number("business_income")?,
        investment_income: r.number("investment_income")?,
        other_income: r.number("other_income")?,
        welfare_flags: r.get("welfare_flags")?,
        jobkeeper_flag: r.flag("jobkeeper_flag")?,
        employed_since_baseline_flag: r.flag("employed_since_baseline_flag")?,
    })
}

fn parse_household(r: &Row<'_>) -> std::result::Result<HouseholdFields, String> {
    Ok(HouseholdFields {
        household_id: HouseholdId(r.get("household_id")?),
        n_children_0_4: r.get("n_children_0_4")?,
        n_children_5_14: r.get("n_children_5_14")?,
        housing_cost: r.number("housing_cost")?,
        childcare_cost: r.number("childcare_cost")?,
        assets: r.number("assets")?,
        state: r.get("state")?,
        weight: r.number("weight")?,
    })
}

pub fn scan_persons(path: &Path) -> Result<Scan<PersonRecord>> {
    scan(path, &PERSON_COLUMNS, parse_person)
}

pub fn scan_households(path: &Path) -> Result<Scan<HouseholdFields>> {
    scan(path, &HOUSEHOLD_COLUMNS, parse_household)
}

fn first_issue<T>(path: &Path, s: Scan<T>) -> Result<Vec<(u64, Option<MonthId>, T)>> {
    match s.issues.into_iter().next() {
        Some(i) => Err(Error::Row { path: path.into(), row: i.row, message: i.message }),
        None => Ok(s.rows),
    }
}

/// Joins persons to households, one sample per month tag (`None` for
/// untagged files).
fn assemble(persons_path: &Path, households_path: &Path) -> Result<BTreeMap<Option<MonthId>, Vec<HouseholdRecord>>> {
    let persons = first_issue(persons_path, scan_persons(persons_path)?)?;
    let households = first_issue(households_path, scan_households(households_path)?)?;
    let mut members: BTreeMap<(Option<MonthId>, HouseholdId), Vec<PersonRecord>> = BTreeMap::new();
    for (_, m, p) in persons {
        members.entry((m, p.household_id)).or_default().push(p);
    }
    let mut out: BTreeMap<Option<MonthId>, Vec<HouseholdRecord>> = BTreeMap::new();
    for (row, m, f) in households {
        let mut ms = members.remove(&(m, f.household_id)).unwrap_or_default();
        ms.sort_by_key(|p| p.person_id);
        let h = HouseholdRecord {
            household_id: f.household_id,
            members: ms,
            n_children_0_4: f.n_children_0_4,
            n_children_5_14: f.n_children_5_14,
            housing_cost: f.housing_cost,
            childcare_cost: f.childcare_cost,
            assets: f.assets,
            state: f.state,
            weight: f.weight,
        };
        h.check().map_err(|e| Error::Row { path: households_path.into(), row, message: e.to_string() })?;
        out.entry(m).or_default().push(h);
    }
    if let Some(((_, id), _)) = members.into_iter().next() {
        return Err(Error::Format { path: persons_path.into(), message: format!("household {id} is not in the households file") });
    }
    Ok(out)
}

/// Reads an untagged survey and tags it with `month`.
pub fn read_survey(persons: &Path, households: &Path, month: MonthId) -> Result<WeightedSample> {
    let mut by_month = assemble(persons, households)?;
    let hs = by_month.remove(&None).unwrap_or_default();
    if !by_month.is_empty() {
        return Err(Error::Format { path: persons.into(), message: "survey files must not carry a month column".into() });
    }
    let sample = WeightedSample::new(month, hs);
    sample.check()?;
    Ok(sample)
}

/// Reads month-tagged panel files into one sample per wave, by month.
pub fn read_panel(persons: &Path, households: &Path) -> Result<Vec<WeightedSample>> {
    let by_month = assemble(persons, households)?;
    by_month
        .into_iter()
        .map(|(m, hs)| {
            let m = m.ok_or_else(|| Error::Format { path: persons.into(), message: "panel files need a month column".into() })?;
            let s = WeightedSample::new(m, hs);
            s.check()?;
            Ok(s)
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(f))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Format { path: path.into(), message: e.to_string() }
}

fn person_fields(p: &PersonRecord) -> Vec<String> {
    vec![
        p.person_id.to_string(),
        p.household_id.to_string(),
        p.age.to_string(),
        p.sex.to_string(),
        p.marital.to_string(),
        p.overseas_born.to_string(),
        p.education.to_string(),
        p.labour_state.to_string(),
        p.industry.map(|i| i.to_string()).unwrap_or_default(),
        p.occupation.map(|o| o.to_string()).unwrap_or_default(),
        p.usual_hours.to_string(),
        p.n_jobs.to_string(),
        p.unemployment_duration.to_string(),
        p.wage_income.to_string(),
        p.business_income.to_string(),
        p.investment_income.to_string(),
        p.other_income.to_string(),
        p.welfare_flags.to_string(),
        p.jobkeeper_flag.to_string(),
        p.employed_since_baseline_flag.to_string(),
    ]
}

fn household_fields(h: &HouseholdRecord) -> Vec<String> {
    vec![
        h.household_id.to_string(),
        h.n_children_0_4.to_string(),
        h.n_children_5_14.to_string(),
        h.housing_cost.to_string(),
        h.childcare_cost.to_string(),
        h.assets.to_string(),
        h.state.to_string(),
        h.weight.to_string(),
    ]
}

fn write_samples(persons: &Path, households: &Path, samples: &[&WeightedSample], tagged: bool) -> Result<()> {
    let mut pw = writer(persons)?;
    let mut hw = writer(households)?;
    let head = |cols: &[&str]| -> Vec<String> {
        let mut v: Vec<String> = if tagged { vec!["month".into()] } else { Vec::new() };
        v.extend(cols.iter().map(|c| c.to_string()));
        v
    };
    pw.write_record(head(&PERSON_COLUMNS)).map_err(csv_err(persons))?;
    hw.write_record(head(&HOUSEHOLD_COLUMNS)).map_err(csv_err(households))?;
    for s in samples {
        let tag = |mut v: Vec<String>| {
            if tagged {
                v.insert(0, s.month.to_string());
            }
            v
        };
        for h in &s.households {
            hw.write_record(tag(household_fields(h))).map_err(csv_err(households))?;
            for p in &h.members {
                pw.write_record(tag(person_fields(p))).map_err(csv_err(persons))?;
            }
        }
    }
    pw.flush().map_err(|e| Error::io(persons, e))?;
    hw.flush().map_err(|e| Error::io(households, e))
}

pub fn write_survey(persons: &Path, households: &Path, sample: &WeightedSample) -> Result<()> {
    write_samples(persons, households, &[sample], false)
}

pub fn write_panel(persons: &Path, households: &Path, waves: &[WeightedSample]) -> Result<()> {
    let refs: Vec<&WeightedSample> = waves.iter().collect();
    write_samples(persons, households, &refs, true)
}

/// Writes the cell level of a payroll series in long format.
pub fn write_payroll(path: &Path, series: &PayrollSeries) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(PAYROLL_COLUMNS).map_err(csv_err(path))?;
    for (&(industry, band, month), c) in &series.cells {
        w.write_record([
            industry.to_string(),
            band.to_string(),
            month.to_string(),
            c.wage_index.to_string(),
            c.job_index.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub type PayrollKey = (Industry, AgeBand, MonthId);

pub fn scan_payroll(path: &Path) -> Result<Scan<(PayrollKey, PayrollCell)>> {
    scan(path, &PAYROLL_COLUMNS, |r| {
        let key = (r.get("industry")?, r.get("age_band")?, r.get("month")?);
        let cell = PayrollCell { wage_index: r.number("wage_index")?, job_index: r.number("job_index")? };
        if !(cell.wage_index > 0.0 && cell.job_index > 0.0) {
            return Err("indices must be positive".into());
        }
        Ok((key, cell))
    })
}

pub fn read_payroll(path: &Path) -> Result<PayrollSeries> {
    let rows = first_issue(path, scan_payroll(path)?)?;
    Ok(PayrollSeries::from_cells(rows.into_iter().map(|(_, _, kv)| kv).collect()))
}

/// Monthly investment and consumer-price factors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonthlyFactors {
    pub investment: BTreeMap<MonthId, f64>,
    pub cpi: BTreeMap<MonthId, f64>,
}

pub fn scan_index_tables(path: &Path) -> Result<Scan<(f64, f64)>> {
    scan(path, &INDEX_COLUMNS, |r| {
        let (inv, cpi) = (r.number("investment")?, r.number("cpi")?);
        if !(inv > 0.0 && cpi > 0.0) {
            return Err("factors must be positive".into());
        }
        Ok((inv, cpi))
    })
}

pub fn read_index_tables(path: &Path) -> Result<MonthlyFactors> {
    let rows = first_issue(path, scan_index_tables(path)?)?;
    let mut out = MonthlyFactors::default();
    for (row, m, (inv, cpi)) in rows {
        let m = m.expect("month is a required column");
        if out.investment.insert(m, inv).is_some() {
            return Err(Error::Row { path: path.into(), row, message: format!("month {m} appears twice") });
        }
        out.cpi.insert(m, cpi);
    }
    Ok(out)
}

/// File names used by `gen-synth` and the `[data.files]` defaults.
pub struct SynthFiles {
    pub survey_persons: PathBuf,
    pub survey_households: PathBuf,
    pub panel_persons: PathBuf,
    pub panel_households: PathBuf,
    pub payroll: PathBuf,
}

impl SynthFiles {
    pub fn in_dir(dir: &Path) -> Self {
        SynthFiles {
            survey_persons: dir.join("survey_persons.csv"),
            survey_households: dir.join("survey_households.csv"),
            panel_persons: dir.join("panel_persons.csv"),
            panel_households: dir.join("panel_households.csv"),
            payroll: dir.join("payroll.csv"),
        }
    }
}
