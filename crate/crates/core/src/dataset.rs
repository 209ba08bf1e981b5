//! Equally spaced longitudinal data: CSV ingestion, validation, summaries,
//! and the embedded 114-week operating-room-holds case study.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const CASE_STUDY_CSV: &str = include_str!("../data/or_holds.csv");

/// Minimum series length accepted by [`TimeSeriesDataset::new`].
pub const MIN_LENGTH: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord<T> {
    pub week: u32,
    pub outcome: T,
    /// Values in the order of [`TimeSeriesDataset::covariate_names`].
    pub covariates: Vec<T>,
}

/// An ordered, gap-free series of observations with named covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset<T> {
    records: Vec<ObservationRecord<T>>,
    outcome_name: String,
    covariate_names: Vec<String>,
    interval_label: String,
}

/// Lower-cases a column name and folds punctuation and spaces to `_`.
pub fn normalize_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.trim().chars() {
        if ch.is_alphanumeric() {
            out.extend(ch.to_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

enum ValueRule {
    Percent,
    NonNegative,
    Any,
}

fn covariate_rule(name: &str) -> ValueRule {
    let n = normalize_name(name);
    if n.contains("occupancy") {
        ValueRule::Percent
    } else if n.contains("discharges") || n.contains("admissions") {
        ValueRule::NonNegative
    } else {
        ValueRule::Any
    }
}

impl<T: Scalar> TimeSeriesDataset<T> {
    /// Validates the records and builds a dataset.
    pub fn new(
        outcome_name: impl Into<String>,
        covariate_names: Vec<String>,
        records: Vec<ObservationRecord<T>>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.week) {
                return Err(Error::DuplicateWeek(r.week));
            }
        }
        for pair in records.windows(2) {
            let (prev, next) = (pair[0].week, pair[1].week);
            if next < prev {
                return Err(Error::WeekOrder {
                    previous: prev,
                    found: next,
                });
            }
            if next > prev + 1 {
                return Err(Error::WeekGap { missing: prev + 1 });
            }
        }
        if records[0].week == 0 {
            return Err(Error::InvalidValue {
                week: 0,
                reason: "week indices must be positive".into(),
            });
        }
        let rules: Vec<ValueRule> = covariate_names.iter().map(|n| covariate_rule(n)).collect();
        for r in &records {
            if r.covariates.len() != covariate_names.len() {
                return Err(Error::InvalidValue {
                    week: r.week,
                    reason: format!(
                        "expected {} covariates, found {}",
                        covariate_names.len(),
                        r.covariates.len()
                    ),
                });
            }
            if !r.outcome.is_finite() || r.outcome < T::zero() {
                return Err(Error::InvalidValue {
                    week: r.week,
                    reason: format!("outcome must be finite and non-negative, got {}", r.outcome),
                });
            }
            for ((value, name), rule) in r.covariates.iter().zip(&covariate_names).zip(&rules) {
                let ok = value.is_finite()
                    && match rule {
                        ValueRule::Percent => *value >= T::zero() && *value <= T::lit(100.0),
                        ValueRule::NonNegative => *value >= T::zero(),
                        ValueRule::Any => true,
                    };
                if !ok {
                    return Err(Error::InvalidValue {
                        week: r.week,
                        reason: format!("covariate '{name}' has out-of-range value {value}"),
                    });
                }
            }
        }
        if records.len() < MIN_LENGTH {
            return Err(Error::TooShort {
                found: records.len(),
                required: MIN_LENGTH,
            });
        }
        Ok(Self {
            records,
            outcome_name: outcome_name.into(),
            covariate_names,
            interval_label: "week".into(),
        })
    }

    pub fn with_interval_label(mut self, label: impl Into<String>) -> Self {
        self.interval_label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ObservationRecord<T>] {
        &self.records
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn interval_label(&self) -> &str {
        &self.interval_label
    }

    pub fn first_week(&self) -> u32 {
        self.records[0].week
    }

    pub fn last_week(&self) -> u32 {
        self.records[self.records.len() - 1].week
    }

    pub fn weeks(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.week).collect()
    }

    pub fn outcome(&self) -> Vec<T> {
        self.records.iter().map(|r| r.outcome).collect()
    }

    pub fn record(&self, week: u32) -> Option<&ObservationRecord<T>> {
        let first = self.first_week();
        week.checked_sub(first)
            .and_then(|offset| self.records.get(offset as usize))
    }

    /// Position of a covariate, matched exactly or by normalized name.
    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        if let Some(i) = self.covariate_names.iter().position(|n| n == name) {
            return Ok(i);
        }
        let wanted = normalize_name(name);
        let matches: Vec<usize> = self
            .covariate_names
            .iter()
            .enumerate()
            .filter(|(_, n)| normalize_name(n) == wanted)
            .map(|(i, _)| i)
            .collect();
        match matches.as_slice() {
            [i] => Ok(*i),
            _ => Err(Error::UnknownColumn(name.to_string())),
        }
    }

    pub fn covariate(&self, name: &str) -> Result<Vec<T>> {
        let j = self.covariate_index(name)?;
        Ok(self.records.iter().map(|r| r.covariates[j]).collect())
    }

    /// Re-designates a covariate as the outcome; the old outcome becomes a covariate.
    pub fn with_outcome(&self, name: &str) -> Result<Self> {
        if name == self.outcome_name || normalize_name(name) == normalize_name(&self.outcome_name) {
            return Ok(self.clone());
        }
        let j = self.covariate_index(name)?;
        let mut names = self.covariate_names.clone();
        let new_outcome = names.remove(j);
        names.insert(0, self.outcome_name.clone());
        let records = self
            .records
            .iter()
            .map(|r| {
                let mut cov = r.covariates.clone();
                let y = cov.remove(j);
                cov.insert(0, r.outcome);
                ObservationRecord {
                    week: r.week,
                    outcome: y,
                    covariates: cov,
                }
            })
            .collect();
        Ok(Self::new(new_outcome, names, records)?.with_interval_label(self.interval_label.clone()))
    }

    /// Writes the dataset as CSV: week, outcome, then covariates.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![self.interval_label.clone(), self.outcome_name.clone()];
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header).map_err(csv_error)?;
        for r in &self.records {
            let mut row = vec![r.week.to_string(), r.outcome.to_string()];
            row.extend(r.covariates.iter().map(ToString::to_string));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    /// Outcome statistics overall, before `split_week`, and from it onward.
    pub fn summarize(&self, split_week: u32) -> Result<SegmentSummary<T>> {
        let (first, last) = (self.first_week(), self.last_week());
        if split_week < first || split_week > last {
            return Err(Error::WeekOutOfRange {
                week: split_week,
                first,
                last,
            });
        }
        let split = (split_week - first) as usize;
        let y = self.outcome();
        Ok(SegmentSummary {
            split_week,
            overall: OutcomeStats::of(&y).expect("dataset is non-empty"),
            before: OutcomeStats::of(&y[..split]),
            after: OutcomeStats::of(&y[split..]).expect("split is within range"),
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeStats<T> {
    pub count: usize,
    pub mean: T,
    pub min: T,
    pub max: T,
}

impl<T: Scalar> OutcomeStats<T> {
    fn of(values: &[T]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let sum: T = values.iter().copied().sum();
        Some(Self {
            count: values.len(),
            mean: sum / T::from_usize_lossy(values.len()),
            min: values.iter().copied().fold(T::infinity(), T::min),
            max: values.iter().copied().fold(T::neg_infinity(), T::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentSummary<T> {
    pub split_week: u32,
    pub overall: OutcomeStats<T>,
    /// `None` when the split falls on the first week.
    pub before: Option<OutcomeStats<T>>,
    pub after: OutcomeStats<T>,
}

/// Intervention coding columns found in an input file (the layout used by
/// tables that ship the design alongside the raw data).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordedDesignColumns<T> {
    pub level_change: Option<Vec<T>>,
    pub trend_change: Option<Vec<T>>,
    pub baseline_trend: Option<Vec<T>>,
}

impl<T> RecordedDesignColumns<T> {
    pub fn is_empty(&self) -> bool {
        self.level_change.is_none() && self.trend_change.is_none() && self.baseline_trend.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv<T> {
    pub dataset: TimeSeriesDataset<T>,
    pub recorded_design: RecordedDesignColumns<T>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy)]
enum DerivedKind {
    Level,
    Trend,
    Baseline,
}

fn derived_kind(name: &str) -> Option<DerivedKind> {
    match normalize_name(name).as_str() {
        "level_change" => Some(DerivedKind::Level),
        "trend_change" | "time_after" | "time_after_intervention" => Some(DerivedKind::Trend),
        "baseline_trend" => Some(DerivedKind::Baseline),
        _ => None,
    }
}

/// Accepts plain decimal text: optional sign, digits, optional fraction.
fn is_plain_decimal(text: &str) -> bool {
    let body = text.strip_prefix(['+', '-']).unwrap_or(text);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    match frac {
        None => !int.is_empty() && digits(int),
        Some(f) => digits(int) && digits(f) && !(int.is_empty() && f.is_empty()),
    }
}

fn parse_cell<T: Scalar>(text: &str, row: usize, column: &str) -> Result<T> {
    if text.is_empty() {
        return Err(Error::BlankCell {
            row,
            column: column.to_string(),
        });
    }
    let bad = || Error::NonNumeric {
        row,
        column: column.to_string(),
        value: text.to_string(),
    };
    if !is_plain_decimal(text) {
        return Err(bad());
    }
    text.parse::<T>().map_err(|_| bad())
}

fn parse_week(text: &str, row: usize, column: &str) -> Result<u32> {
    if text.is_empty() {
        return Err(Error::BlankCell {
            row,
            column: column.to_string(),
        });
    }
    text.parse::<u32>().map_err(|_| Error::NonNumeric {
        row,
        column: column.to_string(),
        value: text.to_string(),
    })
}

/// Parses a CSV whose first column is the week index and second the outcome.
pub fn parse_csv<T: Scalar, R: Read>(source: R) -> Result<TimeSeriesDataset<T>> {
    parse_csv_detailed(source).map(|p| p.dataset)
}

/// Like [`parse_csv`], also returning any recorded design columns and warnings.
///
/// Rows are numbered from 1 for the first data row after the header.
pub fn parse_csv_detailed<T: Scalar, R: Read>(source: R) -> Result<ParsedCsv<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(Error::EmptyInput);
    }
    if header.len() < 2 {
        return Err(Error::Csv(
            "header must name at least a week column and an outcome column".into(),
        ));
    }

    let mut warnings = Vec::new();
    let mut covariate_cols = Vec::new();
    let mut derived_cols: Vec<(usize, DerivedKind)> = Vec::new();
    for (j, name) in header.iter().enumerate().skip(2) {
        match derived_kind(name) {
            Some(kind) => {
                warnings.push(format!(
                    "column '{name}' is a derived design column; it is not used as a covariate"
                ));
                derived_cols.push((j, kind));
            }
            None => covariate_cols.push(j),
        }
    }

    let mut records = Vec::new();
    let mut recorded: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(csv_error)?;
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() != header.len() {
            return Err(Error::RaggedRow {
                row: row_no,
                expected: header.len(),
                found: row.len(),
            });
        }
        let week = parse_week(&row[0], row_no, &header[0])?;
        let outcome = parse_cell(&row[1], row_no, &header[1])?;
        let covariates = covariate_cols
            .iter()
            .map(|&j| parse_cell(&row[j], row_no, &header[j]))
            .collect::<Result<Vec<T>>>()?;
        for &(j, kind) in &derived_cols {
            let v = parse_cell(&row[j], row_no, &header[j])?;
            recorded[kind as usize].push(v);
        }
        records.push(ObservationRecord {
            week,
            outcome,
            covariates,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut recorded_design = RecordedDesignColumns::default();
    let [level, trend, baseline] = recorded;
    for &(_, kind) in &derived_cols {
        match kind {
            DerivedKind::Level => recorded_design.level_change = Some(level.clone()),
            DerivedKind::Trend => recorded_design.trend_change = Some(trend.clone()),
            DerivedKind::Baseline => recorded_design.baseline_trend = Some(baseline.clone()),
        }
    }

    let names = covariate_cols.iter().map(|&j| header[j].clone()).collect();
    let dataset = TimeSeriesDataset::new(header[1].clone(), names, records)?
        .with_interval_label(header[0].clone());
    Ok(ParsedCsv {
        dataset,
        recorded_design,
        warnings,
    })
}

/// The 114-week operating-room-holds series: outcome `or_holds`, covariates
/// `occupancy` (percent), `discharges` and `admissions` (weekly counts).
pub fn load_case_study<T: Scalar>() -> TimeSeriesDataset<T> {
    parse_csv(CASE_STUDY_CSV.as_bytes()).expect("embedded case study is valid")
}

/// The embedded case-study CSV text, header `week,or_holds,occupancy,discharges,admissions`.
pub fn case_study_csv() -> &'static str {
    CASE_STUDY_CSV
}
