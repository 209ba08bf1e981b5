//! Segmented-regression design matrices.
//!
//! Columns are always ordered `intercept, time, intervention, time_after`,
//! then the requested confounders in caller order.

use std::io::Write;

use crate::dataset::{RecordedDesignColumns, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const INTERCEPT: &str = "intercept";
pub const TIME: &str = "time";
pub const INTERVENTION: &str = "intervention";
pub const TIME_AFTER: &str = "time_after";

/// Where the intervention starts, optionally delayed by a lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterventionSpec {
    /// First week with the intervention indicator set.
    pub changepoint_week: u32,
    pub lag_weeks: u32,
}

impl InterventionSpec {
    pub fn new(changepoint_week: u32) -> Self {
        Self {
            changepoint_week,
            lag_weeks: 0,
        }
    }

    pub fn with_lag(mut self, lag_weeks: u32) -> Self {
        self.lag_weeks = lag_weeks;
        self
    }

    pub fn effective_week(&self) -> u32 {
        self.changepoint_week + self.lag_weeks
    }
}

/// Origin of the time column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeCoding {
    /// `time = week`.
    #[default]
    SeriesStart,
    /// The effective changepoint is week 1: `time = week − changepoint + 1`.
    Intervention,
    /// `time = week − k`.
    Offset(i64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    names: Vec<String>,
    x: Matrix<T>,
    outcome: Vec<T>,
    outcome_name: String,
    weeks: Vec<u32>,
    intervention_columns: Vec<String>,
    changepoint: Option<u32>,
    coding: TimeCoding,
}

impl<T: Scalar> DesignMatrix<T> {
    /// Builds a design from arbitrary named columns. Weeks default to `1..=n`.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<T>>, outcome: Vec<T>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if columns.iter().any(|c| c.len() != outcome.len()) {
            return Err(Error::InvalidArgument(
                "every column must have one value per outcome".into(),
            ));
        }
        let n = outcome.len();
        Ok(Self {
            names,
            x: Matrix::from_columns(&columns),
            outcome,
            outcome_name: "y".into(),
            weeks: (1..=n as u32).collect(),
            intervention_columns: Vec::new(),
            changepoint: None,
            coding: TimeCoding::SeriesStart,
        })
    }

    /// Declares which columns are zeroed to form the counterfactual.
    pub fn with_intervention_columns(mut self, names: &[&str]) -> Result<Self> {
        for name in names {
            self.column_index(name)?;
        }
        self.intervention_columns = names.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    pub fn with_weeks(mut self, weeks: Vec<u32>) -> Result<Self> {
        if weeks.len() != self.rows() {
            return Err(Error::InvalidArgument("one week per row required".into()));
        }
        self.weeks = weeks;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn cols(&self) -> usize {
        self.x.cols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn outcome(&self) -> &[T] {
        &self.outcome
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn weeks(&self) -> &[u32] {
        &self.weeks
    }

    pub fn coding(&self) -> TimeCoding {
        self.coding
    }

    /// Effective changepoint week, when built from an [`InterventionSpec`].
    pub fn changepoint(&self) -> Option<u32> {
        self.changepoint
    }

    pub fn intervention_columns(&self) -> &[String] {
        &self.intervention_columns
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<T>> {
        Ok(self.x.column(self.column_index(name)?))
    }

    pub fn row_of_week(&self, week: u32) -> Option<usize> {
        self.weeks.iter().position(|&w| w == week)
    }

    /// Keeps only the named columns, in the order given.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<Vec<_>>>()?;
        let columns: Vec<Vec<T>> = idx.iter().map(|&j| self.x.column(j)).collect();
        Ok(Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            x: Matrix::from_columns(&columns),
            outcome: self.outcome.clone(),
            outcome_name: self.outcome_name.clone(),
            weeks: self.weeks.clone(),
            intervention_columns: self
                .intervention_columns
                .iter()
                .filter(|c| names.contains(&c.as_str()))
                .cloned()
                .collect(),
            changepoint: self.changepoint,
            coding: self.coding,
        })
    }

    /// Copy with every intervention column set to zero.
    pub fn counterfactual(&self) -> Result<Self> {
        if self.intervention_columns.is_empty() {
            return Err(Error::MissingInterventionColumns);
        }
        let mut cf = self.clone();
        let zeros = vec![T::zero(); self.rows()];
        for name in &self.intervention_columns {
            let j = self.column_index(name)?;
            cf.x.set_column(j, &zeros);
        }
        Ok(cf)
    }

    /// Re-expresses the time column under another origin.
    pub fn recode_time(&self, coding: TimeCoding) -> Result<Self> {
        let j = self.column_index(TIME)?;
        let origin = time_origin(coding, self.changepoint)?;
        let time: Vec<T> = self
            .weeks
            .iter()
            .map(|&w| T::lit(f64::from(w) - origin as f64))
            .collect();
        let mut out = self.clone();
        out.x.set_column(j, &time);
        out.coding = coding;
        Ok(out)
    }

    /// Compares recorded level/trend/baseline columns with the derived ones;
    /// returns one warning per mismatching column.
    pub fn check_recorded(&self, recorded: &RecordedDesignColumns<T>) -> Vec<String> {
        let mut warnings = Vec::new();
        let mut compare = |label: &str, values: &Option<Vec<T>>, derived: Option<Vec<T>>| {
            let (Some(values), Some(derived)) = (values, derived) else {
                return;
            };
            if let Some(i) = values.iter().zip(&derived).position(|(a, b)| a != b) {
                warnings.push(format!(
                    "recorded column '{label}' differs from the derived coding at week {} \
                     (recorded {}, derived {})",
                    self.weeks[i], values[i], derived[i]
                ));
            } else if values.len() != derived.len() {
                warnings.push(format!("recorded column '{label}' has the wrong length"));
            }
        };
        compare("level change", &recorded.level_change, self.column(INTERVENTION).ok());
        compare("trend change", &recorded.trend_change, self.column(TIME_AFTER).ok());
        let baseline = self
            .weeks
            .iter()
            .map(|&w| T::lit(f64::from(w)))
            .collect::<Vec<_>>();
        compare("baseline trend", &recorded.baseline_trend, Some(baseline));
        warnings
    }

    /// Writes `week,<design columns…>,<outcome>` as CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["week".to_string()];
        header.extend(self.names.iter().cloned());
        header.push(self.outcome_name.clone());
        w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
        for i in 0..self.rows() {
            let mut row = vec![self.weeks[i].to_string()];
            row.extend(self.x.row(i).iter().map(ToString::to_string));
            row.push(self.outcome[i].to_string());
            w.write_record(&row).map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

fn time_origin(coding: TimeCoding, changepoint: Option<u32>) -> Result<i64> {
    Ok(match coding {
        TimeCoding::SeriesStart => 0,
        TimeCoding::Offset(k) => k,
        TimeCoding::Intervention => {
            let cp = changepoint.ok_or(Error::MissingInterventionColumns)?;
            i64::from(cp) - 1
        }
    })
}

/// Builds the segmented-regression design for `dataset`.
pub fn build_design<T: Scalar>(
    dataset: &TimeSeriesDataset<T>,
    spec: InterventionSpec,
    confounders: &[&str],
    coding: TimeCoding,
) -> Result<DesignMatrix<T>> {
    let first = dataset.first_week();
    let effective = spec.effective_week();
    if effective < first {
        return Err(Error::ChangepointBeforeStart { effective, first });
    }
    let confounder_columns = confounders
        .iter()
        .map(|name| dataset.covariate(name))
        .collect::<Result<Vec<_>>>()?;

    let weeks = dataset.weeks();
    let n = weeks.len();
    let mut columns = Vec::with_capacity(4 + confounders.len());
    columns.push(vec![T::one(); n]);
    columns.push(weeks.iter().map(|&w| T::lit(f64::from(w))).collect());
    columns.push(
        weeks
            .iter()
            .map(|&w| if w >= effective { T::one() } else { T::zero() })
            .collect(),
    );
    columns.push(
        weeks
            .iter()
            .map(|&w| {
                if w >= effective {
                    T::lit(f64::from(w - effective + 1))
                } else {
                    T::zero()
                }
            })
            .collect(),
    );
    columns.extend(confounder_columns);

    let mut names: Vec<String> = [INTERCEPT, TIME, INTERVENTION, TIME_AFTER]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(
        confounders
            .iter()
            .map(|c| dataset.covariate_names()[dataset.covariate_index(c).unwrap()].clone()),
    );

    let design = DesignMatrix {
        names,
        x: Matrix::from_columns(&columns),
        outcome: dataset.outcome(),
        outcome_name: dataset.outcome_name().to_string(),
        weeks,
        intervention_columns: vec![INTERVENTION.into(), TIME_AFTER.into()],
        changepoint: Some(effective),
        coding: TimeCoding::SeriesStart,
    };
    if coding == TimeCoding::SeriesStart {
        Ok(design)
    } else {
        design.recode_time(coding)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_case_study, parse_csv_detailed};

    fn case_design(cp: u32) -> DesignMatrix<f64> {
        build_design(
            &load_case_study(),
            InterventionSpec::new(cp),
            &["occupancy", "discharges", "admissions"],
            TimeCoding::SeriesStart,
        )
        .unwrap()
    }

    #[test]
    fn changepoint_coding_matches_table() {
        let d = case_design(53);
        assert_eq!(
            d.names(),
            ["intercept", "time", "intervention", "time_after", "occupancy", "discharges", "admissions"]
        );
        let r52 = d.row_of_week(52).unwrap();
        let r53 = d.row_of_week(53).unwrap();
        let r114 = d.row_of_week(114).unwrap();
        assert_eq!(&d.x().row(r52)[..4], &[1.0, 52.0, 0.0, 0.0]);
        assert_eq!(&d.x().row(r53)[..4], &[1.0, 53.0, 1.0, 1.0]);
        assert_eq!(&d.x().row(r114)[..4], &[1.0, 114.0, 1.0, 62.0]);
    }

    #[test]
    fn changepoint_after_series_gives_zero_indicator() {
        let d = case_design(115);
        assert!(d.column(INTERVENTION).unwrap().iter().all(|&v| v == 0.0));
        assert!(d.column(TIME_AFTER).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lag_shifts_changepoint() {
        let d = build_design(
            &load_case_study::<f64>(),
            InterventionSpec::new(53).with_lag(1),
            &[],
            TimeCoding::SeriesStart,
        )
        .unwrap();
        assert_eq!(d.changepoint(), Some(54));
        let r53 = d.row_of_week(53).unwrap();
        let r54 = d.row_of_week(54).unwrap();
        assert_eq!(&d.x().row(r53)[2..4], &[0.0, 0.0]);
        assert_eq!(&d.x().row(r54)[2..4], &[1.0, 1.0]);
    }

    #[test]
    fn errors() {
        let ds = load_case_study::<f64>();
        assert_eq!(
            build_design(&ds, InterventionSpec::new(53), &["beds"], TimeCoding::SeriesStart)
                .unwrap_err(),
            Error::UnknownColumn("beds".into())
        );
        assert!(matches!(
            build_design(&ds, InterventionSpec::new(0), &[], TimeCoding::SeriesStart),
            Err(Error::ChangepointBeforeStart { .. })
        ));
    }

    #[test]
    fn recoding() {
        let d = case_design(53);
        assert_eq!(d.recode_time(TimeCoding::SeriesStart).unwrap(), d);
        let at = d.recode_time(TimeCoding::Intervention).unwrap();
        assert_eq!(at.x()[(d.row_of_week(53).unwrap(), 1)], 1.0);
        assert_eq!(at.x()[(0, 1)], -51.0);
        assert_eq!(at.column(INTERVENTION).unwrap(), d.column(INTERVENTION).unwrap());
        assert_eq!(at.column(TIME_AFTER).unwrap(), d.column(TIME_AFTER).unwrap());
        assert_eq!(at.outcome(), d.outcome());
        let off = d.recode_time(TimeCoding::Offset(10)).unwrap();
        assert_eq!(off.x()[(0, 1)], -9.0);
        // Recoding back restores the original exactly.
        assert_eq!(off.recode_time(TimeCoding::SeriesStart).unwrap(), d);
    }

    #[test]
    fn recorded_columns_cross_check() {
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/fixtures/or_holds_with_design.csv"
        ))
        .unwrap();
        let parsed = parse_csv_detailed::<f64, _>(text.as_bytes()).unwrap();
        let d = build_design(
            &parsed.dataset,
            InterventionSpec::new(53),
            &[],
            TimeCoding::SeriesStart,
        )
        .unwrap();
        assert!(d.check_recorded(&parsed.recorded_design).is_empty());
        let shifted = build_design(
            &parsed.dataset,
            InterventionSpec::new(53).with_lag(1),
            &[],
            TimeCoding::SeriesStart,
        )
        .unwrap();
        let warnings = shifted.check_recorded(&parsed.recorded_design);
        assert_eq!(warnings.len(), 2);
        assert!(warnings[0].contains("week 53"));
    }

    #[test]
    fn counterfactual_zeroes_intervention_columns() {
        let d = case_design(53);
        let cf = d.counterfactual().unwrap();
        assert!(cf.column(INTERVENTION).unwrap().iter().all(|&v| v == 0.0));
        assert!(cf.column(TIME_AFTER).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(cf.column("occupancy").unwrap(), d.column("occupancy").unwrap());
        let plain = d.select(&["intercept", "occupancy"]).unwrap();
        assert_eq!(plain.counterfactual().unwrap_err(), Error::MissingInterventionColumns);
    }

    #[test]
    fn csv_export_header() {
        let mut buf = Vec::new();
        case_design(53).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "week,intercept,time,intervention,time_after,occupancy,discharges,admissions,or_holds"
        );
        assert_eq!(lines.next().unwrap(), "1,1,1,0,0,65.5,156,212,16");
        assert_eq!(text.lines().count(), 115);
    }
}
