//! Intervention effects: counterfactual projections, absolute and relative
//! change, and delta-method confidence intervals on the relative change.

use std::io::Write;

use serde::Serialize;

use crate::arx::ArxFit;
use crate::design::DesignMatrix;
use crate::distributions::normal_quantile;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::ols::OlsFit;
use crate::scalar::Scalar;

/// Rolling window (weeks) used to decide when the effect has stabilized.
pub const STABILIZATION_WINDOW: usize = 8;
/// Maximum spread, in percentage points, of the rolling mean once stable.
pub const STABILIZATION_SPREAD: f64 = 5.0;

/// A fitted linear predictor with a coefficient covariance.
pub trait LinearPredictor<T: Scalar> {
    fn column_names(&self) -> &[String];
    fn coefficients(&self) -> &[T];
    fn coefficient_covariance(&self) -> Matrix<T>;
    fn method(&self) -> &'static str;
}

impl<T: Scalar> LinearPredictor<T> for OlsFit<T> {
    fn column_names(&self) -> &[String] {
        &self.column_names
    }

    fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    fn coefficient_covariance(&self) -> Matrix<T> {
        self.covariance()
    }

    fn method(&self) -> &'static str {
        "ols-delta-method"
    }
}

/// Uses the regression mean `x_tᵀβ` of the ARX model.
impl<T: Scalar> LinearPredictor<T> for ArxFit<T> {
    fn column_names(&self) -> &[String] {
        &self.exogenous
    }

    fn coefficients(&self) -> &[T] {
        &self.beta
    }

    fn coefficient_covariance(&self) -> Matrix<T> {
        self.beta_covariance()
    }

    fn method(&self) -> &'static str {
        "arx-structural-mean-delta-method"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate<T> {
    pub week: u32,
    pub observed: T,
    pub fitted: T,
    pub counterfactual: T,
    pub absolute_change: T,
    /// Percent change relative to the counterfactual; absent when the
    /// counterfactual is not positive.
    pub relative_change: Option<T>,
    pub ci_level: T,
    pub ci_lower: Option<T>,
    pub ci_upper: Option<T>,
    pub method: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectSummary<T> {
    pub post_weeks: usize,
    pub mean_absolute_change: T,
    pub mean_relative_change: Option<T>,
    /// Post-intervention week (1 = first week) from which the rolling mean
    /// of the relative change stays within the stabilization spread.
    pub weeks_to_stabilization: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectSeries<T> {
    pub estimates: Vec<EffectEstimate<T>>,
    pub summary: EffectSummary<T>,
}

fn aligned<T: Scalar, M: LinearPredictor<T>>(model: &M, design: &DesignMatrix<T>) -> Result<DesignMatrix<T>> {
    let names: Vec<&str> = model.column_names().iter().map(String::as_str).collect();
    let sub = design.select(&names).map_err(|_| Error::ColumnMismatch {
        expected: model.column_names().to_vec(),
        found: design.names().to_vec(),
    })?;
    if sub.intervention_columns().is_empty() {
        return Err(Error::MissingInterventionColumns);
    }
    Ok(sub)
}

/// Predictions with every intervention column set to zero.
pub fn counterfactual_series<T: Scalar, M: LinearPredictor<T>>(
    model: &M,
    design: &DesignMatrix<T>,
) -> Result<Vec<T>> {
    let sub = aligned(model, design)?;
    Ok(sub.counterfactual()?.x().mul_vec(model.coefficients()))
}

struct EffectContext<T> {
    design: DesignMatrix<T>,
    counterfactual: DesignMatrix<T>,
    beta: Vec<T>,
    covariance: Matrix<T>,
    z: T,
    ci_level: T,
    method: &'static str,
}

impl<T: Scalar> EffectContext<T> {
    fn new<M: LinearPredictor<T>>(model: &M, design: &DesignMatrix<T>, ci_level: T) -> Result<Self> {
        if !(ci_level > T::zero() && ci_level < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "confidence level must lie in (0, 1), got {ci_level}"
            )));
        }
        let sub = aligned(model, design)?;
        let counterfactual = sub.counterfactual()?;
        Ok(Self {
            z: normal_quantile((T::one() + ci_level) / T::lit(2.0))?,
            counterfactual,
            design: sub,
            beta: model.coefficients().to_vec(),
            covariance: model.coefficient_covariance(),
            ci_level,
            method: model.method(),
        })
    }

    fn estimate(&self, row: usize) -> EffectEstimate<T> {
        let x = self.design.x().row(row);
        let xc = self.counterfactual.x().row(row);
        let diff: Vec<T> = x.iter().zip(xc).map(|(&a, &b)| a - b).collect();
        let fitted = dot(x, &self.beta);
        let counterfactual = dot(xc, &self.beta);
        let absolute_change = dot(&diff, &self.beta);

        let hundred = T::lit(100.0);
        let (relative_change, ci_lower, ci_upper) = if counterfactual > T::zero() {
            let ratio = absolute_change / counterfactual;
            // ∂(a/c)/∂β = d/c − a·x_cf/c²
            let grad: Vec<T> = diff
                .iter()
                .zip(xc)
                .map(|(&d, &c)| d / counterfactual - absolute_change * c / (counterfactual * counterfactual))
                .collect();
            let se = self.covariance.quadratic_form(&grad).max(T::zero()).sqrt();
            (
                Some(hundred * ratio),
                Some(hundred * (ratio - self.z * se)),
                Some(hundred * (ratio + self.z * se)),
            )
        } else {
            (None, None, None)
        };

        EffectEstimate {
            week: self.design.weeks()[row],
            observed: self.design.outcome()[row],
            fitted,
            counterfactual,
            absolute_change,
            relative_change,
            ci_level: self.ci_level,
            ci_lower,
            ci_upper,
            method: self.method,
        }
    }

    fn post_rows(&self) -> Vec<usize> {
        match self.design.changepoint() {
            Some(cp) => (0..self.design.rows())
                .filter(|&i| self.design.weeks()[i] >= cp)
                .collect(),
            None => {
                let idx: Vec<usize> = self
                    .design
                    .intervention_columns()
                    .iter()
                    .filter_map(|c| self.design.column_index(c).ok())
                    .collect();
                (0..self.design.rows())
                    .filter(|&i| idx.iter().any(|&j| self.design.x()[(i, j)] != T::zero()))
                    .collect()
            }
        }
    }
}

/// Fitted versus counterfactual outcome at one week.
pub fn effect_at<T: Scalar, M: LinearPredictor<T>>(
    model: &M,
    design: &DesignMatrix<T>,
    week: u32,
    ci_level: T,
) -> Result<EffectEstimate<T>> {
    let ctx = EffectContext::new(model, design, ci_level)?;
    let row = design.row_of_week(week).ok_or_else(|| Error::WeekOutOfRange {
        week,
        first: design.weeks().first().copied().unwrap_or(0),
        last: design.weeks().last().copied().unwrap_or(0),
    })?;
    Ok(ctx.estimate(row))
}

/// One estimate per post-intervention week, plus a summary.
pub fn effect_series<T: Scalar, M: LinearPredictor<T>>(
    model: &M,
    design: &DesignMatrix<T>,
    ci_level: T,
) -> Result<EffectSeries<T>> {
    let ctx = EffectContext::new(model, design, ci_level)?;
    let estimates: Vec<EffectEstimate<T>> = ctx.post_rows().into_iter().map(|r| ctx.estimate(r)).collect();
    let n = estimates.len();
    let n_t = T::from_usize_lossy(n.max(1));
    let mean_absolute_change = estimates.iter().map(|e| e.absolute_change).sum::<T>() / n_t;
    let relative: Option<Vec<T>> = estimates.iter().map(|e| e.relative_change).collect();
    let mean_relative_change = relative
        .as_ref()
        .filter(|r| !r.is_empty())
        .map(|r| r.iter().copied().sum::<T>() / T::from_usize_lossy(r.len()));
    let weeks_to_stabilization = relative.as_deref().and_then(stabilization_week);
    Ok(EffectSeries {
        estimates,
        summary: EffectSummary {
            post_weeks: n,
            mean_absolute_change,
            mean_relative_change,
            weeks_to_stabilization,
        },
    })
}

/// First post-intervention week (1-based) at which the trailing rolling mean
/// stays within [`STABILIZATION_SPREAD`] points for the rest of the series.
pub fn stabilization_week<T: Scalar>(relative: &[T]) -> Option<usize> {
    let w = STABILIZATION_WINDOW;
    if relative.len() < w {
        return None;
    }
    let means: Vec<T> = relative
        .windows(w)
        .map(|win| win.iter().copied().sum::<T>() / T::from_usize_lossy(w))
        .collect();
    let spread = T::lit(STABILIZATION_SPREAD);
    // Suffix extremes: scan backwards, remembering the earliest stable start.
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    let mut first_stable = None;
    for (i, &m) in means.iter().enumerate().rev() {
        lo = lo.min(m);
        hi = hi.max(m);
        if hi - lo < spread {
            first_stable = Some(i + w);
        } else {
            break;
        }
    }
    first_stable
}

/// Writes `week,observed,fitted,counterfactual[,arx_fitted]`; returns the
/// number of data rows. Missing ARX predictions become empty fields.
pub fn write_plot_csv<T: Scalar, W: Write>(
    weeks: &[u32],
    observed: &[T],
    fitted: &[T],
    counterfactual: &[T],
    arx_fitted: Option<&[Option<T>]>,
    writer: W,
) -> Result<usize> {
    let n = weeks.len();
    if observed.len() != n || fitted.len() != n || counterfactual.len() != n || arx_fitted.is_some_and(|a| a.len() != n) {
        return Err(Error::InvalidArgument("plot columns have different lengths".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Csv(e.to_string());
    let mut header = vec!["week", "observed", "fitted", "counterfactual"];
    if arx_fitted.is_some() {
        header.push("arx_fitted");
    }
    w.write_record(&header).map_err(io)?;
    for i in 0..n {
        let mut row = vec![
            weeks[i].to_string(),
            observed[i].to_string(),
            fitted[i].to_string(),
            counterfactual[i].to_string(),
        ];
        if let Some(arx) = arx_fitted {
            row.push(arx[i].map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_design, InterventionSpec, TimeCoding, INTERVENTION, TIME_AFTER};
    use crate::ols::fit_ols;

    fn level_shift_design() -> DesignMatrix<f64> {
        let n = 40;
        let level: Vec<f64> = (0..n).map(|t| if t >= 20 { 1.0 } else { 0.0 }).collect();
        let y: Vec<f64> = (0..n)
            .map(|t| 30.0 - 12.0 * level[t] + [0.7, -0.4, 0.1, -0.9, 0.5][t % 5])
            .collect();
        DesignMatrix::from_columns(
            vec!["intercept".into(), INTERVENTION.into()],
            vec![vec![1.0; n], level],
            y,
        )
        .unwrap()
        .with_intervention_columns(&[INTERVENTION])
        .unwrap()
    }

    #[test]
    fn pure_level_shift_identity() {
        let d = level_shift_design();
        let fit = fit_ols(&d).unwrap();
        let series = effect_series(&fit, &d, 0.95).unwrap();
        assert_eq!(series.estimates.len(), 20);
        for e in &series.estimates {
            assert_eq!(e.absolute_change, fit.coefficients[1]);
        }
        let pre = effect_at(&fit, &d, 3, 0.95).unwrap();
        assert_eq!(pre.absolute_change, 0.0);
        assert_eq!(pre.fitted, pre.counterfactual);
        assert_eq!(pre.relative_change, Some(0.0));
        assert_eq!(pre.ci_lower, pre.ci_upper);
        assert_eq!(series.summary.weeks_to_stabilization, Some(8));
    }

    #[test]
    fn zero_coefficients_give_no_effect() {
        let d = level_shift_design();
        let mut fit = fit_ols(&d).unwrap();
        fit.coefficients[1] = 0.0;
        let series = effect_series(&fit, &d, 0.95).unwrap();
        assert!(series.estimates.iter().all(|e| e.absolute_change == 0.0));
        assert!(series.estimates.iter().all(|e| e.relative_change == Some(0.0)));
        let cf = counterfactual_series(&fit, &d).unwrap();
        assert_eq!(cf, fit.fitted.iter().map(|_| fit.coefficients[0]).collect::<Vec<_>>());
    }

    #[test]
    fn covariance_scaling_scales_interval() {
        let d = level_shift_design();
        let fit = fit_ols(&d).unwrap();
        let e1 = effect_at(&fit, &d, 25, 0.95).unwrap();
        let mut shrunk = fit.clone();
        shrunk.sigma2_unbiased *= 0.25;
        let e2 = effect_at(&shrunk, &d, 25, 0.95).unwrap();
        let hw1 = e1.ci_upper.unwrap() - e1.relative_change.unwrap();
        let hw2 = e2.ci_upper.unwrap() - e2.relative_change.unwrap();
        assert!((hw2 / hw1 - 0.5).abs() < 0.01);
    }

    #[test]
    fn non_positive_counterfactual_has_no_relative_change() {
        let n = 12;
        let level: Vec<f64> = (0..n).map(|t| if t >= 6 { 1.0 } else { 0.0 }).collect();
        let y: Vec<f64> = (0..n).map(|t| -2.0 + 5.0 * level[t] + 0.1 * (t % 3) as f64).collect();
        let d = DesignMatrix::from_columns(
            vec!["intercept".into(), INTERVENTION.into()],
            vec![vec![1.0; n], level],
            y,
        )
        .unwrap()
        .with_intervention_columns(&[INTERVENTION])
        .unwrap();
        let fit = fit_ols(&d).unwrap();
        let e = effect_at(&fit, &d, 9, 0.95).unwrap();
        assert!(e.counterfactual < 0.0);
        assert!(e.relative_change.is_none() && e.ci_lower.is_none());
        assert!((e.absolute_change - 5.0).abs() < 0.2);
    }

    #[test]
    fn errors() {
        let d = level_shift_design();
        let fit = fit_ols(&d).unwrap();
        assert!(matches!(effect_at(&fit, &d, 99, 0.95), Err(Error::WeekOutOfRange { .. })));
        assert!(effect_at(&fit, &d, 5, 1.5).is_err());
        let bare = DesignMatrix::from_columns(
            vec!["intercept".into(), INTERVENTION.into()],
            vec![d.column("intercept").unwrap(), d.column(INTERVENTION).unwrap()],
            d.outcome().to_vec(),
        )
        .unwrap();
        assert_eq!(
            counterfactual_series(&fit, &bare).unwrap_err(),
            Error::MissingInterventionColumns
        );
    }

    #[test]
    fn counterfactual_equals_fitted_before_changepoint() {
        let ds = crate::dataset::load_case_study::<f64>();
        let d = build_design(&ds, InterventionSpec::new(53), &["occupancy"], TimeCoding::SeriesStart).unwrap();
        let fit = fit_ols(&d).unwrap();
        let cf = counterfactual_series(&fit, &d).unwrap();
        for i in 0..52 {
            assert_eq!(cf[i], fit.fitted[i]);
        }
        assert!(d.intervention_columns().iter().any(|c| c == TIME_AFTER));
    }

    #[test]
    fn stabilization_rule() {
        let mut r = vec![-10.0_f64, -20.0, -30.0, -40.0];
        r.extend(std::iter::repeat(-60.0).take(20));
        // Rolling means settle once the window is clear of the ramp.
        let week = stabilization_week(&r).unwrap();
        assert!(week > 8 && week <= 12, "{week}");
        assert_eq!(stabilization_week(&r[..5]), None);
    }

    #[test]
    fn plot_csv_layout() {
        let mut buf = Vec::new();
        let rows = write_plot_csv(
            &[1, 2],
            &[3.0_f64, 4.0],
            &[2.5, 4.5],
            &[2.5, 6.0],
            Some(&[None, Some(4.25)]),
            &mut buf,
        )
        .unwrap();
        assert_eq!(rows, 2);
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "week,observed,fitted,counterfactual,arx_fitted\n1,3,2.5,2.5,\n2,4,4.5,6,4.25\n"
        );
        let mut buf = Vec::new();
        write_plot_csv(&[1], &[3.0_f64], &[2.5], &[2.5], None, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "week,observed,fitted,counterfactual\n1,3,2.5,2.5\n");
    }
}
