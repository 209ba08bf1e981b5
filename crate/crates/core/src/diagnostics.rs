//! Serial-correlation diagnostics for regression residuals and raw series.

use std::io::Write;

use serde::Serialize;

use crate::design::DesignMatrix;
use crate::distributions::{chi_square_sf, normal_cdf, normal_quantile, TailProbability};
use crate::error::{Error, Result};
use crate::linalg::{dot, Qr};
use crate::ols::RANK_TOLERANCE;
use crate::scalar::Scalar;

pub const DW_METHOD: &str = "moment-normal-approximation";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DwResult<T> {
    pub statistic: T,
    /// Left-tail probability: small values indicate positive autocorrelation.
    pub p_value: TailProbability<T>,
    pub null_mean: T,
    pub null_variance: T,
    pub method: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcfResult<T> {
    pub lags: Vec<usize>,
    pub correlations: Vec<T>,
    /// Half-width of the white-noise band, `z / √n`.
    pub band: T,
    pub band_level: T,
}

impl<T: Scalar> AcfResult<T> {
    pub fn inside_band(&self) -> usize {
        self.correlations.iter().filter(|r| r.abs() <= self.band).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LjungBoxResult<T> {
    pub statistic: T,
    pub df: u32,
    pub p_value: TailProbability<T>,
}

/// `Σ (e_t − e_{t−1})² / Σ e_t²`.
pub fn durbin_watson<T: Scalar>(residuals: &[T]) -> Result<T> {
    if residuals.len() < 2 {
        return Err(Error::TooShort {
            found: residuals.len(),
            required: 2,
        });
    }
    let ss: T = residuals.iter().map(|&e| e * e).sum();
    if ss == T::zero() {
        return Err(Error::ZeroResiduals);
    }
    let num: T = residuals
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
        .sum();
    Ok(num / ss)
}

/// `A v` for the Durbin-Watson quadratic form matrix `A = DᵀD`.
fn apply_difference_form<T: Scalar>(v: &[T]) -> Vec<T> {
    let n = v.len();
    let two = T::lit(2.0);
    (0..n)
        .map(|i| {
            let mut s = if i == 0 || i == n - 1 { v[i] } else { two * v[i] };
            if i > 0 {
                s = s - v[i - 1];
            }
            if i + 1 < n {
                s = s - v[i + 1];
            }
            s
        })
        .collect()
}

/// Null mean and variance of `d` for the given design, from the traces of
/// `MA` and `(MA)²` with `M` the residual projector.
pub fn dw_null_moments<T: Scalar>(design: &DesignMatrix<T>) -> Result<(T, T)> {
    let (n, k) = (design.rows(), design.cols());
    if n < k + 2 {
        return Err(Error::InsufficientObservations { n, k: k + 2 });
    }
    let qr = Qr::new(design.x(), T::lit(RANK_TOLERANCE))
        .map_err(|j| Error::RankDeficient(design.names()[j].clone()))?;
    let q = qr.thin_q();
    let aq: Vec<Vec<T>> = q.iter().map(|c| apply_difference_form(c)).collect();

    let n_t = T::from_usize_lossy(n);
    let tr_a = T::lit(2.0) * (n_t - T::one());
    let tr_a2 = T::lit(6.0) * n_t - T::lit(8.0);
    let mut tr_qaq = T::zero();
    let mut tr_qa2q = T::zero();
    let mut tr_b2 = T::zero();
    for a in 0..k {
        tr_qaq = tr_qaq + dot(&q[a], &aq[a]);
        tr_qa2q = tr_qa2q + dot(&aq[a], &aq[a]);
        for b in 0..k {
            let bab = dot(&q[a], &aq[b]);
            tr_b2 = tr_b2 + bab * bab;
        }
    }
    let tr_ma = tr_a - tr_qaq;
    let tr_mama = tr_a2 - T::lit(2.0) * tr_qa2q + tr_b2;
    let v = T::from_usize_lossy(n - k);
    let mean = tr_ma / v;
    let variance = T::lit(2.0) * (v * tr_mama - tr_ma * tr_ma) / (v * v * (v + T::lit(2.0)));
    Ok((mean, variance))
}

/// One-sided p-value for positive autocorrelation via a normal approximation
/// to the null distribution of `d` under `design`.
pub fn dw_p_value<T: Scalar>(d: T, design: &DesignMatrix<T>) -> Result<DwResult<T>> {
    let (null_mean, null_variance) = dw_null_moments(design)?;
    if null_variance <= T::zero() {
        return Err(Error::InvalidArgument(
            "Durbin-Watson null variance is not positive".into(),
        ));
    }
    Ok(DwResult {
        statistic: d,
        p_value: normal_cdf((d - null_mean) / null_variance.sqrt()),
        null_mean,
        null_variance,
        method: DW_METHOD,
    })
}

/// Statistic and p-value together.
pub fn durbin_watson_test<T: Scalar>(residuals: &[T], design: &DesignMatrix<T>) -> Result<DwResult<T>> {
    if residuals.len() != design.rows() {
        return Err(Error::InvalidArgument(
            "residuals and design have different lengths".into(),
        ));
    }
    dw_p_value(durbin_watson(residuals)?, design)
}

fn autocorrelations<T: Scalar>(series: &[T], max_lag: usize) -> Result<Vec<T>> {
    let n = series.len();
    let mean = series.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let centered: Vec<T> = series.iter().map(|&v| v - mean).collect();
    let c0 = dot(&centered, &centered);
    if c0 <= T::zero() {
        return Err(Error::ConstantSeries);
    }
    Ok((1..=max_lag)
        .map(|h| dot(&centered[h..], &centered[..n - h]) / c0)
        .collect())
}

/// Sample autocorrelations at lags `1..=max_lag` with the `1/n` convention
/// and a 95% white-noise band.
pub fn acf<T: Scalar>(series: &[T], max_lag: usize) -> Result<AcfResult<T>> {
    if max_lag == 0 || max_lag >= series.len() {
        return Err(Error::InvalidArgument(format!(
            "max_lag must be in 1..{}, got {max_lag}",
            series.len()
        )));
    }
    let correlations = autocorrelations(series, max_lag)?;
    let level = T::lit(0.95);
    let z = normal_quantile(T::lit(0.975))?;
    Ok(AcfResult {
        lags: (1..=max_lag).collect(),
        correlations,
        band: z / T::from_usize_lossy(series.len()).sqrt(),
        band_level: level,
    })
}

/// Ljung-Box portmanteau test with `lags − fitted_params` degrees of freedom.
pub fn ljung_box<T: Scalar>(
    residuals: &[T],
    lags: usize,
    fitted_params: usize,
) -> Result<LjungBoxResult<T>> {
    let n = residuals.len();
    if lags <= fitted_params {
        return Err(Error::InvalidArgument(format!(
            "lags ({lags}) must exceed fitted parameters ({fitted_params})"
        )));
    }
    if 2 * lags >= n {
        return Err(Error::InvalidArgument(format!(
            "lags ({lags}) must be below half the series length ({n})"
        )));
    }
    let r = autocorrelations(residuals, lags)?;
    let n_t = T::from_usize_lossy(n);
    let sum: T = r
        .iter()
        .enumerate()
        .map(|(i, &rh)| rh * rh / T::from_usize_lossy(n - (i + 1)))
        .sum();
    let statistic = n_t * (n_t + T::lit(2.0)) * sum;
    let df = (lags - fitted_params) as u32;
    Ok(LjungBoxResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df)?,
    })
}

/// `week,residual` rows for a residual-versus-time plot.
pub fn write_residual_csv<T: Scalar, W: Write>(weeks: &[u32], residuals: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["week", "residual"])
        .map_err(|e| Error::Csv(e.to_string()))?;
    for (week, e) in weeks.iter().zip(residuals) {
        w.write_record([week.to_string(), e.to_string()])
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DwSummary {
    pub stat: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LjungBoxSummary {
    pub q: f64,
    pub df: u32,
    pub p: f64,
}

/// `{dw: {stat, p}, acf: [...], ljung_box: {q, df, p}}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub dw: DwSummary,
    pub acf: Vec<f64>,
    pub acf_band: f64,
    pub ljung_box: LjungBoxSummary,
}

impl DiagnosticsReport {
    pub fn new<T: Scalar>(dw: &DwResult<T>, acf: &AcfResult<T>, lb: &LjungBoxResult<T>) -> Self {
        Self {
            dw: DwSummary {
                stat: dw.statistic.to_f64_lossy(),
                p: dw.p_value.value().to_f64_lossy(),
            },
            acf: acf.correlations.iter().map(|r| r.to_f64_lossy()).collect(),
            acf_band: acf.band.to_f64_lossy(),
            ljung_box: LjungBoxSummary {
                q: lb.statistic.to_f64_lossy(),
                df: lb.df,
                p: lb.p_value.value().to_f64_lossy(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dw_closed_forms() {
        let alternating: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((durbin_watson(&alternating).unwrap() - 3.6).abs() < 1e-12);
        assert_eq!(durbin_watson(&[2.5_f64; 7]).unwrap(), 0.0);
        assert_eq!(durbin_watson(&[0.0_f64; 5]).unwrap_err(), Error::ZeroResiduals);
        assert!(durbin_watson(&[1.0_f64]).is_err());
    }

    fn small_design(n: usize) -> DesignMatrix<f64> {
        DesignMatrix::from_columns(
            vec!["intercept".into(), "time".into()],
            vec![vec![1.0; n], (0..n).map(|t| t as f64).collect()],
            (0..n).map(|t| ((t * 7) % 5) as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn moments_match_dense_trace_oracle() {
        let d = small_design(12);
        let (mean, var) = dw_null_moments(&d).unwrap();
        // Dense oracle: M = I − X(XᵀX)⁻¹Xᵀ built via normal equations.
        let n = 12;
        let x = d.x();
        let xtx_inv = x.transpose().matmul(x).inverse().unwrap();
        let h = x.matmul(&xtx_inv).matmul(&x.transpose());
        let mut a = crate::linalg::Matrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            if i + 1 < n {
                a[(i, i + 1)] = -1.0;
                a[(i + 1, i)] = -1.0;
            }
        }
        let mut m = crate::linalg::Matrix::<f64>::identity(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] -= h[(i, j)];
            }
        }
        let ma = m.matmul(&a);
        let tr1: f64 = ma.diagonal().iter().sum();
        let tr2: f64 = ma.matmul(&ma).diagonal().iter().sum();
        let v = (n - 2) as f64;
        assert!((mean - tr1 / v).abs() < 1e-10);
        let var_oracle = 2.0 * (v * tr2 - tr1 * tr1) / (v * v * (v + 2.0));
        assert!((var - var_oracle).abs() < 1e-10);
    }

    #[test]
    fn centered_statistic_has_half_probability() {
        let d = small_design(30);
        let (mean, _) = dw_null_moments(&d).unwrap();
        let r = dw_p_value(mean, &d).unwrap();
        assert!((r.p_value.value() - 0.5).abs() < 1e-12);
        assert_eq!(r.method, DW_METHOD);
    }

    #[test]
    fn dw_design_too_small() {
        let d = small_design(3);
        assert!(matches!(dw_p_value(2.0, &d), Err(Error::InsufficientObservations { .. })));
    }

    #[test]
    fn acf_contract() {
        let s = [1.0_f64, 3.0, 2.0, 5.0, 4.0, 6.0, 5.5, 7.0];
        let r = acf(&s, 3).unwrap();
        assert_eq!(r.lags, vec![1, 2, 3]);
        assert!(r.correlations.iter().all(|c| c.abs() <= 1.0));
        assert!((r.band - 1.959_963_984_540_054 / 8.0_f64.sqrt()).abs() < 1e-12);
        assert_eq!(acf(&[3.0_f64; 6], 2).unwrap_err(), Error::ConstantSeries);
        assert!(acf(&s, 8).is_err());
        assert!(acf(&s, 0).is_err());
    }

    #[test]
    fn ljung_box_zero_autocorrelation() {
        let mut s = vec![0.0_f64; 10];
        s[0] = 1.0;
        s[9] = -1.0;
        let r = ljung_box(&s, 4, 0).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value.value(), 1.0);
        assert_eq!(r.df, 4);
    }

    #[test]
    fn ljung_box_preconditions() {
        let s: Vec<f64> = (0..20).map(|i| ((i * 13) % 7) as f64).collect();
        assert!(ljung_box(&s, 2, 2).is_err());
        assert!(ljung_box(&s, 10, 0).is_err());
        let r = ljung_box(&s, 5, 2).unwrap();
        assert_eq!(r.df, 3);
    }

    #[test]
    fn residual_csv() {
        let mut buf = Vec::new();
        write_residual_csv(&[1, 2], &[0.5_f64, -1.25], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "week,residual\n1,0.5\n2,-1.25\n");
    }
}
