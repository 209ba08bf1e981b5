//! Least-squares fitting of segmented-regression designs.
//!
//! Coefficients come from a Householder QR of the design, so `XᵀX` is never
//! formed; `(XᵀX)⁻¹` is recovered as `R⁻¹R⁻ᵀ` for the standard errors.

use indexmap::IndexMap;
use serde::Serialize;

use crate::design::DesignMatrix;
use crate::distributions::{student_t_two_sided_p, TailProbability};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};
use crate::scalar::Scalar;

/// Relative tolerance on `|R_jj| / ‖x_j‖` below which a column counts as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit<T> {
    pub column_names: Vec<String>,
    pub coefficients: Vec<T>,
    pub standard_errors: Vec<T>,
    pub t_stats: Vec<T>,
    pub p_values: Vec<TailProbability<T>>,
    pub fitted: Vec<T>,
    pub residuals: Vec<T>,
    pub rss: T,
    /// `RSS / (n − k)`.
    pub sigma2_unbiased: T,
    /// `RSS / n`.
    pub sigma2_mle: T,
    /// Gaussian log-likelihood at the MLE variance; `-inf` for a perfect fit.
    pub log_likelihood: T,
    /// `−2 × log_likelihood`.
    pub deviance: T,
    pub n: usize,
    pub k: usize,
    /// `(XᵀX)⁻¹`.
    pub unscaled_covariance: Matrix<T>,
}

impl<T: Scalar> OlsFit<T> {
    pub fn df_residual(&self) -> usize {
        self.n - self.k
    }

    /// Estimated coefficient covariance `σ̂² (XᵀX)⁻¹`.
    pub fn covariance(&self) -> Matrix<T> {
        self.unscaled_covariance.scale(self.sigma2_unbiased)
    }

    pub fn coefficient(&self, name: &str) -> Option<T> {
        self.index_of(name).map(|j| self.coefficients[j])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn report(&self) -> OlsReport {
        let coefficients = self
            .column_names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                (
                    name.clone(),
                    CoefficientRow {
                        estimate: self.coefficients[j].to_f64_lossy(),
                        se: self.standard_errors[j].to_f64_lossy(),
                        t: self.t_stats[j].to_f64_lossy(),
                        p: self.p_values[j].value().to_f64_lossy(),
                    },
                )
            })
            .collect();
        OlsReport {
            coefficients,
            rss: self.rss.to_f64_lossy(),
            deviance: self.deviance.is_finite().then(|| self.deviance.to_f64_lossy()),
            n: self.n,
            k: self.k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

/// Serializable coefficient table: `{coefficients: {name: {estimate, se, t, p}}, rss, deviance, n, k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsReport {
    pub coefficients: IndexMap<String, CoefficientRow>,
    pub rss: f64,
    pub deviance: Option<f64>,
    pub n: usize,
    pub k: usize,
}

/// Gaussian log-likelihood at the plug-in variance `rss / n`.
pub(crate) fn gaussian_log_likelihood<T: Scalar>(rss: T, n: usize) -> T {
    let n_t = T::from_usize_lossy(n);
    if rss <= T::zero() {
        return T::neg_infinity();
    }
    let sigma2 = rss / n_t;
    -(n_t / T::lit(2.0)) * ((T::lit(2.0) * T::PI() * sigma2).ln() + T::one())
}

pub fn fit_ols<T: Scalar>(design: &DesignMatrix<T>) -> Result<OlsFit<T>> {
    let (n, k) = (design.rows(), design.cols());
    if n <= k {
        return Err(Error::InsufficientObservations { n, k });
    }
    let qr = Qr::new(design.x(), T::lit(RANK_TOLERANCE))
        .map_err(|j| Error::RankDeficient(design.names()[j].clone()))?;
    let y = design.outcome();
    let coefficients = qr.solve(y);
    let fitted = design.x().mul_vec(&coefficients);
    let residuals: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let rss: T = residuals.iter().map(|&e| e * e).sum();

    let df = T::from_usize_lossy(n - k);
    let sigma2_unbiased = rss / df;
    let sigma2_mle = rss / T::from_usize_lossy(n);
    let unscaled_covariance = qr.xtx_inverse();
    let standard_errors: Vec<T> = unscaled_covariance
        .diagonal()
        .into_iter()
        .map(|v| (v * sigma2_unbiased).sqrt())
        .collect();
    let t_stats: Vec<T> = coefficients
        .iter()
        .zip(&standard_errors)
        .map(|(&b, &se)| b / se)
        .collect();
    let p_values = t_stats
        .iter()
        .map(|&t| {
            if t.is_nan() {
                Ok(TailProbability::new(T::one()))
            } else {
                student_t_two_sided_p(t, df)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let log_likelihood = gaussian_log_likelihood(rss, n);

    Ok(OlsFit {
        column_names: design.names().to_vec(),
        coefficients,
        standard_errors,
        t_stats,
        p_values,
        fitted,
        residuals,
        rss,
        sigma2_unbiased,
        sigma2_mle,
        log_likelihood,
        deviance: -T::lit(2.0) * log_likelihood,
        n,
        k,
        unscaled_covariance,
    })
}

/// Residual sums of squares at or below this are rounding noise on an exact fit.
pub(crate) fn negligible_rss<T: Scalar>(total_sum_of_squares: T) -> T {
    let tiny = T::lit(64.0) * T::epsilon();
    tiny * tiny * total_sum_of_squares
}

/// `n ln(2π σ̂²) + n` with `σ̂² = RSS / n`.
pub fn gaussian_deviance<T: Scalar>(fit: &OlsFit<T>) -> Result<T> {
    let total: T = fit.fitted.iter().zip(&fit.residuals).map(|(&f, &e)| (f + e) * (f + e)).sum();
    if fit.rss <= negligible_rss(total) {
        return Err(Error::ZeroResidualVariance);
    }
    Ok(fit.deviance)
}

pub(crate) fn check_columns(expected: &[String], design_names: &[String]) -> Result<()> {
    if expected == design_names {
        Ok(())
    } else {
        Err(Error::ColumnMismatch {
            expected: expected.to_vec(),
            found: design_names.to_vec(),
        })
    }
}

/// Row-wise `X β̂`.
pub fn predict<T: Scalar>(fit: &OlsFit<T>, design: &DesignMatrix<T>) -> Result<Vec<T>> {
    check_columns(&fit.column_names, design.names())?;
    Ok(design.x().mul_vec(&fit.coefficients))
}
