//! Autoregressive models with exogenous regressors, ARX(p):
//!
//! ```text
//! y_t = x_tᵀβ + Σ_{j=1..p} φ_j (y_{t−j} − x_{t−j}ᵀβ) + ε_t
//! ```
//!
//! fitted by conditional Gaussian maximum likelihood (the first `p`
//! observations are held fixed). The error variance is profiled out, so
//! maximizing the likelihood is a nonlinear least-squares problem in
//! `(β, φ)`, solved with a damped Gauss-Newton iteration started from OLS.

use indexmap::IndexMap;
use serde::Serialize;

use crate::design::DesignMatrix;
use crate::diagnostics::ljung_box;
use crate::distributions::{chi_square_quantile, chi_square_sf, TailProbability};
use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix, Qr};
use crate::ols::{gaussian_log_likelihood, RANK_TOLERANCE};
use crate::scalar::Scalar;

pub const METHOD: &str = "conditional-gaussian-ml";
/// Scaled gradient norm at which the optimizer stops.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 500;
/// Relative central-difference step for the observed information.
pub const HESSIAN_STEP: f64 = 1e-5;
/// Largest |partial autocorrelation| before a fit is flagged as near a unit root.
pub const UNIT_ROOT_WARNING: f64 = 0.98;

/// Lag count of the residual whiteness check in [`select_baseline`].
pub const WHITENESS_LAGS: usize = 10;
pub const WHITENESS_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArxSpec {
    pub order: usize,
    /// Design columns entering `x_t`, normally including the intercept.
    pub exogenous: Vec<String>,
    pub label: String,
}

impl ArxSpec {
    pub fn new(order: usize, exogenous: &[&str]) -> Self {
        let exogenous: Vec<String> = exogenous.iter().map(|s| s.to_string()).collect();
        let label = format!("ARX({order}) [{}]", exogenous.join(", "));
        Self {
            order,
            exogenous,
            label,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArxFit<T> {
    pub label: String,
    pub order: usize,
    pub exogenous: Vec<String>,
    pub phi: Vec<T>,
    pub beta: Vec<T>,
    /// Names of `(β, φ)` in estimation order: exogenous names then `phi1..phip`.
    pub param_names: Vec<String>,
    /// Standard errors of `(β, φ)` from the inverse observed information.
    pub standard_errors: Vec<T>,
    /// Covariance of `(β, φ)`.
    pub covariance: Matrix<T>,
    /// Profiled variance: mean squared conditional residual.
    pub sigma2: T,
    pub log_likelihood: T,
    pub deviance: T,
    /// Conditional one-step residuals for rows `start..n`.
    pub residuals: Vec<T>,
    /// First modeled row; `order` unless the fit was aligned to a longer lag.
    pub start: usize,
    pub n_effective: usize,
    /// `p + |exogenous| + 1` (the variance counts).
    pub param_count: usize,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: T,
    pub near_unit_root: bool,
    pub method: &'static str,
}

impl<T: Scalar> ArxFit<T> {
    pub fn beta_of(&self, name: &str) -> Option<T> {
        self.exogenous
            .iter()
            .position(|c| c == name)
            .map(|j| self.beta[j])
    }

    pub fn se_of(&self, name: &str) -> Option<T> {
        self.param_names
            .iter()
            .position(|c| c == name)
            .map(|j| self.standard_errors[j])
    }

    /// Covariance of the exogenous coefficients only.
    pub fn beta_covariance(&self) -> Matrix<T> {
        let m = self.beta.len();
        let mut out = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] = self.covariance[(i, j)];
            }
        }
        out
    }

    pub fn bic(&self) -> T {
        self.deviance
            + T::from_usize_lossy(self.param_count) * T::from_usize_lossy(self.n_effective).ln()
    }

    pub fn aic(&self) -> T {
        self.deviance + T::lit(2.0) * T::from_usize_lossy(self.param_count)
    }

    pub fn report(&self) -> ArxReport {
        let beta = self
            .exogenous
            .iter()
            .zip(&self.beta)
            .map(|(n, b)| (n.clone(), b.to_f64_lossy()))
            .collect();
        let se = self
            .param_names
            .iter()
            .zip(&self.standard_errors)
            .map(|(n, s)| (n.clone(), s.to_f64_lossy()))
            .collect();
        ArxReport {
            label: self.label.clone(),
            order: self.order,
            phi: self.phi.iter().map(|v| v.to_f64_lossy()).collect(),
            beta,
            se,
            sigma2: self.sigma2.to_f64_lossy(),
            deviance: self.deviance.to_f64_lossy(),
            n_effective: self.n_effective,
            param_count: self.param_count,
            converged: self.converged,
            near_unit_root: self.near_unit_root,
            method: self.method,
        }
    }
}

/// `{phi: [...], beta: {...}, se: {...}, deviance}` plus fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArxReport {
    pub label: String,
    pub order: usize,
    pub phi: Vec<f64>,
    pub beta: IndexMap<String, f64>,
    pub se: IndexMap<String, f64>,
    pub sigma2: f64,
    pub deviance: f64,
    pub n_effective: usize,
    pub param_count: usize,
    pub converged: bool,
    pub near_unit_root: bool,
    pub method: &'static str,
}

struct Problem<'a, T> {
    x: &'a Matrix<T>,
    y: &'a [T],
    order: usize,
    start: usize,
}

impl<T: Scalar> Problem<'_, T> {
    fn n_params(&self) -> usize {
        self.x.cols() + self.order
    }

    fn split<'t>(&self, theta: &'t [T]) -> (&'t [T], &'t [T]) {
        theta.split_at(self.x.cols())
    }

    /// One-step predictions for rows `start..n`.
    fn predictions(&self, theta: &[T]) -> Vec<T> {
        let (beta, phi) = self.split(theta);
        let mean = self.x.mul_vec(beta);
        (self.start..self.y.len())
            .map(|t| {
                let ar = phi
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |acc, (j, &f)| acc + f * (self.y[t - j - 1] - mean[t - j - 1]));
                mean[t] + ar
            })
            .collect()
    }

    fn residuals(&self, theta: &[T]) -> Vec<T> {
        self.predictions(theta)
            .into_iter()
            .zip(&self.y[self.start..])
            .map(|(p, &y)| y - p)
            .collect()
    }

    fn rss(&self, theta: &[T]) -> T {
        self.residuals(theta).iter().map(|&e| e * e).sum()
    }

    /// Jacobian of the residual vector with respect to `(β, φ)`.
    fn jacobian(&self, theta: &[T]) -> Matrix<T> {
        let (beta, phi) = self.split(theta);
        let m = self.x.cols();
        let mean = self.x.mul_vec(beta);
        let rows = self.y.len() - self.start;
        let mut jac = Matrix::zeros(rows, m + self.order);
        for (r, t) in (self.start..self.y.len()).enumerate() {
            for c in 0..m {
                let mut v = -self.x[(t, c)];
                for (j, &f) in phi.iter().enumerate() {
                    v = v + f * self.x[(t - j - 1, c)];
                }
                jac[(r, c)] = v;
            }
            for j in 0..self.order {
                jac[(r, m + j)] = -(self.y[t - j - 1] - mean[t - j - 1]);
            }
        }
        jac
    }

    /// Negative profiled log-likelihood.
    fn objective(&self, theta: &[T]) -> T {
        -gaussian_log_likelihood(self.rss(theta), self.y.len() - self.start)
    }
}

/// Largest cosine between the residual vector and a Jacobian column; zero at
/// a stationary point and invariant to parameter and outcome scale.
fn scaled_gradient<T: Scalar>(jac: &Matrix<T>, e: &[T]) -> T {
    let e_norm = norm(e);
    if e_norm == T::zero() {
        return T::zero();
    }
    let g = jac.tr_mul_vec(e);
    (0..jac.cols()).fold(T::zero(), |acc, j| {
        let c_norm = norm(&jac.column(j));
        if c_norm == T::zero() {
            acc
        } else {
            acc.max(g[j].abs() / (c_norm * e_norm))
        }
    })
}

fn initial_guess<T: Scalar>(problem: &Problem<'_, T>, names: &[String]) -> Result<Vec<T>> {
    let qr = Qr::new(problem.x, T::lit(RANK_TOLERANCE))
        .map_err(|j| Error::RankDeficient(names[j].clone()))?;
    let beta = qr.solve(problem.y);
    let mut theta = beta.clone();
    if problem.order == 0 {
        return Ok(theta);
    }
    // Regress the OLS residuals on their own lags.
    let u: Vec<T> = problem
        .y
        .iter()
        .zip(problem.x.mul_vec(&beta))
        .map(|(&y, m)| y - m)
        .collect();
    let lags: Vec<Vec<T>> = (1..=problem.order)
        .map(|j| (problem.start..u.len()).map(|t| u[t - j]).collect())
        .collect();
    let target = &u[problem.start..];
    match Qr::new(&Matrix::from_columns(&lags), T::lit(RANK_TOLERANCE)) {
        Ok(lag_qr) => theta.extend(lag_qr.solve(target)),
        Err(_) => theta.extend(vec![T::zero(); problem.order]),
    }
    Ok(theta)
}

struct Solution<T> {
    theta: Vec<T>,
    iterations: usize,
    gradient: T,
}

fn minimize<T: Scalar>(problem: &Problem<'_, T>, mut theta: Vec<T>) -> Result<Solution<T>> {
    let tol = T::lit(GRADIENT_TOLERANCE);
    let q = problem.n_params();
    let mut lambda = T::lit(1e-3);
    let mut rss = problem.rss(&theta);
    let mut gradient = T::infinity();

    for iteration in 0..MAX_ITERATIONS {
        let e = problem.residuals(&theta);
        let jac = problem.jacobian(&theta);
        gradient = scaled_gradient(&jac, &e);
        if gradient < tol {
            return Ok(Solution {
                theta,
                iterations: iteration,
                gradient,
            });
        }
        let scales: Vec<T> = (0..q)
            .map(|j| norm(&jac.column(j)).max(T::min_positive_value().sqrt()))
            .collect();

        let mut improved = false;
        while lambda < T::lit(1e16) {
            // Solve [J; √λ D] δ ≈ [−e; 0] in the least-squares sense.
            let rows = jac.rows();
            let mut aug = Matrix::zeros(rows + q, q);
            let mut rhs = vec![T::zero(); rows + q];
            for r in 0..rows {
                for c in 0..q {
                    aug[(r, c)] = jac[(r, c)];
                }
                rhs[r] = -e[r];
            }
            let root = lambda.sqrt();
            for c in 0..q {
                aug[(rows + c, c)] = root * scales[c];
            }
            let step = match Qr::new(&aug, T::zero()) {
                Ok(qr) => qr.solve(&rhs),
                Err(_) => {
                    lambda = lambda * T::lit(10.0);
                    continue;
                }
            };
            let candidate: Vec<T> = theta.iter().zip(&step).map(|(&a, &d)| a + d).collect();
            let candidate_rss = problem.rss(&candidate);
            // Near the optimum the RSS decrease drops below rounding; accept
            // such ties when the gradient shrinks.
            let tie = candidate_rss.is_finite()
                && candidate_rss > rss
                && candidate_rss - rss <= T::lit(64.0) * T::epsilon() * rss
                && scaled_gradient(&problem.jacobian(&candidate), &problem.residuals(&candidate)) < gradient;
            if candidate_rss.is_finite() && (candidate_rss <= rss || tie) {
                let unchanged = candidate == theta;
                theta = candidate;
                rss = candidate_rss;
                lambda = (lambda / T::lit(10.0)).max(T::lit(1e-12));
                improved = !unchanged;
                break;
            }
            lambda = lambda * T::lit(10.0);
        }
        if !improved {
            let e = problem.residuals(&theta);
            gradient = scaled_gradient(&problem.jacobian(&theta), &e);
            if gradient < tol {
                return Ok(Solution {
                    theta,
                    iterations: iteration + 1,
                    gradient,
                });
            }
            return Err(Error::NotConverged {
                iterations: iteration + 1,
                gradient: gradient.to_f64_lossy(),
            });
        }
    }
    Err(Error::NotConverged {
        iterations: MAX_ITERATIONS,
        gradient: gradient.to_f64_lossy(),
    })
}

/// Central-difference Hessian of `f` at `theta`.
fn numerical_hessian<T: Scalar>(f: impl Fn(&[T]) -> T, theta: &[T]) -> Matrix<T> {
    let q = theta.len();
    let h: Vec<T> = theta
        .iter()
        .map(|v| T::lit(HESSIAN_STEP) * v.abs().max(T::one()))
        .collect();
    let eval = |di: Option<(usize, T)>, dj: Option<(usize, T)>| {
        let mut p = theta.to_vec();
        for (idx, delta) in [di, dj].into_iter().flatten() {
            p[idx] = p[idx] + delta;
        }
        f(&p)
    };
    let f0 = f(theta);
    let mut hess = Matrix::zeros(q, q);
    for i in 0..q {
        let plus = eval(Some((i, h[i])), None);
        let minus = eval(Some((i, -h[i])), None);
        hess[(i, i)] = (plus - T::lit(2.0) * f0 + minus) / (h[i] * h[i]);
        for j in 0..i {
            let pp = eval(Some((i, h[i])), Some((j, h[j])));
            let pm = eval(Some((i, h[i])), Some((j, -h[j])));
            let mp = eval(Some((i, -h[i])), Some((j, h[j])));
            let mm = eval(Some((i, -h[i])), Some((j, -h[j])));
            let v = (pp - pm - mp + mm) / (T::lit(4.0) * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Step-down (inverse Durbin-Levinson) recursion from AR coefficients to
/// partial autocorrelations; `None` when the recursion hits `|κ| ≥ 1`.
fn partial_autocorrelations<T: Scalar>(phi: &[T]) -> Option<Vec<T>> {
    let mut a = phi.to_vec();
    let mut kappas = Vec::with_capacity(phi.len());
    for k in (1..=phi.len()).rev() {
        let kappa = a[k - 1];
        if kappa.abs() >= T::one() {
            return None;
        }
        kappas.push(kappa);
        let denom = T::one() - kappa * kappa;
        let prev: Vec<T> = (0..k - 1)
            .map(|j| (a[j] + kappa * a[k - 2 - j]) / denom)
            .collect();
        a = prev;
    }
    Some(kappas)
}

fn near_unit_root<T: Scalar>(phi: &[T]) -> bool {
    match partial_autocorrelations(phi) {
        None => true,
        Some(k) => k.iter().any(|v| v.abs() > T::lit(UNIT_ROOT_WARNING)),
    }
}

/// Fits an ARX model conditioning on the first `spec.order` observations.
pub fn fit_arx<T: Scalar>(design: &DesignMatrix<T>, spec: &ArxSpec) -> Result<ArxFit<T>> {
    fit_arx_aligned(design, spec, spec.order)
}

/// Fits an ARX model on rows `start..n` (with `start ≥ spec.order`), so
/// models of different orders can be compared on identical rows.
pub fn fit_arx_aligned<T: Scalar>(
    design: &DesignMatrix<T>,
    spec: &ArxSpec,
    start: usize,
) -> Result<ArxFit<T>> {
    if start < spec.order {
        return Err(Error::InvalidArgument(format!(
            "start row {start} precedes the autoregressive order {}",
            spec.order
        )));
    }
    let names: Vec<&str> = spec.exogenous.iter().map(String::as_str).collect();
    let sub = design.select(&names)?;
    let n = sub.rows();
    let m = sub.cols();
    if n <= 2 * (spec.order + m) || n <= start + spec.order + m {
        return Err(Error::InsufficientObservations {
            n,
            k: spec.order + m,
        });
    }

    let problem = Problem {
        x: sub.x(),
        y: sub.outcome(),
        order: spec.order,
        start,
    };
    let initial = initial_guess(&problem, &spec.exogenous)?;
    let solution = minimize(&problem, initial)?;
    let theta = solution.theta;

    let residuals = problem.residuals(&theta);
    let n_effective = residuals.len();
    let rss: T = residuals.iter().map(|&e| e * e).sum();
    let sigma2 = rss / T::from_usize_lossy(n_effective);
    let log_likelihood = gaussian_log_likelihood(rss, n_effective);

    let q = theta.len();
    let covariance = if rss > T::zero() {
        numerical_hessian(|p| problem.objective(p), &theta)
            .inverse()
            .unwrap_or_else(|| nan_matrix(q))
    } else {
        nan_matrix(q)
    };
    let standard_errors = covariance
        .diagonal()
        .into_iter()
        .map(|v| if v >= T::zero() { v.sqrt() } else { T::nan() })
        .collect();

    let (beta, phi) = theta.split_at(m);
    let mut param_names = spec.exogenous.clone();
    param_names.extend((1..=spec.order).map(|j| format!("phi{j}")));

    Ok(ArxFit {
        label: spec.label.clone(),
        order: spec.order,
        exogenous: spec.exogenous.clone(),
        phi: phi.to_vec(),
        beta: beta.to_vec(),
        param_names,
        standard_errors,
        covariance,
        sigma2,
        log_likelihood,
        deviance: -T::lit(2.0) * log_likelihood,
        residuals,
        start,
        n_effective,
        param_count: spec.order + m + 1,
        converged: true,
        iterations: solution.iterations,
        gradient_norm: solution.gradient,
        near_unit_root: near_unit_root(phi),
        method: METHOD,
    })
}

fn nan_matrix<T: Scalar>(q: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            m[(i, j)] = T::nan();
        }
    }
    m
}

/// `−2 ×` the conditional log-likelihood at the optimum.
pub fn arx_deviance<T: Scalar>(fit: &ArxFit<T>) -> Result<T> {
    if !fit.converged {
        return Err(Error::NotConverged {
            iterations: fit.iterations,
            gradient: fit.gradient_norm.to_f64_lossy(),
        });
    }
    if !fit.deviance.is_finite() {
        return Err(Error::ZeroResidualVariance);
    }
    Ok(fit.deviance)
}

/// One-step-ahead in-sample predictions; `None` for the first `order` rows.
pub fn predict_arx<T: Scalar>(fit: &ArxFit<T>, design: &DesignMatrix<T>) -> Result<Vec<Option<T>>> {
    let names: Vec<&str> = fit.exogenous.iter().map(String::as_str).collect();
    let sub = design.select(&names).map_err(|_| Error::ColumnMismatch {
        expected: fit.exogenous.clone(),
        found: design.names().to_vec(),
    })?;
    if sub.rows() <= fit.order {
        return Err(Error::InsufficientObservations {
            n: sub.rows(),
            k: fit.order,
        });
    }
    let problem = Problem {
        x: sub.x(),
        y: sub.outcome(),
        order: fit.order,
        start: fit.order,
    };
    let mut theta = fit.beta.clone();
    theta.extend(&fit.phi);
    let mut out = vec![None; fit.order];
    out.extend(problem.predictions(&theta).into_iter().map(Some));
    Ok(out)
}

/// The structural mean `x_tᵀβ` (the ARX regression line without the
/// autoregressive correction).
pub fn structural_mean<T: Scalar>(fit: &ArxFit<T>, design: &DesignMatrix<T>) -> Result<Vec<T>> {
    let names: Vec<&str> = fit.exogenous.iter().map(String::as_str).collect();
    let sub = design.select(&names)?;
    Ok(sub.x().mul_vec(&fit.beta))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrtResult<T> {
    pub lambda: T,
    pub deviance_baseline: T,
    pub deviance_full: T,
    pub df: u32,
    pub alpha: T,
    pub critical_value: T,
    pub p_value: TailProbability<T>,
    pub significant: bool,
}

impl<T: Scalar> LrtResult<T> {
    pub fn report(&self) -> LrtReport {
        LrtReport {
            lambda: self.lambda.to_f64_lossy(),
            df: self.df,
            critical: self.critical_value.to_f64_lossy(),
            p: self.p_value.value().to_f64_lossy(),
            significant: self.significant,
            deviance_baseline: self.deviance_baseline.to_f64_lossy(),
            deviance_full: self.deviance_full.to_f64_lossy(),
        }
    }
}

/// `{lambda, df, critical, p, significant}` plus both deviances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrtReport {
    pub lambda: f64,
    pub df: u32,
    pub critical: f64,
    pub p: f64,
    pub significant: bool,
    pub deviance_baseline: f64,
    pub deviance_full: f64,
}

/// Likelihood-ratio test at the 5% level.
pub fn likelihood_ratio_test<T: Scalar>(baseline: &ArxFit<T>, full: &ArxFit<T>) -> Result<LrtResult<T>> {
    likelihood_ratio_test_at(baseline, full, T::lit(0.05))
}

/// `Λ = D_baseline − D_full` against `χ²_ν`, `ν` the parameter-count difference.
pub fn likelihood_ratio_test_at<T: Scalar>(
    baseline: &ArxFit<T>,
    full: &ArxFit<T>,
    alpha: T,
) -> Result<LrtResult<T>> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(missing) = baseline.exogenous.iter().find(|c| !full.exogenous.contains(c)) {
        return Err(Error::NotNested(format!(
            "baseline column '{missing}' is absent from the full model"
        )));
    }
    if baseline.order > full.order {
        return Err(Error::NotNested(format!(
            "baseline order {} exceeds full order {}",
            baseline.order, full.order
        )));
    }
    if baseline.start != full.start || baseline.n_effective != full.n_effective {
        return Err(Error::NotNested(
            "models were fitted on different rows".into(),
        ));
    }
    let d_b = arx_deviance(baseline)?;
    let d_f = arx_deviance(full)?;
    let lambda = d_b - d_f;
    let scale = d_f.abs().max(T::one());
    if lambda < -T::lit(1e-6) * scale {
        return Err(Error::NegativeLambda(lambda.to_f64_lossy()));
    }
    let df = (full.param_count - baseline.param_count) as u32;
    let (critical_value, p_value) = if df == 0 {
        (T::zero(), TailProbability::new(T::one()))
    } else {
        (
            chi_square_quantile(T::one() - alpha, df)?,
            chi_square_sf(lambda.max(T::zero()), df)?,
        )
    };
    Ok(LrtResult {
        lambda,
        deviance_baseline: d_b,
        deviance_full: d_f,
        df,
        alpha,
        critical_value,
        p_value,
        significant: df > 0 && lambda > critical_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateResult {
    pub order: usize,
    pub exogenous: Vec<String>,
    pub deviance: Option<f64>,
    pub bic: Option<f64>,
    pub ljung_box_p: Option<f64>,
    pub admissible: bool,
    /// Position when the trace is ordered by deviance instead of BIC.
    pub deviance_rank: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSelection<T> {
    /// Every candidate, best BIC first; failed fits last.
    pub trace: Vec<CandidateResult>,
    /// Index into `trace` of the selected candidate.
    pub selected: Option<usize>,
    /// The selected model refitted on its own rows (`order..n`).
    pub fit: Option<ArxFit<T>>,
    /// Rows shared by all candidates during ranking start here.
    pub aligned_start: usize,
}

impl<T: Scalar> BaselineSelection<T> {
    pub fn best(&self) -> Result<&ArxFit<T>> {
        self.fit.as_ref().ok_or(Error::NoAdmissibleModel)
    }
}

/// Fits every `(order, exogenous set)` pair on the rows `max_order..n`,
/// ranks by BIC, and picks the best model whose residuals pass a Ljung-Box
/// whiteness check.
pub fn select_baseline<T: Scalar>(
    design: &DesignMatrix<T>,
    max_order: usize,
    candidate_exogenous: &[Vec<String>],
) -> Result<BaselineSelection<T>> {
    if candidate_exogenous.is_empty() {
        return Err(Error::InvalidArgument("no candidate exogenous sets".into()));
    }
    for set in candidate_exogenous {
        if let Some(c) = set.iter().find(|c| design.intervention_columns().contains(c)) {
            return Err(Error::InvalidArgument(format!(
                "intervention column '{c}' cannot enter a baseline model"
            )));
        }
    }

    let mut trace = Vec::new();
    let mut fitted_specs = Vec::new();
    for order in 0..=max_order {
        for set in candidate_exogenous {
            let names: Vec<&str> = set.iter().map(String::as_str).collect();
            let spec = ArxSpec::new(order, &names);
            let mut entry = CandidateResult {
                order,
                exogenous: set.clone(),
                deviance: None,
                bic: None,
                ljung_box_p: None,
                admissible: false,
                deviance_rank: None,
                error: None,
            };
            match fit_arx_aligned(design, &spec, max_order) {
                Ok(fit) => {
                    entry.deviance = Some(fit.deviance.to_f64_lossy());
                    entry.bic = Some(fit.bic().to_f64_lossy());
                    match ljung_box(&fit.residuals, WHITENESS_LAGS, order) {
                        Ok(lb) => {
                            let p = lb.p_value.value().to_f64_lossy();
                            entry.ljung_box_p = Some(p);
                            entry.admissible = p > WHITENESS_ALPHA;
                        }
                        Err(e) => entry.error = Some(e.to_string()),
                    }
                }
                Err(e) => entry.error = Some(e.to_string()),
            }
            trace.push(entry);
            fitted_specs.push(spec);
        }
    }

    let mut order: Vec<usize> = (0..trace.len()).collect();
    let key = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
    order.sort_by(|&a, &b| key(trace[a].deviance).total_cmp(&key(trace[b].deviance)));
    for (rank, &i) in order.iter().enumerate() {
        if trace[i].deviance.is_some() {
            trace[i].deviance_rank = Some(rank + 1);
        }
    }
    order.sort_by(|&a, &b| key(trace[a].bic).total_cmp(&key(trace[b].bic)));

    let ranked: Vec<CandidateResult> = order.iter().map(|&i| trace[i].clone()).collect();
    let specs: Vec<&ArxSpec> = order.iter().map(|&i| &fitted_specs[i]).collect();
    let selected = ranked.iter().position(|c| c.admissible);
    let fit = match selected {
        Some(i) => Some(fit_arx(design, specs[i])?),
        None => None,
    };
    Ok(BaselineSelection {
        trace: ranked,
        selected,
        fit,
        aligned_start: max_order,
    })
}
