//! Independent oracles and simulation helpers shared by the integration suites.

#![allow(dead_code)]

use itsa::effect::LinearPredictor;
use itsa::Matrix;
use itsa::{fit_arx, fit_ols, likelihood_ratio_test, ArxSpec, DesignMatrix, TimeCoding};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Solves `XᵀX b = Xᵀy` by Gaussian elimination with partial pivoting.
pub fn normal_equations(columns: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = columns.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = columns[i].iter().zip(&columns[j]).map(|(p, q)| p * q).sum();
        }
        a[i][k] = columns[i].iter().zip(y).map(|(p, q)| p * q).sum();
    }
    for c in 0..k {
        let p = (c..k)
            .max_by(|&r, &s| a[r][c].abs().total_cmp(&a[s][c].abs()))
            .unwrap();
        a.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=k {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    (0..k).map(|i| a[i][k] / a[i][i]).collect()
}

/// Random regression problem: intercept plus `k - 1` Gaussian columns.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (Vec<String>, Vec<Vec<f64>>, Vec<f64>) {
    let mut names = vec!["intercept".to_string()];
    let mut cols = vec![vec![1.0; n]];
    for j in 1..k {
        names.push(format!("x{j}"));
        let scale = rng.random_range(0.1..50.0);
        cols.push(normals(rng, n).into_iter().map(|v| v * scale).collect());
    }
    let noise = normals(rng, n);
    let y = (0..n)
        .map(|i| cols.iter().enumerate().map(|(j, c)| c[i] * (j as f64 - 1.5)).sum::<f64>() + noise[i])
        .collect();
    (names, cols, y)
}

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Γ(x) for positive integers and half-integers.
pub fn gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round() as i64;
    assert!(twice > 0 && (2.0 * x - twice as f64).abs() < 1e-12);
    let (mut v, mut z) = if twice % 2 == 0 { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
    while z < x - 1e-9 {
        v *= z;
        z += 1.0;
    }
    v
}

pub fn normal_cdf_quadrature(z: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    0.5 + adaptive_simpson(&pdf, 0.0, z, 1e-12)
}

pub fn student_t_cdf_quadrature(t: f64, df: u32) -> f64 {
    let v = df as f64;
    let c = gamma_half_integer((v + 1.0) / 2.0) / ((v * std::f64::consts::PI).sqrt() * gamma_half_integer(v / 2.0));
    let pdf = move |s: f64| c * (1.0 + s * s / v).powf(-(v + 1.0) / 2.0);
    0.5 + adaptive_simpson(&pdf, 0.0, t, 1e-12)
}

/// Integrates the χ² density after substituting `x = u²`, which removes the
/// singularity at zero for one degree of freedom.
pub fn chi_square_cdf_quadrature(x: f64, df: u32) -> f64 {
    let k = df as f64;
    let c = 1.0 / (2f64.powf(k / 2.0) * gamma_half_integer(k / 2.0));
    let integrand = move |u: f64| 2.0 * c * u.powf(k - 1.0) * (-u * u / 2.0).exp();
    adaptive_simpson(&integrand, 0.0, x.sqrt(), 1e-13)
}

pub fn ks_uniform(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max)
}

pub fn simulate_arx1(rng: &mut ChaCha8Rng, n: usize, phi: f64, beta: &[f64], sigma: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut cols = vec![vec![1.0; n]];
    for _ in 1..beta.len() {
        cols.push(normals(rng, n));
    }
    let eps = Normal::new(0.0, sigma).unwrap();
    let mean: Vec<f64> = (0..n).map(|i| cols.iter().zip(beta).map(|(c, b)| c[i] * b).sum()).collect();
    let mut u = eps.sample(rng) / (1.0 - phi * phi).sqrt();
    let mut y = Vec::with_capacity(n);
    for m in &mean {
        y.push(m + u);
        u = phi * u + eps.sample(rng);
    }
    (cols, y)
}

pub fn design_of(names: &[&str], cols: Vec<Vec<f64>>, y: Vec<f64>) -> DesignMatrix {
    DesignMatrix::from_columns(names.iter().map(|s| s.to_string()).collect(), cols, y).unwrap()
}

/// Fixed-coefficient model used to check the delta method in isolation.
pub struct KnownModel {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub covariance: Matrix,
}

impl LinearPredictor<f64> for KnownModel {
    fn column_names(&self) -> &[String] {
        &self.names
    }

    fn coefficients(&self) -> &[f64] {
        &self.beta
    }

    fn coefficient_covariance(&self) -> Matrix {
        self.covariance.clone()
    }

    fn method(&self) -> &'static str {
        "known"
    }
}

pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

// Aggregated checks reported by the acceptance target. Each returns the worst
// discrepancy observed.

pub fn ols_oracle_max_error(instances: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(12..80);
        let k = rng.random_range(1..7);
        let (names, cols, y) = random_design(&mut rng, n, k);
        let oracle = normal_equations(&cols, &y);
        let fit = fit_ols(&DesignMatrix::from_columns(names, cols, y).unwrap()).unwrap();
        for (b, o) in fit.coefficients.iter().zip(&oracle) {
            worst = worst.max((b - o).abs() / o.abs().max(1.0));
        }
    }
    worst
}

pub fn arx0_vs_ols_max_error(design: &DesignMatrix) -> f64 {
    let ols = fit_ols(design).unwrap();
    let names: Vec<&str> = design.names().iter().map(String::as_str).collect();
    let arx = fit_arx(design, &ArxSpec::new(0, &names)).unwrap();
    let mut worst = (arx.deviance - itsa::gaussian_deviance(&ols).unwrap()).abs();
    for (a, b) in arx.beta.iter().zip(&ols.coefficients) {
        worst = worst.max((a - b).abs() / b.abs().max(1.0));
    }
    worst
}

pub fn recoding_max_error(design: &DesignMatrix) -> f64 {
    let base = fit_ols(design).unwrap().fitted;
    let mut worst: f64 = 0.0;
    for coding in [TimeCoding::Intervention, TimeCoding::Offset(-40), TimeCoding::Offset(17)] {
        let fit = fit_ols(&design.recode_time(coding).unwrap()).unwrap();
        for (a, b) in fit.fitted.iter().zip(&base) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

pub fn cdf_quadrature_max_error() -> f64 {
    use itsa::distributions::{chi_square_cdf, normal_cdf, student_t_cdf};
    let mut worst: f64 = 0.0;
    for z in [-4.0, -2.5, -1.959964, -0.5, 0.0, 0.3, 1.0, 1.959964, 3.2] {
        worst = worst.max((normal_cdf(z).value() - normal_cdf_quadrature(z)).abs());
    }
    for df in [1u32, 2, 3, 5, 10, 30, 107] {
        for t in [-3.0, -1.2, 0.0, 0.7, 2.0, 4.5] {
            worst = worst.max((student_t_cdf(t, df as f64).unwrap().value() - student_t_cdf_quadrature(t, df)).abs());
        }
    }
    for df in 1u32..=8 {
        for x in [0.05, 0.5, 1.0, 3.84, 7.0, 12.16, 20.0] {
            worst = worst.max((chi_square_cdf(x, df).unwrap().value() - chi_square_cdf_quadrature(x, df)).abs());
        }
    }
    worst
}

/// Largest |estimate − truth| / SE across all parameters.
pub fn arx1_recovery_z(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let beta = [2.0, 1.5];
    let phi = 0.6;
    let (cols, y) = simulate_arx1(&mut rng, 500, phi, &beta, 1.0);
    let d = design_of(&["intercept", "x"], cols, y);
    let fit = fit_arx(&d, &ArxSpec::new(1, &["intercept", "x"])).unwrap();
    let truth = [beta[0], beta[1], phi];
    let est = fit.beta.iter().chain(&fit.phi);
    est.zip(&truth)
        .zip(&fit.standard_errors)
        .map(|((e, t), s)| (e - t).abs() / s)
        .fold(0.0, f64::max)
}

pub fn lrt_null_p_values(sims: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..sims)
        .map(|_| {
            let (mut cols, y) = simulate_arx1(&mut rng, 120, 0.4, &[5.0], 1.0);
            cols.push(normals(&mut rng, 120));
            let d = design_of(&["intercept", "spurious"], cols, y);
            let base = fit_arx(&d, &ArxSpec::new(1, &["intercept"])).unwrap();
            let full = fit_arx(&d, &ArxSpec::new(1, &["intercept", "spurious"])).unwrap();
            likelihood_ratio_test(&base, &full).unwrap().p_value.value()
        })
        .collect()
}

/// Returns (delta lower, delta upper, Monte Carlo lower, Monte Carlo upper),
/// all in percent.
pub fn delta_vs_monte_carlo(draws: usize, seed: u64) -> (f64, f64, f64, f64) {
    let names = vec!["intercept".to_string(), "intervention".to_string()];
    let d = DesignMatrix::from_columns(names.clone(), vec![vec![1.0; 4], vec![0.0, 0.0, 1.0, 1.0]], vec![30.0, 31.0, 18.0, 17.0])
        .unwrap()
        .with_intervention_columns(&["intervention"])
        .unwrap();
    let beta = vec![30.0, -12.0];
    let (v00, v01, v11): (f64, f64, f64) = (2.25, -0.9, 4.0);
    let model = KnownModel {
        names,
        beta: beta.clone(),
        covariance: Matrix::from_rows(&[vec![v00, v01], vec![v01, v11]]),
    };
    let e = itsa::effect_at(&model, &d, 3, 0.95).unwrap();

    let l00 = v00.sqrt();
    let l10 = v01 / l00;
    let l11 = (v11 - l10 * l10).sqrt();
    let mut rng = rng(seed);
    let mut rel: Vec<f64> = (0..draws)
        .map(|_| {
            let (z0, z1): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            let b0 = beta[0] + l00 * z0;
            let b1 = beta[1] + l10 * z0 + l11 * z1;
            100.0 * b1 / b0
        })
        .collect();
    rel.sort_by(f64::total_cmp);
    (
        e.ci_lower.unwrap(),
        e.ci_upper.unwrap(),
        percentile(&rel, 0.025),
        percentile(&rel, 0.975),
    )
}
