//! Normal, Student-t and chi-square distribution functions.
//!
//! Everything is built on two special functions, the regularized incomplete
//! gamma and beta functions, evaluated by series expansion or modified Lentz
//! continued fractions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_ITERATIONS: usize = 20_000;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct TailProbability<T>(T);

impl<T: Scalar> TailProbability<T> {
    /// Clamps tiny excursions outside `[0, 1]` caused by rounding.
    pub fn new(value: T) -> Self {
        Self(value.max(T::zero()).min(T::one()))
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn complement(self) -> Self {
        Self(T::one() - self.0)
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_usize_lossy(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::lit(2.0) * T::PI()).ln() + (x + half) * t.ln() - t + acc.ln()
}

fn tiny<T: Scalar>() -> T {
    T::min_positive_value() / T::epsilon()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_gamma_p<T: Scalar>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x < a + T::one() {
        gamma_series(a, x)
    } else {
        T::one() - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub fn regularized_gamma_q<T: Scalar>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::one();
    }
    if x < a + T::one() {
        T::one() - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_prefactor<T: Scalar>(a: T, x: T) -> T {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_series<T: Scalar>(a: T, x: T) -> T {
    let mut ap = a;
    let mut term = T::one() / a;
    let mut sum = term;
    for _ in 0..MAX_ITERATIONS {
        ap = ap + T::one();
        term = term * x / ap;
        sum = sum + term;
        if term.abs() < sum.abs() * T::epsilon() {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

fn gamma_continued_fraction<T: Scalar>(a: T, x: T) -> T {
    let tiny = tiny::<T>();
    let two = T::lit(2.0);
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..MAX_ITERATIONS {
        let i = T::from_usize_lossy(i);
        let an = -i * (i - a);
        b = b + two;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = d * c;
        h = h * delta;
        if (delta - T::one()).abs() < T::epsilon() {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_beta<T: Scalar>(a: T, b: T, x: T) -> T {
    regularized_beta_pair(a, b, x, T::one() - x)
}

/// `I_x(a, b)` with the complement `y = 1 − x` supplied separately so that
/// arguments near one keep full precision.
fn regularized_beta_pair<T: Scalar>(a: T, b: T, x: T, y: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if y <= T::zero() {
        return T::one();
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln()).exp();
    if x < (a + T::one()) / (a + b + T::lit(2.0)) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        T::one() - front * beta_continued_fraction(b, a, y) / b
    }
}

fn beta_continued_fraction<T: Scalar>(a: T, b: T, x: T) -> T {
    let tiny = tiny::<T>();
    let one = T::one();
    let two = T::lit(2.0);
    let qab = a + b;
    let qap = a + one;
    let qam = a - one;
    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = one / d;
    let mut h = d;
    for m in 1..MAX_ITERATIONS {
        let m = T::from_usize_lossy(m);
        let m2 = two * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        h = h * d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let delta = d * c;
        h = h * delta;
        if (delta - one).abs() < T::epsilon() {
            break;
        }
    }
    h
}

/// Complementary error function.
pub fn erfc<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    if x >= T::zero() {
        regularized_gamma_q(half, x * x)
    } else {
        T::lit(2.0) - regularized_gamma_q(half, x * x)
    }
}

/// Standard normal CDF `Φ(z)`.
pub fn normal_cdf<T: Scalar>(z: T) -> TailProbability<T> {
    let half = T::lit(0.5);
    let arg = z / T::SQRT_2();
    let value = if z < T::zero() {
        half * regularized_gamma_q(half, arg * arg)
    } else {
        T::one() - half * regularized_gamma_q(half, arg * arg)
    };
    TailProbability::new(value)
}

/// Standard normal upper tail `1 − Φ(z)`, accurate far into the tail.
pub fn normal_sf<T: Scalar>(z: T) -> TailProbability<T> {
    normal_cdf(-z)
}

pub fn normal_pdf<T: Scalar>(z: T) -> T {
    (-(z * z) / T::lit(2.0)).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

/// Inverse of the standard normal CDF.
pub fn normal_quantile<T: Scalar>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "normal quantile requires 0 < p < 1, got {p}"
        )));
    }
    // Acklam's rational approximation, refined by Newton steps on Φ.
    let pf = p.to_f64_lossy();
    let mut z = T::lit(acklam(pf));
    for _ in 0..3 {
        let err = normal_cdf(z).value() - p;
        let dens = normal_pdf(z);
        if dens <= T::zero() {
            break;
        }
        z = z - err / dens;
    }
    Ok(z)
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.024_25;
    if p < LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - p)
    }
}

fn check_df<T: Scalar>(df: T) -> Result<()> {
    if df > T::zero() && df.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "degrees of freedom must be positive, got {df}"
        )))
    }
}

/// Student-t CDF with `df` degrees of freedom.
pub fn student_t_cdf<T: Scalar>(t: T, df: T) -> Result<TailProbability<T>> {
    let tail = student_t_two_sided_p(t, df)?.value() / T::lit(2.0);
    Ok(TailProbability::new(if t < T::zero() {
        tail
    } else {
        T::one() - tail
    }))
}

/// Two-sided p-value `2 P(T ≥ |t|)`.
pub fn student_t_two_sided_p<T: Scalar>(t: T, df: T) -> Result<TailProbability<T>> {
    check_df(df)?;
    if t.is_nan() {
        return Err(Error::InvalidArgument("t statistic is NaN".into()));
    }
    if t.is_infinite() {
        return Ok(TailProbability::new(T::zero()));
    }
    let t2 = t * t;
    let denom = df + t2;
    let half = T::lit(0.5);
    Ok(TailProbability::new(regularized_beta_pair(
        df * half,
        half,
        df / denom,
        t2 / denom,
    )))
}

fn check_integer_df(df: u32) -> Result<()> {
    if df == 0 {
        Err(Error::InvalidArgument(
            "chi-square degrees of freedom must be at least 1".into(),
        ))
    } else {
        Ok(())
    }
}

/// Chi-square CDF.
pub fn chi_square_cdf<T: Scalar>(x: T, df: u32) -> Result<TailProbability<T>> {
    Ok(chi_square_sf(x, df)?.complement())
}

/// Chi-square survival function `P(X > x)`.
pub fn chi_square_sf<T: Scalar>(x: T, df: u32) -> Result<TailProbability<T>> {
    check_integer_df(df)?;
    if x.is_nan() || x < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "chi-square argument must be non-negative, got {x}"
        )));
    }
    let half = T::lit(0.5);
    let a = T::from_u32(df).unwrap() * half;
    Ok(TailProbability::new(regularized_gamma_q(a, x * half)))
}

/// Quantile of the chi-square distribution: the `x` with `P(X ≤ x) = prob`.
pub fn chi_square_quantile<T: Scalar>(prob: T, df: u32) -> Result<T> {
    check_integer_df(df)?;
    if !(prob > T::zero() && prob < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "quantile probability must lie in (0, 1), got {prob}"
        )));
    }
    let target = T::one() - prob;
    let sf = |x: T| chi_square_sf(x, df).map(TailProbability::value);

    let mut lo = T::zero();
    let mut hi = T::from_u32(df).unwrap().max(T::one());
    while sf(hi)? > target {
        lo = hi;
        hi = hi * T::lit(2.0);
        if !hi.is_finite() {
            return Err(Error::InvalidArgument("chi-square quantile diverged".into()));
        }
    }
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(4.0));
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if sf(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * hi.max(T::one()) {
            break;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}
