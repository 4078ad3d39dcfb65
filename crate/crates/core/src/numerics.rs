//! Special-function primitives shared by the rest of the crate.
//!
//! Gamma-function values are handled as `(log |Γ|, sign)` pairs so that
//! ratios with very large arguments never overflow. Ratios that feed the
//! connection coefficients are additionally available as double-double
//! running products (see [`poch_dd`]), because the endpoint derivative of
//! the Sobolev polynomials is a difference of two terms that agree to many
//! more digits than `f64` carries.

use crate::dd::Dd;

use crate::error::{Error, Result};

/// Minimum number of samples accepted by [`fit_power_law`].
pub const MIN_FIT_SAMPLES: usize = 8;

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x.fract() == 0.0
}

/// Sign of Γ(x), with 0 marking a pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSign {
    Negative,
    Pole,
    Positive,
}

impl GammaSign {
    pub fn as_f64(self) -> f64 {
        match self {
            GammaSign::Negative => -1.0,
            GammaSign::Pole => 0.0,
            GammaSign::Positive => 1.0,
        }
    }
}

/// `log |Γ(x)|` together with the sign of Γ(x).
///
/// Poles (nonpositive integers) are reported as `GammaSign::Pole` with an
/// infinite log-magnitude; callers use this to treat `1/Γ(x)` as zero.
pub fn log_gamma_signed(x: f64) -> (f64, GammaSign) {
    if is_nonpositive_integer(x) {
        return (f64::INFINITY, GammaSign::Pole);
    }
    let (value, sign) = libm::lgamma_r(x);
    let sign = if sign < 0 {
        GammaSign::Negative
    } else {
        GammaSign::Positive
    };
    (value, sign)
}

/// `1/Γ(x)`, equal to zero at the poles of Γ.
pub fn reciprocal_gamma(x: f64) -> f64 {
    match log_gamma_signed(x) {
        (_, GammaSign::Pole) => 0.0,
        (lg, s) => s.as_f64() * (-lg).exp(),
    }
}

/// Rising factorial (a)_n = a (a+1) ... (a+n-1).
///
/// Evaluated as a direct product, so it is exact whenever the partial
/// products are representable (small integer inputs in particular).
pub fn pochhammer(a: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, k| acc * (a + k as f64))
}

/// `(log |(a)_n|, sign)` for large `n`, computed from log-gamma values.
///
/// A zero result (a nonpositive integer `a` with `n > -a`) is returned as
/// `(-inf, 0.0)`.
pub fn log_pochhammer_signed(a: f64, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    if is_nonpositive_integer(a) {
        // Either the product runs through zero or it is a finite product of
        // negative integers; both are cheap to do directly.
        if (n as f64) > -a {
            return (f64::NEG_INFINITY, 0.0);
        }
        let mut log_abs = 0.0;
        let mut sign = 1.0;
        for k in 0..n {
            let f = a + k as f64;
            log_abs += f.abs().ln();
            if f < 0.0 {
                sign = -sign;
            }
        }
        return (log_abs, sign);
    }
    let (num, sn) = log_gamma_signed(a + n as f64);
    let (den, sd) = log_gamma_signed(a);
    (num - den, sn.as_f64() * sd.as_f64())
}

/// Rising factorial in double-double arithmetic. Negative lengths use
/// (a)_{-m} = 1 / ((a-1)(a-2)...(a-m)), the continuation of Γ(a+m)/Γ(a).
pub fn poch_dd(a: f64, m: i64) -> Dd {
    let a = Dd::from_f64(a);
    if m >= 0 {
        let mut acc = Dd::ONE;
        for k in 0..m {
            acc *= a + k as f64;
        }
        acc
    } else {
        let mut acc = Dd::ONE;
        for j in 1..=(-m) {
            acc *= a - j as f64;
        }
        Dd::ONE / acc
    }
}

/// (a)_m / m! in double-double arithmetic, zero for m < 0 (reciprocal Γ at
/// a nonpositive integer).
pub fn poch_over_factorial_dd(a: f64, m: i64) -> Dd {
    if m < 0 {
        return Dd::ZERO;
    }
    let a = Dd::from_f64(a);
    let mut acc = Dd::ONE;
    for k in 0..m {
        acc = acc * (a + k as f64) / (k + 1) as f64;
    }
    acc
}

/// 1/m! in double-double arithmetic, zero for m < 0.
pub fn reciprocal_factorial_dd(m: i64) -> Dd {
    if m < 0 {
        return Dd::ZERO;
    }
    let mut acc = Dd::ONE;
    for k in 2..=m {
        acc /= k as f64;
    }
    acc
}

/// Terminating Gauss series 2F1(-n, b; c; z) = Σ_{k=0}^{n} (-n)_k (b)_k / ((c)_k k!) z^k.
///
/// The terms alternate and can exceed the result by many orders of
/// magnitude, so the recursion and the sum are carried in double-double.
pub fn gauss_2f1_terminating(n: usize, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut term = Dd::ONE;
    let mut sum = Dd::ONE;
    for k in 0..n {
        let ck = c + k as f64;
        if ck == 0.0 {
            return Err(Error::HypergeometricPole { c, k });
        }
        let kf = k as f64;
        term = term * (kf - n as f64) * (Dd::from_f64(b) + kf) * z
            / (Dd::from_f64(c) + kf)
            / (kf + 1.0);
        sum += term;
    }
    Ok(sum.to_f64())
}

/// Least-squares power law `|value| ≈ C (n+1)^slope`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticFit {
    pub slope: f64,
    /// Intercept on the log scale; `exp(intercept)` estimates the leading constant.
    pub intercept: f64,
    pub r_squared: f64,
    pub n_range: (usize, usize),
}

impl AsymptoticFit {
    pub fn leading_constant(&self) -> f64 {
        self.intercept.exp()
    }
}

/// Fits a line through `(log(n+1), log|value|)`.
pub fn fit_power_law(samples: &[(usize, f64)]) -> Result<AsymptoticFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    for pair in samples.windows(2) {
        if pair[1].0 <= pair[0].0 {
            return Err(Error::UnorderedSamples);
        }
    }
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for &(n, v) in samples {
        if v == 0.0 || !v.is_finite() {
            return Err(Error::DegenerateSample { n });
        }
        xs.push(((n + 1) as f64).ln());
        ys.push(v.abs().ln());
    }
    let (slope, intercept, r_squared) = least_squares_line(&xs, &ys);
    Ok(AsymptoticFit {
        slope,
        intercept,
        r_squared,
        n_range: (samples[0].0, samples[samples.len() - 1].0),
    })
}

/// Fits only the samples with `n ∈ [n_max/4, n_max]`, where `n_max` is the
/// largest index present.
pub fn fit_power_law_tail(samples: &[(usize, f64)]) -> Result<AsymptoticFit> {
    let n_max = samples.iter().map(|s| s.0).max().unwrap_or(0);
    let tail: Vec<_> = samples
        .iter()
        .copied()
        .filter(|&(n, _)| 4 * n >= n_max)
        .collect();
    fit_power_law(&tail)
}

/// Ordinary least squares for `y = slope * x + intercept`; returns
/// `(slope, intercept, r²)` with r² clamped to [0, 1].
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / m;
    let mean_y = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    // Relative to the data scale, a flat series is a perfect fit.
    let r_squared = if syy <= 1e-28 * (1.0 + mean_y * mean_y) * m {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    (slope, intercept, r_squared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_gamma_small_cases() {
        let (lg, s) = log_gamma_signed(1.0);
        assert_eq!(s, GammaSign::Positive);
        assert!(lg.abs() < 1e-15);

        assert_eq!(log_gamma_signed(0.0).1, GammaSign::Pole);
        assert_eq!(log_gamma_signed(-3.0).1, GammaSign::Pole);

        let (lg, s) = log_gamma_signed(5.0);
        assert_eq!(s, GammaSign::Positive);
        assert!((lg - 24f64.ln()).abs() < 1e-14);

        // Γ(-1/2) = -2√π
        let (lg, s) = log_gamma_signed(-0.5);
        assert_eq!(s, GammaSign::Negative);
        assert!((lg - (2.0 * std::f64::consts::PI.sqrt()).ln()).abs() < 1e-14);
    }

    #[test]
    fn reciprocal_gamma_vanishes_at_poles() {
        assert_eq!(reciprocal_gamma(0.0), 0.0);
        assert_eq!(reciprocal_gamma(-7.0), 0.0);
        assert!((reciprocal_gamma(4.0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn pochhammer_examples() {
        assert_eq!(pochhammer(3.7, 0), 1.0);
        assert_eq!(pochhammer(-3.0, 4), 0.0);
        // direct product 2 * 3 * 4
        assert_eq!(pochhammer(2.0, 3), 24.0);
        assert_eq!(pochhammer(-3.0, 2), 6.0);
    }

    #[test]
    fn log_pochhammer_matches_direct_product() {
        for &(a, n) in &[(2.5, 10usize), (0.3, 40), (7.0, 60), (-2.5, 9)] {
            let direct = pochhammer(a, n);
            let (lg, s) = log_pochhammer_signed(a, n);
            assert!(
                ((s * lg.exp()) - direct).abs() <= 1e-12 * direct.abs(),
                "{a} {n}"
            );
        }
        assert_eq!(log_pochhammer_signed(-3.0, 4).1, 0.0);
        let (lg, s) = log_pochhammer_signed(-3.0, 3);
        assert_eq!(s, -1.0);
        assert!((lg - 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn double_double_pochhammer_continuation() {
        // (a)_{-2} = 1/((a-1)(a-2))
        let v = poch_dd(5.0, -2).to_f64();
        assert!((v - 1.0 / 12.0).abs() < 1e-17);
        assert_eq!(poch_over_factorial_dd(3.5, -1).to_f64(), 0.0);
        assert_eq!(reciprocal_factorial_dd(4).to_f64(), 1.0 / 24.0);
        let v = poch_over_factorial_dd(2.0, 5).to_f64(); // (2)_5/5! = 6
        assert!((v - 6.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_series_examples() {
        assert_eq!(gauss_2f1_terminating(0, 1.3, 2.2, 0.7).unwrap(), 1.0);
        assert_eq!(gauss_2f1_terminating(9, 1.3, 2.2, 0.0).unwrap(), 1.0);
        for &alpha in &[0.0, 0.5, 1.7] {
            for &x in &[-0.9, -0.2, 0.4, 1.0] {
                let v = gauss_2f1_terminating(1, 2.0 * alpha + 2.0, alpha + 1.0, (1.0 - x) / 2.0)
                    .unwrap();
                assert!((v - x).abs() < 1e-15, "alpha={alpha} x={x}");
            }
        }
    }

    #[test]
    fn gauss_series_reports_poles() {
        let err = gauss_2f1_terminating(5, 1.0, -2.0, 0.5).unwrap_err();
        assert_eq!(err, Error::HypergeometricPole { c: -2.0, k: 2 });
        // a pole beyond the last term is harmless
        assert!(gauss_2f1_terminating(2, 1.0, -2.0, 0.5).is_ok());
    }

    #[test]
    fn power_law_examples() {
        let exact: Vec<_> = (0..20).map(|n| (n, ((n + 1) as f64).powi(2))).collect();
        let fit = fit_power_law(&exact).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let flat: Vec<_> = (0..20).map(|n| (n, 3.5)).collect();
        let fit = fit_power_law(&flat).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!((fit.leading_constant() - 3.5).abs() < 1e-12);

        // Γ(n+3)/Γ(n+1) = (n+1)(n+2)
        let ratio: Vec<_> = (50..=200)
            .map(|n| {
                let (a, _) = log_gamma_signed(n as f64 + 3.0);
                let (b, _) = log_gamma_signed(n as f64 + 1.0);
                (n, (a - b).exp())
            })
            .collect();
        let fit = fit_power_law(&ratio).unwrap();
        assert!((fit.slope - 2.0).abs() < 0.01, "{}", fit.slope);
    }

    #[test]
    fn power_law_rejects_bad_input() {
        let short: Vec<_> = (0..7).map(|n| (n, 1.0)).collect();
        assert!(matches!(
            fit_power_law(&short),
            Err(Error::TooFewSamples {
                required: 8,
                got: 7
            })
        ));
        let mut zero: Vec<_> = (0..10).map(|n| (n, 1.0)).collect();
        zero[4].1 = 0.0;
        assert_eq!(fit_power_law(&zero), Err(Error::DegenerateSample { n: 4 }));
        let mut unordered: Vec<_> = (0..10).map(|n| (n, 1.0)).collect();
        unordered.swap(2, 3);
        assert_eq!(fit_power_law(&unordered), Err(Error::UnorderedSamples));
    }

    #[test]
    fn tail_fit_uses_upper_three_quarters() {
        let samples: Vec<_> = (1..=100).map(|n| (n, 1.0 + (n as f64))).collect();
        let fit = fit_power_law_tail(&samples).unwrap();
        assert_eq!(fit.n_range, (25, 100));
    }

    #[test]
    fn planted_exponents_are_recovered() {
        for &s in &[-3.5, -1.5, 0.0, 0.5, 2.5] {
            let data: Vec<_> = (10..60)
                .map(|n| (n, 0.7 * ((n + 1) as f64).powf(s)))
                .collect();
            let fit = fit_power_law(&data).unwrap();
            assert!(
                (fit.slope - s).abs() < 1e-6,
                "planted {s} got {}",
                fit.slope
            );
        }
    }

    proptest! {
        #[test]
        fn pochhammer_step(a in -20.0f64..20.0, n in 0usize..60) {
            let lhs = pochhammer(a, n + 1);
            let rhs = pochhammer(a, n) * (a + n as f64);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300));
        }

        #[test]
        fn terminating_series_numerator_symmetry(
            n in 0usize..12, m in 0usize..12, c in 0.5f64..6.0, z in -1.0f64..1.0
        ) {
            let lhs = gauss_2f1_terminating(n, -(m as f64), c, z).unwrap();
            let rhs = gauss_2f1_terminating(m, -(n as f64), c, z).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }
}
