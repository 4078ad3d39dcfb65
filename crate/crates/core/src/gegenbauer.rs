//! Classical Gegenbauer polynomials for the probability measure
//! `dμ_γ(x) = Γ(2γ+2) / (2^{2γ+1} Γ(γ+1)²) (1-x²)^γ dx` on [-1, 1].
//!
//! Two normalizations are used throughout:
//!
//! * `R_n^γ`, scaled so that `R_n^γ(1) = 1`;
//! * `P_n^γ = β_{n,γ} R_n^γ`, orthonormal in `L²(dμ_γ)`.
//!
//! Negative degrees evaluate to zero, which lets the connection formulas
//! of the Sobolev family drop their low-degree terms without branching.

use crate::dd::Dd;

use crate::error::{Error, Result};
use crate::numerics::log_gamma_signed;

/// Degree above which [`eval_r`] runs its recurrence in double-double.
const EXTENDED_RECURRENCE_DEGREE: i64 = 150;

/// Parameter of the measure `dμ_γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureParams {
    gamma: f64,
}

impl MeasureParams {
    pub fn new(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn constant(&self) -> f64 {
        measure_constant(self.gamma)
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > -1.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "measure parameter must satisfy gamma > -1, got {gamma}"
        )));
    }
    Ok(())
}

/// Normalizing constant `Γ(2γ+2) / (2^{2γ+1} Γ²(γ+1))` of `dμ_γ`.
pub fn measure_constant(gamma: f64) -> f64 {
    let (num, _) = log_gamma_signed(2.0 * gamma + 2.0);
    let (den, _) = log_gamma_signed(gamma + 1.0);
    (num - (2.0 * gamma + 1.0) * std::f64::consts::LN_2 - 2.0 * den).exp()
}

/// `R_n^α(x)` with `R_n^α(1) = 1`, by the three-term recurrence
/// `(n+2α+1) R_{n+1} = (2n+2α+1) x R_n - n R_{n-1}`.
pub fn eval_r(n: i64, alpha: f64, x: f64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    if n == 0 {
        return 1.0;
    }
    if n > EXTENDED_RECURRENCE_DEGREE {
        return eval_r_extended(n, alpha, x);
    }
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next =
            ((2.0 * kf + 2.0 * alpha + 1.0) * x * cur - kf * prev) / (kf + 2.0 * alpha + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn eval_r_extended(n: i64, alpha: f64, x: f64) -> f64 {
    let x = Dd::from_f64(x);
    let two_alpha = Dd::from_f64(2.0 * alpha);
    let mut prev = Dd::ONE;
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next =
            ((two_alpha + (2.0 * kf + 1.0)) * x * cur - prev * kf) / (two_alpha + (kf + 1.0));
        prev = cur;
        cur = next;
    }
    cur.to_f64()
}

/// `d/dx R_n^α(x) = n(n+2α+1) / (2(α+1)) · R_{n-1}^{α+1}(x)`.
pub fn eval_r_derivative(n: i64, alpha: f64, x: f64) -> f64 {
    if n <= 0 {
        return 0.0;
    }
    let nf = n as f64;
    nf * (nf + 2.0 * alpha + 1.0) / (2.0 * (alpha + 1.0)) * eval_r(n - 1, alpha + 1.0, x)
}

/// `R_n^α'(1) = n(n+2α+1) / (2(α+1))`, in double-double.
pub fn r_derivative_at_one_dd(n: i64, alpha: f64) -> Dd {
    if n <= 0 {
        return Dd::ZERO;
    }
    let nf = n as f64;
    Dd::from_f64(nf) * (Dd::from_f64(nf) + (2.0 * alpha + 1.0)) / (2.0 * (alpha + 1.0))
}

/// `β_{n,α}²` as a double-double product, using
/// `β² = (2n+2α+1)/n · Π_{k=1}^{n-1} (2α+1+k)/k` (and `β_0 = 1`).
pub fn beta_norm_squared_dd(n: i64, alpha: f64) -> Dd {
    if n <= 0 {
        return Dd::ONE;
    }
    let two_alpha = Dd::from_f64(2.0 * alpha);
    let mut acc = (two_alpha + (2 * n + 1) as f64) / n as f64;
    for k in 1..n {
        acc = acc * (two_alpha + (k + 1) as f64) / k as f64;
    }
    acc
}

/// `β_{n,α} = ‖R_n^α‖^{-1}` in `L²(dμ_α)`.
pub fn beta_norm(n: i64, alpha: f64) -> f64 {
    beta_norm_squared_dd(n, alpha).sqrt().to_f64()
}

/// Orthonormal `P_n^α(x) = β_{n,α} R_n^α(x)`.
pub fn eval_p(n: i64, alpha: f64, x: f64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    beta_norm(n, alpha) * eval_r(n, alpha, x)
}

/// Off-diagonal entry `b_k` of the Jacobi matrix of `dμ_γ`, so that
/// `x P_k = b_{k+1} P_{k+1} + b_k P_{k-1}` for the orthonormal family.
pub fn jacobi_offdiag(gamma: f64, k: usize) -> f64 {
    let kf = k as f64;
    if k == 1 {
        // k(k+2γ)/((2k+2γ-1)(2k+2γ+1)) with the common factor cancelled
        return (1.0 / (2.0 * gamma + 3.0)).sqrt();
    }
    (kf * (kf + 2.0 * gamma) / ((2.0 * kf + 2.0 * gamma - 1.0) * (2.0 * kf + 2.0 * gamma + 1.0)))
        .sqrt()
}

/// Evaluates every orthonormal `P_0^γ, ..., P_{n}^γ` at one point.
///
/// The recurrence coefficients are computed once; the table is immutable
/// afterwards and can be shared between threads.
#[derive(Debug, Clone)]
pub struct OrthonormalTable {
    gamma: f64,
    // offdiag[k] = b_k, offdiag[0] unused
    offdiag: Vec<f64>,
}

impl OrthonormalTable {
    pub fn new(gamma: f64, n_max: usize) -> Self {
        let mut offdiag = vec![0.0; n_max + 2];
        for (k, b) in offdiag.iter_mut().enumerate().skip(1) {
            *b = jacobi_offdiag(gamma, k);
        }
        Self { gamma, offdiag }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_max(&self) -> usize {
        self.offdiag.len() - 2
    }

    /// Fills `out[k] = P_k^γ(x)` for `k < out.len()`.
    pub fn values_into(&self, x: f64, out: &mut [f64]) {
        assert!(out.len() <= self.n_max() + 1);
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() > 1 {
            out[1] = x / self.offdiag[1];
        }
        for k in 1..out.len().saturating_sub(1) {
            out[k + 1] = (x * out[k] - self.offdiag[k] * out[k - 1]) / self.offdiag[k + 1];
        }
    }

    /// Fills values and first derivatives, differentiating the recurrence.
    pub fn values_and_derivatives_into(&self, x: f64, vals: &mut [f64], ders: &mut [f64]) {
        assert_eq!(vals.len(), ders.len());
        assert!(vals.len() <= self.n_max() + 1);
        if vals.is_empty() {
            return;
        }
        vals[0] = 1.0;
        ders[0] = 0.0;
        if vals.len() > 1 {
            vals[1] = x / self.offdiag[1];
            ders[1] = 1.0 / self.offdiag[1];
        }
        for k in 1..vals.len().saturating_sub(1) {
            let b_next = self.offdiag[k + 1];
            vals[k + 1] = (x * vals[k] - self.offdiag[k] * vals[k - 1]) / b_next;
            ders[k + 1] = (vals[k] + x * ders[k] - self.offdiag[k] * ders[k - 1]) / b_next;
        }
    }

    pub fn values(&self, x: f64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        self.values_into(x, &mut out);
        out
    }
}
