//! The Gegenbauer-Sobolev orthonormal family `Q_n^α`.
//!
//! The orthogonal polynomials `B_n^α` are expanded in classical Gegenbauer
//! polynomials as
//!
//! ```text
//! B_n = k4 (1-x²)² R_{n-4}^{α+4} + k2 (1-x²) R_{n-2}^{α+2} + c_n R_n^α
//! k4  = a_n (n+2α+1)_4 (-n)_4 / (2^6 (α+2)(α+3)(α+1)_4)
//! k2  = b_n (n+2α+1)_2 (-n)_2 / (2^2 (α+1)_2)
//! ```
//!
//! and `Q_n = λ_n B_n` with `λ_n^{-2} = <B_n, B_n>_S` evaluated by a Gauss
//! rule that is exact for `B_n²` plus the point-mass terms.
//!
//! All scalar coefficients are kept in double-double. The endpoint
//! derivative `B_n'(1) = -2 k2 + c_n R_n'(1)` is a difference of two terms
//! that agree to roughly `(n+1)^{2α+6}` relative to the result.

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::gegenbauer::{beta_norm_squared_dd, r_derivative_at_one_dd, OrthonormalTable};
use crate::numerics::{poch_dd, poch_over_factorial_dd, reciprocal_factorial_dd};
use crate::quadrature::{build_rule, QuadRule};

/// `(α, M, N)` of the Sobolev inner product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevParams {
    alpha: f64,
    mass_m: f64,
    mass_n: f64,
}

impl SobolevParams {
    pub fn new(alpha: f64, mass_m: f64, mass_n: f64) -> Result<Self> {
        if !(alpha > -0.5) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must exceed -1/2, got {alpha}"
            )));
        }
        if !(mass_m >= 0.0) || !mass_m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mass M must be nonnegative, got {mass_m}"
            )));
        }
        if !(mass_n >= 0.0) || !mass_n.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mass N must be nonnegative, got {mass_n}"
            )));
        }
        Ok(Self {
            alpha,
            mass_m,
            mass_n,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mass_m(&self) -> f64 {
        self.mass_m
    }

    pub fn mass_n(&self) -> f64 {
        self.mass_n
    }

    /// The four regimes distinguished by which masses are present.
    pub fn regime(&self) -> MassRegime {
        match (self.mass_m > 0.0, self.mass_n > 0.0) {
            (true, true) => MassRegime::Both,
            (true, false) => MassRegime::ValueOnly,
            (false, true) => MassRegime::DerivativeOnly,
            (false, false) => MassRegime::Classical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassRegime {
    /// M > 0, N > 0
    Both,
    /// M > 0, N = 0
    ValueOnly,
    /// M = 0, N > 0
    DerivativeOnly,
    /// M = N = 0
    Classical,
}

/// `f(1), f(-1), f'(1), f'(-1)` of the designated representative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryData {
    pub v_plus: f64,
    pub v_minus: f64,
    pub d_plus: f64,
    pub d_minus: f64,
}

impl BoundaryData {
    pub fn is_finite(&self) -> bool {
        self.v_plus.is_finite()
            && self.v_minus.is_finite()
            && self.d_plus.is_finite()
            && self.d_minus.is_finite()
    }
}

type Evaluator<'a> = Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>;

/// A function on [-1, 1] together with its boundary data.
///
/// The boundary data is stored rather than re-derived from the evaluator:
/// an element of `W_p^α` is an equivalence class, and the values at ±1 are
/// those of the chosen representative.
pub struct SobolevFunction<'a> {
    eval: Evaluator<'a>,
    boundary: BoundaryData,
}

impl<'a> SobolevFunction<'a> {
    pub fn new<F>(f: F, boundary: BoundaryData) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'a,
    {
        if !boundary.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "boundary data must be finite: {boundary:?}"
            )));
        }
        Ok(Self {
            eval: Box::new(f),
            boundary,
        })
    }

    /// Takes the boundary data from `f` and its derivative `df` at ±1.
    pub fn from_derivative<F, D>(f: F, df: D) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'a,
        D: Fn(f64) -> f64,
    {
        let boundary = BoundaryData {
            v_plus: f(1.0),
            v_minus: f(-1.0),
            d_plus: df(1.0),
            d_minus: df(-1.0),
        };
        Self::new(f, boundary)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }
}

impl std::fmt::Debug for SobolevFunction<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SobolevFunction")
            .field("boundary", &self.boundary)
            .finish_non_exhaustive()
    }
}

fn check_rule(params: &SobolevParams, rule: &QuadRule) -> Result<()> {
    if rule.gamma() != params.alpha {
        return Err(Error::InvalidParameter(format!(
            "quadrature rule is for gamma = {}, inner product needs alpha = {}",
            rule.gamma(),
            params.alpha
        )));
    }
    Ok(())
}

/// `<f, g>_S` with the integral replaced by `rule`.
pub fn sobolev_inner(
    params: &SobolevParams,
    rule: &QuadRule,
    f: &SobolevFunction<'_>,
    g: &SobolevFunction<'_>,
) -> Result<f64> {
    check_rule(params, rule)?;
    let integral = rule.integrate(|x| f.eval(x) * g.eval(x))?;
    let (bf, bg) = (f.boundary(), g.boundary());
    Ok(integral
        + params.mass_m * (bf.v_plus * bg.v_plus + bf.v_minus * bg.v_minus)
        + params.mass_n * (bf.d_plus * bg.d_plus + bf.d_minus * bg.d_minus))
}

/// The scalars `a_n, b_n, c_n` of the connection formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub(crate) struct AbcDd {
    a: Dd,
    b: Dd,
    c: Dd,
}

pub(crate) fn abc_dd(params: &SobolevParams, n: usize) -> AbcDd {
    let alpha = params.alpha;
    let (mm, nn) = (params.mass_m, params.mass_n);
    let n = n as i64;
    let s = 2.0 * alpha + 3.0;
    let nf = n as f64;

    // (2α+3)_m / m! is zero for m < 0 (reciprocal factorial at a pole).
    let a = poch_over_factorial_dd(s, n) * poch_over_factorial_dd(s, n - 2) * (4.0 * mm * nn)
        / ((alpha + 1.0) * (alpha + 2.0))
        + poch_over_factorial_dd(s, n - 1) * (2.0 * nn) / (alpha + 1.0);

    // (2α+3)_{n-2} / n!, written as a ratio that does not overflow for large n
    let mass_term = if n >= 2 {
        poch_over_factorial_dd(s, n - 2) / (nf * (nf - 1.0))
    } else {
        poch_dd(s, n - 2) * reciprocal_factorial_dd(n)
    };
    let b =
        -(poch_over_factorial_dd(s, n - 1) * (0.5 * nn) * (nf - 2.0) * (nf + 2.0 * alpha + 3.0))
            / ((alpha + 1.0) * (alpha + 3.0))
            - mass_term * (2.0 * mm);

    // (2α+3)_{n+1} / (n-3)! = (2α+3)_{n+1}/(n+1)! · (n+1)n(n-1)(n-2), zero for n < 3
    let c_correction = if n >= 3 {
        poch_over_factorial_dd(s, n + 1)
            * ((nf + 1.0) * nf)
            * ((nf - 1.0) * (nf - 2.0))
            * (0.5 * nn)
            / ((alpha + 1.0) * (alpha + 2.0) * (alpha + 3.0))
    } else {
        Dd::ZERO
    };
    let c = Dd::ONE - c_correction;
    AbcDd { a, b, c }
}

/// `a_n, b_n, c_n` for degree `n`.
pub fn abc_coeffs(params: &SobolevParams, n: usize) -> AbcCoeffs {
    let abc = abc_dd(params, n);
    AbcCoeffs {
        a: abc.a.to_f64(),
        b: abc.b.to_f64(),
        c: abc.c.to_f64(),
    }
}

/// Coefficients of `B_n` against `(1-x²)² R_{n-4}^{α+4}`, `(1-x²) R_{n-2}^{α+2}`
/// and `R_n^α`, plus `B_n'(1)`.
#[derive(Debug, Clone, Copy)]
struct BTerms {
    k4: Dd,
    k2: Dd,
    k0: Dd,
    derivative_at_one: Dd,
}

fn b_terms(params: &SobolevParams, n: usize) -> BTerms {
    let alpha = params.alpha;
    let abc = abc_dd(params, n);
    let ni = n as i64;
    let shift = n as f64 + 2.0 * alpha + 1.0;
    let k4 = abc.a * poch_dd(shift, 4) * poch_dd(-(n as f64), 4)
        / (64.0 * (alpha + 2.0) * (alpha + 3.0))
        / poch_dd(alpha + 1.0, 4);
    let k2 = abc.b * poch_dd(shift, 2) * poch_dd(-(n as f64), 2) / 4.0 / poch_dd(alpha + 1.0, 2);
    let derivative_at_one = abc.c * r_derivative_at_one_dd(ni, alpha) - k2 * 2.0;
    BTerms {
        k4,
        k2,
        k0: abc.c,
        derivative_at_one,
    }
}

/// `B_n^α(x)` from the connection formula.
pub fn eval_b(params: &SobolevParams, n: usize, x: f64) -> f64 {
    use crate::gegenbauer::eval_r;
    let t = b_terms(params, n);
    let alpha = params.alpha;
    let ni = n as i64;
    let s = 1.0 - x * x;
    t.k4.to_f64() * s * s * eval_r(ni - 4, alpha + 4.0, x)
        + t.k2.to_f64() * s * eval_r(ni - 2, alpha + 2.0, x)
        + t.k0.to_f64() * eval_r(ni, alpha, x)
}

/// `B_n'(1)`, evaluated from the double-double coefficients.
pub fn eval_b_derivative_at_one(params: &SobolevParams, n: usize) -> f64 {
    b_terms(params, n).derivative_at_one.to_f64()
}

/// The closed form for `‖B_n‖²_{W_2}` exactly as it is usually printed,
/// including the dangling product between the `a_n²` and `b_n²` terms.
/// Diagnostic only; the construction never uses it.
pub fn printed_norm_identity(params: &SobolevParams, n: usize) -> f64 {
    let alpha = params.alpha;
    let (mm, nn) = (params.mass_m, params.mass_n);
    let AbcCoeffs { a, b, c } = abc_coeffs(params, n);
    let nf = n as f64;
    let falling4 = nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0);
    let falling2 = nf * (nf - 1.0);
    let shift = nf + 2.0 * alpha + 1.0;
    let poch4 = shift * (shift + 1.0) * (shift + 2.0) * (shift + 3.0);
    let poch2 = shift * (shift + 1.0);
    let inv_beta_sq = 1.0 / beta_norm_squared_dd(n as i64, alpha).to_f64();
    let dterm = nf * shift / (2.0 * (alpha + 1.0))
        + mm * poch_over_factorial_dd(2.0 * alpha + 3.0, n as i64 - 1).to_f64()
            * (2.0 * alpha + 3.0 + nf - 1.0)
            / ((alpha + 1.0) * (alpha + 2.0));
    let bracket = falling4 * poch4 * a * a / (16.0 * (alpha + 2.0).powi(2) * (alpha + 3.0).powi(2))
        * (falling2 * poch2 * b * b)
        - falling4 * poch2 * a * b / (2.0 * (alpha + 2.0) * (alpha + 3.0))
        + c * c
        - 2.0 * falling2 * b * c
        + falling4 * a * c / (2.0 * (alpha + 2.0) * (alpha + 3.0));
    2.0 * mm * c * c + 2.0 * nn * dterm * dterm + inv_beta_sq * bracket
}

/// Per-degree data of the orthonormal family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionCoeffs {
    pub n: usize,
    pub a_n: f64,
    pub b_n: f64,
    pub c_n: f64,
    pub lambda_n: f64,
    pub beta_n: f64,
    /// Coefficient of `(1-x²)² P_{n-4}^{α+4}` in `Q_n`.
    pub a4: f64,
    /// Coefficient of `(1-x²) P_{n-2}^{α+2}` in `Q_n`.
    pub a2: f64,
    /// Coefficient of `P_n^α` in `Q_n`.
    pub a0: f64,
    /// `Q_n(1)`; `Q_n(-1) = (-1)^n Q_n(1)`.
    pub value_at_one: f64,
    /// `Q_n'(1)`; `Q_n'(-1) = (-1)^{n+1} Q_n'(1)`.
    pub derivative_at_one: f64,
}

impl ConnectionCoeffs {
    pub fn boundary(&self) -> BoundaryData {
        let even = self.n % 2 == 0;
        BoundaryData {
            v_plus: self.value_at_one,
            v_minus: if even {
                self.value_at_one
            } else {
                -self.value_at_one
            },
            d_plus: self.derivative_at_one,
            d_minus: if even {
                -self.derivative_at_one
            } else {
                self.derivative_at_one
            },
        }
    }
}

/// `B_n` split into orthonormal pieces: `B_n = u4 s² P4 + u2 s P2 + u0 P0`.
#[derive(Debug, Clone, Copy)]
struct OrthonormalPieces {
    u4: f64,
    u2: f64,
    u0: f64,
    beta_n: f64,
    abc: AbcCoeffs,
    value_at_one: Dd,
    derivative_at_one: Dd,
}

fn orthonormal_pieces(params: &SobolevParams, n: usize) -> OrthonormalPieces {
    let alpha = params.alpha;
    let t = b_terms(params, n);
    let ni = n as i64;
    let beta4 = beta_norm_squared_dd(ni - 4, alpha + 4.0).sqrt();
    let beta2 = beta_norm_squared_dd(ni - 2, alpha + 2.0).sqrt();
    let beta0 = beta_norm_squared_dd(ni, alpha).sqrt();
    let abc = abc_dd(params, n);
    OrthonormalPieces {
        u4: if n >= 4 { (t.k4 / beta4).to_f64() } else { 0.0 },
        u2: if n >= 2 { (t.k2 / beta2).to_f64() } else { 0.0 },
        u0: (t.k0 / beta0).to_f64(),
        beta_n: beta0.to_f64(),
        abc: AbcCoeffs {
            a: abc.a.to_f64(),
            b: abc.b.to_f64(),
            c: abc.c.to_f64(),
        },
        value_at_one: t.k0,
        derivative_at_one: t.derivative_at_one,
    }
}

/// Evaluates the three classical families needed by `Q_0..Q_n` at a point.
#[derive(Debug, Clone)]
struct ClassicalTables {
    p0: OrthonormalTable,
    p2: OrthonormalTable,
    p4: OrthonormalTable,
}

impl ClassicalTables {
    fn new(alpha: f64, n_max: usize) -> Self {
        Self {
            p0: OrthonormalTable::new(alpha, n_max),
            p2: OrthonormalTable::new(alpha + 2.0, n_max),
            p4: OrthonormalTable::new(alpha + 4.0, n_max),
        }
    }
}

#[derive(Debug, Default)]
struct Scratch {
    v0: Vec<f64>,
    v2: Vec<f64>,
    v4: Vec<f64>,
    d0: Vec<f64>,
    d2: Vec<f64>,
    d4: Vec<f64>,
}

impl Scratch {
    fn resize(&mut self, len: usize) {
        for v in [
            &mut self.v0,
            &mut self.v2,
            &mut self.v4,
            &mut self.d0,
            &mut self.d2,
            &mut self.d4,
        ] {
            v.resize(len, 0.0);
        }
    }
}

fn combine(u4: f64, u2: f64, u0: f64, n: usize, s: f64, sc: &Scratch) -> f64 {
    let mut v = u0 * sc.v0[n];
    if n >= 2 {
        v += u2 * s * sc.v2[n - 2];
    }
    if n >= 4 {
        v += u4 * s * s * sc.v4[n - 4];
    }
    v
}

fn combine_derivative(u4: f64, u2: f64, u0: f64, n: usize, x: f64, sc: &Scratch) -> f64 {
    let s = 1.0 - x * x;
    let ds = -2.0 * x;
    let mut v = u0 * sc.d0[n];
    if n >= 2 {
        v += u2 * (ds * sc.v2[n - 2] + s * sc.d2[n - 2]);
    }
    if n >= 4 {
        v += u4 * (2.0 * s * ds * sc.v4[n - 4] + s * s * sc.d4[n - 4]);
    }
    v
}

/// `Q_0^α, ..., Q_{n_max}^α` for one parameter triple.
///
/// Construction computes every [`ConnectionCoeffs`] once; the basis is
/// immutable afterwards and can be shared freely between threads.
#[derive(Debug, Clone)]
pub struct SobolevBasis {
    params: SobolevParams,
    coeffs: Vec<ConnectionCoeffs>,
    tables: ClassicalTables,
}

impl SobolevBasis {
    pub fn new(params: SobolevParams, n_max: usize) -> Result<Self> {
        let alpha = params.alpha;
        let tables = ClassicalTables::new(alpha, n_max);
        let pieces: Vec<_> = (0..=n_max)
            .map(|n| orthonormal_pieces(&params, n))
            .collect();

        // B_n² has degree 2n, so n_max + 1 nodes suffice; a few spare nodes
        // cost nothing.
        let rule = build_rule(alpha, n_max + 5)?;
        let mut l2 = vec![0.0; n_max + 1];
        let mut sc = Scratch::default();
        sc.resize(n_max + 1);
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            tables.p0.values_into(x, &mut sc.v0);
            tables.p2.values_into(x, &mut sc.v2);
            tables.p4.values_into(x, &mut sc.v4);
            let s = 1.0 - x * x;
            for (n, p) in pieces.iter().enumerate() {
                let b = combine(p.u4, p.u2, p.u0, n, s, &sc);
                l2[n] += w * b * b;
            }
        }

        let mut coeffs = Vec::with_capacity(n_max + 1);
        for (n, p) in pieces.iter().enumerate() {
            let b1 = p.value_at_one.to_f64();
            let db1 = p.derivative_at_one.to_f64();
            let norm_sq = l2[n] + 2.0 * params.mass_m * b1 * b1 + 2.0 * params.mass_n * db1 * db1;
            if !(norm_sq > 0.0) || !norm_sq.is_finite() {
                return Err(Error::NonPositiveNorm { n, value: norm_sq });
            }
            let lambda = 1.0 / norm_sq.sqrt();
            coeffs.push(ConnectionCoeffs {
                n,
                a_n: p.abc.a,
                b_n: p.abc.b,
                c_n: p.abc.c,
                lambda_n: lambda,
                beta_n: p.beta_n,
                a4: lambda * p.u4,
                a2: lambda * p.u2,
                a0: lambda * p.u0,
                value_at_one: (p.value_at_one * lambda).to_f64(),
                derivative_at_one: (p.derivative_at_one * lambda).to_f64(),
            });
        }
        Ok(Self {
            params,
            coeffs,
            tables,
        })
    }

    /// Multiplies every stored `λ_n` (and everything derived from it) by
    /// `factor` for `n ≥ 1`. Exists only so that experiment drivers can run
    /// a negative control; a corrupted basis is no longer orthonormal.
    pub fn corrupt_lambda(&mut self, factor: f64) {
        for c in self.coeffs.iter_mut().skip(1) {
            c.lambda_n *= factor;
            c.a4 *= factor;
            c.a2 *= factor;
            c.a0 *= factor;
            c.value_at_one *= factor;
            c.derivative_at_one *= factor;
        }
    }

    pub fn params(&self) -> &SobolevParams {
        &self.params
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self, n: usize) -> Result<&ConnectionCoeffs> {
        self.coeffs.get(n).ok_or(Error::DegreeOutOfRange {
            n,
            n_max: self.n_max(),
        })
    }

    pub fn all_coeffs(&self) -> &[ConnectionCoeffs] {
        &self.coeffs
    }

    fn fill_values(&self, x: f64, len: usize, sc: &mut Scratch) {
        sc.resize(len);
        self.tables.p0.values_into(x, &mut sc.v0[..len]);
        self.tables.p2.values_into(x, &mut sc.v2[..len]);
        self.tables.p4.values_into(x, &mut sc.v4[..len]);
    }

    fn fill_values_and_derivatives(&self, x: f64, len: usize, sc: &mut Scratch) {
        sc.resize(len);
        self.tables
            .p0
            .values_and_derivatives_into(x, &mut sc.v0[..len], &mut sc.d0[..len]);
        self.tables
            .p2
            .values_and_derivatives_into(x, &mut sc.v2[..len], &mut sc.d2[..len]);
        self.tables
            .p4
            .values_and_derivatives_into(x, &mut sc.v4[..len], &mut sc.d4[..len]);
    }

    /// Fills `out[k] = Q_k(x)` for `k < out.len()`.
    pub fn values_into(&self, x: f64, out: &mut [f64]) {
        assert!(out.len() <= self.coeffs.len());
        if x == 1.0 || x == -1.0 {
            for (k, o) in out.iter_mut().enumerate() {
                let b = self.coeffs[k].boundary();
                *o = if x > 0.0 { b.v_plus } else { b.v_minus };
            }
            return;
        }
        self.values_from_connection_into(x, out);
    }

    /// Like [`values_into`](Self::values_into) but always assembles `Q_k` from
    /// the classical families, including at `x = ±1`.
    pub fn values_from_connection_into(&self, x: f64, out: &mut [f64]) {
        assert!(out.len() <= self.coeffs.len());
        let mut sc = Scratch::default();
        self.fill_values(x, out.len(), &mut sc);
        let s = 1.0 - x * x;
        for (k, o) in out.iter_mut().enumerate() {
            let c = &self.coeffs[k];
            *o = combine(c.a4, c.a2, c.a0, k, s, &sc);
        }
    }

    /// Fills values and derivatives of `Q_0..Q_{len-1}` at `x`.
    pub fn values_and_derivatives_into(&self, x: f64, vals: &mut [f64], ders: &mut [f64]) {
        assert_eq!(vals.len(), ders.len());
        assert!(vals.len() <= self.coeffs.len());
        if x == 1.0 || x == -1.0 {
            for k in 0..vals.len() {
                let b = self.coeffs[k].boundary();
                if x > 0.0 {
                    vals[k] = b.v_plus;
                    ders[k] = b.d_plus;
                } else {
                    vals[k] = b.v_minus;
                    ders[k] = b.d_minus;
                }
            }
            return;
        }
        let mut sc = Scratch::default();
        self.fill_values_and_derivatives(x, vals.len(), &mut sc);
        let s = 1.0 - x * x;
        for k in 0..vals.len() {
            let c = &self.coeffs[k];
            vals[k] = combine(c.a4, c.a2, c.a0, k, s, &sc);
            ders[k] = combine_derivative(c.a4, c.a2, c.a0, k, x, &sc);
        }
    }

    pub fn values(&self, x: f64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        self.values_into(x, &mut out);
        out
    }

    /// `Q_n(x)`.
    pub fn eval(&self, n: usize, x: f64) -> Result<f64> {
        self.coeffs(n)?;
        Ok(self.values(x, n)[n])
    }

    /// `Q_n'(x)`.
    pub fn eval_derivative(&self, n: usize, x: f64) -> Result<f64> {
        self.coeffs(n)?;
        let mut vals = vec![0.0; n + 1];
        let mut ders = vec![0.0; n + 1];
        self.values_and_derivatives_into(x, &mut vals, &mut ders);
        Ok(ders[n])
    }

    /// `[<Q_j, Q_k>_S]` for `j, k < len`, integrating with `rule`.
    pub fn gram_matrix(&self, rule: &QuadRule, len: usize) -> Result<Vec<Vec<f64>>> {
        check_rule(&self.params, rule)?;
        if len > self.coeffs.len() {
            return Err(Error::DegreeOutOfRange {
                n: len.saturating_sub(1),
                n_max: self.n_max(),
            });
        }
        let mut g = vec![vec![0.0; len]; len];
        let mut vals = vec![0.0; len];
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            self.values_into(x, &mut vals);
            if let Some(&bad) = vals.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite { x, value: bad });
            }
            for j in 0..len {
                let wj = w * vals[j];
                for k in 0..=j {
                    g[j][k] += wj * vals[k];
                }
            }
        }
        let (mm, nn) = (self.params.mass_m, self.params.mass_n);
        let bd: Vec<_> = self.coeffs[..len]
            .iter()
            .map(ConnectionCoeffs::boundary)
            .collect();
        for j in 0..len {
            for k in 0..=j {
                let (a, b) = (&bd[j], &bd[k]);
                g[j][k] += mm * (a.v_plus * b.v_plus + a.v_minus * b.v_minus)
                    + nn * (a.d_plus * b.d_plus + a.d_minus * b.d_minus);
                g[k][j] = g[j][k];
            }
        }
        Ok(g)
    }

    /// `Q_n` as a [`SobolevFunction`] borrowing this basis.
    pub fn function(&self, n: usize) -> Result<SobolevFunction<'_>> {
        let boundary = self.coeffs(n)?.boundary();
        SobolevFunction::new(move |x| self.values(x, n)[n], boundary)
    }
}

/// `λ_{n,α} = <B_n, B_n>_S^{-1/2}`.
pub fn lambda_norm(params: &SobolevParams, n: usize) -> Result<f64> {
    Ok(connection_coeffs(params, n)?.lambda_n)
}

/// All connection data for a single degree.
pub fn connection_coeffs(params: &SobolevParams, n: usize) -> Result<ConnectionCoeffs> {
    let basis = SobolevBasis::new(*params, n)?;
    Ok(basis.coeffs[n])
}

/// `Q_n^α(x)` for a single degree. Builds a basis on every call; use
/// [`SobolevBasis`] for repeated evaluation.
pub fn eval_q(params: &SobolevParams, n: usize, x: f64) -> Result<f64> {
    SobolevBasis::new(*params, n)?.eval(n, x)
}

/// `Q_n^α'(x)` for a single degree.
pub fn eval_q_derivative(params: &SobolevParams, n: usize, x: f64) -> Result<f64> {
    SobolevBasis::new(*params, n)?.eval_derivative(n, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gegenbauer::{beta_norm, eval_r};
    use crate::numerics::{log_gamma_signed, log_pochhammer_signed, GammaSign};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(alpha: f64, m: f64, n: f64) -> SobolevParams {
        SobolevParams::new(alpha, m, n).unwrap()
    }

    /// (a)_m / m! from log-gamma values, zero for m < 0.
    fn log_space_ratio(a: f64, m: i64) -> f64 {
        if m < 0 {
            return 0.0;
        }
        let (lp, s) = log_pochhammer_signed(a, m as usize);
        let (lf, _) = log_gamma_signed(m as f64 + 1.0);
        s * (lp - lf).exp()
    }

    /// Independent evaluation of the printed a_n, b_n, c_n through log-gamma.
    fn abc_log_space(p: &SobolevParams, n: i64) -> (f64, f64, f64) {
        let (al, mm, nn) = (p.alpha(), p.mass_m(), p.mass_n());
        let s = 2.0 * al + 3.0;
        let rf = |m: i64| match log_gamma_signed(m as f64 + 1.0) {
            (_, GammaSign::Pole) => 0.0,
            (lg, _) => (-lg).exp(),
        };
        let poch_any = |m: i64| {
            let (a, sa) = log_gamma_signed(s + m as f64);
            let (b, sb) = log_gamma_signed(s);
            sa.as_f64() * sb.as_f64() * (a - b).exp()
        };
        let a = mm * nn * 4.0 * log_space_ratio(s, n) * poch_any(n - 2) * rf(n - 2)
            / ((al + 1.0) * (al + 2.0))
            + nn * 2.0 * log_space_ratio(s, n - 1) / (al + 1.0);
        let b =
            -nn / 2.0 * log_space_ratio(s, n - 1) * (n as f64 - 2.0) * (n as f64 + 2.0 * al + 3.0)
                / ((al + 1.0) * (al + 3.0))
                - 2.0 * mm * poch_any(n - 2) * rf(n);
        let c =
            1.0 - nn / 2.0 * poch_any(n + 1) * rf(n - 3) / ((al + 1.0) * (al + 2.0) * (al + 3.0));
        (a, b, c)
    }

    #[test]
    fn parameter_validation() {
        assert!(SobolevParams::new(-0.5, 1.0, 1.0).is_err());
        assert!(SobolevParams::new(0.0, -1.0, 1.0).is_err());
        assert!(SobolevParams::new(0.0, 1.0, f64::NAN).is_err());
        assert_eq!(params(0.3, 0.0, 2.0).regime(), MassRegime::DerivativeOnly);
    }

    #[test]
    fn abc_examples() {
        for &alpha in &[0.0, 0.5, 1.5] {
            let p = params(alpha, 2.0, 0.0);
            for n in 0..30 {
                let abc = abc_coeffs(&p, n);
                assert_eq!(abc.a, 0.0);
                assert_eq!(abc.c, 1.0);
            }
            let p = params(alpha, 1.3, 0.7);
            for n in 0..=2 {
                assert_eq!(abc_coeffs(&p, n).c, 1.0);
            }
        }
    }

    #[test]
    fn abc_agrees_with_log_space_evaluation() {
        // Up to n = 40 the log-gamma route is accurate to ~1e-13.
        for &(alpha, m, nn) in &[
            (0.0, 1.0, 1.0),
            (1.0, 0.0, 2.0),
            (0.5, 3.0, 0.0),
            (1.5, 0.5, 0.25),
        ] {
            let p = params(alpha, m, nn);
            for n in 0..=40 {
                let abc = abc_coeffs(&p, n);
                let (a, b, c) = abc_log_space(&p, n as i64);
                for (x, y) in [(abc.a, a), (abc.b, b), (abc.c, c)] {
                    assert!(
                        (x - y).abs() <= 1e-10 * y.abs().max(1e-300),
                        "n={n} {x} vs {y}"
                    );
                }
            }
        }
    }

    #[test]
    fn b_zero_is_one() {
        let p = params(0.7, 2.0, 3.0);
        for &x in &[-1.0, -0.2, 0.5, 1.0] {
            assert_eq!(eval_b(&p, 0, x), 1.0);
        }
    }

    #[test]
    fn classical_parameters_reduce_to_gegenbauer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = params(0.8, 0.0, 0.0);
        let basis = SobolevBasis::new(p, 40).unwrap();
        for n in 0..=40usize {
            let c = basis.coeffs(n).unwrap();
            assert!((c.lambda_n - beta_norm(n as i64, 0.8)).abs() < 1e-12 * c.lambda_n);
            for _ in 0..5 {
                let x = rng.random_range(-1.0..1.0);
                let r = eval_r(n as i64, 0.8, x);
                assert!((eval_b(&p, n, x) - r).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn value_only_mass_keeps_b_proportional_to_r_for_n_below_two() {
        // b_n carries an M term, but it is multiplied by (-n)_2 = 0 for n < 2.
        let p = params(1.0, 2.0, 0.0);
        for n in 0..2 {
            for &x in &[-0.7, 0.1, 0.9] {
                assert_eq!(eval_b(&p, n, x), eval_r(n as i64, 1.0, x));
            }
        }
        // and it is genuinely different from R_n once n ≥ 2
        let diff = (eval_b(&p, 2, 0.3) - eval_r(2, 1.0, 0.3)).abs();
        assert!(diff > 1e-3);
    }

    #[test]
    fn lambda_small_cases() {
        for &(alpha, m, nn) in &[(0.0, 1.0, 1.0), (1.0, 2.5, 0.0), (0.5, 0.0, 3.0)] {
            let p = params(alpha, m, nn);
            let l0 = lambda_norm(&p, 0).unwrap();
            assert!((l0 - (1.0 + 2.0 * m).powf(-0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn a4_vanishes_without_derivative_mass() {
        let basis = SobolevBasis::new(params(0.5, 1.0, 0.0), 60).unwrap();
        for c in basis.all_coeffs() {
            assert_eq!(c.a4, 0.0);
        }
        let basis = SobolevBasis::new(params(0.5, 1.0, 1.0), 10).unwrap();
        for c in &basis.all_coeffs()[..4] {
            assert_eq!(c.a4, 0.0);
        }
        for c in &basis.all_coeffs()[..2] {
            assert_eq!(c.a2, 0.0);
        }
    }

    #[test]
    fn endpoint_values_match_interior_limit() {
        let basis = SobolevBasis::new(params(1.0, 1.0, 1.0), 30).unwrap();
        let near = 1.0 - 1e-9;
        let inner = basis.values(near, 30);
        let edge = basis.values(1.0, 30);
        for n in 0..=30 {
            assert!(
                (inner[n] - edge[n]).abs() < 1e-5 * edge[n].abs().max(1e-3),
                "n={n}"
            );
        }
    }

    #[test]
    fn sobolev_inner_examples() {
        let rule = build_rule(0.0, 10).unwrap();
        let one = SobolevFunction::from_derivative(|_| 1.0, |_| 0.0).unwrap();
        let x = SobolevFunction::from_derivative(|x| x, |_| 1.0).unwrap();
        let p = params(0.0, 0.7, 1.9);
        assert!((sobolev_inner(&p, &rule, &one, &one).unwrap() - (1.0 + 1.4)).abs() < 1e-14);
        assert!(
            (sobolev_inner(&p, &rule, &x, &x).unwrap() - (1.0 / 3.0 + 1.4 + 3.8)).abs() < 1e-14
        );
        let plain = params(0.0, 0.0, 0.0);
        assert!((sobolev_inner(&plain, &rule, &x, &x).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let wrong = build_rule(1.0, 10).unwrap();
        assert!(sobolev_inner(&p, &wrong, &x, &x).is_err());
    }

    #[test]
    fn single_degree_helpers_agree_with_basis() {
        let p = params(0.5, 1.0, 2.0);
        let basis = SobolevBasis::new(p, 12).unwrap();
        for n in [0usize, 3, 7, 12] {
            let q = eval_q(&p, n, 0.37).unwrap();
            assert!((q - basis.eval(n, 0.37).unwrap()).abs() < 1e-12 * q.abs().max(1.0));
            let dq = eval_q_derivative(&p, n, -0.61).unwrap();
            assert!(
                (dq - basis.eval_derivative(n, -0.61).unwrap()).abs() < 1e-11 * dq.abs().max(1.0)
            );
        }
        assert!(basis.coeffs(13).is_err());
    }

    #[test]
    fn corrupted_lambda_changes_values() {
        let p = params(1.0, 1.0, 1.0);
        let mut basis = SobolevBasis::new(p, 5).unwrap();
        let before = basis.eval(3, 0.2).unwrap();
        basis.corrupt_lambda(1.01);
        assert!((basis.eval(3, 0.2).unwrap() - 1.01 * before).abs() < 1e-14);
    }
}
