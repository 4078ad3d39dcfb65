//! Fourier–Sobolev expansions, partial sums, reproducing kernels, `W_p^α`
//! norms and the classical Gegenbauer operators `S_n^γ`, `T_d^{β,γ}`, `R^γ`.

use crate::error::{Error, Result};
use crate::gegenbauer::{check_gamma, OrthonormalTable};
use crate::quadrature::{build_rule, check_exponent, QuadRule};
use crate::sobolev::{BoundaryData, SobolevBasis, SobolevFunction, SobolevParams};

/// Coefficients `f̂(0..=n)` against `Q_0^α..Q_n^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevExpansion {
    params: SobolevParams,
    coeffs: Vec<f64>,
}

impl SobolevExpansion {
    pub fn new(params: SobolevParams, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter(
                "an expansion needs at least one coefficient".into(),
            ));
        }
        Ok(Self { params, coeffs })
    }

    /// The unit vector `e_j` of length `n + 1`.
    pub fn unit(params: SobolevParams, j: usize, n: usize) -> Result<Self> {
        if j > n {
            return Err(Error::DegreeOutOfRange { n: j, n_max: n });
        }
        let mut coeffs = vec![0.0; n + 1];
        coeffs[j] = 1.0;
        Self::new(params, coeffs)
    }

    pub fn params(&self) -> &SobolevParams {
        &self.params
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// The expansion cut to degree `n`.
    pub fn truncated(&self, n: usize) -> Self {
        let len = (n + 1).min(self.coeffs.len());
        Self {
            params: self.params,
            coeffs: self.coeffs[..len].to_vec(),
        }
    }

    /// `Σ f̂(k)²`, the squared `W_2^α` norm of the partial sum.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

/// Coefficients `d_0..d_n` against orthonormal `P_k^γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalExpansion {
    gamma: f64,
    coeffs: Vec<f64>,
}

impl ClassicalExpansion {
    pub fn new(gamma: f64, coeffs: Vec<f64>) -> Result<Self> {
        check_gamma(gamma)?;
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter(
                "an expansion needs at least one coefficient".into(),
            ));
        }
        Ok(Self { gamma, coeffs })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = OrthonormalTable::new(self.gamma, self.degree()).values(x, self.degree());
        p.iter().zip(&self.coeffs).map(|(p, d)| p * d).sum()
    }
}

fn check_basis_params(basis: &SobolevBasis, rule: &QuadRule) -> Result<()> {
    if rule.gamma() != basis.params().alpha() {
        return Err(Error::InvalidParameter(format!(
            "quadrature rule is for gamma = {}, basis needs alpha = {}",
            rule.gamma(),
            basis.params().alpha()
        )));
    }
    Ok(())
}

/// `f̂(k) = <f, Q_k>_S` for `k = 0..=n`.
pub fn sobolev_coeffs(
    basis: &SobolevBasis,
    rule: &QuadRule,
    f: &SobolevFunction<'_>,
    n: usize,
) -> Result<SobolevExpansion> {
    check_basis_params(basis, rule)?;
    basis.coeffs(n)?;
    let mut coeffs = vec![0.0; n + 1];
    let mut q = vec![0.0; n + 1];
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let fx = f.eval(x);
        if !fx.is_finite() {
            return Err(Error::NonFinite { x, value: fx });
        }
        basis.values_into(x, &mut q);
        for (c, qk) in coeffs.iter_mut().zip(&q) {
            *c += w * fx * qk;
        }
    }
    let params = basis.params();
    let fb = f.boundary();
    for (k, c) in coeffs.iter_mut().enumerate() {
        let qb = basis.coeffs(k)?.boundary();
        *c += params.mass_m() * (fb.v_plus * qb.v_plus + fb.v_minus * qb.v_minus)
            + params.mass_n() * (fb.d_plus * qb.d_plus + fb.d_minus * qb.d_minus);
    }
    SobolevExpansion::new(*params, coeffs)
}

fn check_expansion(basis: &SobolevBasis, exp: &SobolevExpansion) -> Result<()> {
    if basis.params() != exp.params() {
        return Err(Error::InvalidParameter(
            "expansion and basis use different parameters".into(),
        ));
    }
    basis.coeffs(exp.degree()).map(|_| ())
}

/// `G_n f(x) = Σ f̂(k) Q_k(x)`.
pub fn partial_sum(basis: &SobolevBasis, exp: &SobolevExpansion, x: f64) -> Result<f64> {
    check_expansion(basis, exp)?;
    let mut q = vec![0.0; exp.coeffs.len()];
    basis.values_into(x, &mut q);
    Ok(q.iter().zip(&exp.coeffs).map(|(q, c)| q * c).sum())
}

/// `(G_n f)'(x)`.
pub fn partial_sum_derivative(basis: &SobolevBasis, exp: &SobolevExpansion, x: f64) -> Result<f64> {
    check_expansion(basis, exp)?;
    let len = exp.coeffs.len();
    let (mut q, mut dq) = (vec![0.0; len], vec![0.0; len]);
    basis.values_and_derivatives_into(x, &mut q, &mut dq);
    Ok(dq.iter().zip(&exp.coeffs).map(|(q, c)| q * c).sum())
}

/// Boundary data of `G_n f`.
pub fn partial_sum_boundary(basis: &SobolevBasis, exp: &SobolevExpansion) -> Result<BoundaryData> {
    check_expansion(basis, exp)?;
    let mut out = BoundaryData::default();
    for (k, &c) in exp.coeffs.iter().enumerate() {
        let b = basis.coeffs(k)?.boundary();
        out.v_plus += c * b.v_plus;
        out.v_minus += c * b.v_minus;
        out.d_plus += c * b.d_plus;
        out.d_minus += c * b.d_minus;
    }
    Ok(out)
}

/// `G_n f` packaged with its own boundary data.
pub fn partial_sum_function<'a>(
    basis: &'a SobolevBasis,
    exp: &'a SobolevExpansion,
) -> Result<SobolevFunction<'a>> {
    let boundary = partial_sum_boundary(basis, exp)?;
    SobolevFunction::new(
        move |x| partial_sum(basis, exp, x).unwrap_or(f64::NAN),
        boundary,
    )
}

/// `L_n(x, y) = Σ_{k≤n} Q_k(x) Q_k(y)`.
pub fn kernel(basis: &SobolevBasis, n: usize, x: f64, y: f64) -> Result<f64> {
    basis.coeffs(n)?;
    let (qx, qy) = (basis.values(x, n), basis.values(y, n));
    // Accumulate in a fixed order so that L_n(x,y) and L_n(y,x) agree bit for bit.
    Ok(qx.iter().zip(&qy).map(|(a, b)| a * b).sum())
}

/// `L_n(x, ·)` as a function of the second variable.
pub fn kernel_section(basis: &SobolevBasis, n: usize, x: f64) -> Result<SobolevFunction<'_>> {
    basis.coeffs(n)?;
    let qx = basis.values(x, n);
    let mut boundary = BoundaryData::default();
    for (k, &a) in qx.iter().enumerate() {
        let b = basis.coeffs(k)?.boundary();
        boundary.v_plus += a * b.v_plus;
        boundary.v_minus += a * b.v_minus;
        boundary.d_plus += a * b.d_plus;
        boundary.d_minus += a * b.d_minus;
    }
    SobolevFunction::new(
        move |y| basis.values(y, n).iter().zip(&qx).map(|(a, b)| a * b).sum(),
        boundary,
    )
}

/// `‖f‖_{W_p^α}` with the integral replaced by `rule`.
pub fn wp_norm(
    params: &SobolevParams,
    rule: &QuadRule,
    f: &SobolevFunction<'_>,
    p: f64,
) -> Result<f64> {
    check_exponent(p)?;
    if rule.gamma() != params.alpha() {
        return Err(Error::InvalidParameter(format!(
            "quadrature rule is for gamma = {}, norm needs alpha = {}",
            rule.gamma(),
            params.alpha()
        )));
    }
    let integral = rule.integrate(|x| f.eval(x).abs().powf(p))?;
    let b = f.boundary();
    let total = integral
        + params.mass_m() * (b.v_plus.abs().powf(p) + b.v_minus.abs().powf(p))
        + params.mass_n() * (b.d_plus.abs().powf(p) + b.d_minus.abs().powf(p));
    Ok(total.powf(1.0 / p))
}

/// `(4(α+1)/(2α+3), 4(α+1)/(2α+1))`, the range of `p` for which `G_n` is
/// uniformly bounded on `W_p^α`.
pub fn p_window(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > -0.5) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must exceed -1/2, got {alpha}"
        )));
    }
    let num = 4.0 * (alpha + 1.0);
    Ok((num / (2.0 * alpha + 3.0), num / (2.0 * alpha + 1.0)))
}

pub fn in_p_window(alpha: f64, p: f64) -> Result<bool> {
    let (lo, hi) = p_window(alpha)?;
    Ok(lo < p && p < hi)
}

/// `d_k^γ(f) = ∫ f P_k^γ dμ_γ` for `k = 0..=n`.
pub fn classical_coeffs<F: Fn(f64) -> f64>(
    rule: &QuadRule,
    f: F,
    n: usize,
) -> Result<ClassicalExpansion> {
    let gamma = rule.gamma();
    let table = OrthonormalTable::new(gamma, n);
    let mut d = vec![0.0; n + 1];
    let mut pk = vec![0.0; n + 1];
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NonFinite { x, value: fx });
        }
        table.values_into(x, &mut pk);
        for (dk, p) in d.iter_mut().zip(&pk) {
            *dk += w * fx * p;
        }
    }
    ClassicalExpansion::new(gamma, d)
}

/// `S_n^γ f(x)`.
pub fn classical_partial_sum<F: Fn(f64) -> f64>(
    gamma: f64,
    rule: &QuadRule,
    f: F,
    n: usize,
    x: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    if rule.gamma() != gamma {
        return Err(Error::InvalidParameter(format!(
            "quadrature rule is for gamma = {}, expected {gamma}",
            rule.gamma()
        )));
    }
    Ok(classical_coeffs(rule, f, n)?.eval(x))
}

/// `T_d^{β,γ} f(x) = Σ_k d_k^γ P_{k+d}^β(x)`, dropping `k + d < 0`.
pub fn transplant(d: i64, beta: f64, exp: &ClassicalExpansion, x: f64) -> Result<f64> {
    check_gamma(beta)?;
    let top = exp.degree() as i64 + d;
    if top < 0 {
        return Ok(0.0);
    }
    let p = OrthonormalTable::new(beta, top as usize).values(x, top as usize);
    Ok(exp
        .coeffs
        .iter()
        .enumerate()
        .filter_map(|(k, c)| {
            let idx = k as i64 + d;
            (idx >= 0).then(|| c * p[idx as usize])
        })
        .sum())
}

/// Coefficients of `R^γ f`: `d_k / (k+1)`.
pub fn multiplier_r(exp: &ClassicalExpansion) -> ClassicalExpansion {
    ClassicalExpansion {
        gamma: exp.gamma,
        coeffs: exp
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, d)| d / (k as f64 + 1.0))
            .collect(),
    }
}

/// `R^γ f(x)`.
pub fn multiplier_r_eval(exp: &ClassicalExpansion, x: f64) -> f64 {
    multiplier_r(exp).eval(x)
}

/// `‖(1-x²)^a f‖_{L^p(dμ_γ)}` on the nodes of `rule`.
pub fn weighted_lp_norm<F: Fn(f64) -> f64>(rule: &QuadRule, f: F, p: f64, a: f64) -> Result<f64> {
    rule.lp_norm(|x| (1.0 - x * x).powf(a) * f(x), p)
}

/// `(∫ |f|^p (1-x²)^e dx)^{1/p}` using a Gauss rule for `(1-x²)^e`.
pub fn jacobi_weighted_lp_norm<F: Fn(f64) -> f64>(
    f: F,
    p: f64,
    exponent: f64,
    node_count: usize,
) -> Result<f64> {
    let rule = build_rule(exponent, node_count)?;
    let scale = crate::gegenbauer::measure_constant(exponent);
    Ok(rule.lp_norm(f, p)? / scale.powf(1.0 / p))
}

/// `|a + (γ+1)(1/p - 1/2)| < 1/4`: uniform boundedness of weighted `S_n^γ`.
pub fn pollard_condition(gamma: f64, p: f64, a: f64) -> bool {
    (a + (gamma + 1.0) * (1.0 / p - 0.5)).abs() < 0.25
}

/// `2(b+1) > -p(β+1/2)`: sufficient condition for weighted transplantation.
pub fn transplant_condition(beta: f64, p: f64, b: f64) -> bool {
    2.0 * (b + 1.0) > -p * (beta + 0.5)
}

/// `|2b+1| < p` and `|2(b+1)/p - 1/2| < min(γ+1, 1/2)`: boundedness of `R^γ`.
pub fn multiplier_condition(gamma: f64, p: f64, b: f64) -> bool {
    (2.0 * b + 1.0).abs() < p && (2.0 * (b + 1.0) / p - 0.5).abs() < (gamma + 1.0).min(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gegenbauer::eval_p;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(alpha: f64, m: f64, n: f64) -> SobolevParams {
        SobolevParams::new(alpha, m, n).unwrap()
    }

    #[test]
    fn window_examples() {
        assert_eq!(p_window(0.0).unwrap(), (4.0 / 3.0, 4.0));
        assert_eq!(p_window(1.0).unwrap(), (8.0 / 5.0, 8.0 / 3.0));
        for &a in &[-0.49, 0.0, 0.3, 1.0, 5.0, 100.0, 1e6] {
            let (lo, hi) = p_window(a).unwrap();
            assert!(lo < 2.0 && 2.0 < hi, "alpha={a}");
        }
        assert!(p_window(-0.5).is_err());
    }

    #[test]
    fn unit_expansion_gives_basis_function() {
        let p = params(0.5, 1.0, 2.0);
        let basis = SobolevBasis::new(p, 10).unwrap();
        let e = SobolevExpansion::unit(p, 7, 10).unwrap();
        for &x in &[-0.8, 0.0, 0.45, 1.0] {
            assert_eq!(
                partial_sum(&basis, &e, x).unwrap(),
                basis.eval(7, x).unwrap()
            );
        }
    }

    #[test]
    fn projection_of_basis_function_is_unit_vector() {
        let p = params(1.0, 1.0, 1.0);
        let basis = SobolevBasis::new(p, 12).unwrap();
        let rule = build_rule(1.0, 30).unwrap();
        let f = basis.function(5).unwrap();
        let c = sobolev_coeffs(&basis, &rule, &f, 12).unwrap();
        for (k, v) in c.coeffs().iter().enumerate() {
            let t = if k == 5 { 1.0 } else { 0.0 };
            assert!((v - t).abs() < 1e-12, "k={k}: {v}");
        }
    }

    #[test]
    fn constant_function_coefficients() {
        let p = params(0.0, 1.5, 2.0);
        let basis = SobolevBasis::new(p, 8).unwrap();
        let rule = build_rule(0.0, 20).unwrap();
        let one = SobolevFunction::from_derivative(|_| 1.0, |_| 0.0).unwrap();
        let c = sobolev_coeffs(&basis, &rule, &one, 8).unwrap();
        assert!((c.coeffs()[0] - 4f64.sqrt()).abs() < 1e-14);
        for v in &c.coeffs()[1..] {
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn polynomials_are_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = params(0.5, 1.0, 1.0);
        let basis = SobolevBasis::new(p, 12).unwrap();
        let rule = build_rule(0.5, 30).unwrap();
        let f = SobolevFunction::from_derivative(
            |x: f64| 3.0 * x.powi(7) - x.powi(4) + 0.5 * x - 2.0,
            |x: f64| 21.0 * x.powi(6) - 4.0 * x.powi(3) + 0.5,
        )
        .unwrap();
        let c = sobolev_coeffs(&basis, &rule, &f, 9).unwrap();
        for _ in 0..64 {
            let x = rng.random_range(-1.0..1.0);
            assert!((partial_sum(&basis, &c, x).unwrap() - f.eval(x)).abs() < 1e-9);
        }
        let b = partial_sum_boundary(&basis, &c).unwrap();
        assert!((b.d_plus - 17.5).abs() < 1e-9 && (b.d_minus - 25.5).abs() < 1e-9);
        assert!((b.v_plus - 0.5).abs() < 1e-9 && (b.v_minus + 6.5).abs() < 1e-9);
    }

    #[test]
    fn kernel_examples() {
        let p = params(1.0, 3.0, 1.0);
        let basis = SobolevBasis::new(p, 20).unwrap();
        assert!((kernel(&basis, 0, 0.3, -0.9).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        for &(x, y) in &[(0.1, 0.7), (-0.99, 0.5), (1.0, -0.3)] {
            assert_eq!(
                kernel(&basis, 20, x, y).unwrap(),
                kernel(&basis, 20, y, x).unwrap()
            );
        }
    }

    #[test]
    fn wp_norm_examples() {
        let rule = build_rule(0.0, 30).unwrap();
        let one = SobolevFunction::from_derivative(|_| 1.0, |_| 0.0).unwrap();
        let x = SobolevFunction::from_derivative(|x| x, |_| 1.0).unwrap();
        let pm = params(0.0, 1.0, 1.0);
        assert!((wp_norm(&pm, &rule, &one, 2.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!(
            (wp_norm(&pm, &rule, &x, 2.0).unwrap() - (1.0 / 3.0 + 4.0f64).sqrt()).abs() < 1e-14
        );
        let plain = params(0.0, 0.0, 0.0);
        let lp = rule.lp_norm(|x| x, 3.0).unwrap();
        assert_eq!(wp_norm(&plain, &rule, &x, 3.0).unwrap(), lp);
        assert!(wp_norm(&pm, &rule, &x, 1.0).is_err());
    }

    #[test]
    fn classical_operators() {
        let rule = build_rule(0.7, 40).unwrap();
        for n in [0usize, 3, 9] {
            assert!(
                (classical_partial_sum(0.7, &rule, |_| 1.0, n, 0.3).unwrap() - 1.0).abs() < 1e-13
            );
        }
        let f = |x: f64| x.powi(5) - 2.0 * x * x;
        assert!((classical_partial_sum(0.7, &rule, f, 6, -0.4).unwrap() - f(-0.4)).abs() < 1e-13);

        let e = ClassicalExpansion::new(0.7, vec![0.0, 0.0, 1.0]).unwrap();
        assert!((transplant(0, 0.7, &e, 0.2).unwrap() - eval_p(2, 0.7, 0.2)).abs() < 1e-15);
        assert!((transplant(3, 1.2, &e, 0.2).unwrap() - eval_p(5, 1.2, 0.2)).abs() < 1e-14);
        assert_eq!(transplant(-3, 1.2, &e, 0.2).unwrap(), 0.0);
        assert!((multiplier_r_eval(&e, 0.2) - eval_p(2, 0.7, 0.2) / 3.0).abs() < 1e-15);
        let twice = multiplier_r(&multiplier_r(&e));
        assert!((twice.coeffs()[2] - 1.0 / 9.0).abs() < 1e-16);
    }

    #[test]
    fn conditions() {
        assert!(pollard_condition(0.0, 2.0, 0.0));
        assert!(!pollard_condition(0.0, 8.0, 0.0));
        assert!(transplant_condition(0.0, 2.0, 0.0));
        assert!(multiplier_condition(0.5, 2.0, -0.2));
        assert!(!multiplier_condition(0.5, 2.0, 3.0));
    }

    #[test]
    fn jacobi_weight_norm_matches_measure() {
        // (1-x²)^0 dx has total mass 2
        let v = jacobi_weighted_lp_norm(|_| 1.0, 2.0, 0.0, 10).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-14);
    }
}
