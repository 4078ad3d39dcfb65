//! Gauss rules for `dμ_γ` and discrete `L^p(dμ_γ)` norms.

use crate::error::{Error, Result};
use crate::gegenbauer::{check_gamma, jacobi_offdiag, OrthonormalTable};

/// Relative node-doubling agreement required by [`lp_norm_converged`].
pub const LP_DOUBLING_TOLERANCE: f64 = 1e-6;

/// A `K`-point Gauss rule for the probability measure `dμ_γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    gamma: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadRule {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Σ w_i f(x_i).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, value: v });
            }
            sum += w * v;
        }
        Ok(sum)
    }

    /// Discrete `(Σ w_i |f(x_i)|^p)^{1/p}`.
    pub fn lp_norm<F: Fn(f64) -> f64>(&self, f: F, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let sum = self.integrate(|x| f(x).abs().powf(p))?;
        Ok(sum.powf(1.0 / p))
    }

    /// p-th power of the discrete norm of already sampled values.
    pub fn lp_power_of_samples(&self, samples: &[f64], p: f64) -> f64 {
        self.weights
            .iter()
            .zip(samples)
            .map(|(w, v)| w * v.abs().powf(p))
            .sum()
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "exponent must satisfy 1 < p < inf, got {p}"
        )));
    }
    Ok(())
}

/// Builds the `node_count`-point Gauss rule for `dμ_γ`.
///
/// Nodes and weights come from the eigen-decomposition of the symmetric
/// tridiagonal Jacobi matrix (Golub-Welsch), followed by a Newton polish
/// of each node on `P_K^γ` and Christoffel weights `1 / Σ_{k<K} P_k(x)²`.
pub fn build_rule(gamma: f64, node_count: usize) -> Result<QuadRule> {
    check_gamma(gamma)?;
    if node_count == 0 {
        return Err(Error::InvalidParameter(
            "a quadrature rule needs at least one node".into(),
        ));
    }
    let k = node_count;
    let mut diag = vec![0.0; k];
    let mut offdiag: Vec<f64> = (1..k).map(|j| jacobi_offdiag(gamma, j)).collect();
    offdiag.push(0.0);
    let mut first = vec![0.0; k];
    first[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut offdiag, &mut first).ok_or(Error::EigenSolve { size: k })?;

    let mut pairs: Vec<(f64, f64)> = diag
        .into_iter()
        .zip(first.into_iter().map(|z| z * z))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let table = OrthonormalTable::new(gamma, k);
    let mut vals = vec![0.0; k + 1];
    let mut ders = vec![0.0; k + 1];
    for pair in pairs.iter_mut() {
        let mut x = pair.0;
        for _ in 0..3 {
            table.values_and_derivatives_into(x, &mut vals, &mut ders);
            if ders[k] == 0.0 {
                break;
            }
            let step = vals[k] / ders[k];
            if !step.is_finite() {
                break;
            }
            x -= step;
        }
        table.values_into(x, &mut vals[..k]);
        let christoffel: f64 = vals[..k].iter().map(|v| v * v).sum();
        *pair = (x, 1.0 / christoffel);
    }

    // Enforce the exact ± symmetry of the measure.
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k {
        let j = k - 1 - i;
        nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
        weights[i] = 0.5 * (pairs[i].1 + pairs[j].1);
    }
    if k % 2 == 1 {
        nodes[k / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadRule {
        gamma,
        nodes,
        weights,
    })
}

/// Implicit QL for a symmetric tridiagonal matrix. `offdiag[i]` couples rows
/// `i` and `i+1` (last entry ignored). Only the first component of each
/// eigenvector is tracked, in `first`. Returns `None` on non-convergence.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], first: &mut [f64]) -> Option<()> {
    let n = d.len();
    if n == 1 {
        return Some(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return None;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let fz = first[i + 1];
                first[i + 1] = s * first[i] + c * fz;
                first[i] = c * first[i] - s * fz;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Some(())
}

/// An `L^p(dμ_γ)` norm together with its node-doubling check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpNormEstimate {
    pub value: f64,
    /// Value from the rule with twice as many nodes.
    pub doubled: f64,
    pub relative_change: f64,
}

impl LpNormEstimate {
    pub fn converged(&self) -> bool {
        self.relative_change < LP_DOUBLING_TOLERANCE
    }
}

/// Evaluates `‖f‖_{L^p(dμ_γ)}` with `node_count` and `2·node_count` nodes
/// and reports both; the doubled value is the one to use.
pub fn lp_norm_converged<F: Fn(f64) -> f64>(
    gamma: f64,
    node_count: usize,
    f: F,
    p: f64,
) -> Result<LpNormEstimate> {
    let coarse = build_rule(gamma, node_count)?.lp_norm(&f, p)?;
    let fine = build_rule(gamma, 2 * node_count)?.lp_norm(&f, p)?;
    let relative_change = if fine == 0.0 {
        (coarse - fine).abs()
    } else {
        ((coarse - fine) / fine).abs()
    };
    Ok(LpNormEstimate {
        value: coarse,
        doubled: fine,
        relative_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::pochhammer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_node_rule() {
        let rule = build_rule(0.0, 1).unwrap();
        assert_eq!(rule.nodes(), &[0.0]);
        assert_eq!(rule.weights(), &[1.0]);
    }

    #[test]
    fn second_moment() {
        for &gamma in &[-0.5, 0.0, 0.5, 2.0] {
            for k in 2..12 {
                let rule = build_rule(gamma, k).unwrap();
                let m2 = rule.integrate(|x| x * x).unwrap();
                assert!(
                    (m2 - 1.0 / (2.0 * gamma + 3.0)).abs() < 1e-12,
                    "gamma={gamma} k={k}"
                );
            }
        }
    }

    #[test]
    fn weights_sum_to_one_and_are_symmetric() {
        for &gamma in &[-0.9, -0.5, 0.0, 1.0, 5.5] {
            for &k in &[1usize, 2, 3, 10, 51, 200, 1088] {
                let rule = build_rule(gamma, k).unwrap();
                let total: f64 = rule.weights().iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
                assert!(rule.weights().iter().all(|&w| w > 0.0));
                assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
                for i in 0..k {
                    assert_eq!(rule.nodes()[i], -rule.nodes()[k - 1 - i]);
                    assert_eq!(rule.weights()[i], rule.weights()[k - 1 - i]);
                }
                assert!(rule.nodes().iter().all(|x| x.abs() < 1.0));
                let zeros = rule.nodes().iter().filter(|&&x| x == 0.0).count();
                assert_eq!(zeros, k % 2);
            }
        }
    }

    #[test]
    fn moments_match_closed_form() {
        for &gamma in &[-0.5, 0.0, 0.5, 1.0, 1.5] {
            let rule = build_rule(gamma, 32).unwrap();
            for m in 0..=20 {
                let even = rule.integrate(|x| x.powi(2 * m)).unwrap();
                let exact = pochhammer(0.5, m as usize) / pochhammer(gamma + 1.5, m as usize);
                assert!((even - exact).abs() < 1e-10 * exact, "gamma={gamma} m={m}");
                let odd = rule.integrate(|x| x.powi(2 * m + 1)).unwrap();
                assert!(odd.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_for_random_polynomials_of_top_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &gamma in &[0.0, 0.75] {
            for k in 1..10usize {
                let deg = 2 * k - 1;
                let coeffs: Vec<f64> = (0..=deg).map(|_| rng.random_range(-1.0..1.0)).collect();
                let poly = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
                let exact: f64 = coeffs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| j % 2 == 0)
                    .map(|(j, c)| c * pochhammer(0.5, j / 2) / pochhammer(gamma + 1.5, j / 2))
                    .sum();
                let rule = build_rule(gamma, k).unwrap();
                assert!((rule.integrate(poly).unwrap() - exact).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn integrate_examples() {
        let rule = build_rule(0.0, 8).unwrap();
        assert!((rule.integrate(|_| 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((rule.integrate(|x| x * x).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            rule.integrate(|x| 1.0 / x.abs().min(0.0)),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn lp_norm_examples() {
        let rule = build_rule(0.0, 16).unwrap();
        for &p in &[1.5, 2.0, 7.0] {
            assert!((rule.lp_norm(|_| -2.5, p).unwrap() - 2.5).abs() < 1e-14);
        }
        assert!((rule.lp_norm(|x| x, 2.0).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!(rule.lp_norm(|x| x, 1.0).is_err());

        let est = lp_norm_converged(0.5, 40, f64::exp, 3.0).unwrap();
        assert!(est.converged(), "{est:?}");
    }

    #[test]
    fn lp_norm_is_monotone_under_domination() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rule = build_rule(1.0, 24).unwrap();
        for _ in 0..50 {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(0.0..1.0);
            let p = rng.random_range(1.1..6.0);
            let f = |x: f64| a * (3.0 * x).sin();
            let g = |x: f64| a.abs() + b * x * x;
            assert!(rule.lp_norm(f, p).unwrap() <= rule.lp_norm(g, p).unwrap());
        }
    }
}
