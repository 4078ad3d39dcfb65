//! Lower bounds for `‖G_n‖_{W_p → W_p}` and `‖S_n^γ‖_{L^p → L^p}`.
//!
//! The search space is the polynomials of degree `≤ D`, written in an
//! orthonormal basis (`Q_k^α` or `P_k^γ`). A discretized norm samples each
//! function on the nodes of a Gauss rule plus, for the Sobolev case, the
//! endpoint value and derivative rows that carry a mass. The truncation
//! `T_n` keeps the first `n+1` coefficients, and the probe maximizes
//! `log ‖Φ T_n c‖_p - log ‖Φ c‖_p` by gradient ascent from several starting
//! vectors.
//!
//! At `p = 2` the discretized norm is exactly the Euclidean norm of the
//! coefficients, and the maximum is the top generalized eigenvalue, which is
//! computed directly.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gegenbauer::{check_gamma, OrthonormalTable};
use crate::quadrature::{build_rule, check_exponent};
use crate::sobolev::SobolevBasis;

/// Node count used for a search space of degree `dim`.
pub fn probe_node_count(dim: usize) -> usize {
    4 * dim + 64
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    Node(f64),
    Value(f64),
    Derivative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub max_iterations: usize,
    pub random_starts: usize,
    pub seed: u64,
    /// Stop once an iteration improves the log-ratio by less than this.
    pub tolerance: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            random_starts: 2,
            seed: 42,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    /// Best ratio found; a lower bound for the operator norm.
    pub value: f64,
    /// False if the ascent that produced `value` hit the iteration cap.
    pub converged: bool,
    pub iterations: usize,
}

/// Discretized norm on polynomials of degree `≤ D`.
#[derive(Debug, Clone)]
pub struct ProbeSpace {
    cols: usize,
    /// Row-major `rows × cols` basis samples.
    phi: Vec<f64>,
    mass: Vec<f64>,
    rows: Vec<Row>,
    /// Coefficients of the reproducing kernel at `x = 1`.
    endpoint_kernel: Vec<f64>,
}

impl ProbeSpace {
    /// `Q_0..Q_D` of `basis` with the endpoint rows the masses switch on.
    pub fn sobolev(basis: &SobolevBasis, dim: usize) -> Result<Self> {
        basis.coeffs(dim)?;
        let params = *basis.params();
        let rule = build_rule(params.alpha(), probe_node_count(dim))?;
        let cols = dim + 1;
        let mut phi = Vec::with_capacity((rule.node_count() + 4) * cols);
        let mut mass = Vec::new();
        let mut rows = Vec::new();
        let mut vals = vec![0.0; cols];
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            basis.values_into(x, &mut vals);
            phi.extend_from_slice(&vals);
            mass.push(w);
            rows.push(Row::Node(x));
        }
        let bd: Vec<_> = basis.all_coeffs()[..cols]
            .iter()
            .map(|c| c.boundary())
            .collect();
        if params.mass_m() > 0.0 {
            phi.extend(bd.iter().map(|b| b.v_plus));
            phi.extend(bd.iter().map(|b| b.v_minus));
            mass.extend([params.mass_m(); 2]);
            rows.extend([Row::Value(1.0), Row::Value(-1.0)]);
        }
        if params.mass_n() > 0.0 {
            phi.extend(bd.iter().map(|b| b.d_plus));
            phi.extend(bd.iter().map(|b| b.d_minus));
            mass.extend([params.mass_n(); 2]);
            rows.extend([Row::Derivative(1.0), Row::Derivative(-1.0)]);
        }
        let endpoint_kernel = bd.iter().map(|b| b.v_plus).collect();
        Ok(Self {
            cols,
            phi,
            mass,
            rows,
            endpoint_kernel,
        })
    }

    /// `P_0^γ..P_D^γ` with the plain `L^p(dμ_γ)` norm.
    pub fn classical(gamma: f64, dim: usize) -> Result<Self> {
        check_gamma(gamma)?;
        let rule = build_rule(gamma, probe_node_count(dim))?;
        let table = OrthonormalTable::new(gamma, dim);
        let cols = dim + 1;
        let mut phi = Vec::with_capacity(rule.node_count() * cols);
        let mut vals = vec![0.0; cols];
        for &x in rule.nodes() {
            table.values_into(x, &mut vals);
            phi.extend_from_slice(&vals);
        }
        Ok(Self {
            cols,
            phi,
            mass: rule.weights().to_vec(),
            rows: rule.nodes().iter().map(|&x| Row::Node(x)).collect(),
            endpoint_kernel: table.values(1.0, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.cols - 1
    }

    fn apply(&self, c: &[f64], upto: usize, out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.phi[r * self.cols..r * self.cols + upto];
            *o = row.iter().zip(&c[..upto]).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_transpose(&self, y: &[f64], upto: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            let row = &self.phi[r * self.cols..r * self.cols + upto];
            for (o, a) in out[..upto].iter_mut().zip(row) {
                *o += a * yr;
            }
        }
    }

    /// Coefficients of the function with values `f` and derivative `df`, via
    /// the discrete inner product (exact for polynomials of degree `≤ D`).
    fn project<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(&self, f: F, df: G) -> Vec<f64> {
        let y: Vec<f64> = self
            .rows
            .iter()
            .zip(&self.mass)
            .map(|(row, m)| {
                m * match *row {
                    Row::Node(x) | Row::Value(x) => f(x),
                    Row::Derivative(x) => df(x),
                }
            })
            .collect();
        let mut c = vec![0.0; self.cols];
        self.apply_transpose(&y, self.cols, &mut c);
        c
    }

    /// Discrete `‖Φ c‖_p^p` and `Φᵀ (m ⊙ |Φc|^{p-1} sgn)` restricted to the
    /// first `upto` coefficients.
    fn power_and_gradient(
        &self,
        c: &[f64],
        upto: usize,
        p: f64,
        y: &mut [f64],
        grad: &mut [f64],
    ) -> f64 {
        self.apply(c, upto, y);
        let mut total = 0.0;
        for (v, &m) in y.iter_mut().zip(&self.mass) {
            let a = v.abs();
            total += m * a.powf(p);
            *v = m * v.signum() * a.powf(p - 1.0);
        }
        self.apply_transpose(y, upto, grad);
        grad[upto..].iter_mut().for_each(|g| *g = 0.0);
        total
    }

    fn objective(&self, c: &[f64], n: usize, p: f64, work: &mut Work) -> (f64, Vec<f64>) {
        let upto = n + 1;
        let full = self.power_and_gradient(c, self.cols, p, &mut work.y, &mut work.g_full);
        let trunc = self.power_and_gradient(c, upto, p, &mut work.y, &mut work.g_trunc);
        let value = (trunc.ln() - full.ln()) / p;
        let grad = work
            .g_trunc
            .iter()
            .zip(&work.g_full)
            .map(|(t, f)| t / trunc - f / full)
            .collect();
        (value, grad)
    }

    /// Exact `‖T_n‖` for the discrete `p = 2` norm.
    pub fn exact_p2(&self, n: usize) -> Result<f64> {
        let k = self.cols;
        let mut gram = DMatrix::<f64>::zeros(k, k);
        for (r, &m) in self.mass.iter().enumerate() {
            let row = &self.phi[r * k..(r + 1) * k];
            for i in 0..k {
                let a = m * row[i];
                for j in 0..=i {
                    gram[(i, j)] += a * row[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                gram[(j, i)] = gram[(i, j)];
            }
        }
        let mut top = DMatrix::<f64>::zeros(k, k);
        let upto = (n + 1).min(k);
        top.view_mut((0, 0), (upto, upto))
            .copy_from(&gram.view((0, 0), (upto, upto)));
        let chol = gram.cholesky().ok_or_else(|| {
            Error::LinearAlgebra("discrete Gram matrix is not positive definite".into())
        })?;
        let l = chol.l();
        let linv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::LinearAlgebra("Cholesky factor is singular".into()))?;
        let c = &linv * top * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c);
        let lmax = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(lmax.max(0.0).sqrt())
    }

    fn starts(&self, n: usize, cfg: &ProbeConfig) -> Vec<Vec<f64>> {
        let d = self.dim() as f64;
        let bump = move |x: f64| ((1.0 + x) / 2.0).powf(d) * (1.0 - d * (1.0 - x) / 2.0);
        let dbump = move |x: f64| {
            let b = (1.0 + x) / 2.0;
            d / 2.0 * b.powf(d - 1.0) * (1.0 - d * (1.0 - x) / 2.0) + b.powf(d) * d / 2.0
        };
        let slope = move |x: f64| ((1.0 + x) / 2.0).powf(d) * (x - 1.0);
        let dslope = move |x: f64| {
            let b = (1.0 + x) / 2.0;
            d / 2.0 * b.powf(d - 1.0) * (x - 1.0) + b.powf(d)
        };
        let mut out = vec![
            self.project(bump, dbump),
            self.project(slope, dslope),
            self.endpoint_kernel.clone(),
        ];
        // kernel of degree n, then the part the truncation discards
        let mut tail = self.endpoint_kernel.clone();
        tail[..=n.min(self.dim())]
            .iter_mut()
            .for_each(|v| *v *= 0.5);
        out.push(tail);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((n as u64) << 20) ^ self.cols as u64);
        for _ in 0..cfg.random_starts {
            out.push(
                (0..self.cols)
                    .map(|k| rng.random_range(-1.0..1.0) / (k as f64 + 1.0).sqrt())
                    .collect(),
            );
        }
        out
    }

    fn ascend(
        &self,
        mut c: Vec<f64>,
        n: usize,
        p: f64,
        cfg: &ProbeConfig,
        work: &mut Work,
    ) -> (f64, bool, usize) {
        normalize(&mut c);
        let (mut value, mut grad) = self.objective(&c, n, p, work);
        let mut step = 1.0;
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        for it in 0..cfg.max_iterations {
            let gnorm = dot(&grad, &grad).sqrt();
            if gnorm < 1e-12 {
                return (value, true, it);
            }
            if let Some((pc, pg)) = prev.take() {
                let s: Vec<f64> = c.iter().zip(&pc).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = grad.iter().zip(&pg).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y).abs();
                if sy > 0.0 {
                    step = dot(&s, &s) / sy;
                }
            }
            let mut accepted = None;
            for _ in 0..40 {
                let mut trial: Vec<f64> = c.iter().zip(&grad).map(|(a, g)| a + step * g).collect();
                normalize(&mut trial);
                let (tv, tg) = self.objective(&trial, n, p, work);
                if tv.is_finite() && tv >= value + 1e-4 * step * gnorm * gnorm {
                    accepted = Some((trial, tv, tg));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, tv, tg)) = accepted else {
                return (value, true, it);
            };
            let gain = tv - value;
            prev = Some((
                std::mem::replace(&mut c, trial),
                std::mem::replace(&mut grad, tg),
            ));
            value = tv;
            if gain < cfg.tolerance {
                return (value, true, it + 1);
            }
        }
        (value, false, cfg.max_iterations)
    }

    /// Best lower bound for `‖T_n‖` on this space at exponent `p`.
    pub fn probe(&self, n: usize, p: f64, cfg: &ProbeConfig) -> Result<ProbeResult> {
        check_exponent(p)?;
        if n >= self.dim() {
            return Err(Error::InvalidParameter(format!(
                "search degree {} must exceed the truncation degree {n}",
                self.dim()
            )));
        }
        if p == 2.0 {
            return Ok(ProbeResult {
                value: self.exact_p2(n)?,
                converged: true,
                iterations: 0,
            });
        }
        let mut work = Work::new(self.rows.len(), self.cols);
        let mut best = ProbeResult {
            value: 0.0,
            converged: true,
            iterations: 0,
        };
        for start in self.starts(n, cfg) {
            let (v, converged, iterations) = self.ascend(start, n, p, cfg, &mut work);
            let v = v.exp();
            if v > best.value {
                best = ProbeResult {
                    value: v,
                    converged,
                    iterations,
                };
            }
        }
        Ok(best)
    }
}

struct Work {
    y: Vec<f64>,
    g_full: Vec<f64>,
    g_trunc: Vec<f64>,
}

impl Work {
    fn new(rows: usize, cols: usize) -> Self {
        Self {
            y: vec![0.0; rows],
            g_full: vec![0.0; cols],
            g_trunc: vec![0.0; cols],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(c: &mut [f64]) {
    let norm = dot(c, c).sqrt();
    if norm > 0.0 {
        c.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Lower bound for `‖G_n‖_{W_p^α → W_p^α}` over polynomials of degree
/// `≤ basis_dim`.
pub fn operator_norm_probe(
    basis: &SobolevBasis,
    n: usize,
    p: f64,
    basis_dim: usize,
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    ProbeSpace::sobolev(basis, basis_dim)?.probe(n, p, cfg)
}

/// Lower bound for `‖S_n^γ‖_{L^p(dμ_γ) → L^p(dμ_γ)}`.
pub fn classical_norm_probe(
    gamma: f64,
    n: usize,
    p: f64,
    basis_dim: usize,
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    ProbeSpace::classical(gamma, basis_dim)?.probe(n, p, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sobolev::SobolevParams;

    #[test]
    fn p_two_is_a_projection() {
        let params = SobolevParams::new(1.0, 1.0, 1.0).unwrap();
        let basis = SobolevBasis::new(params, 40).unwrap();
        let space = ProbeSpace::sobolev(&basis, 40).unwrap();
        for n in [0usize, 5, 20, 39] {
            let v = space.probe(n, 2.0, &ProbeConfig::default()).unwrap().value;
            assert!((v - 1.0).abs() < 1e-8, "n={n}: {v}");
        }
    }

    #[test]
    fn ascent_reaches_one_at_p_two() {
        // The iterative path should agree with the exact answer when forced.
        let params = SobolevParams::new(0.5, 1.0, 0.0).unwrap();
        let basis = SobolevBasis::new(params, 24).unwrap();
        let space = ProbeSpace::sobolev(&basis, 24).unwrap();
        let cfg = ProbeConfig::default();
        let mut work = Work::new(space.rows.len(), space.cols);
        let start = space.starts(12, &cfg).remove(0);
        let (v, _, _) = space.ascend(start, 12, 2.0, &cfg, &mut work);
        assert!((v.exp() - 1.0).abs() < 1e-6, "{}", v.exp());
    }

    #[test]
    fn probe_is_at_least_one() {
        // any vector supported on the first n+1 coefficients is fixed by T_n
        let space = ProbeSpace::classical(0.0, 24).unwrap();
        let r = space.probe(8, 3.0, &ProbeConfig::default()).unwrap();
        assert!(r.value >= 1.0 - 1e-12);
    }

    #[test]
    fn projection_reproduces_low_degree_functions() {
        let space = ProbeSpace::classical(0.5, 10).unwrap();
        let c = space.project(|x| 1.0 + x, |_| 1.0);
        let table = OrthonormalTable::new(0.5, 10);
        let v: f64 = table
            .values(0.3, 10)
            .iter()
            .zip(&c)
            .map(|(a, b)| a * b)
            .sum();
        assert!((v - 1.3).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_arguments() {
        let space = ProbeSpace::classical(0.0, 10).unwrap();
        assert!(space.probe(10, 3.0, &ProbeConfig::default()).is_err());
        assert!(space.probe(4, 1.0, &ProbeConfig::default()).is_err());
    }
}
