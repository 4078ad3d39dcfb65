//! Brute-force reference construction of the Sobolev orthonormal family.
//!
//! Gram–Schmidt on the monomials `1, x, ..., x^n` under the Sobolev inner
//! product, carried out in double-double on the exact monomial Gram matrix.
//! Nothing here touches the connection formula, so it serves as an
//! independent check on it. Practical up to degree ~25; the monomial Gram
//! matrix loses about 0.6 decimal digits per degree.

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::sobolev::SobolevParams;

/// `∫ x^k dμ_γ`: zero for odd `k`, `(1/2)_m / (γ+3/2)_m` for `k = 2m`.
pub fn monomial_moment_dd(gamma: f64, k: usize) -> Dd {
    if k % 2 == 1 {
        return Dd::ZERO;
    }
    let mut acc = Dd::ONE;
    for j in 0..k / 2 {
        acc = acc * (0.5 + j as f64) / (gamma + 1.5 + j as f64);
    }
    acc
}

/// `<x^j, x^k>_S` exactly (up to double-double rounding).
pub fn monomial_inner_dd(params: &SobolevParams, j: usize, k: usize) -> Dd {
    let mut g = monomial_moment_dd(params.alpha(), j + k);
    if (j + k) % 2 == 0 {
        g += 2.0 * params.mass_m();
        g += 2.0 * params.mass_n() * (j * k) as f64;
    }
    g
}

/// Orthonormal polynomials with positive leading coefficient, as monomial
/// coefficient rows.
#[derive(Debug, Clone)]
pub struct MonomialGramSchmidt {
    rows: Vec<Vec<Dd>>,
}

impl MonomialGramSchmidt {
    pub fn new(params: &SobolevParams, n_max: usize) -> Result<Self> {
        let size = n_max + 1;
        // Cholesky G = L Lᵀ; the orthonormal family is L⁻¹ applied to the monomials.
        let mut l = vec![vec![Dd::ZERO; size]; size];
        for i in 0..size {
            for j in 0..=i {
                let mut s = monomial_inner_dd(params, i, j);
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if !(s.to_f64() > 0.0) {
                        return Err(Error::LinearAlgebra(format!(
                            "monomial Gram matrix is numerically singular at degree {i}"
                        )));
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        let mut rows = vec![vec![Dd::ZERO; size]; size];
        for i in 0..size {
            rows[i][i] = l[i][i].recip();
            for j in (0..i).rev() {
                let mut s = Dd::ZERO;
                for k in j + 1..=i {
                    s += rows[i][k] * l[k][j];
                }
                rows[i][j] = -(s / l[j][j]);
            }
        }
        Ok(Self { rows })
    }

    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    /// Monomial coefficients of the degree-`n` member, constant term first.
    pub fn coefficients(&self, n: usize) -> &[Dd] {
        &self.rows[n][..=n]
    }

    pub fn eval(&self, n: usize, x: f64) -> f64 {
        let mut acc = Dd::ZERO;
        for &c in self.coefficients(n).iter().rev() {
            acc = acc * x + c;
        }
        acc.to_f64()
    }

    pub fn eval_derivative(&self, n: usize, x: f64) -> f64 {
        let mut acc = Dd::ZERO;
        for (k, &c) in self.coefficients(n).iter().enumerate().skip(1).rev() {
            acc = acc * x + c * k as f64;
        }
        acc.to_f64()
    }
}
