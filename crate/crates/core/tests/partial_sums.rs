use gsobolev::operators::{
    classical_partial_sum, kernel_section, partial_sum, partial_sum_function, sobolev_coeffs,
};
use gsobolev::sobolev::sobolev_inner;
use gsobolev::{build_rule, SobolevBasis, SobolevFunction, SobolevParams};
use proptest::prelude::*;

fn runge(x: f64) -> f64 {
    1.0 / (1.0 + 25.0 * x * x)
}

fn runge_d(x: f64) -> f64 {
    -50.0 * x / (1.0 + 25.0 * x * x).powi(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partial_sum_is_idempotent(a in 0usize..4, mn in 0usize..4, n in 2usize..30) {
        let alpha = [0.0, 0.5, 1.0, 1.5][a];
        let (m, nn) = [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)][mn];
        let params = SobolevParams::new(alpha, m, nn).unwrap();
        let basis = SobolevBasis::new(params, n).unwrap();
        let rule = build_rule(alpha, 4 * n + 64).unwrap();
        let f = SobolevFunction::from_derivative(runge, runge_d).unwrap();
        let once = sobolev_coeffs(&basis, &rule, &f, n).unwrap();
        let g = partial_sum_function(&basis, &once).unwrap();
        let twice = sobolev_coeffs(&basis, &rule, &g, n).unwrap();
        for (u, v) in once.coeffs().iter().zip(twice.coeffs()) {
            prop_assert!((u - v).abs() < 1e-11, "{} vs {}", u, v);
        }
    }

    #[test]
    fn bessel_inequality(a in 0usize..4, n in 2usize..40) {
        let alpha = [0.0, 0.5, 1.0, 1.5][a];
        let params = SobolevParams::new(alpha, 1.0, 1.0).unwrap();
        let basis = SobolevBasis::new(params, n).unwrap();
        let rule = build_rule(alpha, 4 * n + 64).unwrap();
        let f = SobolevFunction::from_derivative(runge, runge_d).unwrap();
        let exp = sobolev_coeffs(&basis, &rule, &f, n).unwrap();
        let norm_sq = sobolev_inner(&params, &rule, &f, &f).unwrap();
        prop_assert!(exp.energy() <= norm_sq * (1.0 + 1e-12));
    }
}

#[test]
fn kernel_reproduces_polynomials() {
    let params = SobolevParams::new(1.0, 2.0, 0.5).unwrap();
    let n = 12;
    let basis = SobolevBasis::new(params, n).unwrap();
    let rule = build_rule(1.0, 64).unwrap();
    for &y in &[-1.0, -0.4, 0.0, 0.73, 1.0] {
        let section = kernel_section(&basis, n, y).unwrap();
        for k in 0..=n {
            let qk = basis.function(k).unwrap();
            let ip = sobolev_inner(&params, &rule, &section, &qk).unwrap();
            let want = basis.eval(k, y).unwrap();
            assert!(
                (ip - want).abs() < 1e-10 * want.abs().max(1.0),
                "y={y} k={k}: {ip} vs {want}"
            );
        }
    }
}

#[test]
fn massless_partial_sum_is_the_classical_one() {
    for &alpha in &[0.0, 0.5, 1.5] {
        let params = SobolevParams::new(alpha, 0.0, 0.0).unwrap();
        let n = 20;
        let basis = SobolevBasis::new(params, n).unwrap();
        let rule = build_rule(alpha, 4 * n + 64).unwrap();
        let f = SobolevFunction::from_derivative(runge, runge_d).unwrap();
        let exp = sobolev_coeffs(&basis, &rule, &f, n).unwrap();
        for &x in &[-0.9, -0.2, 0.35, 0.8] {
            let s = partial_sum(&basis, &exp, x).unwrap();
            let c = classical_partial_sum(alpha, &rule, runge, n, x).unwrap();
            assert!((s - c).abs() < 1e-12, "alpha={alpha} x={x}: {s} vs {c}");
        }
    }
}
