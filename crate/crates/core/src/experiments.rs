//! Verification experiments and their machine-readable reports.
//!
//! Each command returns an [`ExperimentReport`]: a configuration echo and a
//! flat list of [`Record`]s. Rows that carry a threshold have `pass` set;
//! purely informational rows leave it empty. Reports depend only on the
//! configuration (including the seed), so repeated runs are byte-identical.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::numerics::{fit_power_law, least_squares_line};
use crate::operators::{p_window, sobolev_coeffs};
use crate::probe::{ProbeConfig, ProbeSpace};
use crate::quadrature::build_rule;
use crate::reference::monomial_moment_dd;
use crate::sobolev::{
    printed_norm_identity, MassRegime, SobolevBasis, SobolevFunction, SobolevParams,
};

pub const ORTHO_TOLERANCE: f64 = 1e-9;
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;
pub const MOMENT_TOLERANCE: f64 = 1e-10;
pub const MOMENT_MAX_ORDER: usize = 20;
pub const EXPONENT_TOLERANCE: f64 = 0.05;
pub const FLAT_COEFF_TOLERANCE: f64 = 0.02;
pub const ENDPOINT_R2_MIN: f64 = 0.999;
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
pub const MIN_ASYMPTOTIC_NMAX: usize = 64;
pub const PROBE_P2_TOLERANCE: f64 = 1e-8;
pub const PROBE_BOUNDED_SLOPE: f64 = 0.02;
pub const PROBE_GROWTH_SLOPE: f64 = 0.05;
pub const MIN_NORMS_NMAX: usize = 32;
pub const SUP_SLOPE_TOLERANCE: f64 = 0.03;
pub const SUP_N_RANGE: (usize, usize) = (16, 200);
pub const EXP_ERROR_AT_32: f64 = 1e-8;
pub const WINDOW_ERROR_AT_64: f64 = 1e-6;
pub const RUNGE_RATE_BOUND: f64 = -0.1;
pub const RUNGE_N_RANGE: (usize, usize) = (16, 64);
pub const MONOTONE_FROM: usize = 4;
pub const CORRUPT_LAMBDA_FACTOR: f64 = 1.01;

/// Interior exponent used when none is given: `1/p` sits 4/11 of the way
/// from `1/2` to the upper window edge (this gives `p = 2.2` at `α = 1`).
pub fn default_interior_p(alpha: f64) -> Result<f64> {
    let (_, hi) = p_window(alpha)?;
    Ok(1.0 / (0.5 - 4.0 / 11.0 * (0.5 - 1.0 / hi)))
}

/// Exterior exponent used when none is given.
pub fn default_exterior_p(alpha: f64) -> Result<f64> {
    let (_, hi) = p_window(alpha)?;
    Ok((2.0 * hi).max(6.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    Exp,
    Runge,
    AbsPower,
}

impl TestFunction {
    pub fn id(self) -> &'static str {
        match self {
            TestFunction::Exp => "exp",
            TestFunction::Runge => "runge",
            TestFunction::AbsPower => "abs_power",
        }
    }

    pub fn value(self, x: f64) -> f64 {
        match self {
            TestFunction::Exp => x.exp(),
            TestFunction::Runge => 1.0 / (1.0 + 25.0 * x * x),
            TestFunction::AbsPower => x.abs().powf(2.5),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            TestFunction::Exp => x.exp(),
            TestFunction::Runge => -50.0 * x / (1.0 + 25.0 * x * x).powi(2),
            TestFunction::AbsPower => 2.5 * x.signum() * x.abs().powf(1.5),
        }
    }
}

impl std::str::FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(TestFunction::Exp),
            "runge" => Ok(TestFunction::Runge),
            "abs_power" => Ok(TestFunction::AbsPower),
            other => Err(Error::UnknownFunction(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub mass_m: f64,
    pub mass_n: f64,
    pub n_max: usize,
    pub p_list: Vec<f64>,
    pub quad_nodes: usize,
    pub grid_size: usize,
    pub format: OutputFormat,
    pub seed: u64,
    /// Negative control: scale every `λ_n`, `n ≥ 1`, by [`CORRUPT_LAMBDA_FACTOR`].
    pub corrupt_lambda: bool,
}

impl ExperimentConfig {
    pub fn new(alpha: f64, mass_m: f64, mass_n: f64, n_max: usize) -> Self {
        Self {
            alpha,
            mass_m,
            mass_n,
            n_max,
            p_list: vec![2.0],
            quad_nodes: Self::min_quad_nodes(n_max),
            grid_size: 2048,
            format: OutputFormat::Csv,
            seed: 42,
            corrupt_lambda: false,
        }
    }

    pub fn min_quad_nodes(n_max: usize) -> usize {
        4 * n_max + 64
    }

    pub fn params(&self) -> Result<SobolevParams> {
        SobolevParams::new(self.alpha, self.mass_m, self.mass_n)
    }

    pub fn validate(&self) -> Result<SobolevParams> {
        let params = self.params()?;
        if self.n_max < 8 {
            return Err(Error::InvalidParameter(format!(
                "nmax must be at least 8, got {}",
                self.n_max
            )));
        }
        if let Some(&p) = self.p_list.iter().find(|&&p| !(p > 1.0 && p.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "every p must satisfy 1 < p < inf, got {p}"
            )));
        }
        if self.p_list.is_empty() {
            return Err(Error::InvalidParameter("the p list is empty".into()));
        }
        let min_nodes = Self::min_quad_nodes(self.n_max);
        if self.quad_nodes < min_nodes {
            return Err(Error::InvalidParameter(format!(
                "quad-nodes must be at least 4*nmax+64 = {min_nodes}, got {}",
                self.quad_nodes
            )));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid must have at least 2 points, got {}",
                self.grid_size
            )));
        }
        Ok(params)
    }

    fn basis(&self, params: SobolevParams, n_max: usize) -> Result<SobolevBasis> {
        let mut basis = SobolevBasis::new(params, n_max)?;
        if self.corrupt_lambda {
            basis.corrupt_lambda(CORRUPT_LAMBDA_FACTOR);
        }
        Ok(basis)
    }
}

/// How a row's value is compared with its target.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Check {
    /// `|value - target| <= tolerance`
    Within,
    /// `|value - target| < tolerance`
    StrictlyWithin,
    /// `value < target + tolerance`
    Below,
    /// `value >= target`
    AtLeast,
    /// `value > target`
    Above,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub experiment: String,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub value: f64,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

impl Record {
    pub fn info(experiment: &str, n: Option<usize>, p: Option<f64>, value: f64) -> Self {
        Self {
            experiment: experiment.to_string(),
            n,
            p,
            value,
            target: None,
            tolerance: None,
            pass: None,
        }
    }

    fn checked(
        experiment: &str,
        n: Option<usize>,
        p: Option<f64>,
        value: f64,
        target: f64,
        tolerance: f64,
        check: Check,
    ) -> Self {
        let pass = value.is_finite()
            && match check {
                Check::Within => (value - target).abs() <= tolerance,
                Check::StrictlyWithin => (value - target).abs() < tolerance,
                Check::Below => value < target + tolerance,
                Check::AtLeast => value >= target,
                Check::Above => value > target,
            };
        Self {
            experiment: experiment.to_string(),
            n,
            p,
            value,
            target: Some(target),
            tolerance: Some(tolerance),
            pass: Some(pass),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub command: String,
    pub config: ExperimentConfig,
    pub records: Vec<Record>,
}

/// Seventeen significant digits.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn json_real(v: f64) -> Box<RawValue> {
    let text = if v.is_finite() {
        format_real(v)
    } else {
        "null".to_string()
    };
    RawValue::from_string(text).expect("formatted reals are valid JSON")
}

#[derive(Serialize)]
struct JsonConfig<'a> {
    command: &'a str,
    alpha: Box<RawValue>,
    mass_m: Box<RawValue>,
    mass_n: Box<RawValue>,
    n_max: usize,
    p_list: Vec<Box<RawValue>>,
    quad_nodes: usize,
    grid_size: usize,
    format: OutputFormat,
    seed: u64,
    debug_corrupt_lambda: bool,
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    experiment: &'a str,
    alpha: Box<RawValue>,
    #[serde(rename = "M")]
    mass_m: Box<RawValue>,
    #[serde(rename = "N")]
    mass_n: Box<RawValue>,
    n: Option<usize>,
    p: Option<Box<RawValue>>,
    value: Box<RawValue>,
    target: Option<Box<RawValue>>,
    tolerance: Option<Box<RawValue>>,
    pass: Option<bool>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: JsonConfig<'a>,
    records: Vec<JsonRecord<'a>>,
}

pub const CSV_HEADER: &str = "experiment,alpha,M,N,n,p,value,target,tolerance,pass";

impl ExperimentReport {
    fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            config: config.clone(),
            records: Vec::new(),
        }
    }

    /// Rows that carry a threshold.
    pub fn checks(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.pass.is_some())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.pass == Some(false))
    }

    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn find(&self, experiment: &str) -> impl Iterator<Item = &Record> + '_ {
        let experiment = experiment.to_string();
        self.records
            .iter()
            .filter(move |r| r.experiment == experiment)
    }

    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let opt = |v: Option<f64>| v.map(format_real).unwrap_or_default();
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.experiment,
                format_real(c.alpha),
                format_real(c.mass_m),
                format_real(c.mass_n),
                r.n.map(|n| n.to_string()).unwrap_or_default(),
                opt(r.p),
                format_real(r.value),
                opt(r.target),
                opt(r.tolerance),
                r.pass.map(|b| b.to_string()).unwrap_or_default(),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let c = &self.config;
        let report = JsonReport {
            config: JsonConfig {
                command: &self.command,
                alpha: json_real(c.alpha),
                mass_m: json_real(c.mass_m),
                mass_n: json_real(c.mass_n),
                n_max: c.n_max,
                p_list: c.p_list.iter().map(|&p| json_real(p)).collect(),
                quad_nodes: c.quad_nodes,
                grid_size: c.grid_size,
                format: c.format,
                seed: c.seed,
                debug_corrupt_lambda: c.corrupt_lambda,
            },
            records: self
                .records
                .iter()
                .map(|r| JsonRecord {
                    experiment: &r.experiment,
                    alpha: json_real(c.alpha),
                    mass_m: json_real(c.mass_m),
                    mass_n: json_real(c.mass_n),
                    n: r.n,
                    p: r.p.map(json_real),
                    value: json_real(r.value),
                    target: r.target.map(json_real),
                    tolerance: r.tolerance.map(json_real),
                    pass: r.pass,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self) -> String {
        match self.config.format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

/// Gram-matrix orthonormality of `Q_0..Q_nmax`, the printed norm identity
/// as a diagnostic, and the health of the quadrature rule.
pub fn cmd_ortho(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let params = config.validate()?;
    let mut report = ExperimentReport::new("ortho", config);
    let basis = config.basis(params, config.n_max)?;
    let rule = build_rule(params.alpha(), config.quad_nodes)?;
    let gram = basis.gram_matrix(&rule, config.n_max + 1)?;

    let mut worst: f64 = 0.0;
    for (j, row) in gram.iter().enumerate() {
        let err = row
            .iter()
            .enumerate()
            .map(|(k, &v)| (v - if j == k { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        report.records.push(Record::checked(
            "gram_row_error",
            Some(j),
            None,
            err,
            0.0,
            ORTHO_TOLERANCE,
            Check::StrictlyWithin,
        ));
    }
    report.records.push(Record::checked(
        "gram_max_error",
        None,
        None,
        worst,
        0.0,
        ORTHO_TOLERANCE,
        Check::StrictlyWithin,
    ));

    for (n, c) in basis.all_coeffs().iter().enumerate() {
        let ratio = printed_norm_identity(&params, n) * c.lambda_n * c.lambda_n;
        report.records.push(Record::info(
            "printed_norm_identity_ratio",
            Some(n),
            None,
            ratio,
        ));
    }

    let weight_sum: f64 = rule.weights().iter().sum();
    report.records.push(Record::checked(
        "quadrature_weight_sum",
        None,
        None,
        weight_sum,
        1.0,
        WEIGHT_SUM_TOLERANCE,
        Check::Within,
    ));
    for m in 0..=MOMENT_MAX_ORDER {
        let exact = monomial_moment_dd(params.alpha(), 2 * m).to_f64();
        let approx = rule.integrate(|x| x.powi(2 * m as i32))?;
        report.records.push(Record::checked(
            "quadrature_even_moment_rel_error",
            Some(m),
            None,
            ((approx - exact) / exact).abs(),
            0.0,
            MOMENT_TOLERANCE,
            Check::Within,
        ));
    }
    Ok(report)
}

/// Expected fitted exponent of each tracked quantity in a regime, or `None`
/// if the quantity vanishes identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentTargets {
    pub lambda: f64,
    pub a4: Option<f64>,
    pub a2: Option<f64>,
    pub a0: f64,
    pub coeff_tolerance: f64,
    pub value_at_one: f64,
    pub derivative_at_one: f64,
}

pub fn exponent_targets(params: &SobolevParams) -> ExponentTargets {
    let a = params.alpha();
    let decay = -(2.0 * a + 2.0);
    let (lambda, a4, a2, a0, tol) = match params.regime() {
        MassRegime::DerivativeOnly => (-a - 5.5, Some(0.0), Some(0.0), 0.0, FLAT_COEFF_TOLERANCE),
        MassRegime::Both => (
            -3.0 * a - 7.5,
            Some(0.0),
            Some(decay),
            decay,
            EXPONENT_TOLERANCE,
        ),
        MassRegime::ValueOnly => (-a - 1.5, None, Some(0.0), decay, EXPONENT_TOLERANCE),
        MassRegime::Classical => (a + 0.5, None, None, 0.0, EXPONENT_TOLERANCE),
    };
    ExponentTargets {
        lambda,
        a4,
        a2,
        a0,
        coeff_tolerance: tol,
        value_at_one: if params.mass_m() > 0.0 {
            -a - 1.5
        } else {
            a + 0.5
        },
        derivative_at_one: if params.mass_n() > 0.0 {
            -a - 3.5
        } else {
            a + 2.5
        },
    }
}

fn slope_rows(
    report: &mut ExperimentReport,
    name: &str,
    samples: &[(usize, f64)],
    target: f64,
    tolerance: f64,
    r2_min: Option<f64>,
) -> Result<()> {
    let fit = fit_power_law(samples)?;
    report.records.push(Record::checked(
        &format!("{name}_slope"),
        None,
        None,
        fit.slope,
        target,
        tolerance,
        Check::Within,
    ));
    let r2 = match r2_min {
        Some(min) => Record::checked(
            &format!("{name}_r2"),
            None,
            None,
            fit.r_squared,
            min,
            0.0,
            Check::Above,
        ),
        None => Record::info(&format!("{name}_r2"), None, None, fit.r_squared),
    };
    report.records.push(r2);
    Ok(())
}

/// Fitted growth exponents of `λ_n`, the connection coefficients and the
/// endpoint values over `n ∈ [nmax/4, nmax]`.
pub fn cmd_asymptotics(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let params = config.validate()?;
    if config.n_max < MIN_ASYMPTOTIC_NMAX {
        return Err(Error::InvalidParameter(format!(
            "asymptotic fits need nmax >= {MIN_ASYMPTOTIC_NMAX}, got {}",
            config.n_max
        )));
    }
    let mut report = ExperimentReport::new("asymptotics", config);
    let basis = config.basis(params, config.n_max)?;
    let targets = exponent_targets(&params);
    let lo = config.n_max / 4;
    let window = &basis.all_coeffs()[lo..];
    let series = |f: &dyn Fn(&crate::sobolev::ConnectionCoeffs) -> f64| -> Vec<(usize, f64)> {
        window.iter().map(|c| (c.n, f(c))).collect()
    };

    for c in window {
        report
            .records
            .push(Record::info("lambda", Some(c.n), None, c.lambda_n));
    }
    slope_rows(
        &mut report,
        "lambda",
        &series(&|c| c.lambda_n),
        targets.lambda,
        EXPONENT_TOLERANCE,
        None,
    )?;

    let coeff_rows = [
        ("a4", targets.a4, series(&|c| c.a4)),
        ("a2", targets.a2, series(&|c| c.a2)),
        ("a0", Some(targets.a0), series(&|c| c.a0)),
    ];
    for (name, target, samples) in coeff_rows {
        match target {
            Some(t) => slope_rows(
                &mut report,
                name,
                &samples,
                t,
                targets.coeff_tolerance,
                None,
            )?,
            None => {
                let max_abs = basis
                    .all_coeffs()
                    .iter()
                    .map(|c| coefficient(name, c).abs())
                    .fold(0.0, f64::max);
                report.records.push(Record::checked(
                    &format!("{name}_max_abs"),
                    None,
                    None,
                    max_abs,
                    0.0,
                    0.0,
                    Check::Within,
                ));
            }
        }
    }

    // Q_n(-1) assembled from the connection formula at x = -1, independently of parity.
    let mut at_minus = vec![0.0; config.n_max + 1];
    basis.values_from_connection_into(-1.0, &mut at_minus);
    let q_plus = series(&|c| c.value_at_one);
    let q_minus: Vec<(usize, f64)> = window.iter().map(|c| (c.n, at_minus[c.n])).collect();
    let dq_plus = series(&|c| c.derivative_at_one);
    let dq_minus = series(&|c| c.boundary().d_minus);
    for c in window {
        report
            .records
            .push(Record::info("q_plus", Some(c.n), None, c.value_at_one));
        report.records.push(Record::info(
            "dq_plus",
            Some(c.n),
            None,
            c.derivative_at_one,
        ));
    }
    let r2 = Some(ENDPOINT_R2_MIN);
    slope_rows(
        &mut report,
        "q_plus",
        &q_plus,
        targets.value_at_one,
        EXPONENT_TOLERANCE,
        r2,
    )?;
    slope_rows(
        &mut report,
        "q_minus",
        &q_minus,
        targets.value_at_one,
        EXPONENT_TOLERANCE,
        r2,
    )?;
    slope_rows(
        &mut report,
        "dq_plus",
        &dq_plus,
        targets.derivative_at_one,
        EXPONENT_TOLERANCE,
        r2,
    )?;
    slope_rows(
        &mut report,
        "dq_minus",
        &dq_minus,
        targets.derivative_at_one,
        EXPONENT_TOLERANCE,
        r2,
    )?;

    let asym = basis
        .all_coeffs()
        .iter()
        .map(|c| {
            let (a, b) = (c.value_at_one.abs(), at_minus[c.n].abs());
            (a - b).abs() / a.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    report.records.push(Record::checked(
        "endpoint_symmetry_rel_error",
        None,
        None,
        asym,
        0.0,
        SYMMETRY_TOLERANCE,
        Check::Within,
    ));
    Ok(report)
}

fn coefficient(name: &str, c: &crate::sobolev::ConnectionCoeffs) -> f64 {
    match name {
        "a4" => c.a4,
        "a2" => c.a2,
        _ => c.a0,
    }
}

/// Nine degrees from `nmax/4` to `nmax`, evenly spaced.
pub fn probe_degrees(n_max: usize) -> Vec<usize> {
    let lo = n_max / 4;
    let mut out: Vec<usize> = (0..9).map(|i| lo + (n_max - lo) * i / 8).collect();
    out.dedup();
    out
}

fn chebyshev_grid(size: usize) -> Vec<f64> {
    (0..size)
        .map(|j| ((j as f64 + 0.5) * std::f64::consts::PI / size as f64).cos())
        .collect()
}

/// Operator-norm probes over the `(n, p)` grid, the weighted sup scan of
/// `Q_n` and (for `M > 0`) the endpoint kernel scan.
pub fn cmd_norms(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let params = config.validate()?;
    if config.n_max < MIN_NORMS_NMAX {
        return Err(Error::InvalidParameter(format!(
            "norm probes need nmax >= {MIN_NORMS_NMAX}, got {}",
            config.n_max
        )));
    }
    let mut report = ExperimentReport::new("norms", config);
    let sup_hi = SUP_N_RANGE.1.min(2 * config.n_max);
    let basis = config.basis(params, (2 * config.n_max).max(sup_hi))?;
    let probe_cfg = ProbeConfig {
        seed: config.seed,
        ..ProbeConfig::default()
    };
    let (lo, hi) = p_window(params.alpha())?;

    for &p in &config.p_list {
        if p == 2.0 {
            let space = ProbeSpace::sobolev(&basis, 2 * config.n_max)?;
            let values: Vec<f64> = (0..=config.n_max)
                .into_par_iter()
                .map(|n| space.exact_p2(n))
                .collect::<Result<_>>()?;
            for (n, v) in values.into_iter().enumerate() {
                report.records.push(Record::checked(
                    "probe_p2",
                    Some(n),
                    Some(p),
                    v,
                    1.0,
                    PROBE_P2_TOLERANCE,
                    Check::Within,
                ));
            }
            continue;
        }
        let degrees = probe_degrees(config.n_max);
        let results: Vec<_> = degrees
            .par_iter()
            .map(|&n| ProbeSpace::sobolev(&basis, 2 * n).and_then(|s| s.probe(n, p, &probe_cfg)))
            .collect::<Result<_>>()?;
        let mut samples = Vec::with_capacity(degrees.len());
        for (&n, r) in degrees.iter().zip(&results) {
            report
                .records
                .push(Record::info("probe", Some(n), Some(p), r.value));
            report.records.push(Record::info(
                "probe_converged",
                Some(n),
                Some(p),
                if r.converged { 1.0 } else { 0.0 },
            ));
            samples.push((n, r.value));
        }
        let fit = fit_power_law(&samples)?;
        let row = if lo < p && p < hi {
            Record::checked(
                "probe_slope_inside",
                None,
                Some(p),
                fit.slope,
                0.0,
                PROBE_BOUNDED_SLOPE,
                Check::Below,
            )
        } else if p < lo || p > hi {
            Record::checked(
                "probe_slope_outside",
                None,
                Some(p),
                fit.slope,
                PROBE_GROWTH_SLOPE,
                0.0,
                Check::AtLeast,
            )
        } else {
            Record::info("probe_slope_edge", None, Some(p), fit.slope)
        };
        report.records.push(row);
    }

    let scan = weighted_sup_scan(&basis, config.grid_size, SUP_N_RANGE.0, sup_hi)?;
    let mut q = Vec::new();
    let mut k = Vec::new();
    for s in &scan {
        report
            .records
            .push(Record::info("q_weighted_sup", Some(s.n), None, s.q));
        q.push((s.n, s.q));
        if params.mass_m() > 0.0 {
            report.records.push(Record::info(
                "kernel_weighted_sup",
                Some(s.n),
                None,
                s.kernel,
            ));
            k.push((s.n, s.kernel));
        }
    }
    let fit = fit_power_law(&q)?;
    report.records.push(Record::checked(
        "q_weighted_sup_slope",
        None,
        None,
        fit.slope,
        0.0,
        SUP_SLOPE_TOLERANCE,
        Check::StrictlyWithin,
    ));
    if !k.is_empty() {
        let fit = fit_power_law(&k)?;
        report.records.push(Record::checked(
            "kernel_weighted_sup_slope",
            None,
            None,
            fit.slope,
            0.0,
            SUP_SLOPE_TOLERANCE,
            Check::StrictlyWithin,
        ));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupScanRow {
    pub n: usize,
    /// `max (1-x²)^{α/2+1/4} |Q_n(x)|` over the grid.
    pub q: f64,
    /// `max (1-x²)^{α/2+1/4} |L_n(x,1)|` over the grid.
    pub kernel: f64,
}

/// Weighted sup of `Q_n` and `L_n(·,1)` on a Chebyshev grid, for
/// `n = lo, lo+8, ..., hi`.
pub fn weighted_sup_scan(
    basis: &SobolevBasis,
    grid_size: usize,
    lo: usize,
    hi: usize,
) -> Result<Vec<SupScanRow>> {
    basis.coeffs(hi)?;
    let alpha = basis.params().alpha();
    let degrees: Vec<usize> = (lo..=hi).step_by(8).collect();
    let at_one: Vec<f64> = basis.all_coeffs()[..=hi]
        .iter()
        .map(|c| c.value_at_one)
        .collect();
    let grid = chebyshev_grid(grid_size);
    let partial: Vec<Vec<(f64, f64)>> = grid
        .par_chunks(64)
        .map(|chunk| {
            let mut best = vec![(0.0f64, 0.0f64); degrees.len()];
            let mut v = vec![0.0; hi + 1];
            for &x in chunk {
                basis.values_into(x, &mut v);
                let w = (1.0 - x * x).powf(alpha / 2.0 + 0.25);
                let mut kern = 0.0;
                let mut next = 0;
                for (n, (&q, &q1)) in v.iter().zip(&at_one).enumerate() {
                    kern += q * q1;
                    if next < degrees.len() && degrees[next] == n {
                        best[next].0 = best[next].0.max(w * q.abs());
                        best[next].1 = best[next].1.max(w * kern.abs());
                        next += 1;
                    }
                }
            }
            best
        })
        .collect();
    Ok(degrees
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let (q, kernel) = partial
                .iter()
                .fold((0.0f64, 0.0f64), |(a, b), c| (a.max(c[i].0), b.max(c[i].1)));
            SupScanRow { n, q, kernel }
        })
        .collect())
}

/// `‖G_n f - f‖_{W_p}` for `n = 0..=nmax` on the given rule, from samples
/// of `f` and of `Q_k` at the nodes.
fn partial_sum_errors(
    basis: &SobolevBasis,
    coeffs: &[f64],
    f: TestFunction,
    node_count: usize,
    p: f64,
) -> Result<Vec<f64>> {
    let params = basis.params();
    let n_max = coeffs.len() - 1;
    let rule = build_rule(params.alpha(), node_count)?;
    let mut integral = vec![0.0; n_max + 1];
    let mut q = vec![0.0; n_max + 1];
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        basis.values_into(x, &mut q);
        let fx = f.value(x);
        let mut g = 0.0;
        for n in 0..=n_max {
            g += coeffs[n] * q[n];
            integral[n] += w * (fx - g).abs().powf(p);
        }
    }
    let fb = [
        f.value(1.0),
        f.value(-1.0),
        f.derivative(1.0),
        f.derivative(-1.0),
    ];
    let mut gb = [0.0; 4];
    let mut out = Vec::with_capacity(n_max + 1);
    for (n, &c) in coeffs.iter().enumerate() {
        let b = basis.coeffs(n)?.boundary();
        gb[0] += c * b.v_plus;
        gb[1] += c * b.v_minus;
        gb[2] += c * b.d_plus;
        gb[3] += c * b.d_minus;
        let e: Vec<f64> = fb
            .iter()
            .zip(&gb)
            .map(|(a, b)| (a - b).abs().powf(p))
            .collect();
        let total = integral[n] + params.mass_m() * (e[0] + e[1]) + params.mass_n() * (e[2] + e[3]);
        out.push(total.powf(1.0 / p));
    }
    Ok(out)
}

fn count_increases(values: &[f64], from: usize) -> usize {
    values
        .windows(2)
        .skip(from)
        .filter(|w| w[1] >= w[0])
        .count()
}

/// `‖G_n f - f‖_{W_p}` against `n` for a built-in test function.
pub fn cmd_converge(config: &ExperimentConfig, function: TestFunction) -> Result<ExperimentReport> {
    let params = config.validate()?;
    let mut report = ExperimentReport::new(&format!("converge:{}", function.id()), config);
    let basis = config.basis(params, config.n_max)?;
    let rule = build_rule(params.alpha(), config.quad_nodes)?;
    let f = SobolevFunction::from_derivative(
        move |x| function.value(x),
        move |x| function.derivative(x),
    )?;
    let exp = sobolev_coeffs(&basis, &rule, &f, config.n_max)?;
    let coeffs = exp.coeffs();
    let (lo, hi) = p_window(params.alpha())?;

    let per_p: Vec<(f64, Vec<f64>, Vec<f64>)> = config
        .p_list
        .par_iter()
        .map(|&p| {
            let coarse = partial_sum_errors(&basis, coeffs, function, config.quad_nodes, p)?;
            let fine = partial_sum_errors(&basis, coeffs, function, 2 * config.quad_nodes, p)?;
            Ok((p, coarse, fine))
        })
        .collect::<Result<_>>()?;

    for (p, coarse, fine) in per_p {
        for (n, &e) in fine.iter().enumerate() {
            report
                .records
                .push(Record::info("wp_error", Some(n), Some(p), e));
        }
        // node-doubling agreement, over errors well above the coefficient noise floor
        let doubling = coarse
            .iter()
            .zip(&fine)
            .filter(|(_, &b)| b > 1e-10)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        report
            .records
            .push(Record::info("max_doubling_change", None, Some(p), doubling));

        let inside = lo < p && p < hi;
        match function {
            TestFunction::Exp => {
                if p == 2.0 && config.n_max >= 32 {
                    report.records.push(Record::checked(
                        "error_at_32",
                        Some(32),
                        Some(p),
                        fine[32],
                        0.0,
                        EXP_ERROR_AT_32,
                        Check::Below,
                    ));
                    // Parseval: the W_2 error of G_n is the tail of the coefficient sequence.
                    let mut tails = vec![0.0; coeffs.len()];
                    let mut acc = 0.0f64;
                    for k in (0..coeffs.len()).rev() {
                        tails[k] = acc.sqrt();
                        acc += coeffs[k] * coeffs[k];
                    }
                    report.records.push(Record::info(
                        "parseval_tail",
                        Some(32),
                        Some(p),
                        tails[32],
                    ));
                    report.records.push(Record::checked(
                        "parseval_tail_increases",
                        None,
                        Some(p),
                        count_increases(&tails[..coeffs.len() - 1], MONOTONE_FROM) as f64,
                        0.0,
                        0.0,
                        Check::Within,
                    ));
                }
                if inside {
                    let floor = fine.iter().position(|&e| e < 1e-12).unwrap_or(fine.len());
                    report.records.push(Record::checked(
                        "error_increases_above_floor",
                        None,
                        Some(p),
                        count_increases(&fine[..floor], MONOTONE_FROM) as f64,
                        0.0,
                        0.0,
                        Check::Within,
                    ));
                    if config.n_max >= 64 {
                        report.records.push(Record::checked(
                            "error_at_64",
                            Some(64),
                            Some(p),
                            fine[64],
                            0.0,
                            WINDOW_ERROR_AT_64,
                            Check::Below,
                        ));
                    }
                }
            }
            TestFunction::Runge => {
                let top = RUNGE_N_RANGE.1.min(config.n_max);
                if inside && top > RUNGE_N_RANGE.0 {
                    let ns: Vec<f64> = (RUNGE_N_RANGE.0..=top).map(|n| n as f64).collect();
                    let logs: Vec<f64> = (RUNGE_N_RANGE.0..=top).map(|n| fine[n].ln()).collect();
                    let (rate, _, _) = least_squares_line(&ns, &logs);
                    report.records.push(Record::checked(
                        "log_error_rate",
                        None,
                        Some(p),
                        rate,
                        RUNGE_RATE_BOUND,
                        0.0,
                        Check::Below,
                    ));
                }
            }
            TestFunction::AbsPower => {
                let samples: Vec<(usize, f64)> = (config.n_max / 4..=config.n_max)
                    .filter(|n| n % 2 == 0)
                    .map(|n| (n, fine[n]))
                    .collect();
                let fit = fit_power_law(&samples)?;
                report
                    .records
                    .push(Record::info("error_power_slope", None, Some(p), fit.slope));
            }
        }
    }
    Ok(report)
}
