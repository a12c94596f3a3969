//! Self-checks of the theory against independent computations.
//!
//! Each [`Check`] records what was measured, what was expected, and the
//! tolerance that was fixed before the run. Statistical checks use fixed
//! seeds, so a report is reproducible bit for bit.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analytic::{AllanExpression, ExactExpression};
use crate::coeffs;
use crate::error::Result;
use crate::estimate::{self, BAND_SIGMAS, MAX_LAG};
use crate::io::format_sci;
use crate::model::{build_noise_covariance, ClockModel};
use crate::simulate::{simulate, simulate_realization, SimulationConfig};

/// Normalized coefficients `r_m / r_0` for `N = 2..=10`, rounded to five
/// significant figures.
pub const REFERENCE_TABLE: [&[f64]; 9] = [
    &[1.0000e+00, 3.3333e-01],
    &[1.0000e+00, 1.6667e-01, 9.1667e-02],
    &[1.0000e+00, 1.3333e-01, 3.3333e-02, 2.3968e-02],
    &[1.0000e+00, 1.1905e-01, 2.2619e-02, 6.9444e-03, 6.1488e-03],
    &[1.0000e+00, 1.1111e-01, 1.8254e-02, 4.1005e-03, 1.4863e-03, 1.5632e-03],
    &[1.0000e+00, 1.0606e-01, 1.5909e-02, 3.0123e-03, 7.7687e-04, 3.2460e-04, 3.9542e-04],
    &[1.0000e+00, 1.0256e-01, 1.4452e-02, 2.4531e-03, 5.2278e-04, 1.5218e-04, 7.2018e-05, 9.9720e-05],
    &[
        1.0000e+00, 1.0000e-01, 1.3462e-02, 2.1170e-03, 3.9850e-04, 9.4365e-05, 3.0604e-05, 1.6180e-05, 2.5098e-05,
    ],
    &[
        1.0000e+00, 9.8039e-02, 1.2745e-02, 1.8943e-03, 3.2660e-04, 6.7492e-05, 1.7582e-05, 6.2864e-06, 3.6723e-06,
        6.3080e-06,
    ],
];

/// Relative tolerance of the Monte-Carlo variance checks.
pub const MONTE_CARLO_REL_TOL: f64 = 0.05;
/// Relative tolerance of the closed-form noise covariance against quadrature.
pub const QUADRATURE_REL_TOL: f64 = 1e-10;
/// Allowed deviation of the fitted growth exponent.
pub const EXPONENT_TOL: f64 = 0.3;
/// Allowed deviation of the fitted growth slope, in standard errors.
pub const SLOPE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check_name: String,
    pub status: Status,
    pub measured: Value,
    pub expected: Value,
    pub tolerance: Value,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, measured: Value, expected: Value, tolerance: Value) -> Self {
        Check {
            check_name: name.into(),
            status: if pass { Status::Pass } else { Status::Fail },
            measured,
            expected,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Scale and seeds of the statistical checks.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    /// Samples per path for the Monte-Carlo variance and IID checks.
    pub samples: usize,
    pub seed: u64,
    /// Paths in the growth-exponent ensemble.
    pub trend_paths: usize,
    /// Samples per path in the growth-exponent ensemble.
    pub trend_samples: usize,
    pub windows: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 1_000_000,
            seed: 2024,
            trend_paths: 100,
            trend_samples: 200_001,
            windows: 10,
        }
    }
}

fn rational_json(r: &BigRational) -> Value {
    Value::String(r.to_string())
}

/// Every reference coefficient, compared at five significant figures.
pub fn check_reference_table() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (row, reference) in REFERENCE_TABLE.iter().enumerate() {
        let order = row + 2;
        let r0 = BigRational::from_integer(coeffs::r0(order)?);
        let computed = (0..order)
            .map(|m| Ok(coeffs::to_f64(&(coeffs::r_coefficient(order, m)? / &r0))))
            .collect::<Result<Vec<f64>>>()?;
        let measured: Vec<String> = computed.iter().map(|v| format_sci(*v, 4)).collect();
        let expected: Vec<String> = reference.iter().map(|v| format_sci(*v, 4)).collect();
        out.push(Check::new(
            format!("coefficient_table_N{order}"),
            measured == expected,
            json!(measured),
            json!(expected),
            json!("5 significant figures"),
        ));
    }
    Ok(out)
}

/// Exact closed forms of the Allan (`N = 2`) and Hadamard (`N = 3`) variance
/// of a third-order clock.
pub fn check_worked_examples() -> Result<Vec<Check>> {
    let q = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
    let mut out = Vec::new();

    let allan = ExactExpression::new(3, 2)?;
    // Coefficients of c_3^2 tau^2 (and q_3^2 t tau^2), q_1^2/tau, q_2^2 tau, q_3^2 tau^3.
    let mut measured = vec![allan.drift[2][2].clone()];
    measured.extend(allan.stationary.iter().cloned());
    let only_33 = allan
        .drift
        .iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(j, c)| (i == 2 && j == 2) || c.is_zero()));
    let expected = vec![q(1, 2), q(1, 1), q(1, 3), q(23, 60)];
    out.push(Check::new(
        "worked_example_allan_n3",
        only_33 && measured == expected,
        json!(measured.iter().map(rational_json).collect::<Vec<_>>()),
        json!(expected.iter().map(rational_json).collect::<Vec<_>>()),
        json!("exact"),
    ));

    let hadamard = ExactExpression::new(3, 3)?;
    let expected = vec![q(1, 1), q(1, 6), q(11, 120)];
    out.push(Check::new(
        "worked_example_hadamard_n3",
        hadamard.is_stationary() && hadamard.stationary == expected,
        json!(hadamard.stationary.iter().map(rational_json).collect::<Vec<_>>()),
        json!(expected.iter().map(rational_json).collect::<Vec<_>>()),
        json!("exact"),
    ));
    Ok(out)
}

/// Moment-matrix kernel against binomial weights for `N = 1..=max_order`.
pub fn check_kernels(max_order: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for order in 1..=max_order {
        let kernel = coeffs::vandermonde_kernel(order)?;
        let mut weights = coeffs::binomial_weights(order)?;
        weights.reverse();
        out.push(Check::new(
            format!("binomial_kernel_N{order}"),
            coeffs::is_proportional(&kernel, &weights),
            json!(kernel.iter().map(rational_json).collect::<Vec<_>>()),
            json!(weights.iter().map(|w| w.to_string()).collect::<Vec<_>>()),
            json!("proportional, exact"),
        ));
    }
    Ok(out)
}

/// `g_m = 0` for `m <= N` and `g_m != 0` for `N < m <= N + 4`.
pub fn check_drift_vanishing(max_order: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for order in 1..=max_order {
        let sums = (1..=order + 4)
            .map(|m| coeffs::gamma_sum(order, m))
            .collect::<Result<Vec<_>>>()?;
        let pass = sums.iter().enumerate().all(|(k, g)| g.is_zero() == (k < order));
        out.push(Check::new(
            format!("drift_vanishing_N{order}"),
            pass,
            json!(sums.iter().map(|g| g.to_string()).collect::<Vec<_>>()),
            json!(format!("zero for m=1..{order}, nonzero for m={}..{}", order + 1, order + 4)),
            json!("exact"),
        ));
    }
    Ok(out)
}

/// Closed-form `Q_tau` against quadrature of its defining integral.
pub fn check_noise_covariance(max_model_order: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in 1..=max_model_order {
        let q2: Vec<f64> = (1..=n).map(|i| 1.0 / i as f64 + 0.5).collect();
        let model = ClockModel::from_noise(q2)?;
        for &tau in &[0.1, 1.0, 10.0] {
            let closed = build_noise_covariance(&model, tau)?;
            let quad = oracle::quadrature_noise_covariance(&model, tau);
            let rel = closed
                .iter()
                .zip(quad.iter())
                .map(|(a, b)| (a - b).abs() / b.abs())
                .fold(0.0, f64::max);
            out.push(Check::new(
                format!("noise_covariance_n{n}_tau{tau}"),
                rel <= QUADRATURE_REL_TOL,
                json!(rel),
                json!(0.0),
                json!(QUADRATURE_REL_TOL),
            ));
        }
    }
    Ok(out)
}

/// Empirical variance of one long path against the analytic stationary value,
/// plus the autocorrelation check on the same blocks.
pub fn check_monte_carlo(config: &VerifyConfig, model_order: usize, order: usize) -> Result<Vec<Check>> {
    let model = ClockModel::from_noise(vec![1.0; model_order])?;
    let expected = AllanExpression::new(&model, order)?.stationary_part(1.0);
    let seed = config.seed.wrapping_add((model_order * 16 + order) as u64);
    let y = simulate_realization(&SimulationConfig::new(model, 1.0, config.samples, seed), 0)?;
    let point = estimate::empirical_allan(&y, order, 1)?;
    let rel = (point.value - expected).abs() / expected;
    let mut out = vec![Check::new(
        format!("monte_carlo_n{model_order}_N{order}"),
        rel <= MONTE_CARLO_REL_TOL,
        json!(point.value),
        json!(expected),
        json!(format!("{MONTE_CARLO_REL_TOL} relative")),
    )];

    if order >= model_order {
        let agg = estimate::aggregate(&y, order)?;
        let acf = estimate::autocorrelations(&agg.blocks, MAX_LAG);
        let limit = BAND_SIGMAS / (agg.blocks.len() as f64).sqrt();
        let worst = acf.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        out.push(Check::new(
            format!("iid_autocorrelation_n{model_order}_N{order}"),
            worst <= limit,
            json!(worst),
            json!(0.0),
            json!(limit),
        ));
    }
    Ok(out)
}

/// Window variances of a third-order clock: flat for `N = 3`, growing like `t` for `N = 2`.
pub fn check_time_dependence(config: &VerifyConfig) -> Result<Vec<Check>> {
    let model = ClockModel::from_noise(vec![1.0; 3])?;
    let mut out = Vec::new();

    let y = simulate_realization(&SimulationConfig::new(model.clone(), 1.0, config.samples, config.seed ^ 0x5eed), 0)?;
    let report = estimate::stationarity_report(&y, 3, config.windows)?;
    out.push(Check::new(
        "time_independent_window_ratio_n3_N3",
        report.variance_ratio <= report.variance_ratio_limit,
        json!(report.variance_ratio),
        json!(1.0),
        json!(report.variance_ratio_limit),
    ));

    let cfg = SimulationConfig::new(model.clone(), 1.0, config.trend_samples, config.seed ^ 0x7e3d)
        .realizations(config.trend_paths);
    let paths = simulate(&cfg)?;
    let windows = 2 * config.windows;
    let fit = estimate::time_dependence_fit(&paths, 2, windows)?;
    let expected_exponent = (2 * model.order() - 2 * 2 - 1) as f64;
    out.push(Check::new(
        "growth_exponent_n3_N2",
        (fit.exponent - expected_exponent).abs() <= EXPONENT_TOL,
        json!(fit.exponent),
        json!(expected_exponent),
        json!(EXPONENT_TOL),
    ));

    let expr = AllanExpression::new(&model, 2)?;
    let (t0, t1) = (fit.window_times[0], *fit.window_times.last().expect("windows"));
    let expected_slope = (expr.time_dependent_part(1.0, t1) - expr.time_dependent_part(1.0, t0)) / (t1 - t0);
    out.push(Check::new(
        "growth_slope_n3_N2",
        (fit.slope - expected_slope).abs() <= SLOPE_SIGMAS * fit.slope_stderr,
        json!(fit.slope),
        json!(expected_slope),
        json!(SLOPE_SIGMAS * fit.slope_stderr),
    ));
    Ok(out)
}

/// The full suite.
pub fn run(config: &VerifyConfig) -> Result<Vec<Check>> {
    let mut checks = check_reference_table()?;
    checks.extend(check_worked_examples()?);
    checks.extend(check_kernels(10)?);
    checks.extend(check_drift_vanishing(12)?);
    checks.extend(check_noise_covariance(6)?);
    for (n, order) in [(1, 2), (2, 2), (3, 3)] {
        checks.extend(check_monte_carlo(config, n, order)?);
    }
    checks.extend(check_time_dependence(config)?);
    Ok(checks)
}

/// Independent numerical routes used to cross-check the closed forms.
pub mod oracle {
    use super::*;

    /// Continuous-time drift matrix: ones on the first superdiagonal.
    pub fn drift_matrix(order: usize) -> DMatrix<f64> {
        DMatrix::from_fn(order, order, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
    }

    /// `exp(A tau)` by a general-purpose Pade matrix exponential.
    pub fn expm_transition(order: usize, tau: f64) -> DMatrix<f64> {
        (drift_matrix(order) * tau).exp()
    }

    /// Gauss-Legendre nodes and weights on `[-1, 1]`.
    pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
        let n = points;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut deriv;
            loop {
                // Legendre recurrence for P_n(z) and P_{n-1}(z).
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
                }
                deriv = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let prev = z;
                z = prev - p1 / deriv;
                if (z - prev).abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * deriv * deriv);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    }

    /// `int_0^tau exp(A s) Q exp(A^T s) ds` by 24-point Gauss-Legendre quadrature
    /// with a general matrix exponential at each node. The integrand is a
    /// polynomial of degree `2n - 2`, so the rule is exact for `n <= 24`.
    pub fn quadrature_noise_covariance(model: &ClockModel, tau: f64) -> DMatrix<f64> {
        let n = model.order();
        let q = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(model.noise_variances()));
        let a = drift_matrix(n);
        let (nodes, weights) = gauss_legendre(24);
        let mut acc = DMatrix::zeros(n, n);
        for (x, w) in nodes.iter().zip(&weights) {
            let s = 0.5 * tau * (x + 1.0);
            let e = (&a * s).exp();
            acc += (&e * &q * e.transpose()) * (0.5 * tau * w);
        }
        acc
    }

}
