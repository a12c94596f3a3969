//! Closed-form higher-order Allan variance of the integrator-chain model.
//!
//! For difference order `N` and model order `n` the variance splits into
//!
//! ```text
//! sigma2_N(tau; t) = sum_{i,j} gamma_i gamma_j / r_0 * E[x_i(t) x_j(t)]      (time dependent)
//!                  + sum_{m<n} r_m / r_0 * q_{m+1}^2 * tau^(2m-1)             (stationary)
//! ```
//!
//! where `gamma_m` vanishes for `m <= N`. The first sum is therefore empty,
//! and the variance depends on `tau` alone, exactly when `N >= n`.
//!
//! All constants are assembled as exact rationals in [`ExactExpression`] and
//! rounded to `f64` once; evaluation then uses Horner form in `tau^2` and `t`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::coeffs::{self, to_f64};
use crate::error::{Error, Result};
use crate::model::ClockModel;

/// One `(tau, sigma^2)` point.
///
/// Analytic points carry the split into time-dependent and stationary parts;
/// empirical points carry the number of blocks averaged instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub tau: f64,
    /// Evaluation time. For empirical points, the mean start time of the
    /// blocks that were averaged.
    pub t: f64,
    pub value: f64,
    #[serde(rename = "time_dependent")]
    pub time_dependent_part: Option<f64>,
    #[serde(rename = "stationary")]
    pub stationary_part: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Analytic,
    Empirical,
}

/// A sweep of variance points over increasing `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceCurve {
    pub kind: CurveKind,
    /// Clock model order, when known.
    pub model_order: Option<usize>,
    pub difference_order: usize,
    /// Evaluation time of an analytic curve.
    pub t: Option<f64>,
    /// Whether the analytic variance is free of `t` (`N >= n`).
    pub time_independent: Option<bool>,
    pub points: Vec<VariancePoint>,
}

/// `E[x_i(t) x_j(t)]` for 1-based state indices.
///
/// Deterministic trend product plus
/// `sum_{m >= max(i,j)} rho_ij^(m) q_m^2 t^(2m-i-j+1)`.
pub fn state_covariance(model: &ClockModel, i: usize, j: usize, t: f64) -> Result<f64> {
    let n = model.order();
    if i == 0 || j == 0 || i > n || j > n {
        return Err(Error::invalid(format!("state index ({i}, {j}) outside 1..={n}")));
    }
    check_time(t)?;
    let trend = model.state_mean(i, t) * model.state_mean(j, t);
    let q2 = model.noise_variances();
    let mut noise = 0.0;
    for m in i.max(j)..=n {
        noise += to_f64(&coeffs::rho(i, j, m)?) * q2[m - 1] * t.powi((2 * m + 1 - i - j) as i32);
    }
    Ok(trend + noise)
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid(format!("evaluation time must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("tau must be positive and finite, got {tau}")));
    }
    Ok(())
}

/// The variance is free of `t` exactly when the difference order reaches the model order.
pub fn is_time_independent(model_order: usize, difference_order: usize) -> bool {
    difference_order >= model_order
}

/// Exact rational coefficients of the closed form for a given `(n, N)`,
/// independent of the noise levels and initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactExpression {
    pub model_order: usize,
    pub difference_order: usize,
    /// `r_m / r_0`: coefficient of `q_{m+1}^2 tau^(2m-1)`, `m = 0..n-1`.
    pub stationary: Vec<BigRational>,
    /// `drift[i-1][j-1] = g_i g_j / ((i-1)! (j-1)! r_0)`: coefficient of
    /// `tau^(i+j-4) E[x_i x_j]`. Zero whenever `i <= N` or `j <= N`.
    pub drift: Vec<Vec<BigRational>>,
}

impl ExactExpression {
    pub fn new(model_order: usize, difference_order: usize) -> Result<Self> {
        if model_order == 0 {
            return Err(Error::invalid("model order must be at least 1"));
        }
        let r0 = BigRational::from_integer(coeffs::r0(difference_order)?);
        let stationary = (0..model_order)
            .map(|m| Ok(coeffs::r_coefficient(difference_order, m)? / &r0))
            .collect::<Result<Vec<_>>>()?;
        let gammas = (1..=model_order)
            .map(|m| coeffs::gamma_rational(difference_order, m))
            .collect::<Result<Vec<_>>>()?;
        let drift = gammas
            .iter()
            .map(|gi| gammas.iter().map(|gj| gi * gj / &r0).collect())
            .collect();
        Ok(ExactExpression {
            model_order,
            difference_order,
            stationary,
            drift,
        })
    }

    /// True when every drift coefficient is zero.
    pub fn is_stationary(&self) -> bool {
        self.drift.iter().flatten().all(Zero::is_zero)
    }
}

#[derive(Debug, Clone)]
struct DriftPair {
    i: usize,
    j: usize,
    coeff: f64,
    /// Exact `rho_ij^(m)` for `m = max(i,j)..=n`, rounded.
    rho: Vec<f64>,
}

/// Closed form bound to a particular model, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct AllanExpression {
    model: ClockModel,
    difference_order: usize,
    exact: ExactExpression,
    stationary: Vec<f64>,
    /// `g_i / (i-1)!` as floats; `gamma_i = drift_weights[i-1] * tau^(i-2)`.
    drift_weights: Vec<f64>,
    inv_r0: f64,
    pairs: Vec<DriftPair>,
}

impl AllanExpression {
    pub fn new(model: &ClockModel, difference_order: usize) -> Result<Self> {
        let n = model.order();
        let exact = ExactExpression::new(n, difference_order)?;
        let q2 = model.noise_variances();
        let stationary = exact
            .stationary
            .iter()
            .zip(q2)
            .map(|(c, q)| to_f64(c) * q)
            .collect();
        let drift_weights = (1..=n)
            .map(|m| coeffs::gamma_rational(difference_order, m).map(|g| to_f64(&g)))
            .collect::<Result<Vec<_>>>()?;
        let inv_r0 = to_f64(&BigRational::new(BigInt::one(), coeffs::r0(difference_order)?));

        let mut pairs = Vec::new();
        for i in 1..=n {
            for j in 1..=n {
                let c = &exact.drift[i - 1][j - 1];
                if c.is_zero() {
                    continue;
                }
                let rho = (i.max(j)..=n)
                    .map(|m| coeffs::rho(i, j, m).map(|r| to_f64(&r)))
                    .collect::<Result<Vec<_>>>()?;
                pairs.push(DriftPair {
                    i,
                    j,
                    coeff: to_f64(c),
                    rho,
                });
            }
        }

        Ok(AllanExpression {
            model: model.clone(),
            difference_order,
            exact,
            stationary,
            drift_weights,
            inv_r0,
            pairs,
        })
    }

    pub fn exact(&self) -> &ExactExpression {
        &self.exact
    }

    pub fn model(&self) -> &ClockModel {
        &self.model
    }

    pub fn difference_order(&self) -> usize {
        self.difference_order
    }

    pub fn is_time_independent(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `sum_m r_m/r_0 q_{m+1}^2 tau^(2m-1)`, Horner in `tau^2`.
    pub fn stationary_part(&self, tau: f64) -> f64 {
        let tau2 = tau * tau;
        self.stationary.iter().rev().fold(0.0, |acc, c| acc * tau2 + c) / tau
    }

    /// First sum of the closed form at time `t`.
    pub fn time_dependent_part(&self, tau: f64, t: f64) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        let n = self.model.order();
        let q2 = self.model.noise_variances();

        // Deterministic trend: (sum_i gamma_i E[x_i])^2 / r_0.
        let trend: f64 = (self.difference_order + 1..=n)
            .map(|i| self.drift_weights[i - 1] * tau.powi(i as i32 - 2) * self.model.state_mean(i, t))
            .sum();
        let trend = trend * trend * self.inv_r0;

        // Stochastic part: per (i, j), t^(2k-i-j+1) * sum_m rho q_m^2 (t^2)^(m-k), k = max(i, j).
        let t2 = t * t;
        let noise: f64 = self
            .pairs
            .iter()
            .map(|p| {
                let k = p.i.max(p.j);
                let poly = p
                    .rho
                    .iter()
                    .zip(&q2[k - 1..n])
                    .rev()
                    .fold(0.0, |acc, (r, q)| acc * t2 + r * q);
                p.coeff * tau.powi((p.i + p.j) as i32 - 4) * t.powi((2 * k + 1 - p.i - p.j) as i32) * poly
            })
            .sum();
        trend + noise
    }

    pub fn evaluate(&self, tau: f64, t: f64) -> Result<VariancePoint> {
        check_tau(tau)?;
        check_time(t)?;
        let time_dependent = self.time_dependent_part(tau, t);
        let stationary = self.stationary_part(tau);
        Ok(VariancePoint {
            tau,
            t,
            value: time_dependent + stationary,
            time_dependent_part: Some(time_dependent),
            stationary_part: Some(stationary),
            blocks: None,
        })
    }
}

/// `sigma2_N(tau; t)` for `model`, with its time-dependent and stationary parts.
///
/// ```
/// use avar::{analytic, ClockModel};
/// let model = ClockModel::from_noise(vec![1.0, 1.0, 1.0]).unwrap();
/// let hadamard = analytic::allan_variance_analytic(&model, 3, 1.0, 0.0).unwrap();
/// assert!((hadamard.value - (1.0 + 1.0 / 6.0 + 11.0 / 120.0)).abs() < 1e-15);
/// ```
pub fn allan_variance_analytic(model: &ClockModel, difference_order: usize, tau: f64, t: f64) -> Result<VariancePoint> {
    AllanExpression::new(model, difference_order)?.evaluate(tau, t)
}

/// Leading large-`t` term `coefficient * t^exponent` of the variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominantTerm {
    pub coefficient: f64,
    pub exponent: i32,
}

/// `gamma_{N+1}^2 / r_0 * rho_{(N+1)(N+1)}^(n) * q_n^2` with exponent `2n - 2N - 1`,
/// or `(0, 0)` when `N >= n`.
pub fn dominant_time_term(model: &ClockModel, difference_order: usize, tau: f64) -> Result<DominantTerm> {
    check_tau(tau)?;
    let n = model.order();
    let r0 = coeffs::r0(difference_order)?;
    if difference_order >= n {
        return Ok(DominantTerm {
            coefficient: 0.0,
            exponent: 0,
        });
    }
    let k = difference_order + 1;
    let g = coeffs::gamma_rational(difference_order, k)?;
    let exact = &g * &g * coeffs::rho(k, k, n)? / BigRational::from_integer(r0);
    let tau_power = tau.powi(2 * (k as i32 - 2));
    Ok(DominantTerm {
        coefficient: to_f64(&exact) * tau_power * model.noise_variances()[n - 1],
        exponent: (2 * n - 2 * difference_order - 1) as i32,
    })
}

/// Analytic variance over a strictly increasing list of `tau` values.
pub fn variance_curve(model: &ClockModel, difference_order: usize, taus: &[f64], t: f64) -> Result<VarianceCurve> {
    if taus.is_empty() {
        return Err(Error::invalid("tau list is empty"));
    }
    if let Some(&bad) = taus.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::invalid(format!("tau values must be positive and finite, got {bad}")));
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("tau values must be strictly increasing"));
    }
    let expr = AllanExpression::new(model, difference_order)?;
    let points = taus
        .iter()
        .map(|&tau| expr.evaluate(tau, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(VarianceCurve {
        kind: CurveKind::Analytic,
        model_order: Some(model.order()),
        difference_order,
        t: Some(t),
        time_independent: Some(expr.is_time_independent()),
        points,
    })
}
