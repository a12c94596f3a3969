//! Continuous-time clock model and its exact discrete-time equivalent.
//!
//! The model is a chain of `n` integrators driven by independent white
//! Gaussian noises:
//!
//! ```text
//! dx_i/dt = x_{i+1} + v_i      (i < n)
//! dx_n/dt = v_n
//! y(t)    = x_1(t)
//! ```
//!
//! with `E[v_i(t) v_i(s)] = q_i^2 delta(t - s)` and deterministic initial
//! state `x_i(0) = c_i`. States are numbered from 1 in the documentation;
//! slices and matrices are 0-based.
//!
//! Noise variances are diffusion coefficients: `q_i^2` has units of
//! `[x_i]^2 / s`, with `x_1` in seconds and time in seconds. Zero variances
//! are allowed and give rank-deficient discrete noise covariances.

use nalgebra::{DMatrix, SymmetricEigen};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::coeffs::{factorial, rho, to_f64};
use crate::error::{Error, Result};

/// Integrator-chain clock model of order `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct ClockModel {
    order: usize,
    noise_variances: Vec<f64>,
    initial_values: Vec<f64>,
}

/// Wire form: `{"order": n, "q2": [...], "c": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    order: usize,
    q2: Vec<f64>,
    c: Vec<f64>,
}

impl TryFrom<ModelRecord> for ClockModel {
    type Error = Error;

    fn try_from(rec: ModelRecord) -> Result<Self> {
        ClockModel::new(rec.order, rec.q2, rec.c)
    }
}

impl From<ClockModel> for ModelRecord {
    fn from(m: ClockModel) -> Self {
        ModelRecord {
            order: m.order,
            q2: m.noise_variances,
            c: m.initial_values,
        }
    }
}

impl ClockModel {
    pub fn new(order: usize, noise_variances: Vec<f64>, initial_values: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("model order must be at least 1"));
        }
        if noise_variances.len() != order {
            return Err(Error::invalid(format!(
                "q2 has {} entries but order is {order}",
                noise_variances.len()
            )));
        }
        if initial_values.len() != order {
            return Err(Error::invalid(format!(
                "c has {} entries but order is {order}",
                initial_values.len()
            )));
        }
        if let Some((i, q)) = noise_variances
            .iter()
            .enumerate()
            .find(|(_, q)| !q.is_finite() || **q < 0.0)
        {
            return Err(Error::invalid(format!(
                "q2[{}] = {q} must be finite and nonnegative",
                i + 1
            )));
        }
        if let Some(i) = initial_values.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("c[{}] must be finite", i + 1)));
        }
        Ok(ClockModel {
            order,
            noise_variances,
            initial_values,
        })
    }

    /// Model with zero initial state.
    pub fn from_noise(noise_variances: Vec<f64>) -> Result<Self> {
        let n = noise_variances.len();
        Self::new(n, noise_variances, vec![0.0; n])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `q_1^2 .. q_n^2`.
    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_variances
    }

    /// `c_1 .. c_n`.
    pub fn initial_values(&self) -> &[f64] {
        &self.initial_values
    }

    /// Same model with every noise variance multiplied by `factor`.
    pub fn scale_noise(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.order,
            self.noise_variances.iter().map(|q| q * factor).collect(),
            self.initial_values.clone(),
        )
    }

    /// Deterministic trend `E[x_i(t)] = sum_{m=0}^{n-i} t^m/m! c_{i+m}`, 1-based `i`.
    pub fn state_mean(&self, i: usize, t: f64) -> f64 {
        let inv = inverse_factorials(self.order);
        // Horner in t over c_n .. c_i.
        self.initial_values[i - 1..]
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (m, c)| acc * t + c * inv[m])
    }
}

/// `1/k!` for `k = 0..n`, rounded once from the exact value.
pub(crate) fn inverse_factorials(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| to_f64(&BigRational::new(1.into(), factorial(k as u64))))
        .collect()
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("sampling period must be positive and finite, got {tau}")));
    }
    Ok(())
}

/// Transition matrix `A_tau = exp(A tau) = sum_{m<n} tau^m/m! A^m`.
///
/// `A^m` is the shift matrix with ones on the m-th superdiagonal, so the
/// series is finite and the result is upper triangular with entries
/// `tau^(j-i)/(j-i)!`.
pub fn build_transition(order: usize, tau: f64) -> Result<DMatrix<f64>> {
    if order == 0 {
        return Err(Error::invalid("model order must be at least 1"));
    }
    check_tau(tau)?;
    let inv = inverse_factorials(order);
    let mut a = DMatrix::zeros(order, order);
    for m in 0..order {
        let coeff = tau.powi(m as i32) * inv[m];
        for i in 0..order - m {
            a[(i, i + m)] += coeff;
        }
    }
    Ok(a)
}

/// Closed-form discrete noise covariance
/// `Q_tau[i][j] = sum_{m >= max(i,j)} rho_ij^(m) q_m^2 tau^(2m-i-j+1)`.
pub fn build_noise_covariance(model: &ClockModel, tau: f64) -> Result<DMatrix<f64>> {
    check_tau(tau)?;
    let n = model.order();
    let q2 = model.noise_variances();
    let mut cov = DMatrix::zeros(n, n);
    for i in 1..=n {
        for j in i..=n {
            let mut acc = 0.0;
            for m in j..=n {
                let coeff = to_f64(&rho(i, j, m)?);
                acc += coeff * q2[m - 1] * tau.powi((2 * m + 1 - i - j) as i32);
            }
            cov[(i - 1, j - 1)] = acc;
            cov[(j - 1, i - 1)] = acc;
        }
    }
    Ok(cov)
}

/// PSD tolerance used throughout: `1e-12 * max diagonal`.
pub fn psd_tolerance(cov: &DMatrix<f64>) -> f64 {
    1e-12 * cov.diagonal().iter().cloned().fold(0.0, f64::max)
}

/// Factor a covariance as `L L^T` by diagonally pivoted Cholesky.
///
/// Pivoting stops once every remaining pivot falls below the PSD tolerance,
/// which handles rank-deficient covariances from zero noise variances. The
/// returned `L` is the row-permuted triangular factor, so `L L^T` reproduces
/// the input but `L` itself need not be triangular.
pub fn factor_noise_covariance(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if n == 0 || cov.ncols() != n {
        return Err(Error::invalid("covariance must be a nonempty square matrix"));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("covariance has non-finite entries"));
    }
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let asym = (cov - cov.transpose()).amax();
    if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::invalid("covariance is not symmetric"));
    }
    let tol = psd_tolerance(cov);
    let min_eig = SymmetricEigen::new(cov.clone()).eigenvalues.min();
    if min_eig < -tol || (scale > 0.0 && tol == 0.0 && min_eig < 0.0) {
        return Err(Error::Indefinite {
            eigenvalue: min_eig,
            tolerance: tol,
        });
    }

    let mut work = cov.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut lower = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let (offset, pivot) = (k..n)
            .map(|r| (r, work[(r, r)]))
            .fold((k, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= tol {
            break;
        }
        if offset != k {
            work.swap_rows(k, offset);
            work.swap_columns(k, offset);
            lower.swap_rows(k, offset);
            perm.swap(k, offset);
        }
        let d = work[(k, k)].sqrt();
        lower[(k, k)] = d;
        for r in k + 1..n {
            lower[(r, k)] = work[(r, k)] / d;
        }
        for r in k + 1..n {
            for c in k + 1..=r {
                let v = work[(r, c)] - lower[(r, k)] * lower[(c, k)];
                work[(r, c)] = v;
                work[(c, r)] = v;
            }
        }
    }

    let mut factor = DMatrix::zeros(n, n);
    for (row, &orig) in perm.iter().enumerate() {
        factor.set_row(orig, &lower.row(row));
    }
    Ok(factor)
}

/// Exact discrete-time equivalent of a [`ClockModel`] sampled every `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub tau: f64,
    pub transition: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    pub noise_factor: DMatrix<f64>,
}

impl DiscreteModel {
    pub fn new(model: &ClockModel, tau: f64) -> Result<Self> {
        let transition = build_transition(model.order(), tau)?;
        let noise_cov = build_noise_covariance(model, tau)?;
        let noise_factor = factor_noise_covariance(&noise_cov)?;
        Ok(DiscreteModel {
            tau,
            transition,
            noise_cov,
            noise_factor,
        })
    }

    pub fn order(&self) -> usize {
        self.transition.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::oracle;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn transition_small_orders() {
        assert_eq!(build_transition(1, 5.0).unwrap(), DMatrix::from_row_slice(1, 1, &[1.0]));
        assert_eq!(
            build_transition(2, 1.0).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])
        );
        let a = build_transition(3, 2.0).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 2.0, 0.0, 1.0, 2.0, 0.0, 0.0, 1.0]);
        assert!(max_abs_diff(&a, &expected) < 1e-15);
        let general = oracle::expm_transition(3, 2.0);
        assert!(max_abs_diff(&a, &general) < 1e-12);
    }

    #[test]
    fn transition_rejects_bad_input() {
        assert!(build_transition(0, 1.0).is_err());
        assert!(build_transition(2, 0.0).is_err());
        assert!(build_transition(2, -1.0).is_err());
        assert!(build_transition(2, f64::NAN).is_err());
        assert!(build_transition(2, f64::INFINITY).is_err());
    }

    #[test]
    fn transition_matches_general_expm() {
        for n in 1..=8 {
            for &tau in &[0.1, 1.0, 3.0] {
                let a = build_transition(n, tau).unwrap();
                let general = oracle::expm_transition(n, tau);
                let scale = general.amax();
                assert!(max_abs_diff(&a, &general) <= 1e-12 * scale, "n={n} tau={tau}");
            }
        }
    }

    #[test]
    fn annihilator() {
        for n in 1..=10 {
            let a = build_transition(n, 1.7).unwrap();
            let shifted = &a - DMatrix::identity(n, n);
            let mut p = DMatrix::identity(n, n);
            for _ in 0..n {
                p = &p * &shifted;
            }
            assert!(p.amax() <= 1e-12, "n={n}");
        }
    }

    #[test]
    fn noise_covariance_examples() {
        let m = ClockModel::from_noise(vec![1.0]).unwrap();
        assert_eq!(build_noise_covariance(&m, 2.0).unwrap()[(0, 0)], 2.0);

        let m = ClockModel::from_noise(vec![1.0, 1.0]).unwrap();
        let q = build_noise_covariance(&m, 1.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[4.0 / 3.0, 0.5, 0.5, 1.0]);
        assert!(max_abs_diff(&q, &expected) < 1e-15);
        let quad = oracle::quadrature_noise_covariance(&m, 1.0);
        assert!(max_abs_diff(&q, &quad) < 1e-10);

        let (q1, q2, q3, tau) = (0.7, 1.3, 2.1, 1.9);
        let m = ClockModel::from_noise(vec![q1, q2, q3]).unwrap();
        let q = build_noise_covariance(&m, tau).unwrap();
        let expected = q1 * tau + q2 * tau.powi(3) / 3.0 + q3 * tau.powi(5) / 20.0;
        assert_relative_eq!(q[(0, 0)], expected, max_relative = 1e-14);
        let quad = oracle::quadrature_noise_covariance(&m, tau);
        assert_relative_eq!(q[(0, 0)], quad[(0, 0)], max_relative = 1e-10);
    }

    #[test]
    fn factor_examples() {
        let l = factor_noise_covariance(&DMatrix::from_row_slice(1, 1, &[4.0])).unwrap();
        assert_eq!(l[(0, 0)], 2.0);

        let l = factor_noise_covariance(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let m = ClockModel::from_noise(vec![1.0, 1.0]).unwrap();
        let q = build_noise_covariance(&m, 1.0).unwrap();
        let l = factor_noise_covariance(&q).unwrap();
        assert!(max_abs_diff(&(&l * l.transpose()), &q) <= 1e-10 * q.amax());
    }

    #[test]
    fn factor_handles_zero_noise() {
        let m = ClockModel::from_noise(vec![0.0, 1.0, 0.0]).unwrap();
        let q = build_noise_covariance(&m, 2.5).unwrap();
        let l = factor_noise_covariance(&q).unwrap();
        assert!(max_abs_diff(&(&l * l.transpose()), &q) <= 1e-10 * q.amax());

        let zero = DMatrix::zeros(3, 3);
        assert_eq!(factor_noise_covariance(&zero).unwrap(), zero);
    }

    #[test]
    fn factor_rejects_indefinite() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(factor_noise_covariance(&bad), Err(Error::Indefinite { .. })));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(factor_noise_covariance(&asym).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(ClockModel::new(0, vec![], vec![]).is_err());
        assert!(ClockModel::new(2, vec![1.0], vec![0.0, 0.0]).is_err());
        assert!(ClockModel::new(1, vec![-1.0], vec![0.0]).is_err());
        assert!(ClockModel::new(1, vec![f64::NAN], vec![0.0]).is_err());
        assert!(ClockModel::new(1, vec![1.0], vec![f64::INFINITY]).is_err());
        assert!(ClockModel::new(2, vec![0.0, 0.0], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn model_json() {
        let m: ClockModel = serde_json::from_str(r#"{"order": 2, "q2": [1.0, 0.5], "c": [0.0, 1e-9]}"#).unwrap();
        assert_eq!(m.order(), 2);
        assert_eq!(m.noise_variances(), &[1.0, 0.5]);
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"order":2,"q2":[1.0,0.5],"c":[0.0,1e-9]}"#);
        assert!(serde_json::from_str::<ClockModel>(r#"{"order": 2, "q2": [1.0], "c": [0.0, 0.0]}"#).is_err());
        assert!(serde_json::from_str::<ClockModel>(r#"{"order": 0, "q2": [], "c": []}"#).is_err());
        assert!(serde_json::from_str::<ClockModel>(r#"{"order": 1, "q": [1.0], "c": [0.0]}"#).is_err());
    }

    #[test]
    fn state_mean_is_taylor_trend() {
        let m = ClockModel::new(3, vec![0.0; 3], vec![1.0, 2.0, 3.0]).unwrap();
        let t = 1.5;
        assert_relative_eq!(m.state_mean(1, t), 1.0 + 2.0 * t + 3.0 * t * t / 2.0);
        assert_relative_eq!(m.state_mean(2, t), 2.0 + 3.0 * t);
        assert_eq!(m.state_mean(3, t), 3.0);
    }

    proptest! {
        #[test]
        fn transition_semigroup(n in 1usize..=8, tau in 1e-3f64..=10.0, k in 1i32..=5) {
            let a = build_transition(n, tau).unwrap();
            let mut power = DMatrix::identity(n, n);
            for _ in 0..k {
                power = &power * &a;
            }
            let direct = build_transition(n, tau * k as f64).unwrap();
            for (p, d) in power.iter().zip(direct.iter()) {
                prop_assert!((p - d).abs() <= 1e-9 * d.abs().max(1.0));
            }
        }

        #[test]
        fn noise_covariance_monotone_in_tau(
            q2 in proptest::collection::vec(0.0f64..2.0, 1..=5),
            tau1 in 0.05f64..5.0,
            extra in 0.05f64..5.0,
        ) {
            let m = ClockModel::from_noise(q2).unwrap();
            let lo = build_noise_covariance(&m, tau1).unwrap();
            let hi = build_noise_covariance(&m, tau1 + extra).unwrap();
            let diff = &hi - &lo;
            let min_eig = SymmetricEigen::new(diff.clone()).eigenvalues.min();
            prop_assert!(min_eig >= -1e-10 * hi.amax().max(1e-300));
        }

        #[test]
        fn factor_reconstructs(
            q2 in proptest::collection::vec(0.0f64..3.0, 1..=6),
            tau in 0.1f64..10.0,
        ) {
            let m = ClockModel::from_noise(q2).unwrap();
            let q = build_noise_covariance(&m, tau).unwrap();
            let l = factor_noise_covariance(&q).unwrap();
            let err = (&l * l.transpose() - &q).amax();
            prop_assert!(err <= 1e-10 * q.amax().max(1e-300));
        }
    }
}
