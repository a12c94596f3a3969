//! Empirical higher-order Allan variance and stationarity diagnostics.
//!
//! The headline estimator uses non-overlapping blocks
//!
//! ```text
//! Y_N[K] = sum_{i=0}^{N} alpha_i y[s (N (K+1) - i)],   alpha_i = C(N,i) (-1)^i
//! ```
//!
//! with stride `s` so that `tau = s * tau0`. For a clock of order `n <= N`
//! the blocks are IID Gaussian with zero mean, so their time-averaged second
//! moment estimates `r_0 tau^2 sigma2_N(tau)`. No mean is subtracted.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{CurveKind, VarianceCurve, VariancePoint};
use crate::coeffs::{self, binomial_weights_f64};
use crate::error::{Error, Result};
use crate::simulate::TimeSeries;

/// Largest lag reported by [`stationarity_report`].
pub const MAX_LAG: usize = 10;
/// Width, in standard deviations, of every diagnostic band.
pub const BAND_SIGMAS: f64 = 4.0;
/// Minimum number of blocks per window in [`stationarity_report`].
pub const MIN_WINDOW_BLOCKS: usize = 30;

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::invalid("difference order must be at least 1"));
    }
    Ok(())
}

fn check_stride(stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    Ok(())
}

/// `N`-th difference at every start index:
/// `out[k] = sum_i C(N,i) (-1)^i y[k + (N-i) stride]`.
///
/// The output keeps the input spacing `tau0`; each value spans `N * stride`
/// input samples.
pub fn difference(series: &TimeSeries, order: usize, stride: usize) -> Result<TimeSeries> {
    check_order(order)?;
    check_stride(stride)?;
    let y = series.samples();
    let span = order * stride;
    if y.len() <= span {
        return Err(Error::TooShort {
            needed: span + 1,
            available: y.len(),
        });
    }
    let weights = binomial_weights_f64(order)?;
    let out = (0..y.len() - span)
        .map(|k| {
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * y[k + (order - i) * stride])
                .sum()
        })
        .collect();
    TimeSeries::new(series.tau0(), out)
}

/// Non-overlapping blocks of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedSeries {
    pub difference_order: usize,
    pub stride: usize,
    /// `stride * tau0`.
    pub stride_tau: f64,
    pub blocks: Vec<f64>,
    pub source_len: usize,
}

impl AggregatedSeries {
    /// Start time of block `k`, `N k tau`.
    pub fn block_time(&self, k: usize) -> f64 {
        (self.difference_order * k) as f64 * self.stride_tau
    }
}

/// Blocks `Y_N[K]` of the sampled series, `floor((len - 1) / N)` of them.
pub fn aggregate(series: &TimeSeries, order: usize) -> Result<AggregatedSeries> {
    aggregate_strided(series, order, 1)
}

/// Blocks of the series decimated by `stride`, without copying it:
/// `floor((len - 1) / (N stride))` blocks.
pub fn aggregate_strided(series: &TimeSeries, order: usize, stride: usize) -> Result<AggregatedSeries> {
    check_order(order)?;
    check_stride(stride)?;
    let y = series.samples();
    let span = order * stride;
    if y.len() <= span {
        return Err(Error::TooShort {
            needed: span + 1,
            available: y.len(),
        });
    }
    let weights = binomial_weights_f64(order)?;
    let count = (y.len() - 1) / span;
    let blocks = (0..count)
        .map(|k| {
            let end = span * (k + 1);
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * y[end - i * stride])
                .sum()
        })
        .collect();
    Ok(AggregatedSeries {
        difference_order: order,
        stride,
        stride_tau: stride as f64 * series.tau0(),
        blocks,
        source_len: y.len(),
    })
}

fn mean_square(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64
}

fn normalization(order: usize) -> Result<f64> {
    Ok(coeffs::to_f64(&num_rational::BigRational::from_integer(coeffs::r0(order)?)))
}

/// `(1 / (r_0 tau^2)) * mean(Y_N^2)` over non-overlapping blocks at `tau = stride * tau0`.
///
/// ```
/// use avar::{estimate, TimeSeries};
/// let line = TimeSeries::new(1.0, (0..50).map(|k| 3.0 + 0.5 * k as f64).collect()).unwrap();
/// let p = estimate::empirical_allan(&line, 2, 1).unwrap();
/// assert_eq!(p.value, 0.0);
/// assert_eq!(p.blocks, Some(24));
/// ```
pub fn empirical_allan(series: &TimeSeries, order: usize, stride: usize) -> Result<VariancePoint> {
    let agg = aggregate_strided(series, order, stride)?;
    point_from_blocks(&agg)
}

fn point_from_blocks(agg: &AggregatedSeries) -> Result<VariancePoint> {
    let count = agg.blocks.len();
    if count < 2 {
        return Err(Error::TooShort {
            needed: 2 * agg.difference_order * agg.stride + 1,
            available: agg.source_len,
        });
    }
    let tau = agg.stride_tau;
    let value = mean_square(&agg.blocks) / (normalization(agg.difference_order)? * tau * tau);
    Ok(VariancePoint {
        tau,
        t: agg.block_time(count - 1) / 2.0,
        value,
        time_dependent_part: None,
        stationary_part: None,
        blocks: Some(count),
    })
}

/// Empirical variance at each stride; strides must increase and leave at least two blocks.
pub fn allan_sweep(series: &TimeSeries, order: usize, strides: &[usize]) -> Result<VarianceCurve> {
    check_order(order)?;
    if strides.is_empty() {
        return Err(Error::invalid("stride list is empty"));
    }
    if strides.contains(&0) {
        return Err(Error::invalid("strides must be at least 1"));
    }
    if strides.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("strides must be strictly increasing"));
    }
    let largest = *strides.last().expect("nonempty");
    if (series.len() - 1) / (order * largest) < 2 {
        return Err(Error::invalid(format!(
            "stride {largest} leaves fewer than 2 blocks of order {order} in {} samples",
            series.len()
        )));
    }
    let points = strides
        .par_iter()
        .map(|&s| empirical_allan(series, order, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(VarianceCurve {
        kind: CurveKind::Empirical,
        model_order: series.model_order(),
        difference_order: order,
        t: None,
        time_independent: None,
        points,
    })
}

/// Sample autocorrelations at lags `1..=max_lag` (mean removed, biased normalization).
pub fn autocorrelations(values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    (1..=max_lag)
        .map(|lag| {
            if lag >= n || denom == 0.0 {
                return 0.0;
            }
            let num: f64 = centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum();
            num / denom
        })
        .collect()
}

/// Jarque-Bera statistic; approximately chi-square with 2 degrees of freedom for Gaussian data.
pub fn jarque_bera(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return 0.0;
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    n / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0)
}

/// Wilson-Hilferty bounds of `chi2_k / k` at `+-z` standard deviations.
pub fn chi_square_band(dof: usize, z: f64) -> (f64, f64) {
    let a = 2.0 / (9.0 * dof as f64);
    let lo = (1.0 - a - z * a.sqrt()).max(0.0).powi(3);
    let hi = (1.0 - a + z * a.sqrt()).powi(3);
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentWithIid,
    TimeDependent,
    Inconclusive,
}

/// Windowed checks on the aggregated blocks of a single path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    #[serde(rename = "N")]
    pub difference_order: usize,
    /// Model order from the series metadata, when recorded.
    pub n_hint: Option<usize>,
    pub blocks: usize,
    pub lag_autocorrs: Vec<f64>,
    /// `4 / sqrt(blocks)`.
    pub autocorr_limit: f64,
    /// Mean start time of the blocks in each window.
    pub window_times: Vec<f64>,
    pub window_means: Vec<f64>,
    /// Windowed `sigma2_N` estimates: raw second moment over `r_0 tau0^2`.
    pub window_vars: Vec<f64>,
    pub variance_ratio: f64,
    /// Largest max/min ratio of window variances inside the 4-sigma chi-square band.
    pub variance_ratio_limit: f64,
    pub normality_stat: f64,
    pub verdict: Verdict,
}

struct Windows {
    times: Vec<f64>,
    means: Vec<f64>,
    vars: Vec<f64>,
    per_window: usize,
}

fn window_stats(agg: &AggregatedSeries, windows: usize, norm: f64) -> Windows {
    let per_window = agg.blocks.len() / windows;
    let mut out = Windows {
        times: Vec::with_capacity(windows),
        means: Vec::with_capacity(windows),
        vars: Vec::with_capacity(windows),
        per_window,
    };
    for w in 0..windows {
        let start = w * per_window;
        let chunk = &agg.blocks[start..start + per_window];
        let first = agg.block_time(start);
        let last = agg.block_time(start + per_window - 1);
        out.times.push((first + last) / 2.0);
        out.means.push(chunk.iter().sum::<f64>() / per_window as f64);
        out.vars.push(mean_square(chunk) / norm);
    }
    out
}

fn check_windows(agg: &AggregatedSeries, windows: usize) -> Result<()> {
    if windows < 2 {
        return Err(Error::invalid("at least 2 windows are required"));
    }
    let needed = windows * MIN_WINDOW_BLOCKS;
    if agg.blocks.len() < needed {
        return Err(Error::TooShort {
            needed: needed * agg.difference_order + 1,
            available: agg.source_len,
        });
    }
    Ok(())
}

/// Split the blocks `Y_N` into `windows` equal segments and test them for IID behaviour.
///
/// The verdict is
/// * `consistent_with_iid` when every lag-1..10 autocorrelation is within
///   `4/sqrt(K)` and the max/min ratio of window variances is inside the
///   4-sigma chi-square band;
/// * `time_dependent` when the ratio leaves the band and the last window's
///   variance exceeds the first window's by more than the band allows;
/// * `inconclusive` otherwise.
///
/// On a single path with `N < n` the window variances follow one random-walk
/// realization, so the growth is only typical, not guaranteed; an ensemble of
/// paths through [`time_dependence_fit`] gives the reliable trend.
pub fn stationarity_report(series: &TimeSeries, order: usize, windows: usize) -> Result<StationarityReport> {
    let agg = aggregate(series, order)?;
    check_windows(&agg, windows)?;
    let norm = normalization(order)? * series.tau0() * series.tau0();
    let stats = window_stats(&agg, windows, norm);

    let lag_autocorrs = autocorrelations(&agg.blocks, MAX_LAG);
    let autocorr_limit = BAND_SIGMAS / (agg.blocks.len() as f64).sqrt();
    let (lo, hi) = chi_square_band(stats.per_window, BAND_SIGMAS);
    let variance_ratio_limit = hi / lo;

    let max = stats.vars.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = stats.vars.iter().cloned().fold(f64::INFINITY, f64::min);
    let variance_ratio = if min > 0.0 {
        max / min
    } else if max > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };

    let acf_ok = lag_autocorrs.iter().all(|r| r.abs() <= autocorr_limit);
    let ratio_ok = variance_ratio <= variance_ratio_limit;
    let first = stats.vars[0];
    let last = *stats.vars.last().expect("at least two windows");
    let grows = last > first * variance_ratio_limit;
    let verdict = if acf_ok && ratio_ok {
        Verdict::ConsistentWithIid
    } else if !ratio_ok && grows {
        Verdict::TimeDependent
    } else {
        Verdict::Inconclusive
    };

    Ok(StationarityReport {
        difference_order: order,
        n_hint: series.model_order(),
        blocks: agg.blocks.len(),
        lag_autocorrs,
        autocorr_limit,
        window_times: stats.times,
        window_means: stats.means,
        window_vars: stats.vars,
        variance_ratio,
        variance_ratio_limit,
        normality_stat: jarque_bera(&agg.blocks),
        verdict,
    })
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::invalid("linear fit needs at least 3 paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("linear fit needs distinct x values"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (rss / (n - 2.0) / sxx).sqrt(),
    })
}

/// Growth of windowed variance with time, estimated across independent paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub difference_order: usize,
    pub realizations: usize,
    pub window_times: Vec<f64>,
    /// Ensemble mean of the windowed `sigma2_N` estimates.
    pub window_vars: Vec<f64>,
    /// Slope of `log(window_vars)` against `log(window_times)`.
    pub exponent: f64,
    /// Mean over paths of the per-path linear slope of window variance against time.
    pub slope: f64,
    /// Standard error of `slope` from the spread across paths.
    pub slope_stderr: f64,
}

/// Regress windowed variances on window time over an ensemble of equally long paths.
///
/// Paths are independent, so the per-path slopes are IID and their sample
/// standard deviation gives an honest standard error even though windows on
/// one path are strongly correlated when `N < n`.
pub fn time_dependence_fit(paths: &[TimeSeries], order: usize, windows: usize) -> Result<TrendFit> {
    if paths.len() < 2 {
        return Err(Error::invalid("trend fit needs at least 2 paths"));
    }
    let len = paths[0].len();
    let tau0 = paths[0].tau0();
    if paths.iter().any(|p| p.len() != len || p.tau0() != tau0) {
        return Err(Error::invalid("trend fit needs paths of equal length and spacing"));
    }
    let norm = normalization(order)? * tau0 * tau0;
    let per_path = paths
        .par_iter()
        .map(|p| {
            let agg = aggregate(p, order)?;
            check_windows(&agg, windows)?;
            Ok(window_stats(&agg, windows, norm))
        })
        .collect::<Result<Vec<_>>>()?;

    let times = per_path[0].times.clone();
    let r = per_path.len() as f64;
    let mut mean_vars = vec![0.0; windows];
    for s in &per_path {
        for (m, v) in mean_vars.iter_mut().zip(&s.vars) {
            *m += v / r;
        }
    }
    let slopes = per_path
        .iter()
        .map(|s| linear_fit(&times, &s.vars).map(|f| f.slope))
        .collect::<Result<Vec<_>>>()?;
    let slope = slopes.iter().sum::<f64>() / r;
    let slope_var = slopes.iter().map(|s| (s - slope) * (s - slope)).sum::<f64>() / (r - 1.0);

    if times[0] <= 0.0 || mean_vars.iter().any(|v| *v <= 0.0) {
        return Err(Error::invalid("log-log fit needs positive window times and variances"));
    }
    let log_t: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let log_v: Vec<f64> = mean_vars.iter().map(|v| v.ln()).collect();
    let exponent = linear_fit(&log_t, &log_v)?.slope;

    Ok(TrendFit {
        difference_order: order,
        realizations: paths.len(),
        window_times: times,
        window_vars: mean_vars,
        exponent,
        slope,
        slope_stderr: (slope_var / r).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClockModel;
    use crate::simulate::{decimate, simulate, simulate_realization, SimulationConfig};
    use crate::AllanExpression;
    use proptest::prelude::*;

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(1.0, values).unwrap()
    }

    #[test]
    fn difference_of_polynomials() {
        let sq = series((0..20).map(|k| (k * k) as f64).collect());
        assert!(difference(&sq, 2, 1).unwrap().samples().iter().all(|v| *v == 2.0));
        let cube = series((0..20).map(|k| (k * k * k) as f64).collect());
        assert!(difference(&cube, 3, 1).unwrap().samples().iter().all(|v| *v == 6.0));
        let line = series((0..20).map(|k| 2.0 + 0.25 * k as f64).collect());
        for n in 2..5 {
            assert!(difference(&line, n, 3).unwrap().samples().iter().all(|v| *v == 0.0));
        }
        assert!(difference(&line, 4, 5).is_err());
        assert_eq!(difference(&line, 1, 19).unwrap().len(), 1);
        assert!(difference(&line, 0, 1).is_err());
        assert!(difference(&line, 1, 0).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let lin = series((0..7).map(f64::from).collect());
        let agg = aggregate(&lin, 3).unwrap();
        assert_eq!(agg.blocks, vec![0.0, 0.0]);
        let sq = series((0..30).map(|k| (k * k) as f64).collect());
        assert!(aggregate(&sq, 2).unwrap().blocks.iter().all(|v| *v == 2.0));
        let long = series(vec![0.0; 101]);
        assert_eq!(aggregate(&long, 2).unwrap().blocks.len(), 50);
        assert!(aggregate(&series(vec![0.0; 3]), 3).is_err());
    }

    #[test]
    fn sweep_block_counts() {
        let s = series((0..100).map(|k| ((k * 7919) % 113) as f64).collect());
        let c = allan_sweep(&s, 2, &[1, 2, 4]).unwrap();
        let counts: Vec<usize> = c.points.iter().map(|p| p.blocks.unwrap()).collect();
        assert_eq!(counts, vec![49, 24, 12]);
        let taus: Vec<f64> = c.points.iter().map(|p| p.tau).collect();
        assert_eq!(taus, vec![1.0, 2.0, 4.0]);
        assert!(allan_sweep(&s, 2, &[2, 1]).is_err());
        assert!(allan_sweep(&s, 2, &[1, 40]).is_err());
        assert!(allan_sweep(&s, 2, &[]).is_err());
    }

    #[test]
    fn empirical_rejects_single_block() {
        let s = series(vec![1.0, 2.0, 4.0, 7.0]);
        assert!(empirical_allan(&s, 2, 1).is_err());
        assert!(empirical_allan(&s, 1, 1).is_ok());
    }

    #[test]
    fn white_frequency_estimate() {
        let model = ClockModel::from_noise(vec![1.0]).unwrap();
        let y = simulate_realization(&SimulationConfig::new(model, 1.0, 200_001, 21), 0).unwrap();
        let p = empirical_allan(&y, 2, 1).unwrap();
        let se = (2.0 / p.blocks.unwrap() as f64).sqrt();
        assert!((p.value - 1.0).abs() <= 4.0 * se, "{}", p.value);
    }

    #[test]
    fn unbiased_over_many_paths() {
        let model = ClockModel::from_noise(vec![1.0, 1.0]).unwrap();
        let expected = AllanExpression::new(&model, 2).unwrap().stationary_part(1.0);
        let cfg = SimulationConfig::new(model, 1.0, 10_000, 99).realizations(200);
        let estimates: Vec<f64> = simulate(&cfg)
            .unwrap()
            .iter()
            .map(|y| empirical_allan(y, 2, 1).unwrap().value)
            .collect();
        let r = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / r;
        let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
        assert!((mean - expected).abs() <= 3.0 * sd / r.sqrt(), "{mean} vs {expected}");
    }

    #[test]
    fn white_noise_looks_iid() {
        let model = ClockModel::from_noise(vec![1.0, 1.0]).unwrap();
        let y = simulate_realization(&SimulationConfig::new(model, 1.0, 200_001, 4), 0).unwrap();
        let rep = stationarity_report(&y, 2, 10).unwrap();
        assert_eq!(rep.verdict, Verdict::ConsistentWithIid, "{rep:?}");
        assert_eq!(rep.n_hint, Some(2));
        assert_eq!(rep.window_vars.len(), 10);
        assert_eq!(rep.window_means.len(), 10);
        assert!(rep.normality_stat < 30.0);
    }

    #[test]
    fn random_walk_drift_detected() {
        let model = ClockModel::from_noise(vec![1.0, 1.0, 1.0]).unwrap();
        let y = simulate_realization(&SimulationConfig::new(model, 1.0, 200_001, 4), 0).unwrap();
        let rep = stationarity_report(&y, 2, 10).unwrap();
        assert_eq!(rep.verdict, Verdict::TimeDependent, "{rep:?}");
        let rep3 = stationarity_report(&y, 3, 10).unwrap();
        assert_eq!(rep3.verdict, Verdict::ConsistentWithIid, "{rep3:?}");
    }

    #[test]
    fn report_preconditions() {
        let s = series(vec![0.0; 100]);
        assert!(stationarity_report(&s, 2, 1).is_err());
        assert!(stationarity_report(&s, 2, 2).is_err());
    }

    #[test]
    fn chi_square_band_brackets_one() {
        let (lo, hi) = chi_square_band(30, 4.0);
        assert!(lo > 0.0 && lo < 1.0 && hi > 1.0);
        let (lo2, hi2) = chi_square_band(30_000, 4.0);
        assert!(lo2 > lo && hi2 < hi);
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-12);
        assert!(linear_fit(&x[..2], &y[..2]).is_err());
    }

    #[test]
    fn autocorrelation_of_alternating_sequence() {
        let v: Vec<f64> = (0..1000).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = autocorrelations(&v, 2);
        assert!((r[0] + 1.0).abs() < 0.01);
        assert!((r[1] - 1.0).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn difference_annihilates_low_degree(
            coeffs in proptest::collection::vec(-3.0f64..3.0, 1..5),
            extra in 0usize..3,
            stride in 1usize..4,
        ) {
            let order = coeffs.len() + extra;
            let values: Vec<f64> = (0..60)
                .map(|k| coeffs.iter().rev().fold(0.0, |acc, c| acc * k as f64 + c))
                .collect();
            let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let d = difference(&series(values), order, stride).unwrap();
            for v in d.samples() {
                prop_assert!(v.abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn blocks_are_aligned_differences(
            values in proptest::collection::vec(-10.0f64..10.0, 20..80),
            order in 1usize..5,
        ) {
            let s = series(values);
            let agg = aggregate(&s, order).unwrap();
            let d = difference(&s, order, 1).unwrap();
            prop_assert_eq!(agg.blocks.len(), (s.len() - 1) / order);
            for (k, b) in agg.blocks.iter().enumerate() {
                prop_assert_eq!(*b, d.samples()[order * k]);
            }
        }

        #[test]
        fn decimation_commutes_with_strided_difference(
            values in proptest::collection::vec(-10.0f64..10.0, 30..80),
            order in 1usize..4,
            m in 1usize..4,
        ) {
            let s = series(values);
            let dec = difference(&decimate(&s, m).unwrap(), order, 1).unwrap();
            let strided = difference(&s, order, m).unwrap();
            for (k, v) in dec.samples().iter().enumerate() {
                prop_assert_eq!(*v, strided.samples()[k * m]);
            }
            let a = aggregate(&decimate(&s, m).unwrap(), order).unwrap();
            let b = aggregate_strided(&s, order, m).unwrap();
            prop_assert_eq!(a.blocks, b.blocks);
        }

        #[test]
        fn variance_scales_quadratically(
            values in proptest::collection::vec(-10.0f64..10.0, 30..80),
            a in -5.0f64..5.0,
        ) {
            let s = series(values);
            let base = empirical_allan(&s, 2, 1).unwrap().value;
            let scaled = empirical_allan(&s.scaled(a).unwrap(), 2, 1).unwrap().value;
            prop_assert!((scaled - a * a * base).abs() <= 1e-12 * scaled.abs().max(1e-300) + 1e-300);
        }
    }
}
