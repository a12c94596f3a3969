//! Exact combinatorial constants of the higher-order Allan variance.
//!
//! Everything here is computed with arbitrary-precision integers and
//! rationals. The sums behind `r_m` alternate in sign with terms that grow
//! like `C(N, N/2)^2 * N^(2m)`, so double precision loses every significant
//! digit well before `N = 10`. Conversion to `f64` happens only at the call
//! sites that need a float.
//!
//! Orders and indices follow the usual conventions:
//!
//! * `order` is the difference order `N >= 1`.
//! * `m` indexes powers of the sampling period; for `r_m` it starts at 0,
//!   for the drift constants `g_m` it starts at 1.
//! * `0^0 = 1` wherever a power of zero appears.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// `n!` as a big integer.
pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    // Multiplicative form; every intermediate quotient is exact.
    (0..k).fold(BigInt::one(), |acc, i| acc * (n - i) / (i + 1))
}

fn sign(exponent: u64) -> i32 {
    if exponent % 2 == 0 {
        1
    } else {
        -1
    }
}

fn check_order(order: usize) -> Result<u64> {
    if order == 0 {
        return Err(Error::invalid("difference order must be at least 1"));
    }
    Ok(order as u64)
}

/// Signed binomial aggregation weights `alpha_i = C(N, i) (-1)^i`, `i = 0..=N`.
///
/// ```
/// use num_bigint::BigInt;
/// let w = avar::coeffs::binomial_weights(3).unwrap();
/// assert_eq!(w, [1, -3, 3, -1].map(BigInt::from));
/// ```
pub fn binomial_weights(order: usize) -> Result<Vec<BigInt>> {
    let n = check_order(order)?;
    Ok((0..=n).map(|i| binomial(n, i) * sign(i)).collect())
}

/// Weights as `f64`, exact for every order where `C(N, N/2) < 2^53`.
pub fn binomial_weights_f64(order: usize) -> Result<Vec<f64>> {
    binomial_weights(order)?
        .iter()
        .map(|w| {
            w.to_f64()
                .filter(|f| f.abs() < 9.007_199_254_740_992e15)
                .ok_or_else(|| Error::invalid(format!("difference order {order} too large for f64 weights")))
        })
        .collect()
}

/// Normalization constant `r_0` from the direct triple sum
/// `sum_{i<N} sum_{j1<=i} sum_{j2<=i} (-1)^(j1+j2) C(N,j1) C(N,j2)`.
pub fn r0(order: usize) -> Result<BigInt> {
    let n = check_order(order)?;
    let mut total = BigInt::zero();
    for i in 0..n {
        for j1 in 0..=i {
            for j2 in 0..=i {
                total += binomial(n, j1) * binomial(n, j2) * sign(j1 + j2);
            }
        }
    }
    Ok(total)
}

/// The stationary-part constant `r_m` for difference order `N`.
///
/// The nested sum has denominators `(m!)^2 (2l - k + 1)`; the inner sums are
/// scaled by `lcm(1, ..., 2m + 1)` so that accumulation stays in integers and
/// a single division happens at the end.
pub fn r_coefficient(order: usize, m: usize) -> Result<BigRational> {
    let n = check_order(order)?;
    let m = m as u64;
    let scale = (1..=2 * m + 1).fold(BigInt::one(), |acc, d| acc.lcm(&BigInt::from(d)));

    let inner_row: Vec<BigInt> = (0..=m).map(|l| binomial(m, l)).collect();
    let mut inner_cache: HashMap<(u64, u64), BigInt> = HashMap::new();
    let mut inner = |a: u64, b: u64| -> BigInt {
        inner_cache
            .entry((a, b))
            .or_insert_with(|| {
                let a = BigInt::from(a);
                let b = BigInt::from(b);
                let mut acc = BigInt::zero();
                for l in 0..=m {
                    let mut by_k = BigInt::zero();
                    for k in 0..=l {
                        by_k += binomial(l, k) * b.pow(k as u32) * (&scale / (2 * l - k + 1));
                    }
                    acc += &inner_row[l as usize] * a.pow((m - l) as u32) * by_k;
                }
                acc
            })
            .clone()
    };

    let mut total = BigInt::zero();
    for i in 0..n {
        for j1 in 0..=i {
            for j2 in 0..=i {
                let weight = binomial(n, j1) * binomial(n, j2) * sign(j1 + j2);
                total += weight * inner((i - j1) * (i - j2), 2 * i - j1 - j2);
            }
        }
    }
    let m_fact = factorial(m);
    Ok(BigRational::new(total, scale * &m_fact * &m_fact))
}

/// Integer drift sum `g_m = sum_{i=0}^{N} C(N,i) (-1)^(N-i) i^(m-1)`, `m >= 1`.
///
/// Zero exactly when `m <= N`.
pub fn gamma_sum(order: usize, m: usize) -> Result<BigInt> {
    let n = check_order(order)?;
    if m == 0 {
        return Err(Error::invalid("drift index m starts at 1"));
    }
    let power = (m - 1) as u32;
    Ok((0..=n)
        .map(|i| binomial(n, i) * sign(n - i) * BigInt::from(i).pow(power))
        .sum())
}

/// `g_m / (m-1)!`, the coefficient multiplying `tau^(m-2)` in `gamma_m`.
pub fn gamma_rational(order: usize, m: usize) -> Result<BigRational> {
    let g = gamma_sum(order, m)?;
    Ok(BigRational::new(g, factorial((m - 1) as u64)))
}

/// `gamma_m = tau^(m-2) / (m-1)! * g_m` as a float. Exactly `0.0` for `m <= N`.
pub fn gamma(order: usize, m: usize, tau: f64) -> Result<f64> {
    let coeff = gamma_rational(order, m)?;
    if coeff.is_zero() {
        return Ok(0.0);
    }
    Ok(to_f64(&coeff) * tau.powi(m as i32 - 2))
}

/// `rho_ij^(m) = 1 / ((m-i)! (m-j)! (2m - i - j + 1))` for 1-based `i`, `j`.
pub fn rho(i: usize, j: usize, m: usize) -> Result<BigRational> {
    if i == 0 || j == 0 {
        return Err(Error::invalid("state indices are 1-based"));
    }
    if m < i.max(j) {
        return Err(Error::invalid(format!("rho requires m >= max(i, j); got i={i}, j={j}, m={m}")));
    }
    let (i, j, m) = (i as u64, j as u64, m as u64);
    let denom = factorial(m - i) * factorial(m - j) * (2 * m - i - j + 1);
    Ok(BigRational::new(BigInt::one(), denom))
}

/// Nullspace of the moment matrix `W_N` with rows `(0^p, 1^p, ..., N^p)`,
/// `p = 0..N-1`, computed by exact Gauss-Jordan elimination.
///
/// The kernel is returned with its first nonzero entry scaled to 1. Column `c`
/// multiplies the weight `alpha_{N-c}`, so the result is proportional to the
/// reversed binomial weights.
pub fn vandermonde_kernel(order: usize) -> Result<Vec<BigRational>> {
    let n = check_order(order)?;
    let rows = order;
    let cols = order + 1;
    let mut mat: Vec<Vec<BigRational>> = (0..n)
        .map(|p| {
            (0..=n)
                .map(|c| BigRational::from_integer(BigInt::from(c).pow(p as u32)))
                .collect()
        })
        .collect();

    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let Some(p) = (row..rows).find(|&r| !mat[r][col].is_zero()) else {
            continue;
        };
        mat.swap(row, p);
        let pivot = mat[row][col].clone();
        for v in mat[row].iter_mut() {
            *v = &*v / &pivot;
        }
        let pivot_row = mat[row].clone();
        for (r, target) in mat.iter_mut().enumerate() {
            if r != row && !target[col].is_zero() {
                let factor = target[col].clone();
                for (t, p) in target.iter_mut().zip(&pivot_row) {
                    *t -= &factor * p;
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }

    let dimension = cols - pivot_cols.len();
    if dimension != 1 {
        return Err(Error::KernelDimension { rows, cols, dimension });
    }
    let free = (0..cols).find(|c| !pivot_cols.contains(c)).expect("one free column");
    let mut kernel = vec![BigRational::zero(); cols];
    kernel[free] = BigRational::one();
    for (r, &pc) in pivot_cols.iter().enumerate() {
        kernel[pc] = -mat[r][free].clone();
    }
    let lead = kernel
        .iter()
        .find(|v| !v.is_zero())
        .cloned()
        .expect("kernel vector is nonzero");
    Ok(kernel.into_iter().map(|v| v / &lead).collect())
}

/// True when `kernel` is a nonzero multiple of `weights`.
pub fn is_proportional(kernel: &[BigRational], weights: &[BigInt]) -> bool {
    if kernel.len() != weights.len() {
        return false;
    }
    let Some(k) = weights.iter().position(|w| !w.is_zero()) else {
        return false;
    };
    if kernel[k].is_zero() {
        return false;
    }
    let ratio = &kernel[k] / BigRational::from_integer(weights[k].clone());
    kernel
        .iter()
        .zip(weights)
        .all(|(a, w)| *a == &ratio * BigRational::from_integer(w.clone()))
}

/// Nearest `f64` to an exact rational.
pub fn to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        if value.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// All constants for one difference order, up to index `max_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub order: usize,
    /// `alpha_0..alpha_N`.
    pub weights: Vec<BigInt>,
    pub r0: BigRational,
    /// `r_0..r_M`; `r[0] == r0`.
    pub r: Vec<BigRational>,
    /// `g_1..g_M` (stored at offsets `0..M`).
    pub gamma_sums: Vec<BigInt>,
}

impl CoefficientSet {
    pub fn new(order: usize, max_index: usize) -> Result<Self> {
        let weights = binomial_weights(order)?;
        let r0 = BigRational::from_integer(r0(order)?);
        let r = (0..=max_index)
            .map(|m| r_coefficient(order, m))
            .collect::<Result<Vec<_>>>()?;
        let gamma_sums = (1..=max_index)
            .map(|m| gamma_sum(order, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(CoefficientSet {
            order,
            weights,
            r0,
            r,
            gamma_sums,
        })
    }

    /// `r_m / r_0`, the coefficient of `q_{m+1}^2 tau^(2m-1)`.
    pub fn normalized(&self, m: usize) -> Option<BigRational> {
        self.r.get(m).map(|r| r / &self.r0)
    }
}

/// One cell of the normalized coefficient grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub order: usize,
    pub index: usize,
    pub ratio: BigRational,
}

impl TableEntry {
    pub fn value(&self) -> f64 {
        to_f64(&self.ratio)
    }
}

/// `r_m / r_0` for every `N` in `orders` and `m = 0..N-1`, row-major.
pub fn coefficient_table(orders: std::ops::RangeInclusive<usize>) -> Result<Vec<TableEntry>> {
    let mut out = Vec::new();
    for order in orders {
        let r0 = BigRational::from_integer(r0(order)?);
        for index in 0..order {
            out.push(TableEntry {
                order,
                index,
                ratio: r_coefficient(order, index)? / &r0,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn weights_small_orders() {
        assert_eq!(binomial_weights(1).unwrap(), [1, -1].map(BigInt::from));
        assert_eq!(binomial_weights(2).unwrap(), [1, -2, 1].map(BigInt::from));
        assert_eq!(binomial_weights(3).unwrap(), [1, -3, 3, -1].map(BigInt::from));
        assert!(binomial_weights(0).is_err());
        for n in 1..20 {
            let s: BigInt = binomial_weights(n).unwrap().into_iter().sum();
            assert!(s.is_zero());
        }
    }

    #[test]
    fn r0_values() {
        assert_eq!(r0(2).unwrap(), BigInt::from(2));
        assert_eq!(r0(3).unwrap(), BigInt::from(6));
        assert_eq!(r0(4).unwrap(), BigInt::from(20));
        for n in 1..=12 {
            assert_eq!(r_coefficient(n, 0).unwrap(), BigRational::from_integer(r0(n).unwrap()));
        }
    }

    #[test]
    fn worked_example_ratios() {
        let ratio = |n, m| r_coefficient(n, m).unwrap() / BigRational::from_integer(r0(n).unwrap());
        assert_eq!(ratio(2, 1), q(1, 3));
        assert_eq!(ratio(2, 2), q(23, 60));
        assert_eq!(ratio(3, 1), q(1, 6));
        assert_eq!(ratio(3, 2), q(11, 120));
    }

    #[test]
    fn gamma_vanishes_up_to_order() {
        assert_eq!(gamma(2, 1, 3.7).unwrap(), 0.0);
        assert_eq!(gamma(3, 3, 0.2).unwrap(), 0.0);
        assert_eq!(gamma_sum(2, 3).unwrap(), BigInt::from(2));
        let tau = 1.75;
        assert_eq!(gamma(2, 3, tau).unwrap(), tau);
        assert!(gamma_sum(2, 0).is_err());
    }

    #[test]
    fn gamma_at_order_plus_one_is_factorial() {
        // The N-th forward difference of i^N is N!.
        for n in 1..10usize {
            assert_eq!(gamma_sum(n, n + 1).unwrap(), factorial(n as u64));
        }
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho(1, 1, 1).unwrap(), q(1, 1));
        assert_eq!(rho(1, 1, 2).unwrap(), q(1, 3));
        assert_eq!(rho(1, 2, 2).unwrap(), q(1, 2));
        assert_eq!(rho(1, 1, 3).unwrap(), q(1, 20));
        assert!(rho(2, 3, 2).is_err());
        assert!(rho(0, 1, 1).is_err());
    }

    #[test]
    fn kernel_small_orders() {
        let k = vandermonde_kernel(1).unwrap();
        assert_eq!(k, vec![q(1, 1), q(-1, 1)]);
        let k = vandermonde_kernel(2).unwrap();
        assert_eq!(k, vec![q(1, 1), q(-2, 1), q(1, 1)]);
        let k = vandermonde_kernel(3).unwrap();
        assert_eq!(k, vec![q(1, 1), q(-3, 1), q(3, 1), q(-1, 1)]);
    }

    #[test]
    fn proportionality_rejects_mismatch() {
        let w = binomial_weights(3).unwrap();
        assert!(!is_proportional(&[q(1, 1), q(-3, 1), q(3, 1), q(1, 1)], &w));
        assert!(is_proportional(&[q(-2, 1), q(6, 1), q(-6, 1), q(2, 1)], &w));
        assert!(!is_proportional(&[q(1, 1)], &w));
    }

    #[test]
    fn coefficient_set_invariants() {
        let set = CoefficientSet::new(4, 7).unwrap();
        assert_eq!(set.r[0], set.r0);
        assert!(set.r0 > BigRational::zero());
        assert!(set.gamma_sums[..4].iter().all(Zero::is_zero));
        assert!(set.gamma_sums[4..].iter().all(|g| !g.is_zero()));
        assert_eq!(set.normalized(0), Some(BigRational::one()));
    }

    #[test]
    fn table_shape() {
        let t = coefficient_table(2..=10).unwrap();
        assert_eq!(t.len(), (2..=10).sum::<usize>());
        let last = t.last().unwrap();
        assert_eq!((last.order, last.index), (10, 9));
        assert!((last.value() - 6.3080e-6).abs() < 5e-10);
    }
}
