//! Realization counts: the number of ways to place `sum(X)` distinguishable
//! units into cells so that cell `(i, j)` gets `x_ij` of them.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest value treated as an exact integer entry.
const MAX_EXACT: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactCount(pub BigUint);

impl ExactCount {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// `log10` of the count (`-inf` for zero).
    pub fn log10(&self) -> f64 {
        big_ln(&self.0) / std::f64::consts::LN_10
    }
}

impl fmt::Display for ExactCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for ExactCount {
    fn from(v: u64) -> Self {
        ExactCount(BigUint::from(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogCount {
    pub log10: f64,
}

/// Natural log of a big integer without converting it to `f64` first.
fn big_ln(v: &BigUint) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    let shift = bits.saturating_sub(60);
    let top = (v >> shift).to_f64().expect("60-bit value fits");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn ln_factorial(x: f64) -> f64 {
    libm::lgamma(x + 1.0)
}

fn check_entries(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| v.is_nan() || **v < 0.0 || v.is_infinite()) {
        Some(&v) => Err(Error::NegativeEntry(v)),
        None => Ok(()),
    }
}

fn as_integers(values: &[f64]) -> Result<Vec<u64>> {
    check_entries(values)?;
    values
        .iter()
        .map(|&v| {
            if v.fract() != 0.0 || v > MAX_EXACT {
                Err(Error::NonIntegerEntry(v))
            } else {
                Ok(v as u64)
            }
        })
        .collect()
}

fn ln_realizations(values: &[f64]) -> Result<f64> {
    check_entries(values)?;
    let total: f64 = values.iter().sum();
    Ok(ln_factorial(total) - values.iter().map(|&x| ln_factorial(x)).sum::<f64>())
}

/// `log10((sum X)! / prod x_ij!)`, with `x! = Gamma(x + 1)` for non-integers.
pub fn log10_realizations(x: &Matrix) -> Result<LogCount> {
    log10_realizations_of(x.as_slice())
}

/// [`log10_realizations`] over any collection of cells, e.g. all slices of a tensor.
pub fn log10_realizations_of(values: &[f64]) -> Result<LogCount> {
    Ok(LogCount {
        log10: ln_realizations(values)? / std::f64::consts::LN_10,
    })
}

/// `C(n, k)` as a big integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    num_integer::binomial(BigUint::from(n), BigUint::from(k.min(n - k)))
}

/// Exact multinomial `(sum X)! / prod x_ij!` for an integer matrix.
pub fn exact_realizations(x: &Matrix) -> Result<ExactCount> {
    exact_realizations_of(x.as_slice())
}

/// [`exact_realizations`] over any collection of cells.
pub fn exact_realizations_of(values: &[f64]) -> Result<ExactCount> {
    let ints = as_integers(values)?;
    // Multinomial as a product of binomials over running totals.
    let mut acc = BigUint::one();
    let mut running = 0u64;
    for x in ints {
        running += x;
        acc *= binomial(running, x);
    }
    Ok(ExactCount(acc))
}

/// Number of nonnegative integer matrices with `m` columns whose row sums
/// equal `u` (`equality`) or are at most `u`.
pub fn count_feasible_row_bounded(u: &[u64], m: usize, equality: bool) -> ExactCount {
    let m = m as u64;
    let mut acc = BigUint::one();
    for &ui in u {
        acc *= if m == 0 {
            // Only the empty row exists; it sums to 0.
            BigUint::from(u64::from(!equality || ui == 0))
        } else if equality {
            binomial(ui + m - 1, m - 1)
        } else {
            binomial(ui + m, m)
        };
    }
    ExactCount(acc)
}

/// Factor `C(u + m - 1, m - 1)` or `C(u + m, m)` contributed by one row.
pub fn row_composition_count(u: u64, m: usize, equality: bool) -> ExactCount {
    count_feasible_row_bounded(&[u], m, equality)
}

/// `log10(#X1 / #X2)`.
pub fn log10_likelihood_ratio(x1: &Matrix, x2: &Matrix) -> Result<f64> {
    Ok((ln_realizations(x1.as_slice())? - ln_realizations(x2.as_slice())?) / std::f64::consts::LN_10)
}

/// `#X1 / #X2`.
///
/// With `log_domain` the ratio is formed from log-Gamma sums. Otherwise,
/// integer matrices use exact big-integer counts (non-integer matrices fall
/// back to the log domain). Ratios beyond the `f64` range become `inf` or 0.
pub fn likelihood_ratio(x1: &Matrix, x2: &Matrix, log_domain: bool) -> Result<f64> {
    check_entries(x1.as_slice())?;
    check_entries(x2.as_slice())?;
    if !log_domain {
        if let (Ok(a), Ok(b)) = (exact_realizations(x1), exact_realizations(x2)) {
            return Ok(big_ratio(&a.0, &b.0));
        }
    }
    Ok(10f64.powf(log10_likelihood_ratio(x1, x2)?))
}

fn big_ratio(a: &BigUint, b: &BigUint) -> f64 {
    if b.is_zero() {
        return f64::INFINITY;
    }
    let ln = big_ln(a) - big_ln(b);
    if ln > 700.0 {
        return f64::INFINITY;
    }
    if ln < -700.0 {
        return 0.0;
    }
    // Scale so the integer quotient carries at least 64 significant bits.
    let shift = 128u64;
    let q = (a << shift) / b;
    let bits = q.bits();
    let drop = bits.saturating_sub(64);
    let top = (&q >> drop).to_f64().expect("64-bit value fits");
    top * 2f64.powi(drop as i32 - shift as i32)
}
