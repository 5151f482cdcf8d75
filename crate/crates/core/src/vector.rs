//! Water-filling for maximum-entropy vectors under upper bounds.

use crate::error::{Error, Result};

/// Relative slack used when comparing partial sums against the target.
const SUM_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedVectorProblem {
    /// Target (or maximal) sum.
    pub a: f64,
    /// Upper bounds; `f64::INFINITY` means unbounded.
    pub b: Vec<f64>,
}

impl BoundedVectorProblem {
    pub fn new(a: f64, b: impl Into<Vec<f64>>) -> Self {
        Self { a, b: b.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillResult {
    /// Solution in the original input order.
    pub x: Vec<f64>,
    /// Number of entries pinned at their bound.
    pub k: usize,
    /// Common value of the entries that are not pinned (the water level).
    /// When every entry is pinned this is the largest bound.
    pub mu: f64,
    /// `permutation[p]` is the input index of the `p`-th smallest bound.
    pub permutation: Vec<usize>,
}

fn check_inputs(a: f64, b: &[f64]) -> Result<()> {
    if a.is_nan() || a < 0.0 {
        return Err(Error::NegativeValue {
            context: "target sum".into(),
            value: a,
        });
    }
    if let Some(&v) = b.iter().find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::NegativeValue {
            context: "upper bound".into(),
            value: v,
        });
    }
    Ok(())
}

/// Largest `k` in `0..=n` with `b_1 + ... + b_k + (n - k) b_k <= a`, for `b`
/// sorted ascending (1-based in the formula, `b_0 = 0`).
pub fn find_k_vector(a: f64, b_sorted: &[f64]) -> Result<usize> {
    check_inputs(a, b_sorted)?;
    debug_assert!(b_sorted.windows(2).all(|w| w[0] <= w[1]), "bounds must be sorted");
    let n = b_sorted.len();
    let total: f64 = b_sorted.iter().sum();
    if a > total && a - total > SUM_RTOL * a {
        return Err(Error::InfeasibleSum {
            target: a,
            bound_total: total,
        });
    }
    let mut k = 0;
    let mut prefix = 0.0;
    let mut prev_phi = a;
    for j in 1..=n {
        let bj = b_sorted[j - 1];
        if bj.is_infinite() {
            break;
        }
        prefix += bj;
        let rest = if j == n { 0.0 } else { (n - j) as f64 * bj };
        let phi = a - prefix - rest;
        debug_assert!(
            !phi.is_finite() || phi <= prev_phi + SUM_RTOL * a.max(1.0),
            "phi must be nonincreasing"
        );
        if phi.is_nan() || phi < -SUM_RTOL * a.max(prefix) {
            break;
        }
        prev_phi = phi;
        k = j;
    }
    Ok(k)
}

fn sort_permutation(b: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..b.len()).collect();
    perm.sort_by(|&i, &j| b[i].total_cmp(&b[j]));
    perm
}

/// Maximum-entropy vector with `sum(x) = a` and `x <= b`.
pub fn waterfill_equal_sum(p: &BoundedVectorProblem) -> Result<WaterfillResult> {
    check_inputs(p.a, &p.b)?;
    let n = p.b.len();
    let permutation = sort_permutation(&p.b);
    let sorted: Vec<f64> = permutation.iter().map(|&i| p.b[i]).collect();
    if n == 0 {
        if p.a > 0.0 {
            return Err(Error::InfeasibleSum {
                target: p.a,
                bound_total: 0.0,
            });
        }
        return Ok(WaterfillResult {
            x: Vec::new(),
            k: 0,
            mu: 0.0,
            permutation,
        });
    }
    let k = find_k_vector(p.a, &sorted)?;
    let pinned: f64 = sorted[..k].iter().sum();
    let mu = if k == n {
        sorted[n - 1]
    } else {
        ((p.a - pinned) / (n - k) as f64).max(0.0)
    };
    let mut x = vec![0.0; n];
    for (pos, &i) in permutation.iter().enumerate() {
        x[i] = if pos < k { sorted[pos] } else { mu };
    }
    Ok(WaterfillResult {
        x,
        k,
        mu,
        permutation,
    })
}

/// Maximum-entropy vector with `sum(x) <= a` and `x <= b`: the sum is pushed
/// to `min(a, sum(b))`.
pub fn waterfill_bounded_sum(p: &BoundedVectorProblem) -> Result<WaterfillResult> {
    check_inputs(p.a, &p.b)?;
    let total: f64 = p.b.iter().sum();
    if p.a < total {
        return waterfill_equal_sum(p);
    }
    if total.is_infinite() {
        return Err(Error::Unbounded(
            "unbounded sum over unbounded entries".into(),
        ));
    }
    let permutation = sort_permutation(&p.b);
    Ok(WaterfillResult {
        x: p.b.clone(),
        k: p.b.len(),
        mu: permutation.last().map_or(0.0, |&i| p.b[i]),
        permutation,
    })
}
