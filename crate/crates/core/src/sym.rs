//! Solvers for symmetric information: total plus row/column bounds, fixed
//! diagonal entries (2-D and 3-D) and fixed diagonal blocks.

use serde::{Deserialize, Serialize};

use crate::constraints::{consistency_check_blocks, FixedBlock, SolverCase};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::solution::{Multipliers, RootDiagnostics, Solution, TensorSolution};
use crate::vector::find_k_vector;

/// Default tolerance on `|f(lambda)|`.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Upper end of the extended search when the bracket preconditions fail.
const SCAN_LIMIT: f64 = 64.0;
const BISECT_WIDTH: f64 = 1e-14;
const MAX_BISECT: usize = 400;

fn check_nonneg(context: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        Some(&value) => Err(Error::NegativeValue {
            context: context.to_string(),
            value,
        }),
        None => Ok(()),
    }
}

/// Symmetric problem with total `s` and common upper bounds `u` on row and
/// column sums. The matrix is `y_i y_j / s` where `y` water-fills `s` under `u`.
pub fn solve_sym_total_row_col_bounds(s: f64, u: &[f64]) -> Result<Solution> {
    if let Some(&value) = u.iter().find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::NegativeValue {
            context: "row bounds".into(),
            value,
        });
    }
    check_nonneg("total", &[s])?;
    let n = u.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| u[i].total_cmp(&u[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| u[i]).collect();
    let k = find_k_vector(s, &sorted).map_err(|e| match e {
        Error::InfeasibleSum { target, bound_total } => Error::InfeasibleMarginals(format!(
            "total {target} exceeds the sum of bounds {bound_total}"
        )),
        other => other,
    })?;
    let pinned: f64 = sorted[..k].iter().sum();
    let level = if k == n {
        0.0
    } else {
        (s - pinned).max(0.0) / (n - k) as f64
    };
    let mut y = vec![level; n];
    for &i in &order[..k] {
        y[i] = u[i];
    }
    let matrix = Matrix::from_fn(n, n, |i, j| if s == 0.0 { 0.0 } else { y[i] * y[j] / s });
    let mut sol = Solution::new(matrix, SolverCase::SymTotalRowColBounds);
    sol.k = Some(k);
    sol.row_order = order.clone();
    sol.col_order = order;
    if s > 0.0 {
        let factors: Vec<Option<f64>> = y.iter().map(|&v| (v > 0.0).then_some(v)).collect();
        sol.multipliers = Some(Multipliers {
            scale: 1.0 / s,
            row: factors.clone(),
            col: factors,
        });
    }
    Ok(sol)
}

/// Coefficients of the scalar equation
/// `sum_{i<m} sqrt(1 - 4 r_i / lambda^2) - 2 sum_{i>=m} r_i / lambda^2 = m - 2`.
///
/// The first `m` entries of `r` belong to rows with a fixed diagonal entry
/// (or to whole blocks); the rest to rows whose diagonal is free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootProblem {
    pub r: Vec<f64>,
    pub m: usize,
    /// Sum of `r`; 1 when nothing is fixed, smaller once fixed mass is removed.
    pub sigma: f64,
}

impl RootProblem {
    /// Every entry constrained (`m = r.len()`).
    pub fn all_fixed(r: Vec<f64>) -> Self {
        let m = r.len();
        Self::new(r, m)
    }

    pub fn new(r: Vec<f64>, m: usize) -> Self {
        let sigma = r.iter().sum();
        Self { r, m, sigma }
    }

    pub fn r_max(&self) -> f64 {
        self.r.iter().copied().fold(0.0, f64::max)
    }

    /// `(2 sqrt(r_max), 4 sqrt(sigma) / 3)` with `r_max` taken over the
    /// constrained entries only. A larger free entry does not move the lower
    /// end: `f` is already positive at its `2 sqrt(r)` in some cases.
    pub fn bracket(&self) -> (f64, f64) {
        (self.domain_start(), 4.0 * self.sigma.sqrt() / 3.0)
    }

    /// Whether the conditions that guarantee a root inside [`Self::bracket`] hold.
    pub fn bracket_guaranteed(&self) -> bool {
        self.r.len() >= 3 && self.r.iter().all(|&r| r > 0.0 && r < self.sigma / 3.0)
    }

    /// Smallest `lambda` where every square root is real.
    pub fn domain_start(&self) -> f64 {
        2.0 * self.r[..self.m].iter().copied().fold(0.0, f64::max).sqrt()
    }

    fn free_mass(&self) -> f64 {
        self.r[self.m..].iter().sum()
    }

    /// Left-hand side minus right-hand side; increasing in `lambda`.
    pub fn f(&self, lambda: f64) -> f64 {
        let l2 = lambda * lambda;
        let roots: f64 = self.r[..self.m]
            .iter()
            .map(|&r| (1.0 - 4.0 * r / l2).max(0.0).sqrt())
            .sum();
        roots - 2.0 * self.free_mass() / l2 - (self.m as f64 - 2.0)
    }

    fn df(&self, lambda: f64) -> f64 {
        let l2 = lambda * lambda;
        let l3 = l2 * lambda;
        let roots: f64 = self.r[..self.m]
            .iter()
            .map(|&r| (4.0 * r / l3) / (1.0 - 4.0 * r / l2).sqrt())
            .sum();
        roots + 4.0 * self.free_mass() / l3
    }

    /// Row factor `lambda_i` given the root: the "-" branch for fixed entries,
    /// `r_i / lambda` for free ones.
    pub fn factor(&self, lambda: f64, i: usize) -> Result<f64> {
        let r = self.r[i];
        if i >= self.m {
            return Ok(r / lambda);
        }
        Ok(2.0 * r / (lambda + stable_sqrt_disc(lambda, r)?))
    }
}

/// `sqrt(lambda^2 - 4 r)`, snapping tiny negative rounding noise to zero.
fn stable_sqrt_disc(lambda: f64, r: f64) -> Result<f64> {
    let l2 = lambda * lambda;
    let disc = l2 - 4.0 * r;
    if disc >= 0.0 {
        Ok(disc.sqrt())
    } else if disc > -8.0 * f64::EPSILON * l2 {
        Ok(0.0)
    } else {
        Err(Error::DomainError(format!(
            "lambda {lambda} is below 2 sqrt({r})"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSolution {
    pub lambda: f64,
    /// Interval the root was isolated in.
    pub bracket: (f64, f64),
    pub guaranteed: bool,
    pub iterations: usize,
    /// `|f(lambda)|` at the returned point.
    pub residual: f64,
}

impl RootSolution {
    pub fn xi(&self) -> f64 {
        4.0 / (self.lambda * self.lambda)
    }

    fn diagnostics(&self, sigma: f64) -> RootDiagnostics {
        RootDiagnostics {
            lambda: self.lambda,
            xi: self.xi(),
            sigma,
            bracket: self.bracket,
            guaranteed: self.guaranteed,
            iterations: self.iterations,
            residual: self.residual,
        }
    }
}

/// Finds the unique root of [`RootProblem::f`].
///
/// Tries the guaranteed bracket first. If its sign conditions fail, searches
/// from the edge of the domain up to 64 and marks the result as not
/// guaranteed; no sign change there is a [`Error::BracketFailure`].
pub fn solve_root_lambda(p: &RootProblem, tol: f64) -> Result<RootSolution> {
    if p.m > p.r.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} fixed entries among {} coefficients",
            p.m,
            p.r.len()
        )));
    }
    check_nonneg("root coefficients", &p.r)?;
    if p.r.iter().all(|&r| r == 0.0) {
        return Err(Error::DomainError("all coefficients are zero".into()));
    }
    let guaranteed = p.bracket_guaranteed();
    let (lo, hi) = p.bracket();
    let (flo, fhi) = (p.f(lo), p.f(hi));
    let (lo, hi, guaranteed) = if lo > 0.0 && flo <= 0.0 && fhi > 0.0 {
        (lo, hi, guaranteed)
    } else {
        let start = p.domain_start().max(f64::MIN_POSITIVE.sqrt());
        (start, SCAN_LIMIT, false)
    };
    let found = |lambda: f64, iterations| RootSolution {
        lambda,
        bracket: (lo, hi),
        guaranteed,
        iterations,
        residual: p.f(lambda).abs(),
    };

    let f_lo = p.f(lo);
    if f_lo.abs() <= tol {
        return Ok(found(lo, 0));
    }
    let f_hi = p.f(hi);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::BracketFailure(format!(
            "no sign change of f on ({lo}, {hi}): f = ({f_lo}, {f_hi})"
        )));
    }

    let (mut a, mut b) = (lo, hi);
    let mut iterations = 0;
    while b - a > BISECT_WIDTH && iterations < MAX_BISECT {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = p.f(mid);
        debug_assert!(fm >= p.f(a) - 1e-12 && fm <= p.f(b) + 1e-12, "f must be increasing");
        if fm <= 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
    }
    let mid = 0.5 * (a + b);
    let mut lambda = mid;
    let d = p.df(mid);
    if d.is_finite() && d > 0.0 {
        let polished = mid - p.f(mid) / d;
        if polished >= lo && polished <= hi && p.f(polished).abs() <= p.f(mid).abs() {
            lambda = polished;
        }
    }
    Ok(found(lambda, iterations))
}

/// Power-series reversion of the root equation around `xi0`, in the variable
/// `xi = 4 / lambda^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesState {
    pub xi0: f64,
    /// `sqrt(1 - r_i xi0)` for the fixed entries.
    pub rho: Vec<f64>,
    /// Residual of the equation at `xi0`.
    pub delta: f64,
    /// Order-0, order-1 and order-2 terms of the series.
    pub terms: [f64; 3],
    pub order: u8,
    /// Sum of the terms up to `order`.
    pub xi: f64,
}

/// Approximates the root `xi` by reverting the series of the equation around
/// `xi0` and truncating at `order` (0, 1 or 2).
pub fn series_approx_xi(p: &RootProblem, xi0: f64, order: u8) -> Result<SeriesState> {
    if order > 2 {
        return Err(Error::DomainError(format!(
            "series order {order} is not supported (0, 1 or 2)"
        )));
    }
    let fixed = &p.r[..p.m];
    let mut rho = Vec::with_capacity(fixed.len());
    for &r in fixed {
        let arg = 1.0 - r * xi0;
        if !(arg > 0.0) {
            return Err(Error::DomainError(format!(
                "1 - r xi0 = {arg} for r = {r}, xi0 = {xi0}"
            )));
        }
        rho.push(arg.sqrt());
    }
    let free = p.free_mass();
    // g(xi) = sum rho_i - xi R / 2 - (m - 2), expanded to second order.
    let delta = rho.iter().sum::<f64>() - xi0 * free / 2.0 - (p.m as f64 - 2.0);
    let s1: f64 = fixed.iter().zip(&rho).map(|(r, q)| r / q).sum();
    let s3: f64 = fixed.iter().zip(&rho).map(|(r, q)| r * r / (q * q * q)).sum();
    let g1 = -(s1 + free) / 2.0;
    let g2 = -s3 / 4.0;
    let terms = [xi0, -delta / g1, -g2 * delta * delta / (2.0 * g1 * g1 * g1)];
    let xi = terms[..=order as usize].iter().sum();
    Ok(SeriesState {
        xi0,
        rho,
        delta,
        terms,
        order,
        xi,
    })
}

fn symmetric_from_factors(s: f64, lambda_i: &[f64], diagonal: impl Fn(usize) -> Option<f64>) -> Matrix {
    let n = lambda_i.len();
    let mut x = Matrix::zeros(n, n);
    for i in 0..n {
        x[(i, i)] = diagonal(i).unwrap_or(s * lambda_i[i] * lambda_i[i]);
        for j in (i + 1)..n {
            let v = s * lambda_i[i] * lambda_i[j];
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    x
}

/// Symmetric row/column sums `u`, with the first `w_diag.len()` diagonal
/// entries fixed to `w_diag`.
pub fn solve_sym_fixed_diagonal(u: &[f64], w_diag: &[f64], tol: f64) -> Result<Solution> {
    let (sol, _) = fixed_diagonal(u, w_diag, tol)?;
    Ok(sol)
}

/// Like [`solve_sym_fixed_diagonal`] with `u` read as upper bounds. The same
/// matrix is optimal provided every factor `lambda_i` is at most 1, which is
/// checked.
pub fn solve_sym_fixed_diagonal_upper(u: &[f64], w_diag: &[f64], tol: f64) -> Result<Solution> {
    let (sol, factors) = fixed_diagonal(u, w_diag, tol)?;
    if let Some((index, &value)) = factors.iter().enumerate().find(|(_, &l)| l > 1.0 + 1e-12) {
        return Err(Error::MultiplierOutOfRange { index, value });
    }
    Ok(sol)
}

fn fixed_diagonal(u: &[f64], w_diag: &[f64], tol: f64) -> Result<(Solution, Vec<f64>)> {
    check_nonneg("row sums", u)?;
    check_nonneg("fixed diagonal", w_diag)?;
    let n = u.len();
    let m = w_diag.len();
    if m > n {
        return Err(Error::ShapeMismatch(format!(
            "{m} fixed diagonal entries for {n} rows"
        )));
    }
    let s: f64 = u.iter().sum();
    if s == 0.0 {
        let sol = Solution::new(Matrix::zeros(n, n), SolverCase::SymFixedDiagonal);
        return Ok((sol, vec![0.0; n]));
    }
    let blocks: Vec<FixedBlock> = w_diag
        .iter()
        .enumerate()
        .map(|(i, &w)| FixedBlock::singleton(i, w))
        .collect();
    consistency_check_blocks(u, &blocks, s).into_result()?;

    let r: Vec<f64> = (0..n)
        .map(|i| {
            let w = w_diag.get(i).copied().unwrap_or(0.0);
            ((u[i] - w) / s).max(0.0)
        })
        .collect();
    let problem = RootProblem::new(r, m);
    let root = solve_root_lambda(&problem, tol)?;
    let factors = (0..n)
        .map(|i| problem.factor(root.lambda, i))
        .collect::<Result<Vec<f64>>>()?;
    let matrix = symmetric_from_factors(s, &factors, |i| w_diag.get(i).copied());
    let mut sol = Solution::new(matrix, SolverCase::SymFixedDiagonal);
    sol.k = Some(m);
    sol.root = Some(root.diagnostics(problem.sigma));
    let opt: Vec<Option<f64>> = factors.iter().map(|&l| (l > 0.0).then_some(l)).collect();
    sol.multipliers = Some(Multipliers {
        scale: s,
        row: opt.clone(),
        col: opt,
    });
    Ok((sol, factors))
}

/// Symmetric 3-D problem with zero diagonal in every slice. `u[i][k]` is the
/// sum of section `(i, k)`. Slices are solved independently, each against the
/// grand total `s`.
pub fn solve_sym_3d_fixed_diagonal(u: &[Vec<f64>], tol: f64) -> Result<TensorSolution> {
    let n = u.len();
    let slices = u.first().map_or(0, Vec::len);
    if u.iter().any(|row| row.len() != slices) {
        return Err(Error::ShapeMismatch("ragged section sums".into()));
    }
    for row in u {
        check_nonneg("section sums", row)?;
    }
    let s: f64 = u.iter().flatten().sum();
    let mut out = TensorSolution {
        slices: Vec::with_capacity(slices),
        case: SolverCase::Sym3DFixedDiagonal,
        xi: Vec::with_capacity(slices),
        lambda: Vec::with_capacity(slices),
        guaranteed: Vec::with_capacity(slices),
        total: 0.0,
    };
    for k in 0..slices {
        let col: Vec<f64> = u.iter().map(|row| row[k]).collect();
        let slice_total: f64 = col.iter().sum();
        if slice_total == 0.0 {
            out.slices.push(Matrix::zeros(n, n));
            out.xi.push(f64::NAN);
            out.lambda.push(f64::NAN);
            out.guaranteed.push(true);
            continue;
        }
        let solved = (|| {
            let zero_diag: Vec<FixedBlock> = (0..n).map(|i| FixedBlock::singleton(i, 0.0)).collect();
            consistency_check_blocks(&col, &zero_diag, slice_total).into_result()?;
            let problem = RootProblem::all_fixed(col.iter().map(|&x| x / s).collect());
            let root = solve_root_lambda(&problem, tol)?;
            let factors = (0..n)
                .map(|i| problem.factor(root.lambda, i))
                .collect::<Result<Vec<f64>>>()?;
            Ok((symmetric_from_factors(s, &factors, |_| Some(0.0)), root))
        })()
        .map_err(|e: Error| e.in_slice(k))?;
        let (matrix, root) = solved;
        out.total += matrix.sum();
        out.slices.push(matrix);
        out.xi.push(root.xi());
        out.lambda.push(root.lambda);
        out.guaranteed.push(root.guaranteed);
    }
    Ok(out)
}

/// Symmetric row/column sums `u` with fixed diagonal blocks that partition
/// the index set (at least three blocks). Entries inside a block equal the
/// block; entries across blocks are `s lambda_i lambda_j`.
pub fn solve_sym_block_diagonal(u: &[f64], blocks: &[FixedBlock], tol: f64) -> Result<Solution> {
    check_nonneg("row sums", u)?;
    let n = u.len();
    if blocks.len() < 3 {
        return Err(Error::Unsupported(format!(
            "{} fixed blocks; at least three are needed",
            blocks.len()
        )));
    }
    let mut block_of = vec![usize::MAX; n];
    for (b, block) in blocks.iter().enumerate() {
        if block.matrix.rows() != block.len() || block.matrix.cols() != block.len() {
            return Err(Error::ShapeMismatch(format!(
                "block {:?} has a {}x{} matrix",
                block.indices,
                block.matrix.rows(),
                block.matrix.cols()
            )));
        }
        check_nonneg("fixed block", block.matrix.as_slice())?;
        for &i in &block.indices {
            if i >= n {
                return Err(Error::IndexOutOfRange {
                    context: "fixed block".into(),
                    index: i,
                    limit: n,
                });
            }
            if block_of[i] != usize::MAX {
                return Err(Error::ShapeMismatch(format!("index {i} is in two blocks")));
            }
            block_of[i] = b;
        }
    }
    if let Some(i) = block_of.iter().position(|&b| b == usize::MAX) {
        return Err(Error::Unsupported(format!(
            "fixed blocks must cover every index; {i} is not covered"
        )));
    }
    let s: f64 = u.iter().sum();
    if s == 0.0 {
        return Ok(Solution::new(Matrix::zeros(n, n), SolverCase::SymBlockDiagonal));
    }
    consistency_check_blocks(u, blocks, s).into_result()?;

    let mut r = vec![0.0; n];
    let mut r_block = vec![0.0; blocks.len()];
    for (b, block) in blocks.iter().enumerate() {
        for (a, &i) in block.indices.iter().enumerate() {
            let within: f64 = block.matrix.row(a).iter().sum();
            r[i] = ((u[i] - within) / s).max(0.0);
            r_block[b] += r[i];
        }
    }
    let problem = RootProblem::all_fixed(r_block.clone());
    let root = solve_root_lambda(&problem, tol)?;
    let lambda = root.lambda;
    let mut coef = Vec::with_capacity(blocks.len());
    for &rb in &r_block {
        coef.push(2.0 / (lambda + stable_sqrt_disc(lambda, rb)?));
    }
    let factors: Vec<f64> = (0..n).map(|i| r[i] * coef[block_of[i]]).collect();

    let mut matrix = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if block_of[i] != block_of[j] {
                let v = s * factors[i] * factors[j];
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
    }
    for block in blocks {
        for (a, &i) in block.indices.iter().enumerate() {
            for (c, &j) in block.indices.iter().enumerate() {
                matrix[(i, j)] = block.matrix[(a, c)];
            }
        }
    }
    let mut sol = Solution::new(matrix, SolverCase::SymBlockDiagonal);
    sol.k = Some(blocks.len());
    sol.root = Some(root.diagnostics(problem.sigma));
    let opt: Vec<Option<f64>> = factors.iter().map(|&l| (l > 0.0).then_some(l)).collect();
    sol.multipliers = Some(Multipliers {
        scale: s,
        row: opt.clone(),
        col: opt,
    });
    Ok(sol)
}
