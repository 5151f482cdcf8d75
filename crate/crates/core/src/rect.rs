//! Closed-form solvers for rectangular problems.

use crate::constraints::{approx_eq, approx_le, SolverCase};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::solution::{Multipliers, Solution};
use crate::vector::{find_k_vector, waterfill_bounded_sum, BoundedVectorProblem};

fn check_nonneg(context: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| v.is_nan() || **v < 0.0) {
        Some(&value) => Err(Error::NegativeValue {
            context: context.to_string(),
            value,
        }),
        None => Ok(()),
    }
}

fn check_finite(context: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| v.is_infinite()) {
        return Err(Error::Unbounded(format!("{context} has no finite bound")));
    }
    Ok(())
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    order
}

/// Row sums `u` known exactly, the first `v.len()` column sums known exactly,
/// `m` columns in all.
///
/// The known columns follow the gravity model `u_i v_j / s`; the remaining
/// mass of each row spreads evenly over the unknown columns.
pub fn solve_gravity_partial_cols(u: &[f64], v: &[f64], m: usize) -> Result<Solution> {
    check_nonneg("row sums", u)?;
    check_nonneg("column sums", v)?;
    check_finite("row sum", u)?;
    check_finite("column sum", v)?;
    let ell = v.len();
    if ell > m {
        return Err(Error::ShapeMismatch(format!(
            "{ell} column sums for {m} columns"
        )));
    }
    let n = u.len();
    let s: f64 = u.iter().sum();
    let known: f64 = v.iter().sum();
    if ell == m && !approx_eq(s, known) {
        return Err(Error::InfeasibleMarginals(format!(
            "row sums total {s} but column sums total {known}"
        )));
    }
    if !approx_le(known, s) {
        return Err(Error::InfeasibleMarginals(format!(
            "column sums {known} exceed the row total {s}"
        )));
    }
    let rest = (s - known).max(0.0);
    let spread = (m - ell) as f64;
    let matrix = Matrix::from_fn(n, m, |i, j| {
        if s == 0.0 {
            0.0
        } else if j < ell {
            u[i] * v[j] / s
        } else if known == 0.0 {
            u[i] / spread
        } else {
            rest * u[i] / (spread * s)
        }
    });
    let mut sol = Solution::new(matrix, SolverCase::GravityPartialCols);
    sol.k = Some(ell);
    if s > 0.0 {
        let level = if ell < m { rest / spread } else { 0.0 };
        sol.multipliers = Some(Multipliers {
            scale: 1.0 / s,
            row: u.iter().map(|&ui| (ui > 0.0).then_some(ui)).collect(),
            col: (0..m)
                .map(|j| {
                    let c = if j < ell { v[j] } else { level };
                    (c > 0.0).then_some(c)
                })
                .collect(),
        });
    }
    Ok(sol)
}

/// Upper bounds `u` on row sums only: every row saturates its bound and is
/// constant, `x_ij = u_i / m`.
pub fn solve_row_bounds(u: &[f64], m: usize) -> Result<Solution> {
    check_nonneg("row bounds", u)?;
    check_finite("row", u)?;
    let matrix = Matrix::from_fn(u.len(), m, |i, _| u[i] / m as f64);
    let mut sol = Solution::new(matrix, SolverCase::RowBounds);
    sol.k = Some(u.len());
    let total = sol.total;
    if total > 0.0 {
        sol.multipliers = Some(Multipliers {
            scale: total,
            row: u
                .iter()
                .map(|&ui| (ui > 0.0).then(|| ui / (m as f64 * total)))
                .collect(),
            col: vec![Some(1.0); m],
        });
    }
    Ok(sol)
}

/// Total `s` known, upper bounds `u` on row sums. The `k` rows with the
/// smallest bounds saturate; all other entries share a common value.
pub fn solve_total_row_bounds(s: f64, u: &[f64], m: usize) -> Result<Solution> {
    let mut sol = total_row_bounds(s, u, m)?;
    sol.case = SolverCase::TotalRowBounds;
    Ok(sol)
}

fn total_row_bounds(s: f64, u: &[f64], m: usize) -> Result<Solution> {
    check_nonneg("row bounds", u)?;
    check_nonneg("total", &[s])?;
    if s.is_infinite() {
        return Err(Error::Unbounded("infinite total".into()));
    }
    let n = u.len();
    let order = ascending(u);
    let sorted: Vec<f64> = order.iter().map(|&i| u[i]).collect();
    let k = find_k_vector(s, &sorted).map_err(|e| match e {
        Error::InfeasibleSum { target, bound_total } => Error::InfeasibleMarginals(format!(
            "total {target} exceeds the sum of row bounds {bound_total}"
        )),
        other => other,
    })?;
    let pinned: f64 = sorted[..k].iter().sum();
    let level = if k == n {
        0.0
    } else {
        (s - pinned).max(0.0) / (m * (n - k)) as f64
    };
    let mut saturated = vec![false; n];
    for &i in &order[..k] {
        saturated[i] = true;
    }
    let matrix = Matrix::from_fn(n, m, |i, _| {
        if saturated[i] {
            u[i] / m as f64
        } else {
            level
        }
    });
    let mut sol = Solution::new(matrix, SolverCase::TotalRowBounds);
    sol.k = Some(k);
    sol.row_order = order;
    if s > 0.0 {
        // Free rows sit at the common level; saturated rows sit at or below it.
        let scale = if k == n {
            sorted[n - 1] / m as f64
        } else {
            level
        };
        sol.multipliers = Some(Multipliers {
            scale,
            row: (0..n)
                .map(|i| {
                    if !saturated[i] {
                        Some(1.0)
                    } else if u[i] > 0.0 {
                        Some(u[i] / m as f64 / scale)
                    } else {
                        None
                    }
                })
                .collect(),
            col: vec![Some(1.0); m],
        });
    }
    Ok(sol)
}

/// Total bounded above by `ubar`, upper bounds `u` on row sums. The total is
/// pushed as high as the constraints allow.
pub fn solve_bounded_total_row_bounds(ubar: f64, u: &[f64], m: usize) -> Result<Solution> {
    check_nonneg("total bound", &[ubar])?;
    check_nonneg("row bounds", u)?;
    let total: f64 = u.iter().sum();
    let mut sol = if ubar > total {
        solve_row_bounds(u, m)?
    } else {
        total_row_bounds(ubar.min(total), u, m)?
    };
    sol.case = SolverCase::BoundedTotalRowBounds;
    Ok(sol)
}

/// Upper bounds `u` on row sums and `v` on column sums.
///
/// The side with the smaller total saturates completely; on the other side the
/// `k` smallest bounds saturate and the rest stay strictly below their bounds.
pub fn solve_row_col_bounds(u: &[f64], v: &[f64]) -> Result<Solution> {
    check_nonneg("row bounds", u)?;
    check_nonneg("column bounds", v)?;
    let su: f64 = u.iter().sum();
    let sv: f64 = v.iter().sum();
    if su.is_infinite() && sv.is_infinite() {
        return Err(Error::Unbounded(
            "some row and some column have no finite bound".into(),
        ));
    }
    if su > sv && !approx_eq(su, sv) {
        return Ok(row_col_bounds(v, u, sv)?.transpose());
    }
    row_col_bounds(u, v, su)
}

/// Core of [`solve_row_col_bounds`] with `total = sum(u) <= sum(v)`.
fn row_col_bounds(u: &[f64], v: &[f64], total: f64) -> Result<Solution> {
    let (n, m) = (u.len(), v.len());
    let order = ascending(v);
    let sorted: Vec<f64> = order.iter().map(|&j| v[j]).collect();
    let sv: f64 = sorted.iter().sum();

    if approx_eq(total, sv) {
        // Both sides saturate: plain gravity model.
        let mut sol = solve_gravity_partial_cols(u, v, m)?;
        sol.case = SolverCase::RowColBounds;
        sol.k = Some(m);
        if let Some(mult) = sol.multipliers.as_mut() {
            mult.scale = total;
            for r in mult.row.iter_mut().flatten() {
                *r /= total;
            }
            for c in mult.col.iter_mut().flatten() {
                *c /= total;
            }
        }
        return Ok(sol);
    }

    // Scan for the unique k with v_k <= L_k < v_{k+1}, L_k = (U - V_k)/(m - k).
    let mut prefix = 0.0;
    let mut found = None;
    for k in 0..m {
        let level = (total - prefix) / (m - k) as f64;
        let below = k == 0 || sorted[k - 1] <= level;
        if below && level < sorted[k] {
            found = Some((k, prefix));
            break;
        }
        prefix += sorted[k];
    }
    let (k, pinned) = match found {
        Some(kp) => kp,
        None => {
            let k = find_k_vector(total, &sorted)?.min(m.saturating_sub(1));
            (k, sorted[..k].iter().sum())
        }
    };
    debug_assert_eq!(Some(k), find_k_vector(total, &sorted).ok());
    let level = (total - pinned).max(0.0) / (m - k) as f64;

    let mut col_value = vec![level; m];
    for &j in &order[..k] {
        col_value[j] = v[j];
    }
    let matrix = Matrix::from_fn(n, m, |i, j| {
        if total == 0.0 {
            0.0
        } else {
            u[i] * col_value[j] / total
        }
    });
    let mut sol = Solution::new(matrix, SolverCase::RowColBounds);
    sol.k = Some(k);
    sol.col_order = order;
    if total > 0.0 {
        sol.multipliers = Some(Multipliers {
            scale: total,
            row: u
                .iter()
                .map(|&ui| (ui > 0.0).then(|| level / total * (ui / total)))
                .collect(),
            col: col_value
                .iter()
                .map(|&c| if level > 0.0 { Some(c / level) } else { None })
                .collect(),
        });
    }
    Ok(sol)
}

/// Upper bounds `u` on row sums and element bounds `w`; rows are independent
/// and each one is water-filled against its element bounds.
pub fn solve_row_bounds_elem_bounds(u: &[f64], w: &Matrix) -> Result<Solution> {
    check_nonneg("row bounds", u)?;
    check_nonneg("element bounds", w.as_slice())?;
    if w.rows() != u.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} row bounds for {} rows of element bounds",
            u.len(),
            w.rows()
        )));
    }
    let mut matrix = Matrix::zeros(w.rows(), w.cols());
    for (i, &ui) in u.iter().enumerate() {
        let row = waterfill_bounded_sum(&BoundedVectorProblem::new(ui, w.row(i)))
            .map_err(|e| match e {
                Error::Unbounded(_) => {
                    Error::Unbounded(format!("row {i} has no finite bound"))
                }
                other => other,
            })?;
        for (j, x) in row.x.into_iter().enumerate() {
            matrix[(i, j)] = x;
        }
    }
    Ok(Solution::new(matrix, SolverCase::RowBoundsElemBounds))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_row_bounds() -> Vec<f64> {
        vec![20.0, 20.0, 24.0, 30.0, 30.0, 36.0, 36.0, 36.0, 36.0, 40.0]
    }

    #[test]
    fn gravity_examples() {
        let sol = solve_gravity_partial_cols(&[6.0, 4.0], &[5.0], 3).unwrap();
        assert_eq!(sol.matrix.to_rows(), vec![vec![3.0, 1.5, 1.5], vec![2.0, 1.0, 1.0]]);
        let sol = solve_gravity_partial_cols(&[7.0, 3.0], &[6.0, 4.0], 2).unwrap();
        let want = Matrix::from_rows(&[[4.2, 2.8], [1.8, 1.2]]).unwrap();
        assert!(sol.matrix.max_abs_diff(&want) < 1e-12);
        let sol = solve_gravity_partial_cols(&[6.0, 4.0], &[], 2).unwrap();
        assert_eq!(sol.matrix.to_rows(), vec![vec![3.0, 3.0], vec![2.0, 2.0]]);
        assert!(solve_gravity_partial_cols(&[6.0, 4.0], &[11.0], 2).is_err());
        assert!(solve_gravity_partial_cols(&[6.0, 4.0], &[5.0, 4.0], 2).is_err());
    }

    #[test]
    fn row_bounds_examples() {
        let sol = solve_row_bounds(&ten_row_bounds(), 10).unwrap();
        for (i, u) in ten_row_bounds().iter().enumerate() {
            assert!(sol.matrix.row(i).iter().all(|&x| x == u / 10.0));
        }
        let sol = solve_row_bounds(&[7.0], 4).unwrap();
        assert_eq!(sol.matrix.row(0), &[1.75; 4]);
        assert_eq!(solve_row_bounds(&[0.0, 0.0], 3).unwrap().total, 0.0);
        assert!(matches!(solve_row_bounds(&[f64::INFINITY], 3), Err(Error::Unbounded(_))));
    }

    #[test]
    fn total_row_bounds_table() {
        let u = ten_row_bounds();
        let sol = solve_total_row_bounds(275.0, &u, 10).unwrap();
        assert_eq!(sol.k, Some(5));
        let rows = sol.matrix.row_sums();
        for (got, want) in rows.iter().zip([20.0, 20.0, 24.0, 30.0, 30.0, 30.2, 30.2, 30.2, 30.2, 30.2]) {
            assert!((got - want).abs() < 1e-9);
        }
        let sol = solve_total_row_bounds(273.0, &u, 10).unwrap();
        assert_eq!(sol.k, Some(3));
        assert!((sol.matrix.row_sums()[9] - 209.0 / 7.0).abs() < 1e-9);
        let full = solve_total_row_bounds(308.0, &u, 10).unwrap();
        assert_eq!(full.matrix, solve_row_bounds(&u, 10).unwrap().matrix);
        let uniform = solve_total_row_bounds(100.0, &u, 10).unwrap();
        assert!(uniform.matrix.as_slice().iter().all(|&x| x == 1.0));
        assert!(matches!(
            solve_total_row_bounds(309.0, &u, 10),
            Err(Error::InfeasibleMarginals(_))
        ));
    }

    #[test]
    fn bounded_total_cases() {
        let u = ten_row_bounds();
        let free = solve_bounded_total_row_bounds(1000.0, &u, 10).unwrap();
        assert_eq!(free.matrix, solve_row_bounds(&u, 10).unwrap().matrix);
        let tight = solve_bounded_total_row_bounds(275.0, &u, 10).unwrap();
        assert_eq!(tight.matrix, solve_total_row_bounds(275.0, &u, 10).unwrap().matrix);
        let edge = solve_bounded_total_row_bounds(308.0, &u, 10).unwrap();
        assert_eq!(edge.matrix, free.matrix);
    }

    #[test]
    fn row_col_bounds_examples() {
        let sol = solve_row_col_bounds(&[3.0, 3.0], &[1.0, 2.0, 10.0]).unwrap();
        assert_eq!(sol.k, Some(2));
        let want = Matrix::from_rows(&[[0.5, 1.0, 1.5], [0.5, 1.0, 1.5]]).unwrap();
        assert!(sol.matrix.max_abs_diff(&want) < 1e-12);
        let mult = sol.multipliers.unwrap();
        assert_eq!(mult.col[2], Some(1.0));
        assert!(mult.col[0].unwrap() < 1.0);

        let loose = solve_row_col_bounds(&[3.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(loose.k, Some(0));
        assert!(loose.matrix.as_slice().iter().all(|&x| x == 1.0));

        let with_inf = solve_row_col_bounds(&[3.0, 3.0], &[1.0, f64::INFINITY, 2.0, 10.0]).unwrap();
        // The extra unbounded column takes mass, so the bound 2 stops binding.
        assert_eq!(with_inf.k, Some(1));
        assert_eq!(with_inf.matrix[(0, 0)], 0.5);
        for j in 1..4 {
            assert!((with_inf.matrix[(0, j)] - 5.0 / 6.0).abs() < 1e-12);
        }

        let swapped = solve_row_col_bounds(&[1.0, 2.0, 10.0], &[3.0, 3.0]).unwrap();
        assert!(swapped.matrix.max_abs_diff(&want.transpose()) < 1e-12);
    }

    #[test]
    fn elem_bounds_examples() {
        let w = Matrix::from_rows(&[[2.0, 5.0, 9.0]]).unwrap();
        let sol = solve_row_bounds_elem_bounds(&[10.0], &w).unwrap();
        assert_eq!(sol.matrix.row(0), &[2.0, 4.0, 4.0]);
        let sol = solve_row_bounds_elem_bounds(&[100.0], &w).unwrap();
        assert_eq!(sol.matrix.row(0), &[2.0, 5.0, 9.0]);
        let inf = Matrix::from_fn(2, 2, |_, _| f64::INFINITY);
        let sol = solve_row_bounds_elem_bounds(&[6.0, 4.0], &inf).unwrap();
        assert_eq!(sol.matrix.to_rows(), vec![vec![3.0, 3.0], vec![2.0, 2.0]]);
    }
}
