//! Entry point that validates a problem, picks the closed-form case and
//! maps the problem onto that case's solver.

use serde::{Deserialize, Serialize};

use crate::constraints::{classify, validate_spec, Bound, ProblemSpec, SolverCase, SumKind, ValidatedProblem};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rect;
use crate::solution::{Solution, TensorSolution};
use crate::sym;

/// Result of [`solve`]: a matrix for 2-D problems, slices for 3-D ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Solved {
    Matrix(Solution),
    Tensor(TensorSolution),
}

impl Solved {
    pub fn case(&self) -> SolverCase {
        match self {
            Solved::Matrix(s) => s.case,
            Solved::Tensor(t) => t.case,
        }
    }

    pub fn total(&self) -> f64 {
        match self {
            Solved::Matrix(s) => s.total,
            Solved::Tensor(t) => t.total,
        }
    }

    pub fn as_matrix(&self) -> Option<&Solution> {
        match self {
            Solved::Matrix(s) => Some(s),
            Solved::Tensor(_) => None,
        }
    }

    pub fn as_tensor(&self) -> Option<&TensorSolution> {
        match self {
            Solved::Tensor(t) => Some(t),
            Solved::Matrix(_) => None,
        }
    }

    /// All entries, slice-major.
    pub fn cells(&self) -> Vec<f64> {
        match self {
            Solved::Matrix(s) => s.matrix.as_slice().to_vec(),
            Solved::Tensor(t) => t.slices.iter().flat_map(|m| m.as_slice().iter().copied()).collect(),
        }
    }
}

/// Solves `spec` in closed form. `tol` is the root-finding tolerance of the
/// symmetric cases (see [`sym::DEFAULT_TOL`]).
pub fn solve(spec: &ProblemSpec, tol: f64) -> Result<Solved> {
    let p = validate_spec(spec)?;
    let case = classify(&p);
    match case {
        SolverCase::Sym3DFixedDiagonal => {
            let u: Vec<Vec<f64>> = (0..p.n())
                .map(|i| (0..p.slices()).map(|k| p.row_bounds(k)[i].value()).collect())
                .collect();
            sym::solve_sym_3d_fixed_diagonal(&u, tol).map(Solved::Tensor)
        }
        SolverCase::Unsupported => Err(Error::Unsupported(describe(&p))),
        _ => solve_matrix(&p, case, tol).map(Solved::Matrix),
    }
}

/// Scalar root problems behind a fixed-diagonal solve, one per slice, with
/// the fixed rows first. Empty for every other case.
pub fn root_problems(spec: &ProblemSpec) -> Result<Vec<sym::RootProblem>> {
    let p = validate_spec(spec)?;
    match classify(&p) {
        SolverCase::SymFixedDiagonal => {
            let n = p.n();
            let mut diag = vec![None; n];
            for b in p.fixed_blocks() {
                diag[b.indices[0]] = Some(b.matrix[(0, 0)]);
            }
            let rows = p.row_bounds(0);
            let s: f64 = rows.iter().map(|b| b.value()).sum();
            let order = (0..n).filter(|&i| diag[i].is_some()).chain((0..n).filter(|&i| diag[i].is_none()));
            let r = order
                .map(|i| ((rows[i].value() - diag[i].unwrap_or(0.0)) / s).max(0.0))
                .collect();
            let m = diag.iter().filter(|d| d.is_some()).count();
            Ok(vec![sym::RootProblem::new(r, m)])
        }
        SolverCase::Sym3DFixedDiagonal => {
            let s: f64 = (0..p.slices()).flat_map(|k| p.row_bounds(k).iter().map(|b| b.value())).sum();
            Ok((0..p.slices())
                .map(|k| sym::RootProblem::all_fixed(p.row_bounds(k).iter().map(|b| b.value() / s).collect()))
                .collect())
        }
        _ => Ok(Vec::new()),
    }
}

fn values(bounds: &[Bound]) -> Vec<f64> {
    bounds.iter().map(|b| b.value()).collect()
}

fn all_free(bounds: &[Bound]) -> bool {
    bounds.iter().all(|b| b.is_free())
}

fn solve_matrix(p: &ValidatedProblem, case: SolverCase, tol: f64) -> Result<Solution> {
    let rows = p.row_bounds(0);
    let cols = p.col_bounds(0);
    let (n, m) = (p.n(), p.m());
    let total = p.total().map(|t| t.value);
    match case {
        SolverCase::GravityPartialCols => {
            if rows.iter().all(|b| b.is_equal()) {
                gravity(rows, cols)
            } else {
                gravity(cols, rows).map(Solution::transpose)
            }
        }
        SolverCase::RowBounds => {
            if all_free(cols) {
                rect::solve_row_bounds(&values(rows), m)
            } else {
                rect::solve_row_bounds(&values(cols), n).map(Solution::transpose)
            }
        }
        SolverCase::TotalRowBounds | SolverCase::BoundedTotalRowBounds => {
            let s = total.expect("classified with a total");
            let run = |u: &[f64], width: usize| {
                if case == SolverCase::TotalRowBounds {
                    rect::solve_total_row_bounds(s, u, width)
                } else {
                    rect::solve_bounded_total_row_bounds(s, u, width)
                }
            };
            if all_free(cols) {
                run(&values(rows), m)
            } else {
                run(&values(cols), n).map(Solution::transpose)
            }
        }
        SolverCase::RowColBounds => rect::solve_row_col_bounds(&values(rows), &values(cols)),
        SolverCase::RowBoundsElemBounds => {
            let mut w = Matrix::from_fn(n, m, |_, _| f64::INFINITY);
            for e in p.element_bounds() {
                w[(e.i, e.j)] = w[(e.i, e.j)].min(e.ub);
            }
            rect::solve_row_bounds_elem_bounds(&values(rows), &w)
        }
        SolverCase::SymTotalRowColBounds => {
            let s = total.expect("classified with a total");
            sym::solve_sym_total_row_col_bounds(s, &values(rows))
        }
        SolverCase::SymFixedDiagonal => sym_fixed_diagonal(p, tol),
        SolverCase::SymBlockDiagonal => {
            let sol = sym::solve_sym_block_diagonal(&values(rows), p.fixed_blocks(), tol)?;
            if rows.iter().all(|b| b.is_upper()) {
                check_factors_at_most_one(&sol)?;
            }
            Ok(sol)
        }
        SolverCase::Sym3DFixedDiagonal | SolverCase::Unsupported => {
            unreachable!("handled by the caller")
        }
    }
}

/// Gravity model with `known` fully specified and `other` partly specified.
/// Known entries of `other` are moved to the front and moved back afterwards.
fn gravity(known: &[Bound], other: &[Bound]) -> Result<Solution> {
    let u = values(known);
    let mut col_of: Vec<usize> = (0..other.len()).filter(|&j| other[j].is_equal()).collect();
    let ell = col_of.len();
    col_of.extend((0..other.len()).filter(|&j| !other[j].is_equal()));
    let v: Vec<f64> = col_of[..ell].iter().map(|&j| other[j].value()).collect();
    let mut sol = rect::solve_gravity_partial_cols(&u, &v, other.len())?;
    let row_of: Vec<usize> = (0..known.len()).collect();
    sol.matrix = sol.matrix.scatter(&row_of, &col_of);
    if let Some(mult) = sol.multipliers.as_mut() {
        let mut col = vec![None; other.len()];
        for (pos, &j) in col_of.iter().enumerate() {
            col[j] = mult.col[pos];
        }
        mult.col = col;
    }
    sol.col_order = col_of;
    Ok(sol)
}

/// Symmetric problem with some diagonal entries fixed. The fixed indices are
/// moved to the front, which is the layout the solver expects.
fn sym_fixed_diagonal(p: &ValidatedProblem, tol: f64) -> Result<Solution> {
    let n = p.n();
    let mut diag = vec![None; n];
    for b in p.fixed_blocks() {
        diag[b.indices[0]] = Some(b.matrix[(0, 0)]);
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| diag[i].is_some()).collect();
    let w: Vec<f64> = order.iter().map(|&i| diag[i].unwrap_or(0.0)).collect();
    order.extend((0..n).filter(|&i| diag[i].is_none()));
    let rows = p.row_bounds(0);
    let u: Vec<f64> = order.iter().map(|&i| rows[i].value()).collect();
    let mut sol = if rows.iter().all(|b| b.is_equal()) {
        sym::solve_sym_fixed_diagonal(&u, &w, tol)?
    } else {
        sym::solve_sym_fixed_diagonal_upper(&u, &w, tol).map_err(|e| match e {
            Error::MultiplierOutOfRange { index, value } => Error::MultiplierOutOfRange {
                index: order[index],
                value,
            },
            other => other,
        })?
    };
    sol.matrix = sol.matrix.scatter(&order, &order);
    if let Some(mult) = sol.multipliers.as_mut() {
        let mut row = vec![None; n];
        for (pos, &i) in order.iter().enumerate() {
            row[i] = mult.row[pos];
        }
        mult.col = row.clone();
        mult.row = row;
    }
    sol.row_order = order.clone();
    sol.col_order = order;
    Ok(sol)
}

fn check_factors_at_most_one(sol: &Solution) -> Result<()> {
    if let Some(mult) = &sol.multipliers {
        for (index, f) in mult.row.iter().enumerate() {
            if let Some(value) = *f {
                if value > 1.0 + 1e-12 {
                    return Err(Error::MultiplierOutOfRange { index, value });
                }
            }
        }
    }
    Ok(())
}

fn describe(p: &ValidatedProblem) -> String {
    let side = |b: &[Bound]| {
        if b.iter().all(|x| x.is_free()) {
            "free"
        } else if b.iter().all(|x| x.is_equal()) {
            "equal"
        } else if b.iter().all(|x| x.is_upper()) {
            "upper"
        } else {
            "mixed"
        }
    };
    let total = match p.total().map(|t| t.kind) {
        None => "none",
        Some(SumKind::Equal) => "equal",
        Some(SumKind::Upper) => "upper",
    };
    format!(
        "{}{}x{} with rows {}, columns {}, total {}, {} element bounds, {} fixed blocks",
        if p.symmetric() { "symmetric " } else { "" },
        p.n(),
        p.m(),
        side(p.row_bounds(0)),
        side(p.col_bounds(0)),
        total,
        p.element_bounds().len(),
        p.fixed_blocks().len()
    )
}
