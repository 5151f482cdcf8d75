//! Optimality check for a candidate matrix, independent of how it was built.
//!
//! At a maximizer with positive entries, the gradient of the objective must be
//! a combination of the active constraint normals: `-ln x_c - 1` (entropy) or
//! `ln T - ln x_c` (entropy difference) must equal the sum of the multipliers
//! of the constraints through cell `c`, with nonnegative multipliers on tight
//! inequalities and zero multipliers on slack ones. Both the unsigned fit
//! (product form) and the signed fit (multiplier range and complementary
//! slackness) are solved as Chebyshev linear programs.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::numeric::{Objective, OracleResult};
use super::system::CellSystem;
use crate::constraints::{validate_spec, ProblemSpec, SumKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::solution::{Solution, TensorSolution};

/// Anything that can be read as the flat cell values of a problem, in
/// slice-major, row-major order.
pub trait CellValues {
    fn cell_values(&self) -> Vec<f64>;
}

impl CellValues for Matrix {
    fn cell_values(&self) -> Vec<f64> {
        self.as_slice().to_vec()
    }
}

impl CellValues for Solution {
    fn cell_values(&self) -> Vec<f64> {
        self.matrix.cell_values()
    }
}

impl CellValues for TensorSolution {
    fn cell_values(&self) -> Vec<f64> {
        self.slices.iter().flat_map(|m| m.as_slice().iter().copied()).collect()
    }
}

impl CellValues for OracleResult {
    fn cell_values(&self) -> Vec<f64> {
        self.matrix.cell_values()
    }
}

impl CellValues for [Matrix] {
    fn cell_values(&self) -> Vec<f64> {
        self.iter().flat_map(|m| m.as_slice().iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub objective: Objective,
    /// Largest relative violation of a constraint or fixed value.
    pub max_violation: f64,
    /// Smallest achievable max-norm misfit of the log-gradient by any
    /// multipliers (product form).
    pub product_form_residual: f64,
    /// Same with nonnegative multipliers on tight inequalities only.
    pub multiplier_residual: f64,
    /// Free cells that are zero although nothing forces them to be.
    pub zero_cells: Vec<usize>,
    pub violations: Vec<String>,
}

impl KktReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks feasibility, product form, multiplier signs and complementary
/// slackness of `candidate` for `spec`. `tol` is relative for constraints and
/// absolute for the log-gradient fits.
pub fn verify_kkt<C: CellValues + ?Sized>(candidate: &C, spec: &ProblemSpec, tol: f64) -> Result<KktReport> {
    let problem = validate_spec(spec)?;
    let sys = CellSystem::build(&problem)?;
    let values = candidate.cell_values();
    if values.len() != sys.n_cells() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {} cells",
            values.len(),
            sys.n_cells()
        )));
    }
    let mut violations = Vec::new();
    let mut max_violation = 0.0f64;
    let mut note = |rel: f64, msg: String, violations: &mut Vec<String>| {
        max_violation = max_violation.max(rel);
        if rel > tol {
            violations.push(msg);
        }
    };

    for (c, &v) in values.iter().enumerate() {
        if v.is_nan() || v < 0.0 {
            let rel = if v.is_nan() { f64::INFINITY } else { -v };
            note(rel, format!("cell {c} is negative ({v})"), &mut violations);
        }
    }
    for (c, f) in sys.fixed.iter().enumerate() {
        if let Some(w) = f {
            let rel = (values[c] - w).abs() / w.max(1.0);
            note(rel, format!("cell {c} is {} but must be {w}", values[c]), &mut violations);
        }
    }
    for con in &sys.originals {
        let sum: f64 = con.cells.iter().map(|&c| values[c]).sum();
        let scale = con.target.max(1.0);
        let rel = match con.kind {
            SumKind::Equal => (sum - con.target).abs() / scale,
            SumKind::Upper => (sum - con.target).max(0.0) / scale,
        };
        note(rel, format!("{} sums to {sum}, target {}", con.label, con.target), &mut violations);
    }

    let objective = if sys.fixed_total.is_some() { Objective::H } else { Objective::G };
    let free_values: Vec<f64> = sys.free.iter().map(|&c| values[c]).collect();
    let total: f64 = values.iter().sum();
    let zero_floor = 1e-12 * total.max(1.0);
    let positive: Vec<usize> = (0..free_values.len()).filter(|&i| free_values[i] > zero_floor).collect();
    let zero_cells: Vec<usize> = (0..free_values.len())
        .filter(|&i| free_values[i] <= zero_floor)
        .map(|i| sys.free[i])
        .collect();
    for &c in &zero_cells {
        violations.push(format!("cell {c} is zero but not forced to be"));
    }

    let gradient: Vec<f64> = positive
        .iter()
        .map(|&i| {
            let x = free_values[i];
            match objective {
                Objective::H => -x.ln() - 1.0,
                Objective::G => total.ln() - x.ln(),
            }
        })
        .collect();

    // Active constraints: all equalities, and inequalities that are tight.
    let mut active = Vec::new();
    for (ci, con) in sys.cons.iter().enumerate() {
        let sum: f64 = con.cells.iter().map(|&i| free_values[i]).sum();
        let tight = (con.target - sum) <= tol * con.target.max(1.0);
        if con.kind == SumKind::Equal || tight {
            active.push(ci);
        }
    }
    let product_form_residual = chebyshev_fit(&sys, &positive, &gradient, &active, false)?;
    let multiplier_residual = chebyshev_fit(&sys, &positive, &gradient, &active, true)?;
    if product_form_residual > tol {
        violations.push(format!(
            "entries are not of product form (log misfit {product_form_residual:e})"
        ));
    }
    if multiplier_residual > tol && product_form_residual <= tol {
        violations.push(format!(
            "inequality multipliers out of range or slack constraints binding (misfit {multiplier_residual:e})"
        ));
    }

    Ok(KktReport {
        objective,
        max_violation,
        product_form_residual,
        multiplier_residual,
        zero_cells,
        violations,
    })
}

/// `min_t` such that `|g_c - sum_{k active, c in k} theta_k| <= t` for every
/// positive cell; `signed` restricts inequality multipliers to `theta >= 0`.
fn chebyshev_fit(sys: &CellSystem, positive: &[usize], gradient: &[f64], active: &[usize], signed: bool) -> Result<f64> {
    if positive.is_empty() {
        return Ok(0.0);
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    let mut through: Vec<Vec<microlp::Variable>> = vec![Vec::new(); sys.free.len()];
    for &ci in active {
        let con = &sys.cons[ci];
        let lower = if signed && con.kind == SumKind::Upper {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        let var = lp.add_var(0.0, (lower, f64::INFINITY));
        for &i in &con.cells {
            through[i].push(var);
        }
    }
    for (&i, &g) in positive.iter().zip(gradient) {
        let mut upper: Vec<(microlp::Variable, f64)> = through[i].iter().map(|&v| (v, 1.0)).collect();
        let mut lower = upper.clone();
        upper.push((t, -1.0));
        lower.push((t, 1.0));
        lp.add_constraint(upper.as_slice(), ComparisonOp::Le, g);
        lp.add_constraint(lower.as_slice(), ComparisonOp::Ge, g);
    }
    match lp.solve() {
        Ok(outcome) => Ok(outcome
            .into_solution()
            .map(|s| s.objective())
            .unwrap_or(f64::INFINITY)),
        Err(microlp::Error::Infeasible) => Ok(f64::INFINITY),
        Err(e) => Err(Error::Infeasible(format!("multiplier fit failed: {e}"))),
    }
}
