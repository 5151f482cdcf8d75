use serde::{Deserialize, Serialize};

use crate::constraints::SolverCase;
use crate::matrix::Matrix;

/// Product-form factors: for every free cell, `x_ij = scale * row[i] * col[j]`.
///
/// For bound constraints a factor below 1 marks a binding bound and a factor
/// of exactly 1 a slack one. `None` marks rows or columns that carry no mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub scale: f64,
    pub row: Vec<Option<f64>>,
    pub col: Vec<Option<f64>>,
}

impl Multipliers {
    pub(crate) fn transpose(self) -> Self {
        Self {
            scale: self.scale,
            row: self.col,
            col: self.row,
        }
    }
}

/// Diagnostics of the scalar root solve behind the symmetric solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootDiagnostics {
    pub lambda: f64,
    /// `4 / lambda^2`.
    pub xi: f64,
    pub sigma: f64,
    pub bracket: (f64, f64),
    /// Whether the bracket preconditions held (otherwise the root came from
    /// an extended search).
    pub guaranteed: bool,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub matrix: Matrix,
    pub case: SolverCase,
    /// Number of informative (binding) constraints, when the case defines one.
    pub k: Option<usize>,
    pub multipliers: Option<Multipliers>,
    /// Realized total `sum(x)`.
    pub total: f64,
    pub root: Option<RootDiagnostics>,
    /// Sort orders used internally: position `p` held original row `row_order[p]`.
    pub row_order: Vec<usize>,
    pub col_order: Vec<usize>,
}

impl Solution {
    pub(crate) fn new(matrix: Matrix, case: SolverCase) -> Self {
        let total = matrix.sum();
        let row_order = (0..matrix.rows()).collect();
        let col_order = (0..matrix.cols()).collect();
        Self {
            matrix,
            case,
            k: None,
            multipliers: None,
            total,
            root: None,
            row_order,
            col_order,
        }
    }

    pub(crate) fn transpose(self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
            case: self.case,
            k: self.k,
            multipliers: self.multipliers.map(Multipliers::transpose),
            total: self.total,
            root: self.root,
            row_order: self.col_order,
            col_order: self.row_order,
        }
    }
}

/// Solution of a 3-D problem: one symmetric slice per value of the third index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSolution {
    pub slices: Vec<Matrix>,
    pub case: SolverCase,
    /// Per-slice root `xi_k` (NaN for empty slices).
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub guaranteed: Vec<bool>,
    pub total: f64,
}

impl TensorSolution {
    pub fn slice(&self, k: usize) -> &Matrix {
        &self.slices[k]
    }
}
