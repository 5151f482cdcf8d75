//! Declarative constraint model: shapes, marginal sums and bounds, element
//! bounds and fixed blocks, plus validation and case classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Relative tolerance for comparing user-supplied sums.
pub const FEASIBILITY_RTOL: f64 = 1e-9;

pub(crate) fn approx_eq(a: f64, b: f64) -> bool {
    a == b || (a.is_finite() && b.is_finite() && (a - b).abs() <= FEASIBILITY_RTOL * a.abs().max(b.abs()))
}

pub(crate) fn approx_le(a: f64, b: f64) -> bool {
    a <= b || (a.is_finite() && b.is_finite() && a - b <= FEASIBILITY_RTOL * a.abs().max(b.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Row,
    Col,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumKind {
    Equal,
    Upper,
}

/// A sum over one row or one column (of one slice, for 3-D problems).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalConstraint {
    pub axis: Axis,
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<usize>,
    pub kind: SumKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalConstraint {
    pub kind: SumKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementBound {
    pub i: usize,
    pub j: usize,
    pub ub: f64,
}

/// A square block of fixed values on rows and columns `indices`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedBlock {
    pub indices: Vec<usize>,
    pub matrix: Matrix,
}

impl FixedBlock {
    pub fn new(indices: Vec<usize>, matrix: Matrix) -> Self {
        Self { indices, matrix }
    }

    /// A single fixed diagonal entry.
    pub fn singleton(index: usize, value: f64) -> Self {
        Self {
            indices: vec![index],
            matrix: Matrix::from_row_major(1, 1, vec![value]).expect("1x1"),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Sum of all fixed values, `w_{II}`.
    pub fn total(&self) -> f64 {
        self.matrix.sum()
    }
}

/// Full declarative description of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub shape: Shape,
    #[serde(default)]
    pub marginals: Vec<MarginalConstraint>,
    #[serde(default)]
    pub total: Option<TotalConstraint>,
    #[serde(default)]
    pub element_bounds: Vec<ElementBound>,
    #[serde(default)]
    pub fixed_blocks: Vec<FixedBlock>,
    #[serde(default)]
    pub symmetric: bool,
}

impl ProblemSpec {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            shape: Shape {
                rows,
                cols,
                slices: None,
            },
            marginals: Vec::new(),
            total: None,
            element_bounds: Vec::new(),
            fixed_blocks: Vec::new(),
            symmetric: false,
        }
    }

    pub fn new_3d(n: usize, slices: usize) -> Self {
        let mut spec = Self::new(n, n);
        spec.shape.slices = Some(slices);
        spec
    }

    pub fn with_row_sums(mut self, kind: SumKind, values: &[f64]) -> Self {
        for (index, &value) in values.iter().enumerate() {
            self = self.with_marginal(Axis::Row, index, kind, value);
        }
        self
    }

    pub fn with_col_sums(mut self, kind: SumKind, values: &[f64]) -> Self {
        for (index, &value) in values.iter().enumerate() {
            self = self.with_marginal(Axis::Col, index, kind, value);
        }
        self
    }

    pub fn with_marginal(mut self, axis: Axis, index: usize, kind: SumKind, value: f64) -> Self {
        self.marginals.push(MarginalConstraint {
            axis,
            index,
            slice: None,
            kind,
            value,
        });
        self
    }

    /// Row sums of every `(i, k)` section of a 3-D problem; `values[i][k]`.
    pub fn with_section_sums(mut self, kind: SumKind, values: &[Vec<f64>]) -> Self {
        for (index, row) in values.iter().enumerate() {
            for (k, &value) in row.iter().enumerate() {
                self.marginals.push(MarginalConstraint {
                    axis: Axis::Row,
                    index,
                    slice: Some(k),
                    kind,
                    value,
                });
            }
        }
        self
    }

    pub fn with_total(mut self, kind: SumKind, value: f64) -> Self {
        self.total = Some(TotalConstraint { kind, value });
        self
    }

    pub fn with_element_bound(mut self, i: usize, j: usize, ub: f64) -> Self {
        self.element_bounds.push(ElementBound { i, j, ub });
        self
    }

    pub fn with_fixed_block(mut self, block: FixedBlock) -> Self {
        self.fixed_blocks.push(block);
        self
    }

    /// Fixes the first `values.len()` diagonal entries.
    pub fn with_fixed_diagonal(mut self, values: &[f64]) -> Self {
        for (i, &w) in values.iter().enumerate() {
            self.fixed_blocks.push(FixedBlock::singleton(i, w));
        }
        self
    }

    pub fn symmetric(mut self) -> Self {
        self.symmetric = true;
        self
    }
}

/// Normalized marginal information for one row or column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Equal(f64),
    /// `Upper(f64::INFINITY)` stands for "no information".
    Upper(f64),
}

impl Bound {
    pub fn value(self) -> f64 {
        match self {
            Bound::Equal(v) | Bound::Upper(v) => v,
        }
    }

    pub fn is_equal(self) -> bool {
        matches!(self, Bound::Equal(_))
    }

    pub fn is_upper(self) -> bool {
        matches!(self, Bound::Upper(_))
    }

    pub fn is_free(self) -> bool {
        matches!(self, Bound::Upper(v) if v == f64::INFINITY)
    }

    fn kind(self) -> SumKind {
        match self {
            Bound::Equal(_) => SumKind::Equal,
            Bound::Upper(_) => SumKind::Upper,
        }
    }

    fn from_parts(kind: SumKind, value: f64) -> Self {
        match kind {
            SumKind::Equal => Bound::Equal(value),
            SumKind::Upper => Bound::Upper(value),
        }
    }
}

/// A spec that passed [`validate_spec`]: marginals are complete (missing ones
/// are `Upper(inf)`), sorted, mirrored when symmetric, and mutually feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProblem {
    spec: ProblemSpec,
    rows: Vec<Bound>,
    cols: Vec<Bound>,
}

impl ValidatedProblem {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn into_spec(self) -> ProblemSpec {
        self.spec
    }

    pub fn shape(&self) -> Shape {
        self.spec.shape
    }

    pub fn n(&self) -> usize {
        self.spec.shape.rows
    }

    pub fn m(&self) -> usize {
        self.spec.shape.cols
    }

    /// Number of slices; 1 for ordinary matrices.
    pub fn slices(&self) -> usize {
        self.spec.shape.slices.unwrap_or(1)
    }

    pub fn is_3d(&self) -> bool {
        self.spec.shape.slices.is_some()
    }

    pub fn symmetric(&self) -> bool {
        self.spec.symmetric
    }

    pub fn row_bounds(&self, slice: usize) -> &[Bound] {
        let n = self.n();
        &self.rows[slice * n..(slice + 1) * n]
    }

    pub fn col_bounds(&self, slice: usize) -> &[Bound] {
        let m = self.m();
        &self.cols[slice * m..(slice + 1) * m]
    }

    pub fn total(&self) -> Option<TotalConstraint> {
        self.spec.total
    }

    pub fn element_bounds(&self) -> &[ElementBound] {
        &self.spec.element_bounds
    }

    pub fn fixed_blocks(&self) -> &[FixedBlock] {
        &self.spec.fixed_blocks
    }

    /// Fixed value of each cell of one slice (the pattern repeats across slices).
    pub fn fixed_cells(&self) -> Matrix {
        let mut out = Matrix::from_fn(self.n(), self.m(), |_, _| f64::NAN);
        for b in &self.spec.fixed_blocks {
            for (a, &i) in b.indices.iter().enumerate() {
                for (c, &j) in b.indices.iter().enumerate() {
                    out[(i, j)] = b.matrix[(a, c)];
                }
            }
        }
        out
    }

    /// The total sum when the constraints pin it down.
    pub fn fixed_total(&self) -> Option<f64> {
        if let Some(TotalConstraint {
            kind: SumKind::Equal,
            value,
        }) = self.spec.total
        {
            return Some(value);
        }
        if self.rows.iter().all(|b| b.is_equal()) {
            return Some(self.rows.iter().map(|b| b.value()).sum());
        }
        if self.cols.iter().all(|b| b.is_equal()) {
            return Some(self.cols.iter().map(|b| b.value()).sum());
        }
        None
    }
}

fn check_value(context: impl FnOnce() -> String, value: f64) -> Result<()> {
    if value.is_nan() || value < 0.0 {
        return Err(Error::NegativeValue {
            context: context(),
            value,
        });
    }
    Ok(())
}

fn check_index(context: &str, index: usize, limit: usize) -> Result<()> {
    if index >= limit {
        return Err(Error::IndexOutOfRange {
            context: context.to_string(),
            index,
            limit,
        });
    }
    Ok(())
}

/// Validates and normalizes a `ProblemSpec`.
///
/// Normalization completes every row and column marginal (missing ones become
/// `Upper(inf)`), mirrors row and column information when the problem is
/// symmetric, and sorts marginals, element bounds and fixed blocks. Validating
/// the `ProblemSpec` inside a `ValidatedProblem` returns an equal value.
pub fn validate_spec(spec: &ProblemSpec) -> Result<ValidatedProblem> {
    let shape = spec.shape;
    let (n, m) = (shape.rows, shape.cols);
    if n == 0 || m == 0 {
        return Err(Error::ShapeMismatch(format!("empty shape {n}x{m}")));
    }
    if shape.slices == Some(0) {
        return Err(Error::ShapeMismatch("zero slices".into()));
    }
    let k_count = shape.slices.unwrap_or(1);
    if spec.symmetric && n != m {
        return Err(Error::ShapeMismatch(format!(
            "symmetric information needs a square matrix, got {n}x{m}"
        )));
    }

    let mut rows: Vec<Option<Bound>> = vec![None; n * k_count];
    let mut cols: Vec<Option<Bound>> = vec![None; m * k_count];
    for c in &spec.marginals {
        check_value(|| format!("{:?} {} sum", c.axis, c.index), c.value)?;
        let slice = match (shape.slices, c.slice) {
            (None, None) => 0,
            (Some(k), Some(s)) => {
                check_index("slice", s, k)?;
                s
            }
            (None, Some(_)) => {
                return Err(Error::ShapeMismatch("slice index on a 2-D problem".into()))
            }
            (Some(_), None) => {
                return Err(Error::ShapeMismatch(
                    "3-D marginals must name their slice".into(),
                ))
            }
        };
        let (store, limit, name) = match c.axis {
            Axis::Row => (&mut rows, n, "row"),
            Axis::Col => (&mut cols, m, "col"),
        };
        check_index(name, c.index, limit)?;
        let slot = &mut store[slice * limit + c.index];
        if slot.is_some() {
            return Err(Error::ShapeMismatch(format!(
                "duplicate {name} constraint at index {}",
                c.index
            )));
        }
        *slot = Some(Bound::from_parts(c.kind, c.value));
    }

    if spec.symmetric {
        for idx in 0..rows.len() {
            match (rows[idx], cols[idx]) {
                (Some(r), Some(c)) => {
                    if r.kind() != c.kind() || !approx_eq(r.value(), c.value()) {
                        return Err(Error::InfeasibleMarginals(format!(
                            "symmetric row and column {} differ: {r:?} vs {c:?}",
                            idx % n
                        )));
                    }
                }
                (Some(r), None) => cols[idx] = Some(r),
                (None, Some(c)) => rows[idx] = Some(c),
                (None, None) => {}
            }
        }
    }
    let free = Bound::Upper(f64::INFINITY);
    let rows: Vec<Bound> = rows.into_iter().map(|b| b.unwrap_or(free)).collect();
    let cols: Vec<Bound> = cols.into_iter().map(|b| b.unwrap_or(free)).collect();

    if let Some(t) = spec.total {
        check_value(|| "total".into(), t.value)?;
    }

    let mut element_bounds = spec.element_bounds.clone();
    if !element_bounds.is_empty() && shape.slices.is_some() {
        return Err(Error::ShapeMismatch(
            "element bounds are only supported for 2-D problems".into(),
        ));
    }
    for e in &element_bounds {
        check_index("element row", e.i, n)?;
        check_index("element col", e.j, m)?;
        check_value(|| format!("element bound ({}, {})", e.i, e.j), e.ub)?;
    }
    element_bounds.sort_by_key(|e| (e.i, e.j));
    if let Some(w) = element_bounds.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
        return Err(Error::ShapeMismatch(format!(
            "duplicate element bound at ({}, {})",
            w[0].i, w[0].j
        )));
    }

    let mut fixed_blocks = Vec::with_capacity(spec.fixed_blocks.len());
    if !spec.fixed_blocks.is_empty() && n != m {
        return Err(Error::ShapeMismatch(
            "fixed diagonal blocks need a square matrix".into(),
        ));
    }
    let mut owner = vec![false; n];
    for b in &spec.fixed_blocks {
        if b.indices.is_empty() {
            return Err(Error::ShapeMismatch("empty fixed block".into()));
        }
        if b.matrix.rows() != b.len() || b.matrix.cols() != b.len() {
            return Err(Error::ShapeMismatch(format!(
                "fixed block on {} indices has a {}x{} matrix",
                b.len(),
                b.matrix.rows(),
                b.matrix.cols()
            )));
        }
        for &i in &b.indices {
            check_index("fixed block", i, n)?;
            if owner[i] {
                return Err(Error::ShapeMismatch(format!(
                    "index {i} appears in more than one fixed block"
                )));
            }
            owner[i] = true;
        }
        for &w in b.matrix.as_slice() {
            check_value(|| format!("fixed block {:?}", b.indices), w)?;
        }
        let mut order: Vec<usize> = (0..b.len()).collect();
        order.sort_by_key(|&a| b.indices[a]);
        fixed_blocks.push(FixedBlock {
            indices: order.iter().map(|&a| b.indices[a]).collect(),
            matrix: b.matrix.gather(&order, &order),
        });
    }
    fixed_blocks.sort_by_key(|b| b.indices[0]);

    let mut marginals = Vec::with_capacity(rows.len() + cols.len());
    for (axis, store, limit) in [(Axis::Row, &rows, n), (Axis::Col, &cols, m)] {
        for slice in 0..k_count {
            for index in 0..limit {
                let b = store[slice * limit + index];
                marginals.push(MarginalConstraint {
                    axis,
                    index,
                    slice: shape.slices.map(|_| slice),
                    kind: b.kind(),
                    value: b.value(),
                });
            }
        }
    }

    let normalized = ProblemSpec {
        shape,
        marginals,
        total: spec.total,
        element_bounds,
        fixed_blocks,
        symmetric: spec.symmetric,
    };
    let problem = ValidatedProblem {
        spec: normalized,
        rows,
        cols,
    };
    check_feasibility(&problem)?;
    Ok(problem)
}

fn infeasible(msg: String) -> Error {
    Error::InfeasibleMarginals(msg)
}

/// Necessary conditions between the pieces of information.
fn check_feasibility(p: &ValidatedProblem) -> Result<()> {
    let (n, m) = (p.n(), p.m());

    // Per-cell capacity: fixed value, element bound, or infinity.
    let fixed = p.fixed_cells();
    let mut cap = Matrix::from_fn(n, m, |i, j| {
        let f = fixed[(i, j)];
        if f.is_nan() {
            f64::INFINITY
        } else {
            f
        }
    });
    for e in p.element_bounds() {
        if fixed[(e.i, e.j)].is_nan() {
            cap[(e.i, e.j)] = cap[(e.i, e.j)].min(e.ub);
        } else if !approx_le(fixed[(e.i, e.j)], e.ub) {
            return Err(infeasible(format!(
                "fixed value at ({}, {}) exceeds its bound {}",
                e.i, e.j, e.ub
            )));
        }
    }
    let fixed_mass = |i: usize, j: usize| {
        let f = fixed[(i, j)];
        if f.is_nan() {
            0.0
        } else {
            f
        }
    };
    let row_cap = cap.row_sums();
    let col_cap = cap.col_sums();
    let row_fixed: Vec<f64> = (0..n).map(|i| (0..m).map(|j| fixed_mass(i, j)).sum()).collect();
    let col_fixed: Vec<f64> = (0..m).map(|j| (0..n).map(|i| fixed_mass(i, j)).sum()).collect();

    let mut rows_eq_total = 0.0;
    let mut rows_all_total = 0.0;
    let mut cols_eq_total = 0.0;
    let mut cols_all_total = 0.0;
    for slice in 0..p.slices() {
        let rows = p.row_bounds(slice);
        let cols = p.col_bounds(slice);
        let sum_eq = |bs: &[Bound]| bs.iter().filter(|b| b.is_equal()).map(|b| b.value()).sum::<f64>();
        let sum_all = |bs: &[Bound]| bs.iter().map(|b| b.value()).sum::<f64>();
        let (u_eq, u_all) = (sum_eq(rows), sum_all(rows));
        let (v_eq, v_all) = (sum_eq(cols), sum_all(cols));
        let rows_all_eq = rows.iter().all(|b| b.is_equal());
        let cols_all_eq = cols.iter().all(|b| b.is_equal());
        if rows_all_eq && cols_all_eq && !approx_eq(u_all, v_all) {
            return Err(infeasible(format!(
                "row sums total {u_all} but column sums total {v_all}"
            )));
        }
        if !approx_le(v_eq, u_all) {
            return Err(infeasible(format!(
                "column sums {v_eq} exceed the row total {u_all}"
            )));
        }
        if !approx_le(u_eq, v_all) {
            return Err(infeasible(format!(
                "row sums {u_eq} exceed the column total {v_all}"
            )));
        }
        for (i, b) in rows.iter().enumerate() {
            if b.is_equal() && !approx_le(b.value(), row_cap[i]) {
                return Err(infeasible(format!(
                    "row {i} must sum to {} but its elements allow at most {}",
                    b.value(),
                    row_cap[i]
                )));
            }
            if !approx_le(row_fixed[i], b.value()) {
                return Err(infeasible(format!(
                    "fixed entries of row {i} exceed its sum {}",
                    b.value()
                )));
            }
        }
        for (j, b) in cols.iter().enumerate() {
            if b.is_equal() && !approx_le(b.value(), col_cap[j]) {
                return Err(infeasible(format!(
                    "column {j} must sum to {} but its elements allow at most {}",
                    b.value(),
                    col_cap[j]
                )));
            }
            if !approx_le(col_fixed[j], b.value()) {
                return Err(infeasible(format!(
                    "fixed entries of column {j} exceed its sum {}",
                    b.value()
                )));
            }
        }
        rows_eq_total += u_eq;
        rows_all_total += u_all;
        cols_eq_total += v_eq;
        cols_all_total += v_all;
    }

    let fixed_total: f64 = row_fixed.iter().sum::<f64>() * p.slices() as f64;
    let cap_total: f64 = row_cap.iter().sum::<f64>() * p.slices() as f64;
    if let Some(t) = p.total() {
        let s = t.value;
        let lower = rows_eq_total.max(cols_eq_total).max(fixed_total);
        if !approx_le(lower, s) {
            return Err(infeasible(format!(
                "total {s} is below the {lower} forced by other constraints"
            )));
        }
        if t.kind == SumKind::Equal {
            let upper = rows_all_total.min(cols_all_total).min(cap_total);
            if !approx_le(s, upper) {
                return Err(infeasible(format!(
                    "total {s} exceeds the {upper} allowed by the bounds"
                )));
            }
            let all_rows_eq = p.rows.iter().all(|b| b.is_equal());
            let all_cols_eq = p.cols.iter().all(|b| b.is_equal());
            if all_rows_eq && !approx_eq(s, rows_all_total) {
                return Err(infeasible(format!(
                    "total {s} differs from the row sums total {rows_all_total}"
                )));
            }
            if all_cols_eq && !approx_eq(s, cols_all_total) {
                return Err(infeasible(format!(
                    "total {s} differs from the column sums total {cols_all_total}"
                )));
            }
        }
    }
    Ok(())
}

/// The closed-form case a validated problem falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverCase {
    /// Row sums known, some column sums known.
    GravityPartialCols,
    /// Upper bounds on row sums only.
    RowBounds,
    /// Total sum plus row bounds.
    TotalRowBounds,
    /// Bounded total plus row bounds.
    BoundedTotalRowBounds,
    /// Bounds on both row and column sums.
    RowColBounds,
    /// Row bounds plus element bounds.
    RowBoundsElemBounds,
    /// Symmetric: total sum plus row/column bounds.
    SymTotalRowColBounds,
    /// Symmetric: row sums plus fixed diagonal entries.
    SymFixedDiagonal,
    /// Symmetric 3-D sections with zero diagonal.
    Sym3DFixedDiagonal,
    /// Symmetric: row sums plus fixed diagonal blocks.
    SymBlockDiagonal,
    Unsupported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SideKind {
    /// No information at all.
    Free,
    AllEqual,
    /// Eq entries plus free entries.
    PartialEqual,
    /// Upper bounds (some possibly infinite), no equalities.
    Upper,
    Mixed,
}

fn side_kind(bounds: &[Bound]) -> SideKind {
    if bounds.iter().all(|b| b.is_free()) {
        SideKind::Free
    } else if bounds.iter().all(|b| b.is_equal()) {
        SideKind::AllEqual
    } else if bounds.iter().all(|b| b.is_equal() || b.is_free()) {
        SideKind::PartialEqual
    } else if bounds.iter().all(|b| b.is_upper()) {
        SideKind::Upper
    } else {
        SideKind::Mixed
    }
}

/// Maps a validated problem to the unique closed-form case that covers it.
pub fn classify(p: &ValidatedProblem) -> SolverCase {
    use SideKind::*;
    use SolverCase::*;

    let rows = side_kind(&p.rows);
    let cols = side_kind(&p.cols);
    let total = p.total();
    let has_elem = !p.element_bounds().is_empty();
    let blocks = p.fixed_blocks();

    if p.is_3d() {
        let zero_diagonal = blocks.len() == p.n()
            && blocks.iter().all(|b| b.len() == 1 && b.matrix[(0, 0)] == 0.0);
        let total_ok = total.is_none_or(|t| t.kind == SumKind::Equal);
        return if p.symmetric() && zero_diagonal && rows == AllEqual && !has_elem && total_ok {
            Sym3DFixedDiagonal
        } else {
            Unsupported
        };
    }

    if p.symmetric() {
        if !blocks.is_empty() {
            let rows_ok = rows == AllEqual
                || (rows == Upper && p.rows.iter().all(|b| b.value().is_finite()));
            let total_ok = match total {
                None => true,
                Some(t) => t.kind == SumKind::Equal && rows == AllEqual,
            };
            if !rows_ok || !total_ok || has_elem {
                return Unsupported;
            }
            if blocks.iter().all(|b| b.len() == 1) {
                return SymFixedDiagonal;
            }
            let covered: usize = blocks.iter().map(|b| b.len()).sum();
            return if covered == p.n() {
                SymBlockDiagonal
            } else {
                Unsupported
            };
        }
        if matches!(total, Some(TotalConstraint { kind: SumKind::Equal, .. }))
            && rows == Upper
            && !has_elem
        {
            return SymTotalRowColBounds;
        }
    } else if !blocks.is_empty() {
        return Unsupported;
    }

    if has_elem {
        return if matches!(rows, Upper | Free) && cols == Free && total.is_none() {
            RowBoundsElemBounds
        } else {
            Unsupported
        };
    }

    let gravity_rows = rows == AllEqual && matches!(cols, AllEqual | PartialEqual | Free);
    let gravity_cols = cols == AllEqual && matches!(rows, PartialEqual | Free);
    if gravity_rows || gravity_cols {
        return GravityPartialCols;
    }

    match total.map(|t| t.kind) {
        Some(SumKind::Equal) => match (rows, cols) {
            (Upper | Free, Free) | (Free, Upper) => TotalRowBounds,
            _ => Unsupported,
        },
        Some(SumKind::Upper) => match (rows, cols) {
            (Upper | Free, Free) | (Free, Upper) => BoundedTotalRowBounds,
            _ => Unsupported,
        },
        None => match (rows, cols) {
            (Upper, Free) | (Free, Upper) => RowBounds,
            (Upper, Upper) => RowColBounds,
            _ => Unsupported,
        },
    }
}

/// Outcome of [`consistency_check_blocks`].
#[derive(Debug, Clone, PartialEq)]
pub enum ConsistencyReport {
    Consistent,
    /// `u_I >= s/2 + w_II/2` for this block.
    Violation {
        indices: Vec<usize>,
        lhs: f64,
        rhs: f64,
    },
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        matches!(self, ConsistencyReport::Consistent)
    }

    pub fn into_result(self) -> Result<()> {
        match self {
            ConsistencyReport::Consistent => Ok(()),
            ConsistencyReport::Violation { indices, lhs, rhs } => {
                Err(Error::ConsistencyViolation { indices, lhs, rhs })
            }
        }
    }
}

/// Checks that fixing each block leaves the traffic leaving it strictly below
/// half the total, `u_I < s/2 + w_II/2`; otherwise the complementary
/// submatrix would be forced to zero. Equality counts as a violation.
pub fn consistency_check_blocks(u: &[f64], blocks: &[FixedBlock], s: f64) -> ConsistencyReport {
    for b in blocks {
        let lhs: f64 = b.indices.iter().map(|&i| u[i]).sum();
        let rhs = s / 2.0 + b.total() / 2.0;
        if !(lhs < rhs) {
            return ConsistencyReport::Violation {
                indices: b.indices.clone(),
                lhs,
                rhs,
            };
        }
    }
    ConsistencyReport::Consistent
}
