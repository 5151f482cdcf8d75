//! Flattened linear view of a validated problem: cells, fixed cells, and
//! sum constraints over groups of cells.

use crate::constraints::{SumKind, ValidatedProblem};
use crate::error::{Error, Result};

/// A sum constraint over a group of cells.
#[derive(Debug, Clone)]
pub(crate) struct Con {
    pub cells: Vec<usize>,
    pub target: f64,
    pub kind: SumKind,
    pub label: String,
}

#[derive(Debug, Clone)]
pub(crate) struct CellSystem {
    pub slices: usize,
    pub rows: usize,
    pub cols: usize,
    /// Per full cell: `Some(v)` when fixed (given, or forced to zero).
    pub fixed: Vec<Option<f64>>,
    /// Full index of each free cell.
    pub free: Vec<usize>,
    /// Element bound of each free cell (`inf` when none).
    pub cap: Vec<f64>,
    /// Constraints over free-cell positions, targets net of fixed mass.
    pub cons: Vec<Con>,
    /// Constraints over full cells with their original targets.
    pub originals: Vec<Con>,
    /// Sum of all fixed cells.
    pub fixed_mass: f64,
    /// The total when the constraints pin it down.
    pub fixed_total: Option<f64>,
}

impl CellSystem {
    pub fn n_cells(&self) -> usize {
        self.slices * self.rows * self.cols
    }

    /// Full cell values from free-cell values.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        for (&c, &v) in self.free.iter().zip(free_values) {
            out[c] = v;
        }
        out
    }

    pub fn build(p: &ValidatedProblem) -> Result<Self> {
        let (slices, rows, cols) = (p.slices(), p.n(), p.m());
        let n_cells = slices * rows * cols;
        let index = |k: usize, i: usize, j: usize| (k * rows + i) * cols + j;

        let mut fixed: Vec<Option<f64>> = vec![None; n_cells];
        let pattern = p.fixed_cells();
        for k in 0..slices {
            for i in 0..rows {
                for j in 0..cols {
                    let v = pattern[(i, j)];
                    if !v.is_nan() {
                        fixed[index(k, i, j)] = Some(v);
                    }
                }
            }
        }
        let mut cap = vec![f64::INFINITY; n_cells];
        for e in p.element_bounds() {
            cap[index(0, e.i, e.j)] = e.ub;
        }

        let mut originals = Vec::new();
        for k in 0..slices {
            for (i, b) in p.row_bounds(k).iter().enumerate() {
                if !b.is_free() {
                    originals.push(Con {
                        cells: (0..cols).map(|j| index(k, i, j)).collect(),
                        target: b.value(),
                        kind: if b.is_equal() { SumKind::Equal } else { SumKind::Upper },
                        label: label("row", i, k, slices),
                    });
                }
            }
            // Symmetric column information mirrors the rows; it is still a
            // separate constraint on the cells.
            for (j, b) in p.col_bounds(k).iter().enumerate() {
                if !b.is_free() {
                    originals.push(Con {
                        cells: (0..rows).map(|i| index(k, i, j)).collect(),
                        target: b.value(),
                        kind: if b.is_equal() { SumKind::Equal } else { SumKind::Upper },
                        label: label("column", j, k, slices),
                    });
                }
            }
        }
        if let Some(t) = p.total() {
            originals.push(Con {
                cells: (0..n_cells).collect(),
                target: t.value,
                kind: t.kind,
                label: "total".into(),
            });
        }
        for e in p.element_bounds() {
            if e.ub.is_finite() {
                originals.push(Con {
                    cells: vec![index(0, e.i, e.j)],
                    target: e.ub,
                    kind: SumKind::Upper,
                    label: format!("element ({}, {})", e.i, e.j),
                });
            }
        }

        // Cells in a constraint with nothing left to distribute are forced to 0.
        for c in &originals {
            let fixed_in: f64 = c.cells.iter().filter_map(|&x| fixed[x]).sum();
            let rest = c.target - fixed_in;
            if rest <= 1e-12 * c.target.max(1.0) {
                for &x in &c.cells {
                    if fixed[x].is_none() {
                        fixed[x] = Some(0.0);
                    }
                }
            }
        }
        for x in 0..n_cells {
            if fixed[x].is_none() && cap[x] == 0.0 {
                fixed[x] = Some(0.0);
            }
        }

        let free: Vec<usize> = (0..n_cells).filter(|&x| fixed[x].is_none()).collect();
        let mut local = vec![usize::MAX; n_cells];
        for (pos, &x) in free.iter().enumerate() {
            local[x] = pos;
        }
        let mut cons = Vec::new();
        for c in &originals {
            let fixed_in: f64 = c.cells.iter().filter_map(|&x| fixed[x]).sum();
            let cells: Vec<usize> = c.cells.iter().filter(|&&x| local[x] != usize::MAX).map(|&x| local[x]).collect();
            let target = (c.target - fixed_in).max(0.0);
            if cells.is_empty() {
                if c.kind == SumKind::Equal && target > 1e-9 * c.target.max(1.0) {
                    return Err(Error::Infeasible(format!(
                        "{} cannot reach {} with its fixed cells",
                        c.label, c.target
                    )));
                }
                continue;
            }
            cons.push(Con {
                cells,
                target,
                kind: c.kind,
                label: c.label.clone(),
            });
        }
        let fixed_mass: f64 = fixed.iter().flatten().sum();
        let free_cap = free.iter().map(|&x| cap[x]).collect();
        Ok(Self {
            slices,
            rows,
            cols,
            fixed,
            free,
            cap: free_cap,
            cons,
            originals,
            fixed_mass,
            fixed_total: p.fixed_total(),
        })
    }
}

fn label(kind: &str, index: usize, slice: usize, slices: usize) -> String {
    if slices > 1 {
        format!("{kind} {index} of slice {slice}")
    } else {
        format!("{kind} {index}")
    }
}
