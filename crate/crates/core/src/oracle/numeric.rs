//! Numerical maximizer of the entropy `H` or the entropy difference `G` under
//! linear sum constraints.
//!
//! `H` is maximized by entropic Bregman projections: cyclic multiplicative
//! scaling onto each constraint, with a dual factor per inequality so that
//! slack constraints release their scaling. For `G` without a pinned total,
//! the free mass `F` is scanned by golden-section search over the feasible
//! range found by linear programming; each probe is an `H` problem with the
//! free mass fixed to `F`.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::system::{CellSystem, Con};
use crate::constraints::{validate_spec, ProblemSpec, SumKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Objective to maximize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// `-sum x ln x`; needs a pinned total.
    H,
    /// `T ln T - sum x ln x` with `T = sum x`.
    G,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// The maximizer; for 3-D problems the slices are stacked vertically.
    pub matrix: Matrix,
    pub objective: f64,
    pub converged: bool,
    /// Total number of projection sweeps.
    pub iterations: usize,
    /// Largest relative constraint violation or complementary-slackness gap.
    pub residuals: f64,
}

impl OracleResult {
    /// Slice `k` of a 3-D result (slice 0 is the whole matrix for 2-D).
    pub fn slice(&self, k: usize, rows: usize) -> Matrix {
        let cols = self.matrix.cols();
        Matrix::from_fn(rows, cols, |i, j| self.matrix[(k * rows + i, j)])
    }
}

const REPORT_ZERO: f64 = 1e-9;
const MAX_SWEEPS: usize = 200_000;
const GOLDEN_STEPS: usize = 90;

/// `x ln x` extended by 0 at 0. Scaled entries stay strictly positive, so
/// no floor is needed.
fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Dual state of the projection scheme; kept between solves for warm starts.
struct Bregman {
    cons: Vec<Con>,
    /// Multiplicative dual factor per constraint.
    z: Vec<f64>,
    x: Vec<f64>,
}

impl Bregman {
    fn new(cons: Vec<Con>, cells: usize) -> Self {
        let z = vec![1.0; cons.len()];
        Self {
            cons,
            z,
            x: vec![1.0; cells],
        }
    }

    fn rebuild_x(&mut self) {
        self.x.iter_mut().for_each(|x| *x = 1.0);
        for (c, &z) in self.cons.iter().zip(&self.z) {
            for &i in &c.cells {
                self.x[i] *= z;
            }
        }
    }

    fn residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (c, &z) in self.cons.iter().zip(&self.z) {
            let sum: f64 = c.cells.iter().map(|&i| self.x[i]).sum();
            let scale = c.target.max(1.0);
            let r = match c.kind {
                SumKind::Equal => (sum - c.target).abs() / scale,
                SumKind::Upper => {
                    let over = (sum - c.target).max(0.0) / scale;
                    let slack = (c.target - sum).max(0.0) / scale;
                    over.max(slack * (-z.ln()).min(1.0))
                }
            };
            worst = worst.max(r);
        }
        worst
    }

    /// Runs sweeps until the residual drops below `tol`. Returns the sweep
    /// count and final residual.
    fn run(&mut self, tol: f64) -> Result<(usize, f64)> {
        self.rebuild_x();
        let mut residual = self.residual();
        let mut sweeps = 0;
        while residual > tol {
            if sweeps >= MAX_SWEEPS {
                return Err(Error::NotConverged {
                    iterations: sweeps,
                    residual,
                });
            }
            for (c, z) in self.cons.iter().zip(self.z.iter_mut()) {
                let sum: f64 = c.cells.iter().map(|&i| self.x[i]).sum();
                if sum <= 0.0 {
                    continue;
                }
                let mut factor = c.target / sum;
                if c.kind == SumKind::Upper {
                    factor = factor.min(1.0 / *z);
                }
                if factor == 1.0 {
                    continue;
                }
                *z *= factor;
                for &i in &c.cells {
                    self.x[i] *= factor;
                }
            }
            sweeps += 1;
            // Products of many factors drift; refresh from the duals now and then.
            if sweeps % 64 == 0 {
                self.rebuild_x();
            }
            residual = self.residual();
        }
        Ok((sweeps, residual))
    }
}

/// Maximizes `objective` subject to the constraints of `spec`.
///
/// Entries below `1e-9` are reported as 0. `tol` bounds the relative
/// constraint residual of the projection scheme.
pub fn numeric_maxent(spec: &ProblemSpec, objective: Objective, tol: f64) -> Result<OracleResult> {
    let problem = validate_spec(spec)?;
    let sys = CellSystem::build(&problem)?;
    let tol = tol.max(1e-14);

    if objective == Objective::H && sys.fixed_total.is_none() {
        return Err(Error::Unsupported(
            "the entropy objective needs a fixed total; use G".into(),
        ));
    }

    let n_free = sys.free.len();
    let (mut free_values, iterations, residuals) = if n_free == 0 {
        (Vec::new(), 0, 0.0)
    } else if sys.fixed_total.is_some() {
        let mut b = Bregman::new(sys.cons.clone(), n_free);
        let (sweeps, res) = b.run(tol)?;
        (b.x, sweeps, res)
    } else {
        maximize_g(&sys, tol)?
    };
    for v in free_values.iter_mut() {
        if *v < REPORT_ZERO {
            *v = 0.0;
        }
    }
    let full = sys.expand(&free_values);
    let total: f64 = full.iter().sum();
    let h: f64 = -full.iter().map(|&x| xlnx(x)).sum::<f64>();
    let value = match objective {
        Objective::H => h,
        Objective::G => (if total > 0.0 { total * total.ln() } else { 0.0 }) + h,
    };
    let matrix = Matrix::from_row_major(sys.slices * sys.rows, sys.cols, full)?;
    Ok(OracleResult {
        matrix,
        objective: value,
        converged: true,
        iterations,
        residuals,
    })
}

/// Feasible range of the free mass, from two linear programs.
fn free_mass_range(sys: &CellSystem) -> Result<(f64, f64)> {
    let solve = |direction| -> Result<f64> {
        let mut lp = Problem::new(direction);
        let vars: Vec<_> = sys.cap.iter().map(|&cap| lp.add_var(1.0, (0.0, cap))).collect();
        for c in &sys.cons {
            let expr: Vec<_> = c.cells.iter().map(|&i| (vars[i], 1.0)).collect();
            let op = match c.kind {
                SumKind::Equal => ComparisonOp::Eq,
                SumKind::Upper => ComparisonOp::Le,
            };
            lp.add_constraint(expr.as_slice(), op, c.target);
        }
        match lp.solve() {
            Ok(outcome) => outcome
                .into_solution()
                .map(|s| s.objective())
                .map_err(|_| Error::NotConverged {
                    iterations: 0,
                    residual: f64::NAN,
                }),
            Err(microlp::Error::Infeasible) => {
                Err(Error::Infeasible("no matrix satisfies the constraints".into()))
            }
            Err(microlp::Error::Unbounded) => Err(Error::Unbounded(
                "the total is not bounded by the constraints".into(),
            )),
            Err(e) => Err(Error::Infeasible(format!("linear program failed: {e}"))),
        }
    };
    let hi = solve(OptimizationDirection::Maximize)?;
    let lo = solve(OptimizationDirection::Minimize)?;
    Ok((lo.max(0.0), hi.max(0.0)))
}

fn maximize_g(sys: &CellSystem, tol: f64) -> Result<(Vec<f64>, usize, f64)> {
    let (lo, hi) = free_mass_range(sys)?;
    let n_free = sys.free.len();
    let w = sys.fixed_mass;
    let fixed_xlnx: f64 = sys.fixed.iter().flatten().map(|&x| xlnx(x)).sum();

    let mut cons = sys.cons.clone();
    cons.push(Con {
        cells: (0..n_free).collect(),
        target: hi,
        kind: SumKind::Equal,
        label: "free mass".into(),
    });
    let last = cons.len() - 1;
    let mut b = Bregman::new(cons, n_free);
    let mut total_sweeps = 0;

    let mut probe = |f: f64, b: &mut Bregman| -> Result<(f64, Vec<f64>, f64)> {
        if f <= 0.0 {
            let g = if w > 0.0 { w * w.ln() } else { 0.0 } - fixed_xlnx;
            return Ok((g, vec![0.0; n_free], 0.0));
        }
        b.cons[last].target = f;
        let (sweeps, res) = b.run(tol)?;
        total_sweeps += sweeps;
        let t = b.x.iter().sum::<f64>() + w;
        let g = t * t.ln() - b.x.iter().map(|&x| xlnx(x)).sum::<f64>() - fixed_xlnx;
        Ok((g, b.x.clone(), res))
    };

    let width = hi - lo;
    let best = if width <= 1e-12 * hi.max(1.0) {
        probe(hi, &mut b)?
    } else {
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut d) = (lo, hi);
        let mut c1 = d - phi * (d - a);
        let mut c2 = a + phi * (d - a);
        let mut p1 = probe(c1, &mut b)?;
        let mut p2 = probe(c2, &mut b)?;
        for _ in 0..GOLDEN_STEPS {
            if d - a <= 1e-13 * hi.max(1.0) {
                break;
            }
            if p1.0 >= p2.0 {
                d = c2;
                c2 = c1;
                p2 = p1;
                c1 = d - phi * (d - a);
                p1 = probe(c1, &mut b)?;
            } else {
                a = c1;
                c1 = c2;
                p1 = p2;
                c2 = a + phi * (d - a);
                p2 = probe(c2, &mut b)?;
            }
        }
        let mut best = if p1.0 >= p2.0 { p1 } else { p2 };
        // The maximum often sits at the largest feasible total. G is linear
        // along rays, so ties (a single positive cell) go to the largest total.
        let slack = 1e-12 * best.0.abs().max(1.0);
        if let Ok(candidate) = probe(hi, &mut b) {
            if candidate.0 >= best.0 - slack {
                best = candidate;
            }
        }
        if let Ok(candidate) = probe(lo, &mut b) {
            if candidate.0 > best.0 + slack {
                best = candidate;
            }
        }
        best
    };
    let (_, x, res) = best;
    Ok((x, total_sweeps, res))
}
