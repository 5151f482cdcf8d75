//! Exhaustive search for the most likely integer matrix of a tiny problem.

use num_bigint::BigUint;

use super::system::CellSystem;
use crate::constraints::{validate_spec, ProblemSpec, SumKind};
use crate::counting::{exact_realizations_of, ExactCount};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest number of candidate matrices the search will visit.
pub const SEARCH_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    /// Every matrix attaining the maximal realization count, in lexicographic order.
    pub argmaxes: Vec<Matrix>,
    pub count: ExactCount,
    /// Number of integer matrices satisfying the constraints.
    pub feasible: u64,
}

fn integer(context: &str, v: f64) -> Result<u64> {
    if v.fract() != 0.0 || !(0.0..=1e15).contains(&v) {
        return Err(Error::Unsupported(format!(
            "{context} {v} is not a small integer"
        )));
    }
    Ok(v as u64)
}

/// Enumerates all nonnegative integer matrices satisfying `spec` and returns
/// those with the largest realization count.
pub fn brute_force_most_likely(spec: &ProblemSpec) -> Result<BruteForceResult> {
    let problem = validate_spec(spec)?;
    if problem.is_3d() {
        return Err(Error::Unsupported("enumeration is 2-D only".into()));
    }
    let sys = CellSystem::build(&problem)?;
    let n_free = sys.free.len();

    // Per-cell cap: the smallest target of any constraint through the cell.
    let mut caps: Vec<f64> = sys.cap.clone();
    let mut member: Vec<Vec<usize>> = vec![Vec::new(); n_free];
    for (ci, c) in sys.cons.iter().enumerate() {
        for &i in &c.cells {
            caps[i] = caps[i].min(c.target);
            member[i].push(ci);
        }
    }
    let estimate: f64 = caps.iter().map(|&c| c.floor() + 1.0).product();
    if !(estimate <= SEARCH_LIMIT) {
        return Err(Error::SearchSpaceTooLarge {
            estimate,
            limit: SEARCH_LIMIT,
        });
    }
    let caps: Vec<u64> = caps.iter().map(|&c| c.floor() as u64).collect();
    let targets: Vec<u64> = sys
        .cons
        .iter()
        .map(|c| integer(&c.label, c.target))
        .collect::<Result<_>>()?;
    for v in sys.fixed.iter().flatten() {
        integer("fixed value", *v)?;
    }

    // Last free cell of each constraint, where equalities are settled.
    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); n_free];
    for (ci, c) in sys.cons.iter().enumerate() {
        if let Some(&last) = c.cells.iter().max() {
            closes[last].push(ci);
        }
    }
    // Capacity still available to each constraint after position p.
    let mut remaining_cap = vec![vec![0u64; sys.cons.len()]; n_free + 1];
    for p in (0..n_free).rev() {
        remaining_cap[p] = remaining_cap[p + 1].clone();
        for &ci in &member[p] {
            remaining_cap[p][ci] += caps[p];
        }
    }

    let mut search = Search {
        sys: &sys,
        caps: &caps,
        targets: &targets,
        member: &member,
        closes: &closes,
        remaining_cap: &remaining_cap,
        kinds: sys.cons.iter().map(|c| c.kind).collect(),
        sums: vec![0; sys.cons.len()],
        current: vec![0; n_free],
        best: None,
        argmaxes: Vec::new(),
        feasible: 0,
    };
    search.descend(0)?;

    let count = search.best.clone().unwrap_or_else(|| ExactCount(BigUint::from(0u32)));
    if search.feasible == 0 {
        return Err(Error::Infeasible("no integer matrix satisfies the constraints".into()));
    }
    let argmaxes = search
        .argmaxes
        .iter()
        .map(|free| {
            let full = sys.expand(&free.iter().map(|&v| v as f64).collect::<Vec<_>>());
            Matrix::from_row_major(sys.rows, sys.cols, full)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BruteForceResult {
        argmaxes,
        count,
        feasible: search.feasible,
    })
}

struct Search<'a> {
    sys: &'a CellSystem,
    caps: &'a [u64],
    targets: &'a [u64],
    member: &'a [Vec<usize>],
    closes: &'a [Vec<usize>],
    remaining_cap: &'a [Vec<u64>],
    kinds: Vec<SumKind>,
    sums: Vec<u64>,
    current: Vec<u64>,
    best: Option<ExactCount>,
    argmaxes: Vec<Vec<u64>>,
    feasible: u64,
}

impl Search<'_> {
    fn descend(&mut self, p: usize) -> Result<()> {
        if p == self.current.len() {
            return self.leaf();
        }
        for v in 0..=self.caps[p] {
            self.current[p] = v;
            let mut ok = true;
            for &ci in &self.member[p] {
                self.sums[ci] += v;
                if self.sums[ci] > self.targets[ci] {
                    ok = false;
                }
            }
            if ok {
                // Equalities must still be reachable with the cells left.
                for &ci in &self.member[p] {
                    if self.kinds[ci] == SumKind::Equal
                        && self.sums[ci] + self.remaining_cap[p + 1][ci] < self.targets[ci]
                    {
                        ok = false;
                    }
                }
                for &ci in &self.closes[p] {
                    if self.kinds[ci] == SumKind::Equal && self.sums[ci] != self.targets[ci] {
                        ok = false;
                    }
                }
            }
            let overflow = self.member[p].iter().any(|&ci| self.sums[ci] > self.targets[ci]);
            if ok {
                self.descend(p + 1)?;
            }
            for &ci in &self.member[p] {
                self.sums[ci] -= v;
            }
            if overflow {
                break;
            }
        }
        self.current[p] = 0;
        Ok(())
    }

    fn leaf(&mut self) -> Result<()> {
        self.feasible += 1;
        let full = self
            .sys
            .expand(&self.current.iter().map(|&v| v as f64).collect::<Vec<_>>());
        let count = exact_realizations_of(&full)?;
        match &self.best {
            Some(best) if count < *best => {}
            Some(best) if count == *best => self.argmaxes.push(self.current.clone()),
            _ => {
                self.best = Some(count);
                self.argmaxes = vec![self.current.clone()];
            }
        }
        Ok(())
    }
}
