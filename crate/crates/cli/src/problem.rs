//! JSON problem files.

use anyhow::{bail, ensure, Context, Result};
use maxmat_core::{Axis, FixedBlock, Matrix, ProblemSpec, SumKind};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    shape: ShapeFile,
    #[serde(default)]
    row_sums: Option<Sums>,
    #[serde(default)]
    col_sums: Option<Sums>,
    #[serde(default)]
    total: Option<TotalFile>,
    #[serde(default)]
    element_bounds: Vec<ElementFile>,
    #[serde(default)]
    fixed_blocks: Option<FixedBlocks>,
    #[serde(default)]
    symmetric: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeFile {
    rows: usize,
    cols: usize,
    #[serde(default)]
    slices: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sums {
    kind: SumKind,
    values: Values,
}

/// Dense per-index values, sparse `{index, value}` entries, or `values[i][k]`
/// section sums of a 3-D problem.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Values {
    Dense(Vec<f64>),
    Sections(Vec<Vec<f64>>),
    Sparse(Vec<Entry>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    index: usize,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TotalFile {
    kind: SumKind,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementFile {
    i: usize,
    j: usize,
    ub: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FixedBlocks {
    Blocks(Vec<BlockFile>),
    /// The first `diagonal_prefix` diagonal entries fixed to `values`.
    Diagonal(DiagonalFile),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockFile {
    indices: Vec<usize>,
    matrix: Matrix,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagonalFile {
    diagonal_prefix: usize,
    values: Vec<f64>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn into_spec(self) -> Result<ProblemSpec> {
        let ShapeFile { rows, cols, slices } = self.shape;
        let mut spec = match slices {
            Some(k) => {
                ensure!(rows == cols, "3-D problems are square, got {rows}x{cols}");
                ProblemSpec::new_3d(rows, k)
            }
            None => ProblemSpec::new(rows, cols),
        };
        if let Some(sums) = self.row_sums {
            spec = add_sums(spec, Axis::Row, sums, slices.is_some()).context("row_sums")?;
        }
        if let Some(sums) = self.col_sums {
            ensure!(slices.is_none(), "col_sums: 3-D problems take section sums in row_sums only");
            spec = add_sums(spec, Axis::Col, sums, false).context("col_sums")?;
        }
        if let Some(t) = self.total {
            spec = spec.with_total(t.kind, t.value);
        }
        for e in self.element_bounds {
            spec = spec.with_element_bound(e.i, e.j, e.ub);
        }
        match self.fixed_blocks {
            None => {}
            Some(FixedBlocks::Blocks(blocks)) => {
                for b in blocks {
                    spec = spec.with_fixed_block(FixedBlock::new(b.indices, b.matrix));
                }
            }
            Some(FixedBlocks::Diagonal(d)) => {
                ensure!(
                    d.values.len() == d.diagonal_prefix,
                    "fixed_blocks: diagonal_prefix {} with {} values",
                    d.diagonal_prefix,
                    d.values.len()
                );
                spec = spec.with_fixed_diagonal(&d.values);
            }
        }
        if self.symmetric {
            spec = spec.symmetric();
        }
        Ok(spec)
    }
}

fn add_sums(spec: ProblemSpec, axis: Axis, sums: Sums, three_d: bool) -> Result<ProblemSpec> {
    Ok(match (sums.values, three_d) {
        (Values::Sections(v), true) => spec.with_section_sums(sums.kind, &v),
        (Values::Dense(v), true) if v.is_empty() => spec,
        (_, true) => bail!("3-D problems need values[i][k]"),
        (Values::Dense(v), false) => v
            .iter()
            .enumerate()
            .fold(spec, |s, (i, &x)| s.with_marginal(axis, i, sums.kind, x)),
        (Values::Sparse(v), false) => v
            .iter()
            .fold(spec, |s, e| s.with_marginal(axis, e.index, sums.kind, e.value)),
        (Values::Sections(_), false) => bail!("nested values are only valid for 3-D problems"),
    })
}
