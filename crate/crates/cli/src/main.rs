use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use maxmat_core::oracle::{brute_force_most_likely, numeric_maxent, verify_kkt, KktReport, Objective};
use maxmat_core::{
    classify, consistency_check_blocks, exact_realizations_of, log10_realizations_of, root_problems, series_approx_xi,
    solve, validate_spec, FixedBlock, Matrix, Multipliers, ProblemSpec, RootDiagnostics, SolverCase, Solved,
};
use serde::Serialize;

mod problem;

use problem::ProblemFile;

/// Tolerance of the optimality check reported under `residuals`.
const KKT_TOL: f64 = 1e-8;
/// Above this total, counts are exact only with `--exact`.
const AUTO_EXACT_TOTAL: f64 = 1e4;

#[derive(Parser, Debug)]
#[command(name = "maxmat", version, about = "Most likely matrices from sums and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Root-finding tolerance (oracle tolerance for `oracle`).
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,
    /// Also report the truncated series for xi, started at 9 / (4 sigma).
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(0..=2))]
    series_order: Option<u8>,
    /// Count realizations with big integers regardless of size.
    #[arg(long, global = true)]
    exact: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify and solve a problem file.
    Solve { file: PathBuf },
    /// Realization counts of a matrix: a JSON array, a result file, CSV, or inline JSON.
    Count { input: String },
    /// Validate a problem file and check block consistency.
    Check { file: PathBuf },
    /// Solve numerically and compare with the closed form.
    Oracle { file: PathBuf },
    /// Enumerate all integer matrices of a small problem.
    Brute { file: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 1 for errors from the solvers (infeasible, inconsistent, unsupported),
/// 2 for bad input or flags.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<maxmat_core::Error>()) {
        1
    } else {
        2
    }
}

fn run(cli: &Cli) -> Result<()> {
    if !(cli.tol > 0.0 && cli.tol.is_finite()) {
        bail!("--tol must be positive, got {}", cli.tol);
    }
    let text = match &cli.command {
        Command::Solve { file } => solve_cmd(cli, &load(file)?)?,
        Command::Count { input } => count_cmd(cli, input)?,
        Command::Check { file } => check_cmd(cli, &load(file)?)?,
        Command::Oracle { file } => oracle_cmd(cli, &load(file)?)?,
        Command::Brute { file } => brute_cmd(cli, &load(file)?)?,
    };
    match &cli.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<ProblemSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ProblemFile::parse(&text)
        .and_then(ProblemFile::into_spec)
        .with_context(|| format!("parsing {}", path.display()))
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn csv_matrix(out: &mut String, m: &Matrix) {
    for row in m.to_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
}

fn csv_slices(slices: &[Matrix]) -> String {
    let mut out = String::new();
    for (k, m) in slices.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        csv_matrix(&mut out, m);
    }
    out
}

#[derive(Serialize)]
struct Counts {
    log10_realizations: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_realizations: Option<String>,
}

fn counts(cells: &[f64], force_exact: bool) -> Result<Counts> {
    let log10_realizations = log10_realizations_of(cells)?.log10;
    let total: f64 = cells.iter().sum();
    let exact_realizations = if force_exact {
        Some(exact_realizations_of(cells)?.to_string())
    } else if total <= AUTO_EXACT_TOTAL {
        exact_realizations_of(cells).ok().map(|c| c.to_string())
    } else {
        None
    };
    Ok(Counts {
        log10_realizations,
        exact_realizations,
    })
}

#[derive(Serialize)]
struct Residuals {
    max_violation: f64,
    product_form: f64,
    multipliers: f64,
    kkt_passed: bool,
}

impl From<KktReport> for Residuals {
    fn from(r: KktReport) -> Self {
        Self {
            max_violation: r.max_violation,
            product_form: r.product_form_residual,
            multipliers: r.multiplier_residual,
            kkt_passed: r.passed(),
        }
    }
}

#[derive(Serialize)]
struct SeriesOut {
    order: u8,
    xi0: f64,
    xi: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum PerSlice {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Serialize)]
struct ResultFile {
    case: SolverCase,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<Matrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slices: Option<Vec<Matrix>>,
    total: f64,
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<PerSlice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi: Option<PerSlice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    root: Option<RootDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    multipliers: Option<Multipliers>,
    #[serde(skip_serializing_if = "Option::is_none")]
    series: Option<Vec<SeriesOut>>,
    #[serde(flatten)]
    counts: Counts,
    residuals: Residuals,
}

fn solve_cmd(cli: &Cli, spec: &ProblemSpec) -> Result<String> {
    let solved = solve(spec, cli.tol)?;
    let series = match cli.series_order {
        None => None,
        Some(order) => {
            let problems = root_problems(spec)?;
            if problems.is_empty() {
                bail!("--series-order needs a problem with a fixed diagonal, got {:?}", solved.case());
            }
            let out = problems
                .iter()
                .map(|p| {
                    let xi0 = 9.0 / (4.0 * p.sigma);
                    series_approx_xi(p, xi0, order).map(|s| SeriesOut { order, xi0, xi: s.xi })
                })
                .collect::<maxmat_core::Result<Vec<_>>>()?;
            Some(out)
        }
    };
    let counts = counts(&solved.cells(), cli.exact)?;
    let result = match solved {
        Solved::Matrix(s) => {
            let residuals = verify_kkt(&s, spec, KKT_TOL)?.into();
            if cli.format == Format::Csv {
                let mut out = String::new();
                csv_matrix(&mut out, &s.matrix);
                return Ok(out);
            }
            ResultFile {
                case: s.case,
                total: s.total,
                k: s.k,
                lambda: s.root.map(|r| PerSlice::One(r.lambda)),
                xi: s.root.map(|r| PerSlice::One(r.xi)),
                root: s.root,
                multipliers: s.multipliers,
                matrix: Some(s.matrix),
                slices: None,
                series,
                counts,
                residuals,
            }
        }
        Solved::Tensor(t) => {
            let residuals = verify_kkt(&t, spec, KKT_TOL)?.into();
            if cli.format == Format::Csv {
                return Ok(csv_slices(&t.slices));
            }
            ResultFile {
                case: t.case,
                total: t.total,
                k: None,
                lambda: Some(PerSlice::Many(t.lambda)),
                xi: Some(PerSlice::Many(t.xi)),
                root: None,
                multipliers: None,
                matrix: None,
                slices: Some(t.slices),
                series,
                counts,
                residuals,
            }
        }
    };
    json(&result)
}

/// Reads a matrix (or list of slices) from a path or an inline string.
fn read_cells(input: &str) -> Result<Vec<Matrix>> {
    let text = if Path::new(input).is_file() {
        fs::read_to_string(input).with_context(|| format!("reading {input}"))?
    } else {
        input.to_string()
    };
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(&text).context("parsing JSON matrix")?;
        let value = match value {
            serde_json::Value::Object(mut map) => {
                if let Some(m) = map.remove("matrix") {
                    return Ok(vec![serde_json::from_value(m).context("parsing \"matrix\"")?]);
                }
                map.remove("slices").context("expected a \"matrix\" or \"slices\" key")?
            }
            // A bare list of slices has three levels of nesting.
            v if v.pointer("/0/0/0").is_some() => v,
            v => return Ok(vec![serde_json::from_value(v).context("parsing matrix")?]),
        };
        return serde_json::from_value(value).context("parsing \"slices\"");
    }
    let mut slices = Vec::new();
    for block in text.split("\n\n").filter(|b| !b.trim().is_empty()) {
        let rows = block
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|c| c.trim().parse::<f64>().with_context(|| format!("bad CSV cell {c:?}")))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        slices.push(Matrix::from_rows(&rows).context("ragged CSV rows")?);
    }
    if slices.is_empty() {
        bail!("no matrix in {input:?}");
    }
    Ok(slices)
}

fn count_cmd(cli: &Cli, input: &str) -> Result<String> {
    let slices = read_cells(input)?;
    let cells: Vec<f64> = slices.iter().flat_map(|m| m.as_slice().iter().copied()).collect();
    let c = counts(&cells, cli.exact)?;
    if cli.format == Format::Csv {
        return Ok(format!(
            "log10_realizations,exact_realizations\n{:?},{}\n",
            c.log10_realizations,
            c.exact_realizations.unwrap_or_default()
        ));
    }
    #[derive(Serialize)]
    struct CountOut {
        cells: usize,
        total: f64,
        #[serde(flatten)]
        counts: Counts,
    }
    json(&CountOut {
        cells: cells.len(),
        total: cells.iter().sum(),
        counts: c,
    })
}

fn check_cmd(cli: &Cli, spec: &ProblemSpec) -> Result<String> {
    let p = validate_spec(spec)?;
    let case = classify(&p);
    let mut blocks_checked = 0;
    if p.symmetric() && !p.fixed_blocks().is_empty() {
        for k in 0..p.slices() {
            let rows = p.row_bounds(k);
            if !rows.iter().all(|b| b.is_equal() || b.is_upper()) {
                continue;
            }
            let u: Vec<f64> = rows.iter().map(|b| b.value()).collect();
            let s: f64 = u.iter().sum();
            let blocks: Vec<FixedBlock> = if p.is_3d() {
                (0..p.n()).map(|i| FixedBlock::singleton(i, 0.0)).collect()
            } else {
                p.fixed_blocks().to_vec()
            };
            let report = consistency_check_blocks(&u, &blocks, s).into_result();
            if p.is_3d() {
                report.with_context(|| format!("slice {k}"))?;
            } else {
                report?;
            }
            blocks_checked += blocks.len();
        }
    }
    if cli.format == Format::Csv {
        return Ok(format!("case,blocks_checked\n{case:?},{blocks_checked}\n"));
    }
    #[derive(Serialize)]
    struct CheckOut {
        case: SolverCase,
        blocks_checked: usize,
        consistent: bool,
    }
    json(&CheckOut {
        case,
        blocks_checked,
        consistent: true,
    })
}

fn has_fixed_total(spec: &ProblemSpec) -> Result<bool> {
    Ok(validate_spec(spec)?.fixed_total().is_some())
}

fn oracle_cmd(cli: &Cli, spec: &ProblemSpec) -> Result<String> {
    let objective = if has_fixed_total(spec)? { Objective::H } else { Objective::G };
    let numeric = numeric_maxent(spec, objective, cli.tol)?;
    let (analytic, analytic_error) = match solve(spec, DEFAULT_SOLVE_TOL) {
        Ok(s) => (Some(s.cells()), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let oracle_cells = numeric.matrix.as_slice();
    let max_abs_diff = analytic.as_ref().map(|a| {
        a.iter()
            .zip(oracle_cells)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    });
    if cli.format == Format::Csv {
        let cols = numeric.matrix.cols();
        let mut out = String::from("row,col,analytic,oracle,abs_diff\n");
        for (c, &y) in oracle_cells.iter().enumerate() {
            let (i, j) = (c / cols, c % cols);
            match &analytic {
                Some(a) => out.push_str(&format!("{i},{j},{:?},{y:?},{:?}\n", a[c], (a[c] - y).abs())),
                None => out.push_str(&format!("{i},{j},,{y:?},\n")),
            }
        }
        return Ok(out);
    }
    #[derive(Serialize)]
    struct OracleOut {
        objective: Objective,
        objective_value: f64,
        converged: bool,
        iterations: usize,
        oracle_residual: f64,
        oracle: Matrix,
        #[serde(skip_serializing_if = "Option::is_none")]
        analytic_error: Option<String>,
        max_abs_diff: Option<f64>,
    }
    json(&OracleOut {
        objective,
        objective_value: numeric.objective,
        converged: numeric.converged,
        iterations: numeric.iterations,
        oracle_residual: numeric.residuals,
        oracle: numeric.matrix,
        analytic_error,
        max_abs_diff,
    })
}

/// The closed form is compared at its own default accuracy; `--tol` goes to
/// the oracle.
const DEFAULT_SOLVE_TOL: f64 = maxmat_core::DEFAULT_TOL;

fn brute_cmd(cli: &Cli, spec: &ProblemSpec) -> Result<String> {
    let r = brute_force_most_likely(spec)?;
    if cli.format == Format::Csv {
        return Ok(csv_slices(&r.argmaxes));
    }
    #[derive(Serialize)]
    struct BruteOut {
        count: String,
        feasible: u64,
        argmaxes: Vec<Matrix>,
    }
    json(&BruteOut {
        count: r.count.to_string(),
        feasible: r.feasible,
        argmaxes: r.argmaxes,
    })
}
