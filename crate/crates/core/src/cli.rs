//! Command-line front end: JSON run configurations in, JSON reports and CSV
//! fields out.
//!
//! Exit codes: 0 success, 1 failure inside the numerical pipeline (an error
//! object `{"error": {"kind", "message"}}` is printed on stdout), 2 usage or
//! configuration parse errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::eigensolve::{coercivity_check, first_eigenpair, DEFAULT_TOL};
use crate::error::Error;
use crate::fracop::Operator;
use crate::geometry::{DomainSpec, Grid, HalfSpaceFamily};
use crate::optimize::{multi_start_seeds, OptOptions};
use crate::rearrange::{validate_assumptions, StepSpec, WeightClass};
use crate::symmetry::{
    check_foliated, check_reflection_invariance, check_steiner, dual_polarize, foliated_schwarz_symmetrize, polarize,
    steiner_symmetrize, FoliatedMode, SymmetryReport,
};

#[derive(Debug, Parser)]
#[command(name = "fracweight", version, about = "Weighted fractional eigenvalue optimization and symmetry diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the integrability, sign and coercivity assumptions.
    Validate(CommonArgs),
    /// Solve for the first eigenpair; writes eigen.json and u.csv.
    Solve(CommonArgs),
    /// Minimize over the weight classes; writes opt.json, g.csv, V.csv, u.csv, history.csv.
    Optimize(CommonArgs),
    /// Run symmetry diagnostics on field files; writes symmetry.json.
    Symmetry(CommonArgs),
    /// Apply a polarization or symmetrization to a field file.
    Polarize(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the configured tolerance (eigensolver for `solve`, optimizer otherwise).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Comma-separated optimizer seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

/// Weight given as a step profile or as a field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSource {
    Steps(StepSpec),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Steiner { axis: usize },
    Foliated { direction: Vec<f64> },
    FoliatedSearch,
    /// Invariance under every through-origin lattice reflection that maps
    /// the mask onto itself.
    Reflection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryConfig {
    /// Field name to CSV path.
    pub fields: BTreeMap<String, PathBuf>,
    pub checks: Vec<CheckSpec>,
    #[serde(default = "default_symmetry_tol")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    Polarize { normal: Vec<f64>, offset: f64 },
    DualPolarize { normal: Vec<f64>, offset: f64 },
    Steiner { axis: usize },
    Foliated { direction: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarizeConfig {
    pub input: PathBuf,
    pub transforms: Vec<Transform>,
    #[serde(default = "default_polarize_output")]
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub n: usize,
    pub s: f64,
    /// Omitted means `q = ∞`, always admissible for bounded grid fields.
    #[serde(default)]
    pub q: Option<f64>,
    pub g: WeightSource,
    #[serde(rename = "V", alias = "v", default)]
    pub v: Option<WeightSource>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eig_tol")]
    pub eig_tol: f64,
    #[serde(default)]
    pub symmetry: Option<SymmetryConfig>,
    #[serde(default)]
    pub polarize: Option<PolarizeConfig>,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    500
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_eig_tol() -> f64 {
    DEFAULT_TOL
}
fn default_symmetry_tol() -> f64 {
    1e-6
}
fn default_polarize_output() -> String {
    "polarized.csv".into()
}

/// Failure of a CLI run, mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed configuration: exit 2.
    Usage(String),
    /// Numerical or domain failure: exit 1.
    Run(Error),
    /// Output could not be written: exit 1.
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
    }

    fn load(path: &Path) -> CliResult<(Self, PathBuf)> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read configuration {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }
}

/// Loaded configuration together with its grid and operator.
struct Setup {
    config: RunConfig,
    base: PathBuf,
    grid: Grid,
}

impl Setup {
    fn load(args: &CommonArgs) -> CliResult<Self> {
        let (mut config, base) = RunConfig::load(&args.config)?;
        if let Some(seeds) = &args.seeds {
            config.seeds = seeds.clone();
        }
        let grid = Grid::new(&config.domain, config.n)?;
        Ok(Setup { config, base, grid })
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base.join(path)
        }
    }

    fn operator(&self) -> CliResult<Operator> {
        Ok(Operator::assemble(&self.grid, self.config.s)?)
    }

    fn class(&self, source: &WeightSource) -> CliResult<WeightClass> {
        match source {
            WeightSource::Steps(spec) => Ok(WeightClass::from_steps(spec, self.grid.n_cells())?),
            WeightSource::File(path) => Ok(WeightClass::from_field(&read_field(&self.grid, &self.resolve(path))?)?),
        }
    }

    /// Concrete field: step profiles are laid out in cell order, first step first.
    fn field(&self, source: &WeightSource) -> CliResult<Vec<f64>> {
        match source {
            WeightSource::Steps(spec) => {
                let counts = spec.counts(self.grid.n_cells())?;
                Ok(spec
                    .steps
                    .iter()
                    .zip(counts)
                    .flat_map(|(step, count)| std::iter::repeat_n(step.value, count))
                    .collect())
            }
            WeightSource::File(path) => read_field(&self.grid, &self.resolve(path)),
        }
    }

    fn potential_source(&self) -> WeightSource {
        self.config.v.clone().unwrap_or_else(|| WeightSource::Steps(StepSpec::constant(0.0)))
    }

    fn q(&self) -> f64 {
        self.config.q.unwrap_or(f64::INFINITY)
    }
}

fn coordinate_names(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["x".into()]
    } else {
        (1..=dim).map(|k| format!("x{k}")).collect()
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per inside cell: center coordinates then the value.
pub fn write_field(grid: &Grid, path: &Path, name: &str, field: &[f64]) -> CliResult<()> {
    grid.check_field(field)?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = coordinate_names(grid.dim());
    header.push(name.into());
    w.write_record(&header)?;
    for (c, v) in field.iter().enumerate() {
        let mut row: Vec<String> = grid.center(c).iter().map(|&x| fmt_value(x)).collect();
        row.push(fmt_value(*v));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_number(text: &str, path: &Path, line: usize) -> CliResult<f64> {
    text.trim()
        .parse()
        .map_err(|_| CliError::Run(Error::Spec(format!("{}:{line}: cannot parse {text:?}", path.display()))))
}

/// Reads a field written by [`write_field`] (coordinates then value, in cell
/// order) or a `cell,value` table in any row order.
pub fn read_field(grid: &Grid, path: &Path) -> CliResult<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let header = r.headers()?.clone();
    let by_index = header.get(0).is_some_and(|h| h.trim() == "cell");
    let n = grid.n_cells();
    let mut field = vec![f64::NAN; n];
    let mut rows = 0usize;
    for (k, record) in r.records().enumerate() {
        let record = record?;
        let line = k + 2;
        rows += 1;
        if by_index {
            if record.len() != 2 {
                return Err(Error::Spec(format!("{}:{line}: expected cell,value", path.display())).into());
            }
            let cell: usize = record[0]
                .trim()
                .parse()
                .map_err(|_| Error::Spec(format!("{}:{line}: bad cell index {:?}", path.display(), &record[0])))?;
            if cell >= n || !field[cell].is_nan() {
                return Err(Error::Spec(format!("{}:{line}: cell {cell} out of range or repeated", path.display())).into());
            }
            field[cell] = parse_number(&record[1], path, line)?;
        } else {
            if rows > n {
                return Err(Error::Shape { expected: n, got: rows }.into());
            }
            let cell = rows - 1;
            if record.len() != grid.dim() + 1 {
                return Err(Error::Spec(format!(
                    "{}:{line}: expected {} columns, got {}",
                    path.display(),
                    grid.dim() + 1,
                    record.len()
                ))
                .into());
            }
            for (k, &x) in grid.center(cell).iter().enumerate() {
                let read = parse_number(&record[k], path, line)?;
                if (read - x).abs() > 1e-9 * grid.h() {
                    return Err(Error::Spec(format!(
                        "{}:{line}: coordinate {read} does not match cell center {x}",
                        path.display()
                    ))
                    .into());
                }
            }
            field[cell] = parse_number(&record[grid.dim()], path, line)?;
        }
    }
    if rows != n || field.iter().any(|v| v.is_nan()) {
        return Err(Error::Shape { expected: n, got: rows }.into());
    }
    Ok(field)
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn cmd_validate(args: &CommonArgs, stdout: &mut dyn Write) -> CliResult<bool> {
    let setup = Setup::load(args)?;
    let op = setup.operator()?;
    let g_class = setup.class(&setup.config.g)?;
    let v_source = setup.potential_source();
    let v_class = setup.class(&v_source)?;
    let assumptions = validate_assumptions(&g_class, &v_class, setup.q(), &op)?;
    let given = coercivity_check(&op, &setup.field(&v_source)?)?;
    let passed = assumptions.passed && given.coercive;
    let report = json!({
        "passed": passed,
        "n_cells": setup.grid.n_cells(),
        "assumptions": assumptions,
        "coercivity": given,
    });
    writeln!(stdout, "{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?)?;
    Ok(passed)
}

fn cmd_solve(args: &CommonArgs) -> CliResult<()> {
    let setup = Setup::load(args)?;
    let op = setup.operator()?;
    let g = setup.field(&setup.config.g)?;
    let v = setup.field(&setup.potential_source())?;
    let tol = args.tol.unwrap_or(setup.config.eig_tol);
    let pair = first_eigenpair(&op, &g, &v, tol)?;
    prepare_out(&args.out)?;
    let report = json!({
        "lambda": pair.lambda,
        "residual": pair.residual,
        "iterations": pair.iterations,
        "degenerate": pair.degenerate,
        "n_cells": setup.grid.n_cells(),
        "h": setup.grid.h(),
        "s": setup.config.s,
        "c_ns": op.params().c_ns,
    });
    write_json(&args.out.join("eigen.json"), &report)?;
    write_field(&setup.grid, &args.out.join("u.csv"), "u", &pair.u)
}

fn cmd_optimize(args: &CommonArgs) -> CliResult<()> {
    let setup = Setup::load(args)?;
    let op = setup.operator()?;
    let g_class = setup.class(&setup.config.g)?;
    let v_class = setup.class(&setup.potential_source())?;
    let opts = OptOptions {
        tol: args.tol.unwrap_or(setup.config.tol),
        max_iter: setup.config.max_iter,
        seed: 0,
        eig_tol: setup.config.eig_tol,
        q: setup.q(),
        polarization_sweep: true,
    };
    let ms = multi_start_seeds(&setup.grid, &op, &g_class, &v_class, &opts, &setup.config.seeds)?;
    prepare_out(&args.out)?;

    let mut by_seed: Vec<_> = ms.results.iter().collect();
    by_seed.sort_by_key(|r| r.start_seed);
    let runs: Vec<_> = by_seed
        .iter()
        .map(|r| {
            json!({
                "seed": r.start_seed,
                "lambda_min": r.lambda_min,
                "iterations": r.iterations,
                "converged": r.converged,
                "stop": r.stop,
            })
        })
        .collect();
    let best = ms.best();
    let report = json!({
        "lambda_min": best.lambda_min,
        "best_seed": best.start_seed,
        "spread": ms.spread,
        "all_converged": ms.results.iter().all(|r| r.converged),
        "runs": runs,
    });
    write_json(&args.out.join("opt.json"), &report)?;
    write_field(&setup.grid, &args.out.join("g.csv"), "g", &best.g_opt)?;
    write_field(&setup.grid, &args.out.join("V.csv"), "V", &best.v_opt)?;
    write_field(&setup.grid, &args.out.join("u.csv"), "u", &best.u_opt)?;

    let mut w = csv::Writer::from_path(args.out.join("history.csv"))?;
    w.write_record(["seed", "iter", "lambda"])?;
    for r in by_seed {
        for h in &r.history {
            w.write_record([r.start_seed.to_string(), h.iteration.to_string(), fmt_value(h.lambda)])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct FieldReport {
    field: String,
    check: CheckSpec,
    report: SymmetryReport,
}

fn cmd_symmetry(args: &CommonArgs) -> CliResult<()> {
    let setup = Setup::load(args)?;
    let sym = setup
        .config
        .symmetry
        .clone()
        .ok_or_else(|| CliError::Usage("configuration has no \"symmetry\" section".into()))?;
    let tolerance = args.tol.unwrap_or(sym.tolerance);
    let grid = &setup.grid;
    let mut reports = Vec::new();
    for (name, path) in &sym.fields {
        let field = read_field(grid, &setup.resolve(path))?;
        for check in &sym.checks {
            let report = match check {
                CheckSpec::Steiner { axis } => check_steiner(grid, &field, *axis, tolerance)?,
                CheckSpec::Foliated { direction } => {
                    check_foliated(grid, &field, &FoliatedMode::Direction(direction.clone()), tolerance)?
                }
                CheckSpec::FoliatedSearch => check_foliated(grid, &field, &FoliatedMode::Search, tolerance)?,
                CheckSpec::Reflection => {
                    let mut family = Vec::new();
                    for h in grid.compatible_halfspaces(&HalfSpaceFamily::ThroughOrigin)? {
                        if grid.is_reflection_invariant(&h)? {
                            family.push(h);
                        }
                    }
                    check_reflection_invariance(grid, &field, &family, tolerance)?
                }
            };
            reports.push(FieldReport { field: name.clone(), check: check.clone(), report });
        }
    }
    prepare_out(&args.out)?;
    let all_passed = reports.iter().all(|r| r.report.verdict);
    write_json(&args.out.join("symmetry.json"), &json!({ "all_passed": all_passed, "reports": reports }))
}

fn cmd_polarize(args: &CommonArgs) -> CliResult<()> {
    let setup = Setup::load(args)?;
    let pol = setup
        .config
        .polarize
        .clone()
        .ok_or_else(|| CliError::Usage("configuration has no \"polarize\" section".into()))?;
    let grid = &setup.grid;
    let mut field = read_field(grid, &setup.resolve(&pol.input))?;
    for t in &pol.transforms {
        field = match t {
            Transform::Polarize { normal, offset } => polarize(grid, &grid.halfspace(normal, *offset)?, &field)?,
            Transform::DualPolarize { normal, offset } => {
                dual_polarize(grid, &grid.halfspace(normal, *offset)?, &field)?
            }
            Transform::Steiner { axis } => steiner_symmetrize(grid, *axis, &field)?,
            Transform::Foliated { direction } => foliated_schwarz_symmetrize(grid, direction, &field)?,
        };
    }
    prepare_out(&args.out)?;
    write_field(grid, &args.out.join(&pol.output), "f", &field)
}

fn error_object(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Validate(a) => cmd_validate(a, stdout).map(|passed| if passed { 0 } else { 1 }),
        Command::Solve(a) => cmd_solve(a).map(|_| 0),
        Command::Optimize(a) => cmd_optimize(a).map(|_| 0),
        Command::Symmetry(a) => cmd_symmetry(a).map(|_| 0),
        Command::Polarize(a) => cmd_polarize(a).map(|_| 0),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(CliError::Run(e)) => {
            let _ = writeln!(stdout, "{}", error_object(e.kind(), &e.to_string()));
            1
        }
        Err(CliError::Io(msg)) => {
            let _ = writeln!(stdout, "{}", error_object("io", &msg));
            1
        }
    }
}
