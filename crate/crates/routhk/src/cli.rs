//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a certificate or residual check failed, 2 invalid
//! input (unknown example, bad parameters, failed G-regularity solve), 3 I/O
//! error, 4 inconsistent momentum constraints.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use routhk_core::numerics::Grid;
use routhk_core::symmetry::momentum_deviation_field;

use crate::case::ExampleCase;
use crate::certificates::{reconstruct, run_certificates, thread_budget, Tolerances};
use crate::descriptor::Space;
use crate::error::{AppError, AppResult};
use crate::io;
use crate::registry;

#[derive(Debug, Parser)]
#[command(
    name = "routhk",
    version,
    about = "Polysymplectic field theories: certificates, Routh reduction and reconstruction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every certificate an example declares and write a CSV report.
    Check(CheckArgs),
    /// Print the reduced Routhian's coefficients and magnetic terms as JSON.
    Reduce(ReduceArgs),
    /// Lift a reduced solution back to the full configuration space.
    Reconstruct(ReconstructArgs),
    /// List the built-in examples and their parameters.
    ListExamples,
}

#[derive(Debug, Args)]
pub struct SystemArgs {
    /// Built-in example name.
    #[arg(long, required_unless_present = "system", conflicts_with = "system")]
    pub example: Option<String>,
    /// JSON system descriptor.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Shorthand for `--param lambda=…`.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Shorthand for `--param nu=…`.
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_assignment)]
    pub params: Vec<(String, f64)>,
    /// Replace every default tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Nodes per axis.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    /// Interval `LO HI` used on every axis.
    #[arg(long, num_args = 2, allow_negative_numbers = true, default_values_t = [-1.0, 1.0])]
    pub domain: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Report path, `-` for stdout.
    #[arg(long, default_value = "report.csv")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Momentum, flat with entry `β·k + a`.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub mu: Option<Vec<f64>>,
    /// Reduced base point for the expansion; the chart anchor by default.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub base_point: Option<Vec<f64>>,
    /// Output path, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Momentum, flat with entry `β·k + a`; the solution's own value by default.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub mu: Option<Vec<f64>>,
    /// Label of a reduced solution of the example.
    #[arg(long)]
    pub solution: String,
    /// Group coordinates at the low grid corner.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub anchor: Option<Vec<f64>>,
    /// Reconstructed field CSV, `-` for stdout.
    #[arg(long, default_value = "reconstructed.csv")]
    pub output: PathBuf,
    /// Also write the full Euler–Lagrange residual grid here.
    #[arg(long)]
    pub residual: Option<PathBuf>,
    /// Also write per-component momentum deviations here.
    #[arg(long)]
    pub deviation: Option<PathBuf>,
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let value = value
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("`{value}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

impl SystemArgs {
    fn overrides(&self) -> BTreeMap<String, f64> {
        let mut map: BTreeMap<String, f64> = self.params.iter().cloned().collect();
        if let Some(l) = self.lambda {
            map.insert("lambda".into(), l);
        }
        if let Some(n) = self.nu {
            map.insert("nu".into(), n);
        }
        map
    }

    fn load(&self) -> AppResult<ExampleCase> {
        let overrides = self.overrides();
        match (&self.example, &self.system) {
            (Some(name), None) => registry::load_example(name, &overrides),
            (None, Some(path)) => registry::load_system_file(path, &overrides),
            _ => Err(AppError::InvalidParameters(
                "give exactly one of --example and --system".into(),
            )),
        }
    }

    fn tolerances(&self) -> AppResult<Tolerances> {
        match self.tol {
            None => Ok(Tolerances::default()),
            Some(t) if t > 0.0 && t.is_finite() => Ok(Tolerances::uniform(t)),
            Some(t) => Err(AppError::InvalidParameters(format!(
                "--tol must be positive, got {t}"
            ))),
        }
    }
}

impl GridArgs {
    fn build(&self, k: usize) -> AppResult<Grid> {
        let (lo, hi) = (self.domain[0], self.domain[1]);
        Grid::uniform(k, lo, hi, self.grid).map_err(|e| AppError::InvalidParameters(e.to_string()))
    }
}

fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> AppResult<i32> {
    let case = args.system.load()?;
    let grid = args.grid.build(case.k())?;
    let tol = args.system.tolerances()?;
    let report = run_certificates(&case, &grid, &tol, thread_budget())?;
    io::write_to(&args.report, |w| io::write_report_csv(&report, w))?;
    for r in report.failures() {
        let note = r
            .note
            .as_deref()
            .map(|n| format!(" ({n})"))
            .unwrap_or_default();
        writeln!(
            out,
            "FAIL {} {}: {} expected {}{note}",
            r.solution,
            r.check,
            io::csv_real(r.max_residual),
            r.expected
        )
        .map_err(|e| AppError::io("stdout", e))?;
    }
    let passed = report.rows.iter().filter(|r| r.passed).count();
    writeln!(
        out,
        "{}: {passed}/{} checks passed",
        case.name,
        report.rows.len()
    )
    .map_err(|e| AppError::io("stdout", e))?;
    Ok(if report.all_passed() { 0 } else { 1 })
}

fn cmd_reduce(args: &ReduceArgs) -> AppResult<i32> {
    let case = args.system.load()?;
    let red = case.require_reduction()?;
    let mu = match &args.mu {
        Some(v) => case.momentum(v)?,
        None => case.default_mu.clone(),
    };
    let chart = red.chart();
    let qb = match &args.base_point {
        Some(p) if p.len() == chart.base_n() => p.clone(),
        Some(p) => {
            return Err(AppError::InvalidParameters(format!(
                "--base-point needs {} values, got {}",
                chart.base_n(),
                p.len()
            )))
        }
        None => chart.project(chart.anchor()),
    };
    let rsys = red.routh_system(mu, case.name.clone());
    let mut json = io::reduced_json(&rsys, chart.base(), &qb)?;
    if let serde_json::Value::Object(obj) = &mut json {
        obj.insert("algebra".into(), io::algebra_json(case.symmetry.algebra()));
    }
    let text = io::json_text(&json);
    io::write_to(&args.output, |w| {
        w.write_all(text.as_bytes())
            .map_err(|e| AppError::io("output", e))
    })?;
    Ok(0)
}

fn cmd_reconstruct(args: &ReconstructArgs, out: &mut dyn Write) -> AppResult<i32> {
    let case = args.system.load()?;
    let tol = args.system.tolerances()?;
    let sol = case.solution(&args.solution)?;
    if sol.space != Space::Reduced {
        return Err(AppError::InvalidParameters(format!(
            "`{}` is a full-space solution; reconstruction needs a reduced one",
            sol.label
        )));
    }
    let mu = match (&args.mu, &sol.mu) {
        (Some(v), _) => case.momentum(v)?,
        (None, Some(m)) => m.clone(),
        (None, None) => case.default_mu.clone(),
    };
    let grid = args.grid.build(case.k())?;
    let psi = sol.sample(&grid)?;
    let phi = reconstruct(&case, sol, &psi, &mu, tol.strict, args.anchor.as_deref())?;
    io::write_to(&args.output, |w| io::write_field_csv(&phi, w))?;
    let res = case.lagrangian.el_residual(&phi)?;
    if let Some(path) = &args.residual {
        io::write_to(path, |w| io::write_residual_csv(&res, w))?;
    }
    if let Some(path) = &args.deviation {
        let dev = momentum_deviation_field(&case.lagrangian, &case.symmetry, &phi, &mu)?;
        io::write_to(path, |w| {
            io::write_deviation_csv(&dev, case.symmetry.m(), case.k(), w)
        })?;
    }
    let r = res.max_abs();
    let ok = r <= tol.loose;
    writeln!(
        out,
        "{} {}: full EL residual max |r| = {} ({} {})",
        case.name,
        sol.label,
        io::csv_real(r),
        if ok { "<=" } else { ">" },
        io::csv_real(tol.loose)
    )
    .map_err(|e| AppError::io("stdout", e))?;
    Ok(if ok { 0 } else { 1 })
}

fn cmd_list(out: &mut dyn Write) -> AppResult<i32> {
    for name in registry::example_names() {
        let d = registry::descriptor(name)?;
        let params: Vec<String> = d
            .parameters
            .iter()
            .map(|p| format!("{}={}", p.name, p.default))
            .collect();
        let sols: Vec<&str> = d.solutions.iter().map(|s| s.label.as_str()).collect();
        writeln!(out, "{name}\n    {}", d.description).map_err(|e| AppError::io("stdout", e))?;
        if !params.is_empty() {
            writeln!(out, "    parameters: {}", params.join(" "))
                .map_err(|e| AppError::io("stdout", e))?;
        }
        writeln!(out, "    solutions: {}", sols.join(" "))
            .map_err(|e| AppError::io("stdout", e))?;
    }
    Ok(0)
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Check(a) => cmd_check(a, out),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Reconstruct(a) => cmd_reconstruct(a, out),
        Command::ListExamples => cmd_list(out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
