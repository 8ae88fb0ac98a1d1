//! Certificate pipeline: runs the checks each example declares and records
//! one report row per (solution, check).

use std::fmt;
use std::str::FromStr;

use routhk_core::lagrangian::ResidualGrid;
use routhk_core::numerics::Grid;
use routhk_core::reconstruction::{
    consistency_check, default_consistency_tolerance, reconstruct_abelian, Constraints,
};
use routhk_core::routh::{reduced_el_residual_exact, RouthSystem};
use routhk_core::symmetry::{
    lagrangian_momentum, momentum_constancy, momentum_deviation_field, noether_divergence,
    noether_divergence_exact, solve_g_regularity,
};
use routhk_core::{FieldSample, MomentumValue};

use crate::case::{AnalyticSolution, ExampleCase};
use crate::descriptor::Space;
use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    // system level
    Regularity,
    Cyclic,
    Killing,
    GRegularity,
    // full-space solutions
    SolvesEl,
    NonReconstructible,
    // reduced solutions
    SolvesReduced,
    MagneticZero,
    Consistent,
    Inconsistent,
    ReconstructionEl,
    Reference,
    // both; on reduced solutions they run on the reconstruction
    MomentumConstancy,
    Noether,
}

const NAMES: &[(Check, &str)] = &[
    (Check::Regularity, "regularity"),
    (Check::Cyclic, "cyclic"),
    (Check::Killing, "killing"),
    (Check::GRegularity, "g-regularity"),
    (Check::SolvesEl, "solves-el"),
    (Check::NonReconstructible, "non-reconstructible"),
    (Check::SolvesReduced, "solves-reduced"),
    (Check::MagneticZero, "magnetic-zero"),
    (Check::Consistent, "consistent"),
    (Check::Inconsistent, "inconsistent"),
    (Check::ReconstructionEl, "reconstruction-el"),
    (Check::Reference, "reference"),
    (Check::MomentumConstancy, "momentum-constancy"),
    (Check::Noether, "noether"),
];

impl Check {
    pub fn name(self) -> &'static str {
        NAMES
            .iter()
            .find(|(c, _)| *c == self)
            .map(|(_, s)| *s)
            .expect("every check is named")
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = AppError;
    fn from_str(s: &str) -> AppResult<Self> {
        NAMES
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(c, _)| *c)
            .ok_or_else(|| AppError::Descriptor(format!("unknown check `{s}`")))
    }
}

/// Thresholds used by the checks.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Exact residuals, consistency, momentum constancy, Noether, Killing.
    pub strict: f64,
    /// Anything measured on a reconstructed (stencil-differentiated) field.
    pub loose: f64,
    /// Pointwise jet identities.
    pub jet: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            strict: 1e-8,
            loose: 1e-6,
            jet: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            strict: tol,
            loose: tol,
            jet: tol,
        }
    }

    /// Margin by which a gap must exceed `strict` to count as a genuine failure.
    pub fn separation(&self) -> f64 {
        100.0 * self.strict
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub solution: String,
    pub check: Check,
    pub max_residual: f64,
    /// Human-readable pass condition, e.g. `<=1e-8`.
    pub expected: String,
    pub passed: bool,
    /// Error text when the check could not be evaluated.
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.passed)
    }

    pub fn find(&self, solution: &str, check: Check) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.solution == solution && r.check == check)
    }
}

fn at_most(solution: &str, check: Check, value: AppResult<f64>, tol: f64) -> ReportRow {
    row(solution, check, value, format!("<={tol:e}"), |v| v <= tol)
}

fn at_least(solution: &str, check: Check, value: AppResult<f64>, bound: f64) -> ReportRow {
    row(solution, check, value, format!(">={bound:e}"), |v| {
        v >= bound
    })
}

fn row(
    solution: &str,
    check: Check,
    value: AppResult<f64>,
    expected: String,
    ok: impl Fn(f64) -> bool,
) -> ReportRow {
    let (max_residual, passed, note) = match value {
        Ok(v) => (v, !v.is_nan() && ok(v), None),
        Err(e) => (f64::NAN, false, Some(e.to_string())),
    };
    ReportRow {
        solution: solution.into(),
        check,
        max_residual,
        expected,
        passed,
        note,
    }
}

fn max_abs(r: ResidualGrid) -> f64 {
    r.max_abs()
}

/// Spread `max − min` over the grid of the most varying momentum component.
pub fn momentum_spread(case: &ExampleCase, field: &FieldSample) -> AppResult<f64> {
    let (m, k) = (case.symmetry.m(), case.k());
    let dev = momentum_deviation_field(
        &case.lagrangian,
        &case.symmetry,
        field,
        &MomentumValue::zero(m, k),
    )?;
    let mut worst = 0.0_f64;
    for b in 0..m {
        for a in 0..k {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for l in 0..field.grid().len() {
                let v = dev.get(l, b, a);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            worst = worst.max(hi - lo);
        }
    }
    Ok(worst)
}

fn system_row(case: &ExampleCase, check: Check, tol: &Tolerances) -> ReportRow {
    let label = "system";
    let jets = case.sample_jets(20, 1);
    match check {
        Check::Regularity => {
            let cert = case.lagrangian.is_regular(&jets, 1e-8);
            ReportRow {
                solution: label.into(),
                check,
                max_residual: cert.min_pivot,
                expected: "min_pivot>1e-8".into(),
                passed: cert.regular,
                note: None,
            }
        }
        Check::Cyclic => {
            let value = (|| {
                let axes = case.translations.as_ref().ok_or_else(|| {
                    AppError::Descriptor("the cyclic check needs a translation symmetry".into())
                })?;
                let mut worst = 0.0_f64;
                for jet in &jets {
                    let d = case.lagrangian.full_derivatives(jet)?;
                    for &i in axes {
                        worst = worst.max(d.gradient[i].abs());
                    }
                }
                Ok(worst)
            })();
            at_most(label, check, value, tol.jet)
        }
        Check::Killing => {
            let value = (|| {
                let metric = case.metric.as_ref().ok_or_else(|| {
                    AppError::Descriptor("the Killing check needs a field metric".into())
                })?;
                let n = case.n();
                let mut worst = 0.0_f64;
                for jet in &jets {
                    for b in 0..case.symmetry.m() {
                        let gens = case.symmetry.generator_fn().clone();
                        let single =
                            move |x: &[routhk_core::Dual2]| gens(x)[b * n..(b + 1) * n].to_vec();
                        let r =
                            routhk_core::liegroup::killing_residual(&**metric, &single, jet.q())?;
                        worst = worst.max(r.max_abs());
                    }
                }
                Ok(worst)
            })();
            at_most(label, check, value, tol.strict)
        }
        Check::GRegularity => {
            let value = (|| {
                let mut worst = 0.0_f64;
                for jet in &jets {
                    let lift = solve_g_regularity(
                        &case.lagrangian,
                        &case.symmetry,
                        jet,
                        &case.default_mu,
                    )?;
                    let j = lagrangian_momentum(&case.lagrangian, &case.symmetry, &lift.jet)?;
                    for (x, y) in j.as_slice().iter().zip(case.default_mu.as_slice()) {
                        worst = worst.max((x - y).abs());
                    }
                }
                Ok(worst)
            })();
            at_most(label, check, value, tol.jet)
        }
        Check::MagneticZero => {
            let value = (|| {
                let red = case.require_reduction()?;
                let qb = red.chart().project(red.chart().anchor());
                let mut worst = 0.0_f64;
                for a in 0..case.k() {
                    worst = worst.max(
                        red.magnetic_term(&case.default_mu.column(a), &qb)?
                            .max_abs(),
                    );
                }
                Ok(worst)
            })();
            at_most(label, check, value, tol.strict)
        }
        other => row(
            label,
            other,
            Err(AppError::Descriptor(format!(
                "`{other}` is not a system check"
            ))),
            String::new(),
            |_| false,
        ),
    }
}

fn full_rows(
    case: &ExampleCase,
    sol: &AnalyticSolution,
    grid: &Grid,
    tol: &Tolerances,
) -> Vec<ReportRow> {
    let label = sol.label.as_str();
    let field = match sol.sample(grid) {
        Ok(f) => f,
        Err(e) => return failed_all(sol, e),
    };
    let (sys, sym) = (&case.lagrangian, &case.symmetry);
    sol.checks
        .iter()
        .map(|&check| match check {
            Check::SolvesEl => at_most(
                label,
                check,
                sys.el_residual_exact(&field)
                    .map(max_abs)
                    .map_err(Into::into),
                tol.strict,
            ),
            Check::Noether => at_most(
                label,
                check,
                noether_divergence_exact(sys, sym, &field)
                    .map(max_abs)
                    .map_err(Into::into),
                tol.strict,
            ),
            Check::MomentumConstancy => {
                let value = (|| {
                    let mu = match &sol.mu {
                        Some(mu) => mu.clone(),
                        None => {
                            lagrangian_momentum(sys, sym, &field.prolong_linear(grid.low_corner()))?
                        }
                    };
                    Ok(momentum_constancy(sys, sym, &field, &mu)?.max_abs())
                })();
                at_most(label, check, value, tol.strict)
            }
            Check::NonReconstructible => at_least(
                label,
                check,
                momentum_spread(case, &field),
                tol.separation(),
            ),
            other => misplaced(label, other, "full-space"),
        })
        .collect()
}

fn misplaced(label: &str, check: Check, space: &str) -> ReportRow {
    row(
        label,
        check,
        Err(AppError::Descriptor(format!(
            "`{check}` does not apply to {space} solutions"
        ))),
        String::new(),
        |_| false,
    )
}

fn failed_all(sol: &AnalyticSolution, e: AppError) -> Vec<ReportRow> {
    let note = e.to_string();
    sol.checks
        .iter()
        .map(|&check| ReportRow {
            solution: sol.label.clone(),
            check,
            max_residual: f64::NAN,
            expected: String::new(),
            passed: false,
            note: Some(note.clone()),
        })
        .collect()
}

/// Reconstructs a reduced solution with zero anchor values.
pub fn reconstruct(
    case: &ExampleCase,
    sol: &AnalyticSolution,
    field: &FieldSample,
    mu: &MomentumValue,
    tol: f64,
    anchor: Option<&[f64]>,
) -> AppResult<FieldSample> {
    let red = case.require_reduction()?;
    if !case.symmetry.algebra().is_abelian() {
        return Err(AppError::InvalidParameters(format!(
            "`{}`: reconstruction by quadrature needs an abelian symmetry",
            sol.label
        )));
    }
    let c = Constraints::from_reduction(red, mu)?;
    let zeros = vec![0.0; c.group_n()];
    Ok(reconstruct_abelian(
        &c,
        field,
        anchor.unwrap_or(&zeros),
        tol,
    )?)
}

/// Largest gap between reconstructed group coordinates and the closed form,
/// after removing the offset at the anchor node.
pub fn reference_gap(
    case: &ExampleCase,
    sol: &AnalyticSolution,
    phi: &FieldSample,
) -> AppResult<f64> {
    let red = case.require_reduction()?;
    let refs = sol.reference.as_ref().ok_or_else(|| {
        AppError::Descriptor(format!("solution `{}` has no reference", sol.label))
    })?;
    let fibre = red.chart().fibre();
    if refs.len() != fibre.len() {
        return Err(AppError::Descriptor(format!(
            "solution `{}` needs {} reference components",
            sol.label,
            fibre.len()
        )));
    }
    let grid = phi.grid();
    let anchor = grid.low_corner();
    let t0 = grid.point(anchor);
    let mut worst = 0.0_f64;
    for (&i, e) in fibre.iter().zip(refs) {
        let offset = phi.node_values(anchor)[i] - e.eval(&t0);
        for l in 0..grid.len() {
            let gap = phi.node_values(l)[i] - e.eval(&grid.point(l)) - offset;
            worst = worst.max(gap.abs());
        }
    }
    Ok(worst)
}

fn reduced_rows(
    case: &ExampleCase,
    sol: &AnalyticSolution,
    grid: &Grid,
    tol: &Tolerances,
) -> Vec<ReportRow> {
    let label = sol.label.as_str();
    let red = match case.require_reduction() {
        Ok(r) => r,
        Err(e) => return failed_all(sol, e),
    };
    let field = match sol.sample(grid) {
        Ok(f) => f,
        Err(e) => return failed_all(sol, e),
    };
    let mu = sol.mu.clone().unwrap_or_else(|| case.default_mu.clone());
    let rsys: RouthSystem = red.routh_system(mu.clone(), case.name.clone());
    let needs_phi = sol.checks.iter().any(|c| {
        matches!(
            c,
            Check::ReconstructionEl | Check::Reference | Check::MomentumConstancy | Check::Noether
        )
    });
    let phi = if needs_phi {
        Some(reconstruct(case, sol, &field, &mu, tol.strict, None))
    } else {
        None
    };
    let with_phi = |f: &dyn Fn(&FieldSample) -> AppResult<f64>| -> AppResult<f64> {
        match phi.as_ref().expect("reconstructed above") {
            Ok(p) => f(p),
            Err(e) => Err(AppError::InvalidParameters(format!(
                "reconstruction failed: {e}"
            ))),
        }
    };
    let (sys, sym) = (&case.lagrangian, &case.symmetry);
    sol.checks
        .iter()
        .map(|&check| match check {
            Check::SolvesReduced => at_most(
                label,
                check,
                reduced_el_residual_exact(&rsys, &field)
                    .map(max_abs)
                    .map_err(Into::into),
                tol.strict,
            ),
            Check::MagneticZero => at_most(
                label,
                check,
                rsys.max_magnetic(&field).map_err(Into::into),
                tol.strict,
            ),
            Check::Consistent => {
                let value = Constraints::from_reduction(red, &mu)
                    .and_then(|c| consistency_check(&c, &field))
                    .map_err(Into::into);
                at_most(label, check, value, tol.strict)
            }
            Check::Inconsistent => {
                let value = Constraints::from_reduction(red, &mu)
                    .and_then(|c| consistency_check(&c, &field))
                    .map_err(Into::into);
                let bound = tol.separation().max(default_consistency_tolerance(&field));
                at_least(label, check, value, bound)
            }
            Check::ReconstructionEl => at_most(
                label,
                check,
                with_phi(&|p| Ok(sys.el_residual(p)?.max_abs())),
                tol.loose,
            ),
            Check::MomentumConstancy => at_most(
                label,
                check,
                with_phi(&|p| Ok(momentum_constancy(sys, sym, p, &mu)?.max_abs())),
                tol.strict,
            ),
            Check::Noether => at_most(
                label,
                check,
                with_phi(&|p| Ok(noether_divergence(sys, sym, p)?.max_abs())),
                tol.strict,
            ),
            Check::Reference => at_most(
                label,
                check,
                with_phi(&|p| reference_gap(case, sol, p)),
                tol.loose,
            ),
            other => misplaced(label, other, "reduced"),
        })
        .collect()
}

fn solution_rows(
    case: &ExampleCase,
    sol: &AnalyticSolution,
    grid: &Grid,
    tol: &Tolerances,
) -> Vec<ReportRow> {
    match sol.space {
        Space::Full => full_rows(case, sol, grid, tol),
        Space::Reduced => reduced_rows(case, sol, grid, tol),
    }
}

/// Thread cap from `ROUTHK_THREADS`, else the available parallelism.
pub fn thread_budget() -> usize {
    std::env::var("ROUTHK_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every declared check. Solutions are spread over at most `threads`
/// workers; row order follows the descriptor regardless.
pub fn run_certificates(
    case: &ExampleCase,
    grid: &Grid,
    tol: &Tolerances,
    threads: usize,
) -> AppResult<Report> {
    if grid.k() != case.k() {
        return Err(AppError::InvalidParameters(format!(
            "grid has {} axes but `{}` has k = {}",
            grid.k(),
            case.name,
            case.k()
        )));
    }
    let mut rows: Vec<ReportRow> = case
        .system_checks
        .iter()
        .map(|&c| system_row(case, c, tol))
        .collect();
    let threads = threads.max(1).min(case.solutions.len().max(1));
    let mut per_solution: Vec<Vec<ReportRow>> = vec![Vec::new(); case.solutions.len()];
    if threads == 1 {
        for (slot, sol) in per_solution.iter_mut().zip(&case.solutions) {
            *slot = solution_rows(case, sol, grid, tol);
        }
    } else {
        let chunk = case.solutions.len().div_ceil(threads);
        std::thread::scope(|s| {
            for (slots, sols) in per_solution
                .chunks_mut(chunk)
                .zip(case.solutions.chunks(chunk))
            {
                s.spawn(move || {
                    for (slot, sol) in slots.iter_mut().zip(sols) {
                        *slot = solution_rows(case, sol, grid, tol);
                    }
                });
            }
        });
    }
    rows.extend(per_solution.into_iter().flatten());
    Ok(Report { rows })
}
