//! Turning a [`SystemDescriptor`] and parameter values into core objects.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routhk_core::liegroup::MetricFn;
use routhk_core::numerics::{Dual2, Grid, Matrix};
use routhk_core::routh::{Reduction, ReductionChart};
use routhk_core::{
    ConnectionOneForm, FieldSample, InvariantMetricModel, KJet, LagrangianSystem, LieAlgebraModel,
    MomentumValue, SymmetryModel,
};

use crate::certificates::Check;
use crate::descriptor::{
    ConnectionSpec, DimSpec, LagrangianSpec, Rule, Space, SymmetryDescriptorParts, SystemDescriptor,
};
use crate::error::{AppError, AppResult};
use crate::expr::{Expr, Scope};

/// A fully wired system: Lagrangian, symmetry, reduction data and analytic solutions.
#[derive(Clone)]
pub struct ExampleCase {
    pub name: String,
    pub description: String,
    /// Parameter values, derived quantities included.
    pub params: BTreeMap<String, f64>,
    pub lagrangian: LagrangianSystem,
    pub symmetry: SymmetryModel,
    /// 0-based translated coordinates when the symmetry is a translation group.
    pub translations: Option<Vec<usize>>,
    pub metric: Option<Arc<MetricFn>>,
    pub reduction: Option<Reduction>,
    pub default_mu: MomentumValue,
    pub solutions: Vec<AnalyticSolution>,
    pub system_checks: Vec<Check>,
    pub sample_box: Vec<[f64; 2]>,
}

#[derive(Clone, Debug)]
pub struct AnalyticSolution {
    pub label: String,
    pub space: Space,
    pub field: Vec<Expr>,
    pub mu: Option<MomentumValue>,
    pub reference: Option<Vec<Expr>>,
    pub checks: Vec<Check>,
}

impl AnalyticSolution {
    /// Samples the closed form on `grid`, keeping its exact derivatives.
    pub fn sample(&self, grid: &Grid) -> AppResult<FieldSample> {
        let exprs = self.field.clone();
        Ok(FieldSample::from_dual_fn(
            grid.clone(),
            exprs.len(),
            move |t: &[Dual2]| exprs.iter().map(|e| e.eval(t)).collect(),
        )?)
    }
}

impl ExampleCase {
    pub fn n(&self) -> usize {
        self.lagrangian.n()
    }

    pub fn k(&self) -> usize {
        self.lagrangian.k()
    }

    pub fn solution(&self, label: &str) -> AppResult<&AnalyticSolution> {
        self.solutions
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| {
                let known: Vec<&str> = self.solutions.iter().map(|s| s.label.as_str()).collect();
                AppError::InvalidParameters(format!(
                    "example `{}` has no solution `{label}` (known: {})",
                    self.name,
                    known.join(", ")
                ))
            })
    }

    pub fn require_reduction(&self) -> AppResult<&Reduction> {
        self.reduction.as_ref().ok_or_else(|| {
            AppError::InvalidParameters(format!("example `{}` declares no reduction", self.name))
        })
    }

    /// Builds a momentum value of this case's shape from a flat list.
    pub fn momentum(&self, values: &[f64]) -> AppResult<MomentumValue> {
        let (m, k) = (self.symmetry.m(), self.k());
        if values.len() != m * k {
            return Err(AppError::InvalidParameters(format!(
                "momentum needs m·k = {} values, got {}",
                m * k,
                values.len()
            )));
        }
        Ok(MomentumValue::new(m, k, values.to_vec())?)
    }

    /// Seeded random jets inside the sampling box.
    pub fn sample_jets(&self, count: usize, seed: u64) -> Vec<KJet> {
        let (n, k) = (self.n(), self.k());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let q = self
                    .sample_box
                    .iter()
                    .map(|[lo, hi]| rng.random_range(*lo..*hi))
                    .collect();
                let v = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
                KJet::new(q, v, k).expect("shapes agree")
            })
            .collect()
    }
}

fn parse_all(rows: &[String], scope: &Scope) -> AppResult<Vec<Expr>> {
    rows.iter().map(|s| Ok(Expr::parse(s, scope)?)).collect()
}

fn matrix_exprs(
    rows: &[Vec<String>],
    r: usize,
    c: usize,
    what: &str,
    scope: &Scope,
) -> AppResult<Vec<Expr>> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(AppError::Descriptor(format!("{what} must be {r}×{c}")));
    }
    let flat: Vec<String> = rows.iter().flatten().cloned().collect();
    parse_all(&flat, scope)
}

fn eval_constant(text: &str, scope: &Scope) -> AppResult<f64> {
    let e = Expr::parse(text, scope)?;
    e.as_constant()
        .ok_or_else(|| AppError::Descriptor(format!("`{text}` is not a constant")))
}

/// Resolves parameter values: defaults, overrides, integrality, bounds, derived
/// quantities and constraints.
pub fn resolve_parameters(
    desc: &SystemDescriptor,
    overrides: &BTreeMap<String, f64>,
) -> AppResult<BTreeMap<String, f64>> {
    let mut params = BTreeMap::new();
    for p in &desc.parameters {
        params.insert(p.name.clone(), p.default);
    }
    for (name, value) in overrides {
        if !params.contains_key(name) {
            let known: Vec<&str> = desc.parameters.iter().map(|p| p.name.as_str()).collect();
            return Err(AppError::InvalidParameters(format!(
                "`{}` has no parameter `{name}` (known: {})",
                desc.name,
                if known.is_empty() {
                    "none".into()
                } else {
                    known.join(", ")
                }
            )));
        }
        params.insert(name.clone(), *value);
    }
    for p in &desc.parameters {
        let v = params[&p.name];
        if !v.is_finite() {
            return Err(AppError::InvalidParameters(format!(
                "{} must be finite",
                p.name
            )));
        }
        if p.integer && v.fract() != 0.0 {
            return Err(AppError::InvalidParameters(format!(
                "{} must be an integer",
                p.name
            )));
        }
        if let Some(min) = p.min {
            if v < min {
                return Err(AppError::InvalidParameters(format!(
                    "{} must be at least {min}",
                    p.name
                )));
            }
        }
    }
    for c in &desc.constraints {
        let v = eval_constant(&c.expr, &Scope::new().constants(&params))?;
        let ok = match c.rule {
            Rule::Nonzero => v.abs() > 1e-10,
            Rule::Positive => v > 1e-10,
        };
        if !ok {
            let rule = match c.rule {
                Rule::Nonzero => "≠ 0",
                Rule::Positive => "> 0",
            };
            let msg = c
                .message
                .clone()
                .unwrap_or_else(|| format!("{} {rule}", c.expr));
            return Err(AppError::InvalidParameters(format!(
                "{} requires {msg} (value {v})",
                desc.name
            )));
        }
    }
    for d in &desc.derived {
        let v = eval_constant(&d.expr, &Scope::new().constants(&params))?;
        params.insert(d.name.clone(), v);
    }
    Ok(params)
}

fn dimension(spec: &DimSpec, params: &BTreeMap<String, f64>) -> AppResult<usize> {
    match spec {
        DimSpec::Fixed(k) => Ok(*k),
        DimSpec::Parameter(name) => {
            let v = *params.get(name).ok_or_else(|| {
                AppError::Descriptor(format!("k refers to unknown parameter `{name}`"))
            })?;
            if v < 1.0 || v.fract() != 0.0 || v > 16.0 {
                return Err(AppError::InvalidParameters(format!(
                    "{name} must be an integer in 1..=16"
                )));
            }
            Ok(v as usize)
        }
    }
}

fn build_lagrangian(
    spec: &LagrangianSpec,
    name: &str,
    n: usize,
    k: usize,
    scope: &Scope,
) -> AppResult<(LagrangianSystem, Option<Arc<MetricFn>>)> {
    let potential = spec
        .potential
        .as_deref()
        .map(|s| Expr::parse(s, scope))
        .transpose()?;
    let nk = n * k;
    match (&spec.kinetic, &spec.metric) {
        (Some(rows), None) => {
            if spec.parameter_metric.is_some() {
                return Err(AppError::Descriptor(
                    "parameter_metric needs a field metric".into(),
                ));
            }
            let flat = matrix_exprs(rows, nk, nk, "kinetic matrix", scope)?;
            let terms: Vec<(usize, usize, Expr)> = flat
                .into_iter()
                .enumerate()
                .filter(|(_, e)| !e.is_zero())
                .map(|(s, e)| (s / nk, s % nk, e))
                .collect();
            let sys = LagrangianSystem::new(n, k, name, move |q, v| {
                let mut s = Dual2::constant(0.0);
                for (r, c, e) in &terms {
                    s += e.eval(q) * v[*r] * v[*c];
                }
                let mut l = s * 0.5;
                if let Some(p) = &potential {
                    l -= p.eval(q);
                }
                l
            });
            Ok((sys, None))
        }
        (None, Some(rows)) => {
            let g = matrix_exprs(rows, n, n, "field metric", scope)?;
            for i in 0..n {
                for j in 0..i {
                    if g[i * n + j].text().trim() != g[j * n + i].text().trim() {
                        return Err(AppError::Descriptor(format!(
                            "field metric entries ({},{}) and ({},{}) differ",
                            i + 1,
                            j + 1,
                            j + 1,
                            i + 1
                        )));
                    }
                }
            }
            let eta = spec
                .parameter_metric
                .clone()
                .unwrap_or_else(|| vec![1.0; k]);
            if eta.len() != k {
                return Err(AppError::Descriptor(format!(
                    "parameter_metric needs {k} entries"
                )));
            }
            let entries: Vec<(usize, usize, Expr)> = g
                .iter()
                .enumerate()
                .filter(|(_, e)| !e.is_zero())
                .map(|(s, e)| (s / n, s % n, e.clone()))
                .collect();
            let metric: Arc<MetricFn> =
                Arc::new(move |q: &[Dual2]| g.iter().map(|e| e.eval(q)).collect());
            let sys = LagrangianSystem::new(n, k, name, move |q, v| {
                let mut s = Dual2::constant(0.0);
                for (i, j, e) in &entries {
                    let gij = e.eval(q);
                    for (a, eta_a) in eta.iter().enumerate() {
                        s += gij * v[i + n * a] * v[j + n * a] * *eta_a;
                    }
                }
                let mut l = s * 0.5;
                if let Some(p) = &potential {
                    l -= p.eval(q);
                }
                l
            });
            Ok((sys, Some(metric)))
        }
        _ => Err(AppError::Descriptor(
            "the Lagrangian needs exactly one of `kinetic` and `metric`".into(),
        )),
    }
}

fn build_symmetry(
    parts: SymmetryDescriptorParts<'_>,
    n: usize,
    scope: &Scope,
) -> AppResult<(SymmetryModel, Option<Vec<usize>>)> {
    match parts {
        SymmetryDescriptorParts::Translations(axes) => {
            let axes = one_based(axes, n, "translation axis")?;
            Ok((SymmetryModel::translations(n, &axes), Some(axes)))
        }
        SymmetryDescriptorParts::General(alg, rows) => {
            let labels = if alg.labels.is_empty() {
                (1..=alg.m).map(|i| format!("e{i}")).collect()
            } else {
                alg.labels.clone()
            };
            let algebra = LieAlgebraModel::from_brackets(alg.m, &alg.structure, labels)?;
            let gens = matrix_exprs(rows, alg.m, n, "generator matrix", scope)?;
            Ok((
                SymmetryModel::new(algebra, n, move |q| {
                    gens.iter().map(|e| e.eval(q)).collect()
                }),
                None,
            ))
        }
    }
}

fn one_based(list: &[usize], n: usize, what: &str) -> AppResult<Vec<usize>> {
    list.iter()
        .map(|&i| {
            if i == 0 || i > n {
                Err(AppError::Descriptor(format!(
                    "{what} {i} is outside 1..={n}"
                )))
            } else {
                Ok(i - 1)
            }
        })
        .collect()
}

fn momentum_from(
    exprs: &[String],
    m: usize,
    k: usize,
    params: &BTreeMap<String, f64>,
) -> AppResult<MomentumValue> {
    let scope = Scope::new().constants(params);
    let values = exprs
        .iter()
        .map(|s| eval_constant(s, &scope))
        .collect::<AppResult<Vec<f64>>>()?;
    if values.len() != m * k {
        return Err(AppError::Descriptor(format!(
            "momentum needs m·k = {} entries, got {}",
            m * k,
            values.len()
        )));
    }
    Ok(MomentumValue::new(m, k, values)?)
}

/// Expression scope on the parameter space `ℝᵏ`.
pub fn parameter_scope(params: &BTreeMap<String, f64>, k: usize) -> Scope {
    let mut s = Scope::new().constants(params).indexed("t", k);
    for (i, name) in ["x", "y", "z"].iter().enumerate().take(k) {
        s = s.variable(name, i);
    }
    s
}

pub fn build_case(
    desc: &SystemDescriptor,
    overrides: &BTreeMap<String, f64>,
) -> AppResult<ExampleCase> {
    let params = resolve_parameters(desc, overrides)?;
    let n = desc.fields;
    if n == 0 {
        return Err(AppError::Descriptor(
            "a system needs at least one field".into(),
        ));
    }
    let k = dimension(&desc.k, &params)?;
    let qscope = Scope::new().constants(&params).indexed("q", n);
    let (lagrangian, metric) = build_lagrangian(&desc.lagrangian, &desc.name, n, k, &qscope)?;

    let sample_box = match &desc.sample_box {
        Some(b) if b.len() == n && b.iter().all(|[lo, hi]| lo < hi) => b.clone(),
        Some(_) => {
            return Err(AppError::Descriptor(format!(
                "sample_box needs {n} increasing intervals"
            )))
        }
        None => vec![[-1.0, 1.0]; n],
    };

    let (symmetry, translations) = build_symmetry(desc.symmetry.parts()?, n, &qscope)?;
    let m = symmetry.m();
    if translations.is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                sample_box
                    .iter()
                    .map(|[lo, hi]| rng.random_range(*lo..*hi))
                    .collect()
            })
            .collect();
        symmetry.validate(&points)?;
    }

    let reduction = match &desc.reduction {
        None => None,
        Some(spec) => {
            if spec.anchor.len() != n {
                return Err(AppError::Descriptor(format!(
                    "reduction anchor needs {n} entries"
                )));
            }
            let base = one_based(&spec.base, n, "base coordinate")?;
            let chart = ReductionChart::new(base, spec.anchor.clone())?;
            let connection = match &spec.connection {
                ConnectionSpec::Named(name) if name == "mechanical" => {
                    let metric = metric.clone().ok_or_else(|| {
                        AppError::Descriptor(
                            "the mechanical connection needs `lagrangian.metric`".into(),
                        )
                    })?;
                    let g = Matrix::from_vec(
                        n,
                        n,
                        metric(&lift(&spec.anchor))
                            .iter()
                            .map(|d| d.value())
                            .collect(),
                    )?;
                    let lam = symmetry.generators_at(&spec.anchor)?;
                    let f = lam.matmul(&g).matmul(&lam.transpose());
                    InvariantMetricModel::new(symmetry.clone(), metric, f)?.connection_form()
                }
                ConnectionSpec::Named(other) => {
                    return Err(AppError::Descriptor(format!(
                        "unknown connection `{other}`"
                    )))
                }
                ConnectionSpec::Components(rows) => {
                    let comps = matrix_exprs(rows, m, n, "connection", &qscope)?;
                    ConnectionOneForm::new(m, n, move |q| comps.iter().map(|e| e.eval(q)).collect())
                }
            };
            Some(Reduction::new(
                lagrangian.clone(),
                symmetry.clone(),
                connection,
                chart,
            )?)
        }
    };

    let default_mu = match &desc.mu {
        Some(list) => momentum_from(list, m, k, &params)?,
        None => MomentumValue::zero(m, k),
    };

    let mut solutions = Vec::new();
    for s in &desc.solutions {
        if s.requires_k.is_some_and(|need| k < need) {
            continue;
        }
        let mu =
            s.mu.as_ref()
                .map(|list| momentum_from(list, m, k, &params))
                .transpose()?;
        let width = match s.space {
            Space::Full => n,
            Space::Reduced => {
                let red = reduction.as_ref().ok_or_else(|| {
                    AppError::Descriptor(format!(
                        "solution `{}` is reduced but there is no reduction",
                        s.label
                    ))
                })?;
                red.base_n()
            }
        };
        if s.field.len() != width {
            return Err(AppError::Descriptor(format!(
                "solution `{}` needs {width} components, has {}",
                s.label,
                s.field.len()
            )));
        }
        let field = parse_all(&s.field, &parameter_scope(&params, k))?;
        let reference = match &s.reference {
            None => None,
            Some(list) => {
                let mu_vals = mu.as_ref().unwrap_or(&default_mu).as_slice().to_vec();
                let mut scope = parameter_scope(&params, k);
                for (i, v) in mu_vals.iter().enumerate() {
                    scope = scope.constant(&format!("mu{}", i + 1), *v);
                }
                Some(parse_all(list, &scope)?)
            }
        };
        let checks = s
            .checks
            .iter()
            .map(|c| Check::from_str(c))
            .collect::<AppResult<Vec<_>>>()?;
        solutions.push(AnalyticSolution {
            label: s.label.clone(),
            space: s.space,
            field,
            mu,
            reference,
            checks,
        });
    }

    let system_checks = desc
        .system_checks
        .iter()
        .map(|c| Check::from_str(c))
        .collect::<AppResult<Vec<_>>>()?;

    Ok(ExampleCase {
        name: desc.name.clone(),
        description: desc.description.clone(),
        params,
        lagrangian,
        symmetry,
        translations,
        metric,
        reduction,
        default_mu,
        solutions,
        system_checks,
        sample_box,
    })
}

fn lift(x: &[f64]) -> Vec<Dual2> {
    x.iter().map(|&v| Dual2::constant(v)).collect()
}
