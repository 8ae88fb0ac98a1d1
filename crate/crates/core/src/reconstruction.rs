//! Lifting reduced solutions back to `Q`.
//!
//! For an abelian group acting by translations on fibre coordinates the lifted
//! velocities along the group directions are partial derivatives of the group
//! coordinates, so a reduced solution lifts iff their mixed partials agree. The
//! group coordinates are then recovered by quadrature.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::hamiltonian::ConnectionOneForm;
use crate::jets::{FieldSample, KJet};
use crate::lagrangian::KVectorFieldOnJets;
use crate::numerics::Grid;
use crate::routh::{Reduction, ReductionChart};
use crate::symmetry::MomentumValue;
use crate::{Error, Result};

pub type ConstraintFn = dyn Fn(&[f64], &KJet) -> Result<Vec<f64>> + Send + Sync;

/// Group-direction velocities `w^i_a(t, ψ⁽¹⁾)`, flat at `i + group_n·a`.
#[derive(Clone)]
pub struct Constraints {
    base_n: usize,
    group_n: usize,
    k: usize,
    /// Output component of each reduced coordinate followed by each group coordinate.
    placement: Vec<usize>,
    f: Arc<ConstraintFn>,
}

impl core::fmt::Debug for Constraints {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Constraints")
            .field("base_n", &self.base_n)
            .field("group_n", &self.group_n)
            .field("k", &self.k)
            .field("placement", &self.placement)
            .finish_non_exhaustive()
    }
}

impl Constraints {
    /// Group coordinates are appended after the reduced ones.
    pub fn new(
        base_n: usize,
        group_n: usize,
        k: usize,
        f: impl Fn(&[f64], &KJet) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            base_n,
            group_n,
            k,
            placement: (0..base_n + group_n).collect(),
            f: Arc::new(f),
        }
    }

    /// Place reduced and group coordinates in the slots of `chart`.
    pub fn with_chart(mut self, chart: &ReductionChart) -> Result<Self> {
        if chart.base_n() != self.base_n || chart.fibre().len() != self.group_n {
            return Err(Error::ShapeMismatch(format!(
                "chart with {} base and {} fibre slots for constraints ({}, {})",
                chart.base_n(),
                chart.fibre().len(),
                self.base_n,
                self.group_n
            )));
        }
        self.placement = chart.base().iter().chain(chart.fibre()).copied().collect();
        Ok(self)
    }

    /// Fibre velocities of the lift of the reduced jet to `J_L⁻¹(μ)`.
    pub fn from_reduction(reduction: &Reduction, mu: &MomentumValue) -> Result<Self> {
        let red = reduction.clone();
        let mu = mu.clone();
        let chart = reduction.chart().clone();
        let (bn, gn, k) = (chart.base_n(), chart.fibre().len(), reduction.k());
        let fibre = chart.fibre().to_vec();
        let n = chart.n();
        Self::new(bn, gn, k, move |_t, jet| {
            let lift = red.lift(&mu, jet.q(), jet.v())?;
            let mut w = Vec::with_capacity(gn * k);
            for a in 0..k {
                w.extend(fibre.iter().map(|&i| lift.jet.v()[i + n * a]));
            }
            Ok(w)
        })
        .with_chart(&chart)
    }

    pub fn base_n(&self) -> usize {
        self.base_n
    }

    pub fn group_n(&self) -> usize {
        self.group_n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn evaluate(&self, t: &[f64], jet: &KJet) -> Result<Vec<f64>> {
        let w = (self.f)(t, jet)?;
        if w.len() != self.group_n * self.k {
            return Err(Error::ShapeMismatch(format!(
                "constraints returned {} values, expected {}",
                w.len(),
                self.group_n * self.k
            )));
        }
        Ok(w)
    }

    fn check(&self, field: &FieldSample) -> Result<()> {
        if field.k() != self.k {
            return Err(Error::GridError(format!(
                "field over {} parameters for constraints with k = {}",
                field.k(),
                self.k
            )));
        }
        if field.n() != self.base_n {
            return Err(Error::ShapeMismatch(format!(
                "field with {} components for constraints on a {}-dimensional base",
                field.n(),
                self.base_n
            )));
        }
        Ok(())
    }

    /// `w` at every node, node-major.
    fn sample(&self, field: &FieldSample) -> Result<Vec<f64>> {
        self.check(field)?;
        let grid = field.grid();
        let mut out = Vec::with_capacity(grid.len() * self.group_n * self.k);
        for l in 0..grid.len() {
            out.extend(self.evaluate(&grid.point(l), &field.prolong_linear(l))?);
        }
        Ok(out)
    }
}

/// `max |∂_b w^i_a − ∂_a w^i_b|` over interior nodes, components and axis pairs.
pub fn consistency_check(constraints: &Constraints, field: &FieldSample) -> Result<f64> {
    let w = constraints.sample(field)?;
    let (gn, k) = (constraints.group_n, constraints.k);
    let stride = gn * k;
    let grid = field.grid();
    let mut gap = 0.0_f64;
    for l in grid.interior_nodes() {
        for i in 0..gn {
            for a in 0..k {
                for b in a + 1..k {
                    let dba = grid.derivative(|s| w[s * stride + i + gn * a], l, b);
                    let dab = grid.derivative(|s| w[s * stride + i + gn * b], l, a);
                    gap = gap.max((dba - dab).abs());
                }
            }
        }
    }
    if !gap.is_finite() {
        return Err(Error::NumericalFailure {
            context: "consistency gap",
            coords: Vec::new(),
        });
    }
    Ok(gap)
}

/// Largest second partial of the field over interior nodes, by nested stencils.
pub fn second_derivative_scale(field: &FieldSample) -> f64 {
    let grid = field.grid();
    let (n, k) = (field.n(), field.k());
    let mut first = vec![0.0; grid.len() * n * k];
    for l in 0..grid.len() {
        for c in 0..n {
            for a in 0..k {
                first[(l * n + c) * k + a] = field.fd_partial_linear(c, a, l);
            }
        }
    }
    let mut s = 0.0_f64;
    for l in grid.interior_nodes() {
        for c in 0..n {
            for a in 0..k {
                for b in 0..k {
                    let d = grid.derivative(|x| first[(x * n + c) * k + a], l, b);
                    s = s.max(d.abs());
                }
            }
        }
    }
    s
}

/// `10·h²·max(1, S)` with `S` the field's second-derivative scale.
pub fn default_consistency_tolerance(field: &FieldSample) -> f64 {
    let h = field.grid().max_spacing();
    10.0 * h * h * second_derivative_scale(field).max(1.0)
}

/// Where quadrature starts and in which order the axes are swept.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Linear index of the anchor node; the grid's low corner if `None`.
    pub anchor_node: Option<usize>,
    /// Permutation of `0..k`; ascending if `None`.
    pub axis_order: Option<Vec<usize>>,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            anchor_node: None,
            axis_order: None,
        }
    }
}

/// Integrate the constraints from the anchor and merge the group coordinates
/// with the reduced field. Refuses when the consistency gap exceeds `tol`.
pub fn reconstruct_abelian(
    constraints: &Constraints,
    field: &FieldSample,
    anchor_value: &[f64],
    tol: f64,
) -> Result<FieldSample> {
    reconstruct_abelian_with(
        constraints,
        field,
        anchor_value,
        tol,
        &QuadratureOptions::default(),
    )
}

pub fn reconstruct_abelian_with(
    constraints: &Constraints,
    field: &FieldSample,
    anchor_value: &[f64],
    tol: f64,
    options: &QuadratureOptions,
) -> Result<FieldSample> {
    let gn = constraints.group_n;
    if anchor_value.len() != gn {
        return Err(Error::ShapeMismatch(format!(
            "anchor of length {} for {gn} group coordinates",
            anchor_value.len()
        )));
    }
    let gap = consistency_check(constraints, field)?;
    if gap > tol {
        return Err(Error::InconsistentConstraints {
            gap,
            tolerance: tol,
        });
    }
    let w = constraints.sample(field)?;
    let grid = field.grid();
    let g = integrate(grid, &w, gn, anchor_value, options)?;
    let bn = constraints.base_n;
    let total = bn + gn;
    let mut values = vec![0.0; grid.len() * total];
    for l in 0..grid.len() {
        let row = &mut values[l * total..(l + 1) * total];
        for (s, &x) in field.node_values(l).iter().enumerate() {
            row[constraints.placement[s]] = x;
        }
        for i in 0..gn {
            row[constraints.placement[bn + i]] = g[l * gn + i];
        }
    }
    FieldSample::from_values(grid.clone(), total, values)
}

/// Trapezoid sweeps: first axis along the anchor line, each later axis from every
/// node already reached.
fn integrate(
    grid: &Grid,
    w: &[f64],
    gn: usize,
    anchor_value: &[f64],
    options: &QuadratureOptions,
) -> Result<Vec<f64>> {
    let k = grid.k();
    let order: Vec<usize> = options
        .axis_order
        .clone()
        .unwrap_or_else(|| (0..k).collect());
    let mut sorted = order.clone();
    sorted.sort_unstable();
    if sorted != (0..k).collect::<Vec<_>>() {
        return Err(Error::GridError(format!(
            "axis order {order:?} is not a permutation"
        )));
    }
    let anchor = options.anchor_node.unwrap_or_else(|| grid.low_corner());
    if anchor >= grid.len() {
        return Err(Error::IndexError {
            index: grid.multi(0),
            counts: grid.counts().to_vec(),
        });
    }
    let am = grid.multi(anchor);
    let stride = gn * k;
    let mut g = vec![f64::NAN; grid.len() * gn];
    g[anchor * gn..(anchor + 1) * gn].copy_from_slice(anchor_value);
    for (s, &ax) in order.iter().enumerate() {
        let h = grid.spacing(ax);
        let st = grid.stride(ax);
        let cnt = grid.counts()[ax];
        for l in 0..grid.len() {
            let mi = grid.multi(l);
            let on_start = mi[ax] == am[ax] && order[s + 1..].iter().all(|&b| mi[b] == am[b]);
            if !on_start {
                continue;
            }
            for i in 0..gn {
                let wa = |x: usize| w[x * stride + i + gn * ax];
                let mut cur = l;
                for _ in am[ax] + 1..cnt {
                    let next = cur + st;
                    g[next * gn + i] = g[cur * gn + i] + 0.5 * h * (wa(cur) + wa(next));
                    cur = next;
                }
                cur = l;
                for _ in 0..am[ax] {
                    let prev = cur - st;
                    g[prev * gn + i] = g[cur * gn + i] - 0.5 * h * (wa(cur) + wa(prev));
                    cur = prev;
                }
            }
        }
    }
    Ok(g)
}

/// Algebra-valued data on a grid, `(β, a)` at `β·k + a` within each node.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraField {
    grid: Grid,
    m: usize,
    k: usize,
    values: Vec<f64>,
}

impl AlgebraField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, node: usize, beta: usize, a: usize) -> f64 {
        self.values[node * self.m * self.k + beta * self.k + a]
    }

    pub fn node(&self, node: usize) -> &[f64] {
        let s = self.m * self.k;
        &self.values[node * s..(node + 1) * s]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// `𝒜(X_a)` along the first jet prolongation of `lifted_field`, for every `a`.
pub fn reconstruction_rhs(
    conn: &ConnectionOneForm,
    x: &KVectorFieldOnJets,
    lifted_field: &FieldSample,
) -> Result<AlgebraField> {
    let (m, n, k) = (conn.m(), conn.n(), lifted_field.k());
    if lifted_field.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "field with {} components for a connection on {n} coordinates",
            lifted_field.n()
        )));
    }
    let grid = lifted_field.grid();
    let mut values = vec![0.0; grid.len() * m * k];
    for l in 0..grid.len() {
        let jet = lifted_field.prolong_linear(l);
        let cols = x.evaluate(&jet)?;
        if cols.len() != k {
            return Err(Error::ShapeMismatch(format!(
                "{}-vector field along a field over {k} parameters",
                cols.len()
            )));
        }
        for (a, col) in cols.iter().enumerate() {
            let xi = conn.apply(jet.q(), &col[..n])?;
            for (b, v) in xi.into_iter().enumerate() {
                values[l * m * k + b * k + a] = v;
            }
        }
    }
    Ok(AlgebraField {
        grid: grid.clone(),
        m,
        k,
        values,
    })
}
