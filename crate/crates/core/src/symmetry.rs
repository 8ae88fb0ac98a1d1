//! Symmetry data, the Lagrangian momentum map and the G-regularity lift.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::hamiltonian::cotangent_momentum;
use crate::jets::{FieldSample, KJet};
use crate::lagrangian::{LagrangianSystem, ResidualGrid};
use crate::liegroup::LieAlgebraModel;
use crate::numerics::{max_abs, point_jacobian, Dual2, Grid, Lu, Matrix};
use crate::{Error, PointFn, Result};

/// Tolerance for the generator bracket closure check.
pub const CLOSURE_TOL: f64 = 1e-8;

/// Lie-algebra data plus the infinitesimal generators `ξ_Q = Λ^j ∂/∂q^j`.
///
/// The generator function returns `m·n` entries, `Λ^i_β` at index `β·n + i`.
#[derive(Clone)]
pub struct SymmetryModel {
    algebra: LieAlgebraModel,
    n: usize,
    generators: Arc<PointFn>,
}

impl core::fmt::Debug for SymmetryModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SymmetryModel")
            .field("algebra", &self.algebra)
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl SymmetryModel {
    pub fn new(
        algebra: LieAlgebraModel,
        n: usize,
        generators: impl Fn(&[Dual2]) -> Vec<Dual2> + Send + Sync + 'static,
    ) -> Self {
        Self::from_arc(algebra, n, Arc::new(generators))
    }

    pub fn from_arc(algebra: LieAlgebraModel, n: usize, generators: Arc<PointFn>) -> Self {
        Self {
            algebra,
            n,
            generators,
        }
    }

    /// Translations along the listed coordinates of `ℝⁿ`.
    pub fn translations(n: usize, axes: &[usize]) -> Self {
        let axes = axes.to_vec();
        let m = axes.len();
        Self::new(LieAlgebraModel::abelian(m), n, move |_q| {
            let mut out = vec![Dual2::constant(0.0); m * n];
            for (b, &i) in axes.iter().enumerate() {
                out[b * n + i] = Dual2::constant(1.0);
            }
            out
        })
    }

    pub fn algebra(&self) -> &LieAlgebraModel {
        &self.algebra
    }

    pub fn m(&self) -> usize {
        self.algebra.m()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generator_fn(&self) -> &Arc<PointFn> {
        &self.generators
    }

    pub fn generators_dual(&self, q: &[Dual2]) -> Vec<Dual2> {
        (self.generators)(q)
    }

    /// `m × n` matrix with rows `Λ_β(q)`.
    pub fn generators_at(&self, q: &[f64]) -> Result<Matrix> {
        if q.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "point of dimension {} for generators on dimension {}",
                q.len(),
                self.n
            )));
        }
        let qd: Vec<Dual2> = q.iter().map(|&x| Dual2::constant(x)).collect();
        let vals: Vec<f64> = (self.generators)(&qd).iter().map(Dual2::value).collect();
        if vals.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "generators",
                coords: q.to_vec(),
            });
        }
        Matrix::from_vec(self.m(), self.n, vals)
    }

    /// Largest gap `|[X_α, X_β] + c^γ_{αβ} X_γ|` over the sampled points.
    ///
    /// Left actions give generators that are anti-homomorphic to the algebra bracket.
    pub fn bracket_closure_gap(&self, points: &[Vec<f64>]) -> Result<f64> {
        let (m, n) = (self.m(), self.n);
        let mut gap = 0.0_f64;
        for q in points {
            let (vals, jac) = point_jacobian(|x| (self.generators)(x), q)?;
            if vals.len() != m * n {
                return Err(Error::ShapeMismatch(format!(
                    "generators returned {} entries, expected {}",
                    vals.len(),
                    m * n
                )));
            }
            for al in 0..m {
                for be in 0..m {
                    for j in 0..n {
                        let mut br = 0.0;
                        for i in 0..n {
                            br += vals[al * n + i] * jac[(be * n + j, i)]
                                - vals[be * n + i] * jac[(al * n + j, i)];
                        }
                        let mut rhs = 0.0;
                        for ga in 0..m {
                            rhs -= self.algebra.structure(ga, al, be) * vals[ga * n + j];
                        }
                        gap = gap.max((br - rhs).abs());
                    }
                }
            }
        }
        Ok(gap)
    }

    pub fn validate(&self, points: &[Vec<f64>]) -> Result<()> {
        let gap = self.bracket_closure_gap(points)?;
        if gap > CLOSURE_TOL {
            return Err(Error::InvalidModel(format!(
                "generator brackets do not close on the structure constants (gap {gap:e})"
            )));
        }
        Ok(())
    }
}

/// `μ = (μ₁, …, μ_k) ∈ (𝔤*)ᵏ`, stored as an `m × k` matrix `μ_{β,a}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumValue {
    m: usize,
    k: usize,
    mu: Vec<f64>,
}

impl MomentumValue {
    /// `mu` row-major, `μ_{β,a}` at `β·k + a`.
    pub fn new(m: usize, k: usize, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != m * k {
            return Err(Error::ShapeMismatch(format!(
                "{} momentum entries for m = {m}, k = {k}",
                mu.len()
            )));
        }
        if mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "momentum value",
                coords: mu,
            });
        }
        Ok(Self { m, k, mu })
    }

    pub fn zero(m: usize, k: usize) -> Self {
        Self {
            m,
            k,
            mu: vec![0.0; m * k],
        }
    }

    /// One covector `μ_a ∈ 𝔤*` per parameter direction.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        let m = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != m) {
            return Err(Error::ShapeMismatch("ragged momentum columns".into()));
        }
        let mut mu = vec![0.0; m * k];
        for (a, c) in columns.iter().enumerate() {
            for (b, &x) in c.iter().enumerate() {
                mu[b * k + a] = x;
            }
        }
        Self::new(m, k, mu)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, beta: usize, a: usize) -> f64 {
        self.mu[beta * self.k + a]
    }

    pub fn column(&self, a: usize) -> Vec<f64> {
        (0..self.m).map(|b| self.get(b, a)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mu
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.mu)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            m: self.m,
            k: self.k,
            mu: self.mu.iter().map(|x| x * s).collect(),
        }
    }
}

fn check_shapes(sys: &LagrangianSystem, sym: &SymmetryModel) -> Result<()> {
    if sys.n() != sym.n() {
        return Err(Error::ShapeMismatch(format!(
            "symmetry acts on dimension {} but the system has n = {}",
            sym.n(),
            sys.n()
        )));
    }
    Ok(())
}

/// `J_L = J ∘ FL`: `μ_{β,a} = Σ_i ∂L/∂v^i_a · Λ^i_β(q)`.
pub fn lagrangian_momentum(
    sys: &LagrangianSystem,
    sym: &SymmetryModel,
    jet: &KJet,
) -> Result<MomentumValue> {
    check_shapes(sys, sym)?;
    cotangent_momentum(sym, &sys.legendre(jet)?)
}

/// `J_L ∘ φ⁽¹⁾` at every node, node-major with `m·k` entries per node.
fn momentum_field(
    sys: &LagrangianSystem,
    sym: &SymmetryModel,
    field: &FieldSample,
) -> Result<Vec<f64>> {
    check_shapes(sys, sym)?;
    let grid = field.grid();
    let mut out = Vec::with_capacity(grid.len() * sym.m() * sys.k());
    for l in 0..grid.len() {
        let j = lagrangian_momentum(sys, sym, &field.prolong_linear(l))?;
        out.extend_from_slice(j.as_slice());
    }
    Ok(out)
}

/// [`noether_divergence`] from the exact second jet of an analytic field.
///
/// `∂_a(p^a_i Λ^i_β) = (H_{v^i_a,q^j} φ^j_a + H_{v^i_a,v^j_b} φ^j_{ab}) Λ^i_β + p^a_i ∂_j Λ^i_β φ^j_a`.
pub fn noether_divergence_exact(
    sys: &LagrangianSystem,
    sym: &SymmetryModel,
    field: &FieldSample,
) -> Result<ResidualGrid> {
    check_shapes(sys, sym)?;
    let (n, m, k) = (sys.n(), sym.m(), sys.k());
    if field.n() != n || field.k() != k {
        return Err(Error::ShapeMismatch(format!(
            "field with (n, k) = ({}, {}) for a system with ({n}, {k})",
            field.n(),
            field.k()
        )));
    }
    if !field.has_second_jet() {
        return Err(Error::InvalidModel(
            "exact Noether divergence needs a field given as a dual function".into(),
        ));
    }
    let grid = field.grid();
    let nodes = grid.interior_nodes();
    let mut values = Vec::with_capacity(nodes.len() * m);
    for &l in &nodes {
        let sj = field.second_jet(l).expect("checked above");
        let d = sys.full_derivatives(&sj.jet)?;
        let (lam, dlam) = point_jacobian(|q| sym.generators_dual(q), sj.jet.q())?;
        let h = &d.hessian;
        for b in 0..m {
            let mut s = 0.0;
            for a in 0..k {
                for i in 0..n {
                    let row = n + i + n * a;
                    let mut dp = 0.0;
                    for j in 0..n {
                        dp += h[(row, j)] * sj.jet.velocity(j, a);
                        for c in 0..k {
                            dp += h[(row, n + j + n * c)] * sj.second(j, a, c);
                        }
                    }
                    let p = d.gradient[row];
                    let dxi: f64 = (0..n)
                        .map(|j| dlam[(b * n + i, j)] * sj.jet.velocity(j, a))
                        .sum();
                    s += dp * lam[b * n + i] + p * dxi;
                }
            }
            values.push(s);
        }
    }
    Ok(ResidualGrid::new(grid.clone(), m, nodes, values))
}

/// Noether divergence `D_β = Σ_a ∂_a(J^a_{ξ_β} ∘ φ⁽¹⁾)` at interior nodes.
pub fn noether_divergence(
    sys: &LagrangianSystem,
    sym: &SymmetryModel,
    field: &FieldSample,
) -> Result<ResidualGrid> {
    if field.k() != sys.k() {
        return Err(Error::GridError(format!(
            "field over {} parameters for a system with k = {}",
            field.k(),
            sys.k()
        )));
    }
    let (m, k) = (sym.m(), sys.k());
    let j = momentum_field(sys, sym, field)?;
    let grid = field.grid();
    let nodes = grid.interior_nodes();
    let mut values = Vec::with_capacity(nodes.len() * m);
    for &l in &nodes {
        for b in 0..m {
            values.push(
                (0..k)
                    .map(|a| grid.derivative(|s| j[s * m * k + b * k + a], l, a))
                    .sum(),
            );
        }
    }
    Ok(ResidualGrid::new(grid.clone(), m, nodes, values))
}

/// Signed deviations `J^a_{ξ_β} ∘ φ⁽¹⁾ − μ_{β,a}` at every node.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationField {
    grid: Grid,
    m: usize,
    k: usize,
    values: Vec<f64>,
}

impl DeviationField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn get(&self, node: usize, beta: usize, a: usize) -> f64 {
        self.values[node * self.m * self.k + beta * self.k + a]
    }

    /// Max-norm per component, `β·k + a`.
    pub fn max_per_component(&self) -> MomentumValue {
        let mk = self.m * self.k;
        let mut mx = vec![0.0_f64; mk];
        for chunk in self.values.chunks(mk.max(1)) {
            for (c, x) in chunk.iter().enumerate() {
                mx[c] = mx[c].max(x.abs());
            }
        }
        MomentumValue {
            m: self.m,
            k: self.k,
            mu: mx,
        }
    }
}

pub fn momentum_deviation_field(
    sys: &LagrangianSystem,
    sym: &SymmetryModel,
    field: &FieldSample,
    mu: &MomentumValue,
) -> Result<DeviationField> {
    if field.k() != sys.k() {
        return Err(Error::GridError(format!(
            "field over {} parameters for a system with k = {}",
            field.k(),
            sys.k()
        )));
    }
    if mu.m() != sym.m() || mu.k() != sys.k() {
        return Err(Error::ShapeMismatch(format!(
            "momentum of shape {}x{} for m = {}, k = {}",
            mu.m(),
            mu.k(),
            sym.m(),
            sys.k()
        )));
    }
    let mut values = momentum_field(sys, sym, field)?;
    let mk = mu.as_slice().len();
    for chunk in values.chunks_mut(mk.max(1)) {
        chunk
            .iter_mut()
            .zip(mu.as_slice())
            .for_each(|(x, m)| *x -= m);
    }
    Ok(DeviationField {
        grid: field.grid().clone(),
        m: sym.m(),
        k: sys.k(),
        values,
    })
}

/// Per-component max over nodes of `|J^a_{ξ_β} ∘ φ⁽¹⁾ − μ_{β,a}|`.
pub fn momentum_constancy(
    sys: &LagrangianSystem,
    sym: &SymmetryModel,
    field: &FieldSample,
    mu: &MomentumValue,
) -> Result<MomentumValue> {
    Ok(momentum_deviation_field(sys, sym, field, mu)?.max_per_component())
}

/// Maximum Newton iterations for the G-regularity solve.
pub const NEWTON_MAX_ITER: usize = 50;
/// Newton stopping tolerance, scaled by `max(1, ‖μ‖∞)`.
pub const NEWTON_TOL: f64 = 1e-10;

/// Result of lifting a jet onto a momentum level set along the group directions.
#[derive(Clone, Debug, PartialEq)]
pub struct GLift {
    /// `ξ_{β,a}` at `β·k + a`.
    pub xi: Vec<f64>,
    /// `(q, v + ξ_Q(q))`.
    pub jet: KJet,
    pub iterations: usize,
    pub residual: f64,
}

fn shifted(jet: &KJet, lam: &Matrix, xi: &[f64]) -> Result<KJet> {
    let (n, k) = (jet.n(), jet.k());
    let m = lam.rows();
    let mut v = jet.v().to_vec();
    for a in 0..k {
        for b in 0..m {
            let x = xi[b * k + a];
            if x != 0.0 {
                for i in 0..n {
                    v[i + n * a] += x * lam[(b, i)];
                }
            }
        }
    }
    KJet::new(jet.q().to_vec(), v, k)
}

fn level_residual(
    sys: &LagrangianSystem,
    sym: &SymmetryModel,
    jet: &KJet,
    mu: &MomentumValue,
) -> Result<Vec<f64>> {
    let j = lagrangian_momentum(sys, sym, jet)?;
    Ok(j.as_slice()
        .iter()
        .zip(mu.as_slice())
        .map(|(a, b)| a - b)
        .collect())
}

/// Solve `J_L(q, v + ξ_Q(q)) = μ` for `ξ ∈ 𝔤ᵏ` by damped Newton from `ξ = 0`.
pub fn solve_g_regularity(
    sys: &LagrangianSystem,
    sym: &SymmetryModel,
    jet: &KJet,
    mu: &MomentumValue,
) -> Result<GLift> {
    let start = vec![0.0; sym.m() * sys.k()];
    solve_g_regularity_from(sys, sym, jet, mu, &start)
}

/// [`solve_g_regularity`] from a caller-supplied starting `ξ`.
pub fn solve_g_regularity_from(
    sys: &LagrangianSystem,
    sym: &SymmetryModel,
    jet: &KJet,
    mu: &MomentumValue,
    start: &[f64],
) -> Result<GLift> {
    check_shapes(sys, sym)?;
    let (n, k, m) = (sys.n(), sys.k(), sym.m());
    if mu.m() != m || mu.k() != k || start.len() != m * k {
        return Err(Error::ShapeMismatch(format!(
            "momentum {}x{} and start of length {} for m = {m}, k = {k}",
            mu.m(),
            mu.k(),
            start.len()
        )));
    }
    let lam = sym.generators_at(jet.q())?;
    let tol = NEWTON_TOL * mu.max_abs().max(1.0);
    let mut xi = start.to_vec();
    let mut cur = shifted(jet, &lam, &xi)?;
    let mut f = level_residual(sys, sym, &cur, mu)?;
    let mut norm = max_abs(&f);
    let mut iterations = 0;
    while norm > tol {
        if iterations == NEWTON_MAX_ITER {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let h = sys.hessian(&cur)?;
        let mut kmat = Matrix::zeros(m * k, m * k);
        for b in 0..m {
            for a in 0..k {
                for g in 0..m {
                    for bb in 0..k {
                        let mut s = 0.0;
                        for i in 0..n {
                            let li = lam[(b, i)];
                            if li == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                s += li * h[(i + n * a, j + n * bb)] * lam[(g, j)];
                            }
                        }
                        kmat[(b * k + a, g * k + bb)] = s;
                    }
                }
            }
        }
        let lu = Lu::factor(&kmat).map_err(|_| Error::NewtonDivergence {
            iterations,
            residual: norm,
        })?;
        let delta = lu.solve(&f);
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = xi.iter().zip(&delta).map(|(x, d)| x - step * d).collect();
            let tjet = shifted(jet, &lam, &trial)?;
            let tf = level_residual(sys, sym, &tjet, mu)?;
            let tn = max_abs(&tf);
            if tn < norm || tn <= tol {
                xi = trial;
                cur = tjet;
                f = tf;
                norm = tn;
                break;
            }
            step *= 0.5;
            if step < 1e-6 {
                return Err(Error::NewtonDivergence {
                    iterations,
                    residual: norm,
                });
            }
        }
    }
    Ok(GLift {
        xi,
        jet: cur,
        iterations,
        residual: norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn navier(lam: f64, nu: f64) -> LagrangianSystem {
        LagrangianSystem::new(2, 2, "navier", move |_, v| {
            let (v11, v21, v12, v22) = (v[0], v[1], v[2], v[3]);
            (v11 * v11 + v22 * v22) * (lam / 2.0 + nu)
                + (v12 * v12 + v21 * v21) * (nu / 2.0)
                + v11 * v22 * (lam + nu)
        })
    }

    #[test]
    fn navier_momentum_matches_display() {
        let (l, nu) = (2.0, 1.0);
        let sym = SymmetryModel::translations(2, &[0]);
        let jet = KJet::new(vec![0.0, 0.0], vec![0.3, -0.2, 0.5, 0.7], 2).unwrap();
        let j = lagrangian_momentum(&navier(l, nu), &sym, &jet).unwrap();
        assert!((j.get(0, 0) - ((l + 2.0 * nu) * 0.3 + (l + nu) * 0.7)).abs() < 1e-14);
        assert!((j.get(0, 1) - nu * 0.5).abs() < 1e-14);
    }

    #[test]
    fn g_regularity_reproduces_constraints() {
        let (l, nu) = (2.0, 1.0);
        let sym = SymmetryModel::translations(2, &[0]);
        let mu = MomentumValue::new(1, 2, vec![1.0, 1.0]).unwrap();
        let (w1, w2) = (0.4, -0.9);
        let jet = KJet::new(vec![0.1, 0.2], vec![0.0, w1, 0.0, w2], 2).unwrap();
        let lift = solve_g_regularity(&navier(l, nu), &sym, &jet, &mu).unwrap();
        assert!(lift.iterations <= 1);
        assert!((lift.jet.velocity(0, 0) - (1.0 - (l + nu) * w2) / (l + 2.0 * nu)).abs() < 1e-12);
        assert!((lift.jet.velocity(0, 1) - 1.0 / nu).abs() < 1e-12);
    }

    #[test]
    fn g_regularity_fails_when_lambda_plus_two_nu_vanishes() {
        let sym = SymmetryModel::translations(2, &[0]);
        let mu = MomentumValue::new(1, 2, vec![1.0, 1.0]).unwrap();
        let jet = KJet::zero(2, 2);
        let e = solve_g_regularity(&navier(-2.0, 1.0), &sym, &jet, &mu).unwrap_err();
        assert!(matches!(e, Error::NewtonDivergence { .. }));
    }

    #[test]
    fn translations_close_trivially() {
        let sym = SymmetryModel::translations(3, &[0, 2]);
        assert_eq!(
            sym.bracket_closure_gap(&[vec![0.1, 0.2, 0.3]]).unwrap(),
            0.0
        );
    }

    #[test]
    fn momentum_columns_layout() {
        let mu = MomentumValue::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(mu.get(1, 0), 2.0);
        assert_eq!(mu.get(0, 1), 3.0);
        assert_eq!(mu.column(1), vec![3.0, 4.0]);
    }
}
