//! Routhians, their restriction to momentum level sets, magnetic terms and the
//! reduced field equations.
//!
//! A [`ReductionChart`] picks which coordinates of `Q` serve as coordinates on
//! `Q/G`. A reduced jet `(q̄, w)` is lifted by placing `q̄` in those slots, taking
//! the horizontal lift of `w`, and adding the vertical part that puts the jet on
//! the level set `J_L = μ`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::hamiltonian::ConnectionOneForm;
use crate::jets::{FieldSample, KJet};
use crate::lagrangian::{LagrangianSystem, ResidualGrid};
use crate::numerics::{coordinate_derivs, Dual2, Lu, Matrix, FD_STEP};
use crate::symmetry::{solve_g_regularity_from, GLift, MomentumValue, SymmetryModel};
use crate::{Error, Result};

/// Splits the coordinates of `Q` into base slots and fibre slots.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionChart {
    n: usize,
    base: Vec<usize>,
    fibre: Vec<usize>,
    anchor: Vec<f64>,
}

impl ReductionChart {
    /// `base` lists the coordinates of `Q` used on `Q/G`; the other coordinates are
    /// held at the values of `anchor` when lifting.
    pub fn new(base: Vec<usize>, anchor: Vec<f64>) -> Result<Self> {
        let n = anchor.len();
        for (s, &b) in base.iter().enumerate() {
            if b >= n || base[..s].contains(&b) {
                return Err(Error::InvalidModel(format!(
                    "base coordinate {b} is out of range or repeated"
                )));
            }
        }
        let fibre = (0..n).filter(|i| !base.contains(i)).collect();
        Ok(Self {
            n,
            base,
            fibre,
            anchor,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> &[usize] {
        &self.base
    }

    pub fn fibre(&self) -> &[usize] {
        &self.fibre
    }

    pub fn base_n(&self) -> usize {
        self.base.len()
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn lift(&self, qb: &[f64]) -> Vec<f64> {
        let mut q = self.anchor.clone();
        for (s, &b) in self.base.iter().enumerate() {
            q[b] = qb[s];
        }
        q
    }

    fn lift_dual(&self, qb: &[Dual2]) -> Vec<Dual2> {
        let mut q: Vec<Dual2> = self.anchor.iter().map(|&x| Dual2::constant(x)).collect();
        for (s, &b) in self.base.iter().enumerate() {
            q[b] = qb[s];
        }
        q
    }

    pub fn project(&self, q: &[f64]) -> Vec<f64> {
        self.base.iter().map(|&b| q[b]).collect()
    }

    /// Base velocity placed in the base slots, zero on the fibre.
    pub fn embed(&self, w: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n];
        for (s, &b) in self.base.iter().enumerate() {
            u[b] = w[s];
        }
        u
    }
}

/// `R(v) = L(v) − Σ_a 𝒜_{μ_a}(v_a)`.
pub fn routhian_full(
    sys: &LagrangianSystem,
    conn: &ConnectionOneForm,
    mu: &MomentumValue,
    jet: &KJet,
) -> Result<f64> {
    let mut r = sys.value(jet)?;
    for a in 0..jet.k() {
        let am = conn.contract(&mu.column(a), jet.q());
        r -= am
            .iter()
            .zip(jet.column(a))
            .map(|(x, y)| x * y)
            .sum::<f64>();
    }
    Ok(r)
}

/// Everything needed to restrict a Routhian to a momentum level set.
#[derive(Clone, Debug)]
pub struct Reduction {
    sys: LagrangianSystem,
    sym: SymmetryModel,
    conn: ConnectionOneForm,
    chart: ReductionChart,
}

impl Reduction {
    pub fn new(
        sys: LagrangianSystem,
        sym: SymmetryModel,
        conn: ConnectionOneForm,
        chart: ReductionChart,
    ) -> Result<Self> {
        let n = sys.n();
        if sym.n() != n || conn.n() != n || chart.n() != n || conn.m() != sym.m() {
            return Err(Error::ShapeMismatch(format!(
                "system n = {n}, symmetry n = {}, connection {}x{}, chart n = {}",
                sym.n(),
                conn.m(),
                conn.n(),
                chart.n()
            )));
        }
        Ok(Self {
            sys,
            sym,
            conn,
            chart,
        })
    }

    pub fn system(&self) -> &LagrangianSystem {
        &self.sys
    }

    pub fn symmetry(&self) -> &SymmetryModel {
        &self.sym
    }

    pub fn connection(&self) -> &ConnectionOneForm {
        &self.conn
    }

    pub fn chart(&self) -> &ReductionChart {
        &self.chart
    }

    pub fn base_n(&self) -> usize {
        self.chart.base_n()
    }

    pub fn k(&self) -> usize {
        self.sys.k()
    }

    fn check_reduced(&self, mu: &MomentumValue, qb: &[f64], w: &[f64]) -> Result<()> {
        let (bn, k) = (self.base_n(), self.k());
        if qb.len() != bn || w.len() != bn * k || mu.m() != self.sym.m() || mu.k() != k {
            return Err(Error::ShapeMismatch(format!(
                "reduced jet ({}, {}) and momentum {}x{} for base_n = {bn}, k = {k}, m = {}",
                qb.len(),
                w.len(),
                mu.m(),
                mu.k(),
                self.sym.m()
            )));
        }
        Ok(())
    }

    /// `hor(u) = u − (𝒜(u))_Q`.
    pub fn horizontal_lift(&self, q: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let a = self.conn.apply(q, u)?;
        let lam = self.sym.generators_at(q)?;
        let mut h = u.to_vec();
        for (b, &ab) in a.iter().enumerate() {
            for i in 0..h.len() {
                h[i] -= ab * lam[(b, i)];
            }
        }
        Ok(h)
    }

    /// Horizontal jet over `q̄` with base velocities `w` (index `i + base_n·a`).
    pub fn horizontal_jet(&self, qb: &[f64], w: &[f64]) -> Result<KJet> {
        let (bn, k) = (self.base_n(), self.k());
        let q = self.chart.lift(qb);
        let mut v = Vec::with_capacity(self.sys.n() * k);
        for a in 0..k {
            let u = self.chart.embed(&w[bn * a..bn * (a + 1)]);
            v.extend(self.horizontal_lift(&q, &u)?);
        }
        KJet::new(q, v, k)
    }

    /// Lift `(q̄, w)` to `J_L⁻¹(μ)`.
    pub fn lift(&self, mu: &MomentumValue, qb: &[f64], w: &[f64]) -> Result<GLift> {
        let start = vec![0.0; self.sym.m() * self.k()];
        self.lift_from(mu, qb, w, &start)
    }

    pub fn lift_from(
        &self,
        mu: &MomentumValue,
        qb: &[f64],
        w: &[f64],
        start: &[f64],
    ) -> Result<GLift> {
        self.check_reduced(mu, qb, w)?;
        let jet = self.horizontal_jet(qb, w)?;
        solve_g_regularity_from(&self.sys, &self.sym, &jet, mu, start)
    }

    pub fn routhian_full(&self, mu: &MomentumValue, jet: &KJet) -> Result<f64> {
        routhian_full(&self.sys, &self.conn, mu, jet)
    }

    /// `ℛ_μ(q̄, w)`: the Routhian at the lift of `(q̄, w)` to the level set.
    pub fn reduced_routhian(&self, mu: &MomentumValue, qb: &[f64], w: &[f64]) -> Result<f64> {
        let lift = self.lift(mu, qb, w)?;
        self.routhian_full(mu, &lift.jet)
    }

    /// Value and gradient of `ℛ_μ` in `(q̄, w)`.
    ///
    /// The vertical coefficients `ξ` are frozen at their level-set values. Since
    /// `∂R/∂v` annihilates vertical vectors on `J_L⁻¹(μ)`, the variation of `ξ`
    /// does not contribute and the frozen gradient is exact.
    pub fn reduced_gradient(
        &self,
        mu: &MomentumValue,
        qb: &[f64],
        w: &[f64],
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let lift = self.lift(mu, qb, w)?;
        let (n, k, m, bn) = (self.sys.n(), self.k(), self.sym.m(), self.base_n());
        let xi = lift.xi;
        let f = |z: &[Dual2]| {
            let q = self.chart.lift_dual(&z[..bn]);
            let lam = self.sym.generators_dual(&q);
            let am = self.conn.components_dual(&q);
            let mut v = Vec::with_capacity(n * k);
            for a in 0..k {
                let mut u = vec![Dual2::constant(0.0); n];
                for (s, &b) in self.chart.base().iter().enumerate() {
                    u[b] = z[bn + s + bn * a];
                }
                let mut va = u.clone();
                for be in 0..m {
                    let mut au = Dual2::constant(0.0);
                    for i in 0..n {
                        au += am[be * n + i] * u[i];
                    }
                    let coef = Dual2::constant(xi[be * k + a]) - au;
                    for i in 0..n {
                        va[i] += coef * lam[be * n + i];
                    }
                }
                v.extend(va);
            }
            let mut r = self.sys.eval_dual(&q, &v);
            for a in 0..k {
                for be in 0..m {
                    let mb = mu.get(be, a);
                    if mb == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        r -= am[be * n + i] * v[i + n * a] * mb;
                    }
                }
            }
            r
        };
        let mut z = qb.to_vec();
        z.extend_from_slice(w);
        let all: Vec<usize> = (0..z.len()).collect();
        let d = coordinate_derivs(f, &z, &all)?;
        let (dq, dw) = d.gradient.split_at(bn);
        Ok((d.value, dq.to_vec(), dw.to_vec()))
    }

    /// Exact `∂²ℛ_μ/∂w∂w` as the Schur complement of the Lagrangian velocity
    /// Hessian against the vertical directions.
    pub fn reduced_velocity_hessian(
        &self,
        mu: &MomentumValue,
        qb: &[f64],
        w: &[f64],
    ) -> Result<Matrix> {
        let lift = self.lift(mu, qb, w)?;
        let (n, k, m, bn) = (self.sys.n(), self.k(), self.sym.m(), self.base_n());
        let h = self.sys.hessian(&lift.jet)?;
        let q = lift.jet.q().to_vec();
        let lam = self.sym.generators_at(&q)?;
        let mut hor = Matrix::zeros(n * k, bn * k);
        for j in 0..bn {
            let mut e = vec![0.0; bn];
            e[j] = 1.0;
            let hj = self.horizontal_lift(&q, &self.chart.embed(&e))?;
            for a in 0..k {
                for i in 0..n {
                    hor[(i + n * a, j + bn * a)] = hj[i];
                }
            }
        }
        let mut vert = Matrix::zeros(n * k, m * k);
        for b in 0..m {
            for a in 0..k {
                for i in 0..n {
                    vert[(i + n * a, b * k + a)] = lam[(b, i)];
                }
            }
        }
        let hh = h.matmul(&hor);
        let top = hor.transpose().matmul(&hh);
        let cross = vert.transpose().matmul(&hh);
        let kmat = vert.transpose().matmul(&h).matmul(&vert);
        let lu = Lu::factor(&kmat).map_err(|_| Error::NewtonDivergence {
            iterations: lift.iterations,
            residual: lift.residual,
        })?;
        let mut corr = Matrix::zeros(bn * k, bn * k);
        for c in 0..bn * k {
            let x = lu.solve(&cross.column(c));
            for r in 0..bn * k {
                corr[(r, c)] = (0..m * k).map(|s| cross[(s, r)] * x[s]).sum();
            }
        }
        Ok(top.sub(&corr))
    }

    /// `B_{μ_a}` on the base: `d𝒜_{μ_a}(hor ∂_i, hor ∂_j)` at the lift of `q̄`.
    pub fn magnetic_term(&self, mu_a: &[f64], qb: &[f64]) -> Result<Matrix> {
        let bn = self.base_n();
        if qb.len() != bn || mu_a.len() != self.sym.m() {
            return Err(Error::ShapeMismatch(format!(
                "base point of dimension {} and covector of length {} for base_n = {bn}, m = {}",
                qb.len(),
                mu_a.len(),
                self.sym.m()
            )));
        }
        let q = self.chart.lift(qb);
        let d = self.conn.d_matrix(mu_a, &q);
        let mut lifts = Vec::with_capacity(bn);
        for j in 0..bn {
            let mut e = vec![0.0; bn];
            e[j] = 1.0;
            lifts.push(self.horizontal_lift(&q, &self.chart.embed(&e))?);
        }
        let b = Matrix::from_fn(bn, bn, |i, j| d.bilinear(&lifts[i], &lifts[j]));
        if !b.all_finite() {
            return Err(Error::NumericalFailure {
                context: "magnetic term",
                coords: q,
            });
        }
        Ok(b)
    }

    pub fn routh_system(&self, mu: MomentumValue, label: impl Into<String>) -> RouthSystem {
        let lifted = LiftedRouthian {
            reduction: self.clone(),
            mu: mu.clone(),
        };
        let red = self.clone();
        let mu2 = mu.clone();
        let magnetic: Arc<MagneticFn> = Arc::new(move |qb: &[f64]| {
            (0..mu2.k())
                .map(|a| red.magnetic_term(&mu2.column(a), qb))
                .collect()
        });
        RouthSystem {
            base_n: self.base_n(),
            k: self.k(),
            mu,
            label: label.into(),
            routhian: Arc::new(lifted),
            magnetic: Some(magnetic),
        }
    }
}

/// A reduced Routhian `ℛ(q̄, w)` with `w` flat at index `i + base_n·a`.
pub trait ReducedRouthian: Send + Sync {
    fn value(&self, qb: &[f64], w: &[f64]) -> Result<f64>;
    /// `(∂ℛ/∂q̄, ∂ℛ/∂w)`.
    fn gradient(&self, qb: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
    fn velocity_hessian(&self, qb: &[f64], w: &[f64]) -> Result<Matrix>;

    /// Derivative of the gradient along `(dq, dw)`. Central differences of
    /// [`gradient`](Self::gradient) unless overridden.
    fn gradient_derivative(
        &self,
        qb: &[f64],
        w: &[f64],
        dq: &[f64],
        dw: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let size = dq.iter().chain(dw).fold(1.0_f64, |m, x| m.max(x.abs()));
        let h = FD_STEP / size;
        let shift = |s: f64| {
            let q: Vec<f64> = qb.iter().zip(dq).map(|(x, d)| x + s * d).collect();
            let v: Vec<f64> = w.iter().zip(dw).map(|(x, d)| x + s * d).collect();
            self.gradient(&q, &v)
        };
        let (pq, pw) = shift(h)?;
        let (mq, mw) = shift(-h)?;
        let diff = |p: Vec<f64>, m: Vec<f64>| -> Vec<f64> {
            p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        };
        Ok((diff(pq, mq), diff(pw, mw)))
    }
}

/// The Routhian of a [`Reduction`] at a fixed momentum.
#[derive(Clone, Debug)]
pub struct LiftedRouthian {
    reduction: Reduction,
    mu: MomentumValue,
}

impl ReducedRouthian for LiftedRouthian {
    fn value(&self, qb: &[f64], w: &[f64]) -> Result<f64> {
        self.reduction.reduced_routhian(&self.mu, qb, w)
    }

    fn gradient(&self, qb: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (_, dq, dw) = self.reduction.reduced_gradient(&self.mu, qb, w)?;
        Ok((dq, dw))
    }

    fn velocity_hessian(&self, qb: &[f64], w: &[f64]) -> Result<Matrix> {
        self.reduction.reduced_velocity_hessian(&self.mu, qb, w)
    }
}

/// A Routhian given directly as a dual-number function of `(q̄, w)`.
#[derive(Clone)]
pub struct ExplicitRouthian {
    base_n: usize,
    f: Arc<crate::JetScalarFn>,
}

impl ExplicitRouthian {
    pub fn new(
        base_n: usize,
        f: impl Fn(&[Dual2], &[Dual2]) -> Dual2 + Send + Sync + 'static,
    ) -> Self {
        Self {
            base_n,
            f: Arc::new(f),
        }
    }

    /// `c + lᵀw + ½ wᵀQw`.
    pub fn quadratic(base_n: usize, expansion: QuadraticExpansion) -> Self {
        Self::new(base_n, move |_q, w| {
            let mut s = Dual2::constant(expansion.constant);
            for (i, &l) in expansion.linear.iter().enumerate() {
                s += w[i] * l;
            }
            let d = expansion.linear.len();
            for i in 0..d {
                for j in 0..d {
                    let qij = expansion.quadratic[(i, j)];
                    if qij != 0.0 {
                        s += w[i] * w[j] * (0.5 * qij);
                    }
                }
            }
            s
        })
    }

    fn derivs(&self, qb: &[f64], w: &[f64]) -> Result<crate::numerics::Derivatives> {
        let bn = self.base_n;
        let mut z = qb.to_vec();
        z.extend_from_slice(w);
        let all: Vec<usize> = (0..z.len()).collect();
        let f = &self.f;
        coordinate_derivs(|z| f(&z[..bn], &z[bn..]), &z, &all)
    }
}

impl ReducedRouthian for ExplicitRouthian {
    fn value(&self, qb: &[f64], w: &[f64]) -> Result<f64> {
        let qd: Vec<Dual2> = qb.iter().map(|&x| Dual2::constant(x)).collect();
        let wd: Vec<Dual2> = w.iter().map(|&x| Dual2::constant(x)).collect();
        Ok((self.f)(&qd, &wd).value())
    }

    fn gradient(&self, qb: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.derivs(qb, w)?;
        let (dq, dw) = d.gradient.split_at(self.base_n);
        Ok((dq.to_vec(), dw.to_vec()))
    }

    fn gradient_derivative(
        &self,
        qb: &[f64],
        w: &[f64],
        dq: &[f64],
        dw: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.derivs(qb, w)?;
        let dir: Vec<f64> = dq.iter().chain(dw).copied().collect();
        let out = d.hessian.mul_vec(&dir);
        let (a, b) = out.split_at(self.base_n);
        Ok((a.to_vec(), b.to_vec()))
    }

    fn velocity_hessian(&self, qb: &[f64], w: &[f64]) -> Result<Matrix> {
        let d = self.derivs(qb, w)?;
        let bn = self.base_n;
        let nw = w.len();
        Ok(Matrix::from_fn(nw, nw, |i, j| d.hessian[(bn + i, bn + j)]))
    }
}

/// `ℛ(q̄, w) ≈ c + lᵀw + ½ wᵀQw` around `w = 0` at a fixed base point.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticExpansion {
    pub constant: f64,
    pub linear: Vec<f64>,
    pub quadratic: Matrix,
}

/// Magnetic terms `B_{μ_a}(q̄)`, one matrix per parameter direction.
pub type MagneticFn = dyn Fn(&[f64]) -> Result<Vec<Matrix>> + Send + Sync;

/// A reduced system: Routhian, magnetic terms and the momentum it was reduced at.
#[derive(Clone)]
pub struct RouthSystem {
    pub base_n: usize,
    pub k: usize,
    pub mu: MomentumValue,
    pub label: String,
    pub routhian: Arc<dyn ReducedRouthian>,
    /// `None` means every magnetic term vanishes.
    pub magnetic: Option<Arc<MagneticFn>>,
}

impl core::fmt::Debug for RouthSystem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("RouthSystem")
            .field("label", &self.label)
            .field("base_n", &self.base_n)
            .field("k", &self.k)
            .field("mu", &self.mu)
            .finish_non_exhaustive()
    }
}

impl RouthSystem {
    pub fn magnetic_at(&self, qb: &[f64]) -> Result<Vec<Matrix>> {
        match &self.magnetic {
            Some(f) => f(qb),
            None => Ok(vec![Matrix::zeros(self.base_n, self.base_n); self.k]),
        }
    }

    pub fn expansion(&self, qb: &[f64]) -> Result<QuadraticExpansion> {
        let w = vec![0.0; self.base_n * self.k];
        let constant = self.routhian.value(qb, &w)?;
        let (_, linear) = self.routhian.gradient(qb, &w)?;
        let quadratic = self.routhian.velocity_hessian(qb, &w)?;
        Ok(QuadraticExpansion {
            constant,
            linear,
            quadratic,
        })
    }

    /// Largest magnetic entry over the nodes of a reduced field.
    pub fn max_magnetic(&self, field: &FieldSample) -> Result<f64> {
        let mut mx = 0.0_f64;
        if self.magnetic.is_none() {
            return Ok(0.0);
        }
        for l in 0..field.grid().len() {
            for b in self.magnetic_at(field.node_values(l))? {
                mx = mx.max(b.max_abs());
            }
        }
        Ok(mx)
    }
}

/// Reduced residual
/// `r_i = Σ_a ∂_a(∂ℛ/∂w^i_a ∘ ψ⁽¹⁾) − ∂ℛ/∂q̄^i ∘ ψ⁽¹⁾ − Σ_a (B_{μ_a})_{ij} ∂_a ψ^j`.
///
/// The magnetic sign follows the mechanical Routh equations; it agrees with the
/// full Euler–Lagrange equations on a cyclic example with a curved connection.
pub fn reduced_el_residual(rsys: &RouthSystem, field: &FieldSample) -> Result<ResidualGrid> {
    let (bn, k) = (rsys.base_n, rsys.k);
    if field.k() != k {
        return Err(Error::GridError(format!(
            "field over {} parameters for a reduced system with k = {k}",
            field.k()
        )));
    }
    if field.n() != bn {
        return Err(Error::ShapeMismatch(format!(
            "field with {} components for base_n = {bn}",
            field.n()
        )));
    }
    let grid = field.grid();
    let nw = bn * k;
    let mut mom = vec![0.0; grid.len() * nw];
    let mut force = vec![0.0; grid.len() * bn];
    let mut jets = Vec::with_capacity(grid.len());
    for l in 0..grid.len() {
        let jet = field.prolong_linear(l);
        let (dq, dw) = rsys.routhian.gradient(jet.q(), jet.v())?;
        mom[l * nw..(l + 1) * nw].copy_from_slice(&dw);
        force[l * bn..(l + 1) * bn].copy_from_slice(&dq);
        jets.push(jet);
    }
    let nodes = grid.interior_nodes();
    let mut values = Vec::with_capacity(nodes.len() * bn);
    for &l in &nodes {
        let jet = &jets[l];
        let mags = rsys.magnetic_at(jet.q())?;
        for i in 0..bn {
            let mut r = -force[l * bn + i];
            for a in 0..k {
                r += grid.derivative(|s| mom[s * nw + i + bn * a], l, a);
                for j in 0..bn {
                    r -= mags[a][(i, j)] * jet.velocity(j, a);
                }
            }
            values.push(r);
        }
    }
    Ok(ResidualGrid::new(grid.clone(), bn, nodes, values))
}

/// [`reduced_el_residual`] with the outer `t`-derivative taken exactly along a
/// field given as a dual function.
pub fn reduced_el_residual_exact(rsys: &RouthSystem, field: &FieldSample) -> Result<ResidualGrid> {
    let (bn, k) = (rsys.base_n, rsys.k);
    if field.k() != k || field.n() != bn {
        return Err(Error::ShapeMismatch(format!(
            "field with (n, k) = ({}, {}) for a reduced system with ({bn}, {k})",
            field.n(),
            field.k()
        )));
    }
    if !field.has_second_jet() {
        return Err(Error::InvalidModel(
            "exact residual needs a field given as a dual function".into(),
        ));
    }
    let grid = field.grid();
    let nodes = grid.interior_nodes();
    let mut values = Vec::with_capacity(nodes.len() * bn);
    for &l in &nodes {
        let sj = field.second_jet(l).expect("checked above");
        let jet = &sj.jet;
        let (force, _) = rsys.routhian.gradient(jet.q(), jet.v())?;
        let mags = rsys.magnetic_at(jet.q())?;
        let mut r: Vec<f64> = force.iter().map(|f| -f).collect();
        for a in 0..k {
            let dq: Vec<f64> = jet.column(a).to_vec();
            let mut dw = vec![0.0; bn * k];
            for b in 0..k {
                for j in 0..bn {
                    dw[j + bn * b] = sj.second(j, a, b);
                }
            }
            let (_, ddw) = rsys
                .routhian
                .gradient_derivative(jet.q(), jet.v(), &dq, &dw)?;
            for i in 0..bn {
                r[i] += ddw[i + bn * a];
                for j in 0..bn {
                    r[i] -= mags[a][(i, j)] * jet.velocity(j, a);
                }
            }
        }
        values.extend(r);
    }
    Ok(ResidualGrid::new(grid.clone(), bn, nodes, values))
}
