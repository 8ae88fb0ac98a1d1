//! First-order Lagrangian field theories on `T¹ₖQ`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::jets::{pairing, FieldSample, KCojet, KJet};
use crate::numerics::{
    central_difference, coordinate_derivs, max_abs, Derivatives, Dual2, Grid, Lu, Matrix,
};
use crate::{Error, JetScalarFn, Result};

/// Per-node residual vectors on the interior of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualGrid {
    grid: Grid,
    components: usize,
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl ResidualGrid {
    pub(crate) fn new(grid: Grid, components: usize, nodes: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(nodes.len() * components, values.len());
        Self {
            grid,
            components,
            nodes,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Linear grid indices of the reported nodes.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.components..(r + 1) * self.components]
    }

    pub fn rows(&self) -> impl Iterator<Item = (Vec<f64>, &[f64])> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .map(|(r, &l)| (self.grid.point(l), self.row(r)))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn max_abs_component(&self, c: usize) -> f64 {
        (0..self.nodes.len()).fold(0.0, |m, r| m.max(self.row(r)[c].abs()))
    }
}

/// Outcome of a sampled rank test of the velocity Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityCertificate {
    pub regular: bool,
    /// Smallest LU pivot magnitude seen over all sampled jets.
    pub min_pivot: f64,
    /// Index of the sampled jet with the smallest pivot.
    pub worst_jet: Option<usize>,
}

/// k-vector field on `T¹ₖQ`; component `a` has entries `(dq^i, dv^j_b)` of length `n + n·k`.
#[derive(Clone)]
pub struct KVectorFieldOnJets {
    n: usize,
    k: usize,
    eval: Arc<dyn Fn(&KJet) -> Vec<Vec<f64>> + Send + Sync>,
}

impl KVectorFieldOnJets {
    pub fn new(
        n: usize,
        k: usize,
        eval: impl Fn(&KJet) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            k,
            eval: Arc::new(eval),
        }
    }

    pub fn evaluate(&self, jet: &KJet) -> Result<Vec<Vec<f64>>> {
        let out = (self.eval)(jet);
        let dim = self.n + self.n * self.k;
        if out.len() != self.k || out.iter().any(|c| c.len() != dim) {
            return Err(Error::ShapeMismatch(format!(
                "k-vector field must return {} components of length {dim}",
                self.k
            )));
        }
        Ok(out)
    }
}

/// A Lagrangian `L(q, v)` on `T¹ₖQ`, written against [`Dual2`].
#[derive(Clone)]
pub struct LagrangianSystem {
    n: usize,
    k: usize,
    label: String,
    l: Arc<JetScalarFn>,
}

impl core::fmt::Debug for LagrangianSystem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("LagrangianSystem")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("k", &self.k)
            .finish_non_exhaustive()
    }
}

impl LagrangianSystem {
    pub fn new(
        n: usize,
        k: usize,
        label: impl Into<String>,
        l: impl Fn(&[Dual2], &[Dual2]) -> Dual2 + Send + Sync + 'static,
    ) -> Self {
        Self::from_arc(n, k, label, Arc::new(l))
    }

    pub fn from_arc(n: usize, k: usize, label: impl Into<String>, l: Arc<JetScalarFn>) -> Self {
        Self {
            n,
            k,
            label: label.into(),
            l,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn function(&self) -> &Arc<JetScalarFn> {
        &self.l
    }

    fn check(&self, jet: &KJet) -> Result<()> {
        if jet.n() != self.n || jet.k() != self.k {
            return Err(Error::ShapeMismatch(format!(
                "jet of shape ({}, {}) for a system with (n, k) = ({}, {})",
                jet.n(),
                jet.k(),
                self.n,
                self.k
            )));
        }
        Ok(())
    }

    /// Evaluate on dual inputs; `v` flat with index `i + n·a`.
    pub fn eval_dual(&self, q: &[Dual2], v: &[Dual2]) -> Dual2 {
        (self.l)(q, v)
    }

    pub fn value(&self, jet: &KJet) -> Result<f64> {
        self.check(jet)?;
        let q: Vec<Dual2> = jet.q().iter().map(|&x| Dual2::constant(x)).collect();
        let v: Vec<Dual2> = jet.v().iter().map(|&x| Dual2::constant(x)).collect();
        let val = (self.l)(&q, &v).value();
        if val.is_finite() {
            Ok(val)
        } else {
            Err(Error::NumericalFailure {
                context: "Lagrangian",
                coords: jet.stacked(),
            })
        }
    }

    /// Derivatives in the stacked coordinates `z = (q, v)` along the listed axes.
    fn z_derivs(&self, jet: &KJet, active: &[usize]) -> Result<Derivatives> {
        self.check(jet)?;
        let n = self.n;
        let l = &self.l;
        coordinate_derivs(|z| l(&z[..n], &z[n..]), &jet.stacked(), active)
    }

    fn velocity_axes(&self) -> Vec<usize> {
        (self.n..self.n + self.n * self.k).collect()
    }

    /// `p_i^a = ∂L/∂v^i_a`.
    pub fn legendre(&self, jet: &KJet) -> Result<KCojet> {
        let d = self.z_derivs(jet, &self.velocity_axes())?;
        KCojet::new(jet.q().to_vec(), d.gradient, self.k)
    }

    /// `E = Σ p·v − L`.
    pub fn energy(&self, jet: &KJet) -> Result<f64> {
        let p = self.legendre(jet)?;
        Ok(pairing(&p, jet)? - self.value(jet)?)
    }

    /// `∂²L/∂v^i_a∂v^j_b`, rows and columns ordered `i + n·a`.
    pub fn hessian(&self, jet: &KJet) -> Result<Matrix> {
        Ok(self.z_derivs(jet, &self.velocity_axes())?.hessian)
    }

    /// Gradient and Hessian over all of `z = (q, v)`.
    pub fn full_derivatives(&self, jet: &KJet) -> Result<Derivatives> {
        let all: Vec<usize> = (0..self.n + self.n * self.k).collect();
        self.z_derivs(jet, &all)
    }

    /// Sampled regularity test: every Hessian must have all LU pivots above `tol`.
    pub fn is_regular(&self, jets: &[KJet], tol: f64) -> RegularityCertificate {
        let mut min_pivot = f64::INFINITY;
        let mut worst_jet = None;
        let mut regular = !jets.is_empty();
        for (s, jet) in jets.iter().enumerate() {
            let pivot = match self.hessian(jet) {
                Ok(h) => Lu::decompose(&h).min_pivot(),
                Err(_) => f64::NAN,
            };
            if !(pivot > tol) {
                regular = false;
            }
            if pivot < min_pivot || pivot.is_nan() {
                min_pivot = pivot;
                worst_jet = Some(s);
            }
        }
        RegularityCertificate {
            regular,
            min_pivot,
            worst_jet,
        }
    }

    /// Largest gap between the exact Legendre map and central differences of `L`,
    /// relative to `max(1, ‖p‖∞)`.
    pub fn legendre_fd_gap(&self, jet: &KJet, h: f64) -> Result<f64> {
        let p = self.legendre(jet)?;
        let z = jet.stacked();
        let n = self.n;
        let f = |z: &[f64]| {
            let zz: Vec<Dual2> = z.iter().map(|&x| Dual2::constant(x)).collect();
            (self.l)(&zz[..n], &zz[n..]).value()
        };
        let scale = max_abs(p.p()).max(1.0);
        let mut gap = 0.0_f64;
        for (c, &pc) in p.p().iter().enumerate() {
            let mut dir = vec![0.0; z.len()];
            dir[n + c] = 1.0;
            gap = gap.max((central_difference(f, &z, &dir, h) - pc).abs() / scale);
        }
        Ok(gap)
    }

    /// Euler–Lagrange residual `Σ_a ∂_a(∂L/∂v^i_a ∘ φ⁽¹⁾) − ∂L/∂q^i ∘ φ⁽¹⁾` at interior nodes.
    ///
    /// Momenta are exact at every node; only the outer `t`-derivative uses the grid stencil.
    pub fn el_residual(&self, field: &FieldSample) -> Result<ResidualGrid> {
        let (n, k) = (self.n, self.k);
        if field.n() != n || field.k() != k {
            return Err(Error::ShapeMismatch(format!(
                "field with (n, k) = ({}, {}) for a system with ({n}, {k})",
                field.n(),
                field.k()
            )));
        }
        let grid = field.grid();
        let nk = n * k;
        let mut momenta = vec![0.0; grid.len() * nk];
        let mut force = vec![0.0; grid.len() * n];
        let all: Vec<usize> = (0..n + nk).collect();
        for l in 0..grid.len() {
            let jet = field.prolong_linear(l);
            let d = self
                .z_derivs(&jet, &all)
                .map_err(|e| relocate(e, grid.point(l)))?;
            momenta[l * nk..(l + 1) * nk].copy_from_slice(&d.gradient[n..]);
            force[l * n..(l + 1) * n].copy_from_slice(&d.gradient[..n]);
        }
        let nodes = grid.interior_nodes();
        let mut values = Vec::with_capacity(nodes.len() * n);
        for &l in &nodes {
            for i in 0..n {
                let mut r = -force[l * n + i];
                for a in 0..k {
                    r += grid.derivative(|m| momenta[m * nk + i + n * a], l, a);
                }
                values.push(r);
            }
        }
        Ok(ResidualGrid::new(grid.clone(), n, nodes, values))
    }

    /// [`el_residual`](Self::el_residual) with the outer `t`-derivative taken exactly
    /// by the chain rule through the full Hessian. Needs a field built from a dual
    /// function; free of discretisation error.
    pub fn el_residual_exact(&self, field: &FieldSample) -> Result<ResidualGrid> {
        let (n, k) = (self.n, self.k);
        if field.n() != n || field.k() != k {
            return Err(Error::ShapeMismatch(format!(
                "field with (n, k) = ({}, {}) for a system with ({n}, {k})",
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
        let mut values = Vec::with_capacity(nodes.len() * n);
        for &l in &nodes {
            let sj = field.second_jet(l).expect("checked above");
            let d = self
                .full_derivatives(&sj.jet)
                .map_err(|e| relocate(e, grid.point(l)))?;
            let h = &d.hessian;
            for i in 0..n {
                let mut r = -d.gradient[i];
                for a in 0..k {
                    let row = n + i + n * a;
                    for j in 0..n {
                        r += h[(row, j)] * sj.jet.velocity(j, a);
                        for b in 0..k {
                            r += h[(row, n + j + n * b)] * sj.second(j, a, b);
                        }
                    }
                }
                values.push(r);
            }
        }
        Ok(ResidualGrid::new(grid.clone(), n, nodes, values))
    }

    /// Matrix `W_xy = ω^a_{Q,L}(e_x, e_y)` in the basis `(∂_q^i, ∂_v^j_b)`.
    ///
    /// `ω^a = dq^i ∧ d(∂L/∂v^i_a)`, so with `H` the full Hessian over `z = (q, v)`:
    /// `W_xy = [x = q^i] H(y, v^i_a) − [y = q^i] H(x, v^i_a)`.
    /// With this orientation `ι_Γ ω^a` is `Wᵀ Γ`, and the free-field SOPDE
    /// `Γ_a = (v_a, 0)` of the Laplace Lagrangian has zero k-EL residual.
    pub fn lag_polysymplectic_form(&self, jet: &KJet, a: usize) -> Result<Matrix> {
        if a >= self.k {
            return Err(Error::IndexError {
                index: vec![a],
                counts: vec![self.k],
            });
        }
        let h = self.full_derivatives(jet)?.hessian;
        Ok(polysymplectic_from_hessian(&h, self.n, a))
    }

    /// Exact `dE_L` in `z = (q, v)`.
    pub fn energy_differential(&self, jet: &KJet) -> Result<Vec<f64>> {
        let d = self.full_derivatives(jet)?;
        Ok(energy_differential_from(&d, jet))
    }

    /// `Σ_a Wₐᵀ Γ_a − dE_L`; zero iff Γ solves the k-symplectic EL equations at `jet`.
    pub fn ksym_residual(&self, gamma: &KVectorFieldOnJets, jet: &KJet) -> Result<Vec<f64>> {
        let d = self.full_derivatives(jet)?;
        let g = gamma.evaluate(jet)?;
        let mut r = energy_differential_from(&d, jet);
        r.iter_mut().for_each(|x| *x = -*x);
        for (a, ga) in g.iter().enumerate() {
            let w = polysymplectic_from_hessian(&d.hessian, self.n, a);
            for (y, ry) in r.iter_mut().enumerate() {
                *ry += (0..ga.len()).map(|x| ga[x] * w[(x, y)]).sum::<f64>();
            }
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "k-symplectic residual",
                coords: jet.stacked(),
            });
        }
        Ok(r)
    }
}

fn relocate(e: Error, t: Vec<f64>) -> Error {
    match e {
        Error::NumericalFailure { context, .. } => Error::NumericalFailure { context, coords: t },
        other => other,
    }
}

fn polysymplectic_from_hessian(h: &Matrix, n: usize, a: usize) -> Matrix {
    let dim = h.rows();
    let mut w = Matrix::zeros(dim, dim);
    for i in 0..n {
        let col = n + i + n * a;
        for y in 0..dim {
            let hv = h[(y, col)];
            w[(i, y)] += hv;
            w[(y, i)] -= hv;
        }
    }
    w
}

fn energy_differential_from(d: &Derivatives, jet: &KJet) -> Vec<f64> {
    let n = jet.n();
    let v = jet.v();
    let dim = d.gradient.len();
    (0..dim)
        .map(|y| {
            let mut s: f64 = v
                .iter()
                .enumerate()
                .map(|(c, vc)| vc * d.hessian[(y, n + c)])
                .sum();
            if y < n {
                s -= d.gradient[y];
            }
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace() -> LagrangianSystem {
        LagrangianSystem::new(1, 2, "laplace", |_, v| (v[0] * v[0] + v[1] * v[1]) * 0.5)
    }

    #[test]
    fn laplace_legendre_and_hessian() {
        let sys = laplace();
        let jet = KJet::new(vec![0.2], vec![3.0, 4.0], 2).unwrap();
        assert_eq!(sys.legendre(&jet).unwrap().p(), &[3.0, 4.0]);
        assert_eq!(sys.hessian(&jet).unwrap(), Matrix::identity(2));
        assert!((sys.energy(&jet).unwrap() - 12.5).abs() < 1e-15);
    }

    #[test]
    fn laplace_form_has_single_entry() {
        let sys = laplace();
        let jet = KJet::new(vec![0.7], vec![-1.0, 2.0], 2).unwrap();
        let w = sys.lag_polysymplectic_form(&jet, 0).unwrap();
        let mut expected = Matrix::zeros(3, 3);
        expected[(0, 1)] = 1.0;
        expected[(1, 0)] = -1.0;
        assert_eq!(w, expected);
    }

    #[test]
    fn laplace_sopde_solves_k_el() {
        let sys = laplace();
        let gamma = KVectorFieldOnJets::new(1, 2, |j| {
            (0..2).map(|a| vec![j.velocity(0, a), 0.0, 0.0]).collect()
        });
        let jet = KJet::new(vec![0.3], vec![1.5, -0.5], 2).unwrap();
        assert!(max_abs(&sys.ksym_residual(&gamma, &jet).unwrap()) < 1e-15);
        let bad = KVectorFieldOnJets::new(1, 2, |j| {
            (0..2)
                .map(|a| vec![j.velocity(0, a) + 1.0, 0.0, 0.0])
                .collect()
        });
        assert!(max_abs(&sys.ksym_residual(&bad, &jet).unwrap()) > 0.5);
    }

    #[test]
    fn regularity_detects_rank_loss() {
        let sing = LagrangianSystem::new(1, 2, "degenerate", |_, v| {
            (v[0] + v[1]) * (v[0] + v[1]) * 0.5
        });
        let jets = [KJet::zero(1, 2)];
        assert!(!sing.is_regular(&jets, 1e-10).regular);
        assert!(laplace().is_regular(&jets, 1e-10).regular);
        assert!(!laplace().is_regular(&[], 1e-10).regular);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let jet = KJet::zero(2, 2);
        assert!(matches!(
            laplace().legendre(&jet),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
