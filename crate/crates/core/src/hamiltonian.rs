//! Canonical structures on `(T¹ₖ)*Q`: canonical forms, the cotangent momentum
//! map, connection one-forms and the momentum shift.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::jets::KCojet;
use crate::numerics::{coordinate_derivs, point_jacobian, Dual2, Matrix, FD_STEP};
use crate::symmetry::{MomentumValue, SymmetryModel};
use crate::{Error, JetScalarFn, PointFn, Result};

/// `ω_Q^a = dq^i ∧ dp_i^a` in the basis `(∂_q^i, ∂_p_j^b)`, `p` index `n + j + n·b`.
pub fn canonical_form(n: usize, k: usize, a: usize) -> Matrix {
    assert!(a < k, "form index out of range");
    let dim = n + n * k;
    let mut w = Matrix::zeros(dim, dim);
    for i in 0..n {
        let p = n + i + n * a;
        w[(i, p)] = 1.0;
        w[(p, i)] = -1.0;
    }
    w
}

/// `J^a(ξ_β) = Σ_i p_i^a Λ^i_β(q)`.
pub fn cotangent_momentum(sym: &SymmetryModel, alpha: &KCojet) -> Result<MomentumValue> {
    let (n, k, m) = (alpha.n(), alpha.k(), sym.m());
    let lam = sym.generators_at(alpha.q())?;
    let mut mu = vec![0.0; m * k];
    for b in 0..m {
        for a in 0..k {
            mu[b * k + a] = (0..n).map(|i| alpha.momentum(i, a) * lam[(b, i)]).sum();
        }
    }
    MomentumValue::new(m, k, mu)
}

/// A `𝔤`-valued one-form `𝒜 = A^β_i dq^i ⊗ e_β`.
///
/// The component function returns `m·n` entries, `A^β_i` at index `β·n + i`.
#[derive(Clone)]
pub struct ConnectionOneForm {
    m: usize,
    n: usize,
    a: Arc<PointFn>,
}

impl core::fmt::Debug for ConnectionOneForm {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ConnectionOneForm")
            .field("m", &self.m)
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl ConnectionOneForm {
    pub fn new(
        m: usize,
        n: usize,
        a: impl Fn(&[Dual2]) -> Vec<Dual2> + Send + Sync + 'static,
    ) -> Self {
        Self::from_arc(m, n, Arc::new(a))
    }

    pub fn from_arc(m: usize, n: usize, a: Arc<PointFn>) -> Self {
        Self { m, n, a }
    }

    /// Constant components, `m × n`.
    pub fn constant(components: Matrix) -> Self {
        let (m, n) = (components.rows(), components.cols());
        let data: Vec<Dual2> = components
            .as_slice()
            .iter()
            .map(|&x| Dual2::constant(x))
            .collect();
        Self::new(m, n, move |_| data.clone())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components_dual(&self, q: &[Dual2]) -> Vec<Dual2> {
        (self.a)(q)
    }

    pub fn components(&self, q: &[f64]) -> Result<Matrix> {
        if q.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "point of dimension {} for a connection on dimension {}",
                q.len(),
                self.n
            )));
        }
        let qd: Vec<Dual2> = q.iter().map(|&x| Dual2::constant(x)).collect();
        let vals: Vec<f64> = (self.a)(&qd).iter().map(Dual2::value).collect();
        if vals.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "connection",
                coords: q.to_vec(),
            });
        }
        Matrix::from_vec(self.m, self.n, vals)
    }

    /// `𝒜(v)` at `q`.
    pub fn apply(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.components(q)?.mul_vec(v))
    }

    /// Components of `𝒜_ν = ⟨ν, 𝒜⟩` on dual inputs.
    pub fn contract_dual(&self, nu: &[f64], q: &[Dual2]) -> Vec<Dual2> {
        let a = (self.a)(q);
        (0..self.n)
            .map(|i| {
                (0..self.m)
                    .filter(|&b| nu[b] != 0.0)
                    .map(|b| a[b * self.n + i] * nu[b])
                    .sum()
            })
            .collect()
    }

    pub fn contract(&self, nu: &[f64], q: &[f64]) -> Vec<f64> {
        let qd: Vec<Dual2> = q.iter().map(|&x| Dual2::constant(x)).collect();
        self.contract_dual(nu, &qd)
            .iter()
            .map(Dual2::value)
            .collect()
    }

    /// `d𝒜_ν(u, w) = Σ_{ij} (∂_i A_j − ∂_j A_i) u^i w^j` by central differences.
    pub fn exterior_derivative(&self, nu: &[f64], q: &[f64], u: &[f64], w: &[f64]) -> f64 {
        let d = self.d_matrix(nu, q);
        d.bilinear(u, w)
    }

    /// `(∂_i A_j − ∂_j A_i)` of `𝒜_ν` at `q`, by central differences with step `FD_STEP`.
    pub fn d_matrix(&self, nu: &[f64], q: &[f64]) -> Matrix {
        let n = self.n;
        let mut jac = Matrix::zeros(n, n);
        let mut qp = q.to_vec();
        for i in 0..n {
            qp[i] = q[i] + FD_STEP;
            let plus = self.contract(nu, &qp);
            qp[i] = q[i] - FD_STEP;
            let minus = self.contract(nu, &qp);
            qp[i] = q[i];
            for j in 0..n {
                jac[(i, j)] = (plus[j] - minus[j]) / (2.0 * FD_STEP);
            }
        }
        jac.sub(&jac.transpose())
    }

    /// Largest gap of `𝒜(ξ_Q) = ξ` over the sampled points.
    pub fn reproduction_gap(&self, sym: &SymmetryModel, points: &[Vec<f64>]) -> Result<f64> {
        let mut gap = 0.0_f64;
        for q in points {
            let a = self.components(q)?;
            let lam = sym.generators_at(q)?;
            let prod = a.matmul(&lam.transpose());
            gap = gap.max(prod.sub(&Matrix::identity(self.m)).max_abs());
        }
        Ok(gap)
    }
}

/// `S(α)^a = α^a − 𝒜_{μ_a}(q)`.
pub fn momentum_shift(
    conn: &ConnectionOneForm,
    mu: &MomentumValue,
    alpha: &KCojet,
) -> Result<KCojet> {
    let (n, k) = (alpha.n(), alpha.k());
    if mu.k() != k || mu.m() != conn.m() || conn.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "shift by a {}x{} momentum on a ({n}, {k}) cojet",
            mu.m(),
            mu.k()
        )));
    }
    let mut p = alpha.p().to_vec();
    for a in 0..k {
        let shift = conn.contract(&mu.column(a), alpha.q());
        for i in 0..n {
            p[i + n * a] -= shift[i];
        }
    }
    KCojet::new(alpha.q().to_vec(), p, k)
}

/// `ω^a(x, y)` for tangent vectors in `(q, p)` coordinates.
fn omega(n: usize, a: usize, x: &[f64], y: &[f64]) -> f64 {
    (0..n)
        .map(|i| x[i] * y[n + i + n * a] - y[i] * x[n + i + n * a])
        .sum()
}

/// `(S*ω^a)(u, w) − ω^a(u, w) − d𝒜_{μ_a}(u_q, w_q)` for every `a`.
///
/// The left side pushes `u`, `w` through the shift with exact derivatives of the
/// connection; the right side uses finite differences for `d𝒜`.
pub fn shift_identity_residual(
    conn: &ConnectionOneForm,
    mu: &MomentumValue,
    alpha: &KCojet,
    u: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    let (n, k) = (alpha.n(), alpha.k());
    let dim = n + n * k;
    if u.len() != dim || w.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "tangent vectors of length {} and {} at a cojet of dimension {dim}",
            u.len(),
            w.len()
        )));
    }
    if mu.k() != k || mu.m() != conn.m() || conn.n() != n {
        return Err(Error::ShapeMismatch(
            "momentum and connection shapes".into(),
        ));
    }
    let mut out = Vec::with_capacity(k);
    for a in 0..k {
        let nu = mu.column(a);
        let (_, jac) = point_jacobian(|q| conn.contract_dual(&nu, q), alpha.q())?;
        let push = |x: &[f64]| {
            let mut y = x.to_vec();
            let dq = &x[..n];
            for i in 0..n {
                let s: f64 = (0..n).map(|j| jac[(i, j)] * dq[j]).sum();
                y[n + i + n * a] -= s;
            }
            y
        };
        let lhs = omega(n, a, &push(u), &push(w));
        let rhs = omega(n, a, u, w) + conn.exterior_derivative(&nu, alpha.q(), &u[..n], &w[..n]);
        let r = lhs - rhs;
        if !r.is_finite() {
            return Err(Error::NumericalFailure {
                context: "shift identity",
                coords: alpha.stacked(),
            });
        }
        out.push(r);
    }
    Ok(out)
}

/// A Hamiltonian `H(q, p)` on `(T¹ₖ)*Q`.
#[derive(Clone)]
pub struct HamiltonianSystem {
    n: usize,
    k: usize,
    label: String,
    h: Arc<JetScalarFn>,
}

impl core::fmt::Debug for HamiltonianSystem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("HamiltonianSystem")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("k", &self.k)
            .finish_non_exhaustive()
    }
}

impl HamiltonianSystem {
    pub fn new(
        n: usize,
        k: usize,
        label: impl Into<String>,
        h: impl Fn(&[Dual2], &[Dual2]) -> Dual2 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            k,
            label: label.into(),
            h: Arc::new(h),
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

    /// Exact `dH` in `(q, p)`.
    pub fn differential(&self, alpha: &KCojet) -> Result<Vec<f64>> {
        if alpha.n() != self.n || alpha.k() != self.k {
            return Err(Error::ShapeMismatch(format!(
                "cojet of shape ({}, {}) for a system with (n, k) = ({}, {})",
                alpha.n(),
                alpha.k(),
                self.n,
                self.k
            )));
        }
        let n = self.n;
        let all: Vec<usize> = (0..n + n * self.k).collect();
        let h = &self.h;
        Ok(coordinate_derivs(|z| h(&z[..n], &z[n..]), &alpha.stacked(), &all)?.gradient)
    }

    /// `Σ_a (ω_Q^a)ᵀ X_a − dH`; zero iff `X` solves the k-Hamilton equations at `α`.
    pub fn kham_residual(&self, x: &KVectorFieldOnCojets, alpha: &KCojet) -> Result<Vec<f64>> {
        let mut r = self.differential(alpha)?;
        r.iter_mut().for_each(|v| *v = -*v);
        let xs = x.evaluate(alpha)?;
        let n = self.n;
        for (a, xa) in xs.iter().enumerate() {
            for i in 0..n {
                let p = n + i + n * a;
                r[p] += xa[i];
                r[i] -= xa[p];
            }
        }
        Ok(r)
    }
}

/// k-vector field on `(T¹ₖ)*Q`; component `a` has entries `(dq^i, dp_j^b)`.
#[derive(Clone)]
pub struct KVectorFieldOnCojets {
    n: usize,
    k: usize,
    eval: Arc<dyn Fn(&KCojet) -> Vec<Vec<f64>> + Send + Sync>,
}

impl KVectorFieldOnCojets {
    pub fn new(
        n: usize,
        k: usize,
        eval: impl Fn(&KCojet) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            k,
            eval: Arc::new(eval),
        }
    }

    pub fn evaluate(&self, alpha: &KCojet) -> Result<Vec<Vec<f64>>> {
        let out = (self.eval)(alpha);
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_small_cases() {
        let w = canonical_form(1, 1, 0);
        assert_eq!(w, Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]));
        let w = canonical_form(2, 2, 0);
        let mut nz = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                if w[(i, j)] != 0.0 {
                    nz.push((i, j));
                }
            }
        }
        assert_eq!(nz, vec![(0, 2), (1, 3), (2, 0), (3, 1)]);
    }

    #[test]
    fn free_hamiltonian_flow() {
        let h = HamiltonianSystem::new(1, 2, "free", |_, p| (p[0] * p[0] + p[1] * p[1]) * 0.5);
        let x = KVectorFieldOnCojets::new(1, 2, |al| {
            (0..2).map(|a| vec![al.momentum(0, a), 0.0, 0.0]).collect()
        });
        let al = KCojet::new(vec![0.4], vec![1.0, -2.0], 2).unwrap();
        assert!(h
            .kham_residual(&x, &al)
            .unwrap()
            .iter()
            .all(|r| r.abs() < 1e-15));
    }

    #[test]
    fn shift_round_trip() {
        let conn = ConnectionOneForm::new(1, 2, |q| vec![q[1] * q[1], q[0].sin()]);
        let mu = MomentumValue::new(1, 2, vec![0.7, -1.3]).unwrap();
        let al = KCojet::new(vec![0.3, 0.5], vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        let s = momentum_shift(&conn, &mu, &al).unwrap();
        let back = momentum_shift(&conn, &mu.scaled(-1.0), &s).unwrap();
        for (x, y) in back.p().iter().zip(al.p()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_identity_with_curvature() {
        let conn = ConnectionOneForm::new(1, 2, |q| vec![q[1] * q[1], q[0].sin()]);
        let mu = MomentumValue::new(1, 2, vec![0.7, -1.3]).unwrap();
        let al = KCojet::new(vec![0.3, 0.5], vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        let u = [0.2, -0.4, 1.0, 0.5, -0.3, 0.8];
        let w = [-0.6, 0.1, 0.2, -0.9, 0.4, 0.3];
        let r = shift_identity_residual(&conn, &mu, &al, &u, &w).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-8), "{r:?}");
    }
}
