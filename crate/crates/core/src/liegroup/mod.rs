//! Lie-algebra data, invariant metrics, the mechanical connection and
//! Lie-group Routhians.

pub mod a410;

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::hamiltonian::ConnectionOneForm;
use crate::jets::KJet;
use crate::lagrangian::{KVectorFieldOnJets, LagrangianSystem};
use crate::numerics::{
    coordinate_derivs, max_abs, null_space, point_jacobian, solve_dual, Dual2, Lu, Matrix, FD_STEP,
};
use crate::symmetry::SymmetryModel;
use crate::{Error, PointFn, Result};

/// Tolerance for antisymmetry and Jacobi checks of structure constants.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Pivot tolerance for isotropy null spaces.
pub const ISOTROPY_TOL: f64 = 1e-10;

/// Structure constants `[e_α, e_β] = c^γ_{αβ} e_γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebraModel {
    m: usize,
    c: Vec<f64>,
    labels: Vec<String>,
}

impl LieAlgebraModel {
    /// `c` is indexed `γ·m² + α·m + β`. Antisymmetry and Jacobi are checked.
    pub fn new(m: usize, c: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if c.len() != m * m * m {
            return Err(Error::ShapeMismatch(format!(
                "{} structure constants for m = {m}",
                c.len()
            )));
        }
        if !labels.is_empty() && labels.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for m = {m}",
                labels.len()
            )));
        }
        let alg = Self { m, c, labels };
        let anti = alg.antisymmetry_residual();
        if anti > STRUCTURE_TOL {
            return Err(Error::InvalidModel(format!(
                "structure constants are not antisymmetric (gap {anti:e})"
            )));
        }
        let jac = alg.jacobi_residual();
        if jac > STRUCTURE_TOL {
            return Err(Error::InvalidModel(format!(
                "structure constants violate the Jacobi identity (gap {jac:e})"
            )));
        }
        Ok(alg)
    }

    /// Build from the nonzero brackets `[e_α, e_β] ∋ value·e_γ`, completing by antisymmetry.
    pub fn from_brackets(
        m: usize,
        entries: &[(usize, usize, usize, f64)],
        labels: Vec<String>,
    ) -> Result<Self> {
        let mut c = vec![0.0; m * m * m];
        for &(al, be, ga, val) in entries {
            if al >= m || be >= m || ga >= m {
                return Err(Error::IndexError {
                    index: vec![al, be, ga],
                    counts: vec![m, m, m],
                });
            }
            if al == be && val != 0.0 {
                return Err(Error::InvalidModel(format!(
                    "bracket of basis element {al} with itself must vanish"
                )));
            }
            let (i, j) = (ga * m * m + al * m + be, ga * m * m + be * m + al);
            if (c[i] != 0.0 && c[i] != val) || (c[j] != 0.0 && c[j] != -val) {
                return Err(Error::InvalidModel(format!(
                    "conflicting entries for the bracket of {al} and {be}"
                )));
            }
            c[i] = val;
            c[j] = -val;
        }
        Self::new(m, c, labels)
    }

    pub fn abelian(m: usize) -> Self {
        Self {
            m,
            c: vec![0.0; m * m * m],
            labels: Vec::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn structure(&self, gamma: usize, alpha: usize, beta: usize) -> f64 {
        self.c[gamma * self.m * self.m + alpha * self.m + beta]
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().all(|&x| x == 0.0)
    }

    /// Nonzero entries `(α, β, γ, c^γ_{αβ})` with `α < β`.
    pub fn nonzero_brackets(&self) -> Vec<(usize, usize, usize, f64)> {
        let m = self.m;
        let mut out = Vec::new();
        for al in 0..m {
            for be in al + 1..m {
                for ga in 0..m {
                    let v = self.structure(ga, al, be);
                    if v != 0.0 {
                        out.push((al, be, ga, v));
                    }
                }
            }
        }
        out
    }

    /// `(ad_ξ η)^γ = c^γ_{αβ} ξ^α η^β`.
    pub fn bracket(&self, xi: &[f64], eta: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|g| {
                let mut s = 0.0;
                for a in 0..m {
                    if xi[a] == 0.0 {
                        continue;
                    }
                    for b in 0..m {
                        s += self.structure(g, a, b) * xi[a] * eta[b];
                    }
                }
                s
            })
            .collect()
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        let m = self.m;
        let mut r = 0.0_f64;
        for g in 0..m {
            for a in 0..m {
                for b in 0..m {
                    r = r.max((self.structure(g, a, b) + self.structure(g, b, a)).abs());
                }
            }
        }
        r
    }

    /// Max over basis triples of `|[a,[b,c]] + [b,[c,a]] + [c,[a,b]]|`.
    pub fn jacobi_residual(&self) -> f64 {
        let m = self.m;
        let e = |i: usize| {
            let mut v = vec![0.0; m];
            v[i] = 1.0;
            v
        };
        let mut r = 0.0_f64;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let (ea, eb, ec) = (e(a), e(b), e(c));
                    let t1 = self.bracket(&ea, &self.bracket(&eb, &ec));
                    let t2 = self.bracket(&eb, &self.bracket(&ec, &ea));
                    let t3 = self.bracket(&ec, &self.bracket(&ea, &eb));
                    for g in 0..m {
                        r = r.max((t1[g] + t2[g] + t3[g]).abs());
                    }
                }
            }
        }
        r
    }

    /// `M_{αβ} = ν_γ c^γ_{αβ}`, so that `⟨ν, [ξ, η]⟩ = ξᵀ M η`.
    pub fn coadjoint_matrix(&self, nu: &[f64]) -> Matrix {
        Matrix::from_fn(self.m, self.m, |a, b| {
            (0..self.m).map(|g| nu[g] * self.structure(g, a, b)).sum()
        })
    }

    /// Orthonormal basis of `𝔤_ν = {ξ : ad*_ξ ν = 0}`.
    pub fn isotropy_algebra(&self, nu: &[f64]) -> Vec<Vec<f64>> {
        null_space(&self.coadjoint_matrix(nu), ISOTROPY_TOL)
    }
}

/// Metric function returning `n·n` entries `g_ij` at `i·n + j`.
pub type MetricFn = PointFn;

fn eval_point(f: &PointFn, q: &[f64]) -> Vec<f64> {
    let qd: Vec<Dual2> = q.iter().map(|&x| Dual2::constant(x)).collect();
    f(&qd).iter().map(Dual2::value).collect()
}

/// Killing residual `Λ^j ∂_j g_ki + g_ji ∂_k Λ^j + g_kj ∂_i Λ^j`, `(k, i)` entry.
///
/// Derivatives are central differences with step [`FD_STEP`].
pub fn killing_residual(metric: &MetricFn, generator: &PointFn, q: &[f64]) -> Result<Matrix> {
    let n = q.len();
    let g = eval_point(metric, q);
    let lam = eval_point(generator, q);
    if g.len() != n * n || lam.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "metric with {} entries and generator with {} entries at dimension {n}",
            g.len(),
            lam.len()
        )));
    }
    let mut dg = vec![0.0; n * n * n];
    let mut dlam = vec![0.0; n * n];
    let mut qp = q.to_vec();
    for j in 0..n {
        qp[j] = q[j] + FD_STEP;
        let (gp, lp) = (eval_point(metric, &qp), eval_point(generator, &qp));
        qp[j] = q[j] - FD_STEP;
        let (gm, lm) = (eval_point(metric, &qp), eval_point(generator, &qp));
        qp[j] = q[j];
        for e in 0..n * n {
            dg[j * n * n + e] = (gp[e] - gm[e]) / (2.0 * FD_STEP);
        }
        for e in 0..n {
            dlam[j * n + e] = (lp[e] - lm[e]) / (2.0 * FD_STEP);
        }
    }
    let mut r = Matrix::zeros(n, n);
    for k in 0..n {
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += lam[j] * dg[j * n * n + k * n + i]
                    + g[j * n + i] * dlam[k * n + j]
                    + g[k * n + j] * dlam[i * n + j];
            }
            r[(k, i)] = s;
        }
    }
    if !r.all_finite() {
        return Err(Error::NumericalFailure {
            context: "Killing residual",
            coords: q.to_vec(),
        });
    }
    Ok(r)
}

/// A `G`-invariant metric on `Q` together with the symmetry it is invariant under.
#[derive(Clone)]
pub struct InvariantMetricModel {
    symmetry: SymmetryModel,
    metric: Arc<MetricFn>,
    f: Matrix,
}

impl core::fmt::Debug for InvariantMetricModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("InvariantMetricModel")
            .field("symmetry", &self.symmetry)
            .field("f", &self.f)
            .finish_non_exhaustive()
    }
}

impl InvariantMetricModel {
    /// `f` is the algebra-level metric `𝔽_{αβ} = 𝒢(E_α, E_β)`; it must be symmetric and invertible.
    pub fn new(symmetry: SymmetryModel, metric: Arc<MetricFn>, f: Matrix) -> Result<Self> {
        let m = symmetry.m();
        if f.rows() != m || f.cols() != m {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} algebra metric for m = {m}",
                f.rows(),
                f.cols()
            )));
        }
        if f.symmetry_gap() > 1e-12 {
            return Err(Error::InvalidModel(
                "algebra metric is not symmetric".into(),
            ));
        }
        Lu::factor(&f)?;
        Ok(Self {
            symmetry,
            metric,
            f,
        })
    }

    pub fn symmetry(&self) -> &SymmetryModel {
        &self.symmetry
    }

    pub fn algebra(&self) -> &LieAlgebraModel {
        self.symmetry.algebra()
    }

    pub fn algebra_metric(&self) -> &Matrix {
        &self.f
    }

    pub fn metric_fn(&self) -> &Arc<MetricFn> {
        &self.metric
    }

    pub fn n(&self) -> usize {
        self.symmetry.n()
    }

    pub fn metric_at(&self, q: &[f64]) -> Result<Matrix> {
        let n = self.n();
        if q.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "point of dimension {} for a metric on dimension {n}",
                q.len()
            )));
        }
        let g = eval_point(&*self.metric, q);
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "metric",
                coords: q.to_vec(),
            });
        }
        Matrix::from_vec(n, n, g)
    }

    /// Gram matrix `I_q = Λ g Λᵀ` of the generators.
    pub fn locked_inertia(&self, q: &[f64]) -> Result<Matrix> {
        let lam = self.symmetry.generators_at(q)?;
        let g = self.metric_at(q)?;
        let i = lam.matmul(&g).matmul(&lam.transpose());
        Lu::factor(&i)?;
        Ok(i)
    }

    /// `𝒜(v) = I_q⁻¹ (𝒢(v, E_β))_β`.
    pub fn mechanical_connection(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let lam = self.symmetry.generators_at(q)?;
        let g = self.metric_at(q)?;
        let i = lam.matmul(&g).matmul(&lam.transpose());
        let rhs = lam.matmul(&g).mul_vec(v);
        Ok(Lu::factor(&i)?.solve(&rhs))
    }

    /// The mechanical connection as a one-form, differentiable through dual numbers.
    ///
    /// Where the locked inertia is singular the components are NaN, which
    /// [`ConnectionOneForm::components`] reports as a numerical failure.
    pub fn connection_form(&self) -> ConnectionOneForm {
        let (m, n) = (self.symmetry.m(), self.n());
        let gens = self.symmetry.generator_fn().clone();
        let metric = self.metric.clone();
        ConnectionOneForm::new(m, n, move |q| {
            let lam = gens(q);
            let g = metric(q);
            let zero = Dual2::constant(0.0);
            let mut lg = vec![zero; m * n];
            for b in 0..m {
                for j in 0..n {
                    let mut s = zero;
                    for i in 0..n {
                        if lam[b * n + i].is_constant() && lam[b * n + i].value() == 0.0 {
                            continue;
                        }
                        s += lam[b * n + i] * g[i * n + j];
                    }
                    lg[b * n + j] = s;
                }
            }
            let mut inertia = vec![zero; m * m];
            for a in 0..m {
                for b in 0..m {
                    let mut s = zero;
                    for j in 0..n {
                        s += lg[a * n + j] * lam[b * n + j];
                    }
                    inertia[a * m + b] = s;
                }
            }
            let mut out = vec![Dual2::constant(f64::NAN); m * n];
            for j in 0..n {
                let rhs: Vec<Dual2> = (0..m).map(|b| lg[b * n + j]).collect();
                if let Ok(x) = solve_dual(&inertia, m, &rhs) {
                    for b in 0..m {
                        out[b * n + j] = x[b];
                    }
                }
            }
            out
        })
    }

    /// Killing residual of generator `beta` at `q`.
    pub fn killing_residual(&self, beta: usize, q: &[f64]) -> Result<Matrix> {
        let n = self.n();
        let gens = self.symmetry.generator_fn().clone();
        let single = move |x: &[Dual2]| gens(x)[beta * n..(beta + 1) * n].to_vec();
        killing_residual(&*self.metric, &single, q)
    }

    /// Christoffel symbols `Γ^i_{jk}` at index `i·n² + j·n + k`, exact.
    pub fn christoffel(&self, q: &[f64]) -> Result<Vec<f64>> {
        christoffel(&*self.metric, q)
    }

    /// `L = ½ Σ_a g_ij v^i_a v^j_a`.
    pub fn lagrangian(&self, k: usize, label: impl Into<String>) -> LagrangianSystem {
        metric_lagrangian(self.metric.clone(), self.n(), k, label)
    }

    /// `Γ_a = v^i_a ∂_{q^i} − Γ^i_{jk} v^j_a Σ_b v^k_b ∂_{v^i_b}`.
    pub fn geodesic_field(&self, k: usize) -> KVectorFieldOnJets {
        geodesic_field(self.metric.clone(), self.n(), k)
    }
}

/// Christoffel symbols of a coordinate metric, `Γ^i_{jk}` at `i·n² + j·n + k`.
pub fn christoffel(metric: &MetricFn, q: &[f64]) -> Result<Vec<f64>> {
    let n = q.len();
    let (g, dg) = point_jacobian(metric, q)?;
    let ginv = Lu::factor(&Matrix::from_vec(n, n, g)?)?.inverse();
    // dg[(l·n + k, j)] = ∂_j g_lk
    let d = |l: usize, k: usize, j: usize| dg[(l * n + k, j)];
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[(i, l)] * (d(l, k, j) + d(l, j, k) - d(j, k, l));
                }
                out[i * n * n + j * n + k] = 0.5 * s;
            }
        }
    }
    Ok(out)
}

pub fn metric_lagrangian(
    metric: Arc<MetricFn>,
    n: usize,
    k: usize,
    label: impl Into<String>,
) -> LagrangianSystem {
    LagrangianSystem::new(n, k, label, move |q, v| {
        let g = metric(q);
        let mut s = Dual2::constant(0.0);
        for a in 0..k {
            for i in 0..n {
                for j in 0..n {
                    let gij = g[i * n + j];
                    if gij.is_constant() && gij.value() == 0.0 {
                        continue;
                    }
                    s += gij * v[i + n * a] * v[j + n * a];
                }
            }
        }
        s * 0.5
    })
}

pub fn geodesic_field(metric: Arc<MetricFn>, n: usize, k: usize) -> KVectorFieldOnJets {
    KVectorFieldOnJets::new(n, k, move |jet: &KJet| {
        let gam = christoffel(&*metric, jet.q()).unwrap_or_else(|_| vec![f64::NAN; n * n * n]);
        (0..k)
            .map(|a| {
                let mut out = vec![0.0; n + n * k];
                out[..n].copy_from_slice(jet.column(a));
                for b in 0..k {
                    for i in 0..n {
                        let mut s = 0.0;
                        for j in 0..n {
                            for l in 0..n {
                                s += gam[i * n * n + j * n + l]
                                    * jet.velocity(j, a)
                                    * jet.velocity(l, b);
                            }
                        }
                        out[n + i + n * b] = -s;
                    }
                }
                out
            })
            .collect()
    })
}

/// Lie-group Routhian on a k-coadjoint orbit point `ν`:
/// `ℓ(τ) − Σ_a ⟨ν_a, τ_a⟩` with `Fℓ(τ) = ν` solved by Newton.
///
/// `ell` takes `ξ ∈ 𝔤ᵏ` flat with `ξ_a^β` at `β + m·a`.
pub fn orbit_routhian<F>(alg: &LieAlgebraModel, ell: F, nu: &[Vec<f64>]) -> Result<f64>
where
    F: Fn(&[Dual2]) -> Dual2,
{
    let m = alg.m();
    let k = nu.len();
    if nu.iter().any(|c| c.len() != m) {
        return Err(Error::ShapeMismatch(format!(
            "orbit point columns must have length m = {m}"
        )));
    }
    let target: Vec<f64> = nu.iter().flatten().copied().collect();
    let tol = 1e-12 * max_abs(&target).max(1.0);
    let all: Vec<usize> = (0..m * k).collect();
    let mut x = vec![0.0; m * k];
    let mut d = coordinate_derivs(&ell, &x, &all)?;
    let mut f: Vec<f64> = d.gradient.iter().zip(&target).map(|(g, t)| g - t).collect();
    let mut norm = max_abs(&f);
    let mut iterations = 0;
    while norm > tol {
        if iterations == crate::symmetry::NEWTON_MAX_ITER {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let lu = Lu::factor(&d.hessian).map_err(|_| Error::NewtonDivergence {
            iterations,
            residual: norm,
        })?;
        let delta = lu.solve(&f);
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a - step * b).collect();
            let td = coordinate_derivs(&ell, &trial, &all)?;
            let tf: Vec<f64> = td
                .gradient
                .iter()
                .zip(&target)
                .map(|(g, t)| g - t)
                .collect();
            let tn = max_abs(&tf);
            if tn < norm || tn <= tol {
                x = trial;
                d = td;
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
    Ok(d.value - x.iter().zip(&target).map(|(a, b)| a * b).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abelian_isotropy_is_everything() {
        let alg = LieAlgebraModel::abelian(3);
        assert_eq!(alg.isotropy_algebra(&[1.0, -2.0, 0.5]).len(), 3);
    }

    #[test]
    fn conflicting_brackets_are_rejected() {
        let e = LieAlgebraModel::from_brackets(2, &[(0, 1, 0, 1.0), (1, 0, 0, 1.0)], vec![]);
        assert!(matches!(e, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn jacobi_violation_is_rejected() {
        // [e0,e1]=e2, [e1,e2]=e0, [e0,e2]=e0 breaks Jacobi
        let e = LieAlgebraModel::from_brackets(
            3,
            &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (0, 2, 0, 1.0)],
            vec![],
        );
        assert!(matches!(e, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn so3_bracket() {
        let so3 = LieAlgebraModel::from_brackets(
            3,
            &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)],
            vec![],
        )
        .unwrap();
        assert_eq!(
            so3.bracket(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]),
            vec![0.0, 0.0, 1.0]
        );
        // isotropy of ν = e^3 is the line through e_3
        let iso = so3.isotropy_algebra(&[0.0, 0.0, 1.0]);
        assert_eq!(iso.len(), 1);
        assert!((iso[0][2].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn flat_killing_checks() {
        let flat: Arc<MetricFn> = Arc::new(|_q: &[Dual2]| {
            vec![
                Dual2::constant(1.0),
                Dual2::constant(0.0),
                Dual2::constant(0.0),
                Dual2::constant(1.0),
            ]
        });
        let shift = |_q: &[Dual2]| vec![Dual2::constant(1.0), Dual2::constant(0.0)];
        let r = killing_residual(&*flat, &shift, &[0.3, 0.4]).unwrap();
        assert!(r.max_abs() < 1e-12);
        let dilation = |q: &[Dual2]| vec![q[0], Dual2::constant(0.0)];
        let r = killing_residual(&*flat, &dilation, &[0.3, 0.4]).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn quadratic_orbit_routhian() {
        let alg = LieAlgebraModel::abelian(2);
        let ell = |x: &[Dual2]| x.iter().map(|v| *v * *v).sum::<Dual2>() * 0.5;
        let nu = [vec![1.0, 2.0], vec![-0.5, 0.25]];
        let r = orbit_routhian(&alg, ell, &nu).unwrap();
        let expected = -0.5 * (1.0 + 4.0 + 0.25 + 0.0625);
        assert!((r - expected).abs() < 1e-14);
        let zero = orbit_routhian(&alg, ell, &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(zero, 0.0);
    }
}
