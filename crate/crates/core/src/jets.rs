//! Points of `T¹ₖQ` and `(T¹ₖ)*Q`, sampled fields and their first prolongation.
//!
//! Velocity and momentum blocks are stored flat with index `i + n·a`
//! (configuration index fastest).

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::{Dual2, Grid, MAX_DIRECTIONS};
use crate::{Error, Result};

/// Base-point tolerance for pairing cojets with jets.
pub const BASE_POINT_TOL: f64 = 1e-12;

fn check_block(n: usize, k: usize, q: &[f64], block: &[f64], what: &str) -> Result<()> {
    if q.len() != n || block.len() != n * k {
        return Err(Error::ShapeMismatch(format!(
            "{what} with {} coordinates and {} block entries for (n, k) = ({n}, {k})",
            q.len(),
            block.len()
        )));
    }
    if q.iter().chain(block).any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure {
            context: "jet entries",
            coords: q.to_vec(),
        });
    }
    Ok(())
}

/// A point `(q^i, v^i_a)` of the k-velocity bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct KJet {
    k: usize,
    q: Vec<f64>,
    v: Vec<f64>,
}

impl KJet {
    /// `v` is flat with index `i + n·a`.
    pub fn new(q: Vec<f64>, v: Vec<f64>, k: usize) -> Result<Self> {
        check_block(q.len(), k, &q, &v, "jet")?;
        Ok(Self { k, q, v })
    }

    pub fn from_columns(q: Vec<f64>, columns: &[Vec<f64>]) -> Result<Self> {
        let v: Vec<f64> = columns.iter().flatten().copied().collect();
        Self::new(q, v, columns.len())
    }

    pub fn zero(n: usize, k: usize) -> Self {
        Self {
            k,
            q: vec![0.0; n],
            v: vec![0.0; n * k],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.q.len()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    #[inline]
    pub fn velocity(&self, i: usize, a: usize) -> f64 {
        self.v[i + self.n() * a]
    }

    pub fn column(&self, a: usize) -> &[f64] {
        let n = self.n();
        &self.v[n * a..n * (a + 1)]
    }

    /// `(q, v)` stacked into one vector of length `n + n·k`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut z = self.q.clone();
        z.extend_from_slice(&self.v);
        z
    }
}

/// A point `(q^i, p_i^a)` of the k-covelocity bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct KCojet {
    k: usize,
    q: Vec<f64>,
    p: Vec<f64>,
}

impl KCojet {
    /// `p` is flat with index `i + n·a`.
    pub fn new(q: Vec<f64>, p: Vec<f64>, k: usize) -> Result<Self> {
        check_block(q.len(), k, &q, &p, "cojet")?;
        Ok(Self { k, q, p })
    }

    pub fn zero(n: usize, k: usize) -> Self {
        Self {
            k,
            q: vec![0.0; n],
            p: vec![0.0; n * k],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.q.len()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    #[inline]
    pub fn momentum(&self, i: usize, a: usize) -> f64 {
        self.p[i + self.n() * a]
    }

    pub fn column(&self, a: usize) -> &[f64] {
        let n = self.n();
        &self.p[n * a..n * (a + 1)]
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut z = self.q.clone();
        z.extend_from_slice(&self.p);
        z
    }
}

/// `Σ_a Σ_i p_i^a v^i_a`.
pub fn pairing(alpha: &KCojet, v: &KJet) -> Result<f64> {
    if alpha.n() != v.n() || alpha.k() != v.k() {
        return Err(Error::ShapeMismatch(format!(
            "pairing a ({}, {}) cojet with a ({}, {}) jet",
            alpha.n(),
            alpha.k(),
            v.n(),
            v.k()
        )));
    }
    let gap = alpha
        .q
        .iter()
        .zip(&v.q)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if gap > BASE_POINT_TOL {
        return Err(Error::BasePointMismatch { gap });
    }
    Ok(alpha.p.iter().zip(&v.v).map(|(p, x)| p * x).sum())
}

/// Analytic evaluator `t ↦ (φ(t), ∂φ/∂t^a)`.
pub type ExactJetFn = dyn Fn(&[f64]) -> KJet + Send + Sync;

/// A field written against [`Dual2`], so derivatives in `t` of any order up to two are exact.
pub type DualFieldFn = dyn Fn(&[Dual2]) -> Vec<Dual2> + Send + Sync;

/// `φ⁽¹⁾(t)` together with `∂_a∂_bφ^i(t)` stored at `i + n·(a + k·b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondJet {
    pub jet: KJet,
    pub second: Vec<f64>,
}

impl SecondJet {
    pub fn second(&self, i: usize, a: usize, b: usize) -> f64 {
        let (n, k) = (self.jet.n(), self.jet.k());
        self.second[i + n * (a + k * b)]
    }
}

/// A field `φ: ℝᵏ → ℝⁿ` sampled on a grid.
///
/// Values are stored node-major: component `i` at node `l` is `values[l·n + i]`.
#[derive(Clone)]
pub struct FieldSample {
    grid: Grid,
    n: usize,
    values: Vec<f64>,
    exact: Option<Arc<ExactJetFn>>,
    dual: Option<Arc<DualFieldFn>>,
}

impl core::fmt::Debug for FieldSample {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FieldSample")
            .field("grid", &self.grid)
            .field("n", &self.n)
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl FieldSample {
    pub fn from_values(grid: Grid, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * n {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} nodes with {n} components",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "field sample",
                coords: grid.point(bad / n.max(1)),
            });
        }
        Ok(Self {
            grid,
            n,
            values,
            exact: None,
            dual: None,
        })
    }

    /// Sample `f` at every node; no exact derivatives are attached.
    pub fn from_fn(grid: Grid, n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * n);
        for l in 0..grid.len() {
            let v = f(&grid.point(l));
            if v.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "field returned {} components, expected {n}",
                    v.len()
                )));
            }
            values.extend(v);
        }
        Self::from_values(grid, n, values)
    }

    /// Sample an analytic field and keep its exact jet for prolongation.
    pub fn analytic(grid: Grid, n: usize, exact: Arc<ExactJetFn>) -> Result<Self> {
        let k = grid.k();
        let mut values = Vec::with_capacity(grid.len() * n);
        for l in 0..grid.len() {
            let jet = exact(&grid.point(l));
            if jet.n() != n || jet.k() != k {
                return Err(Error::ShapeMismatch(format!(
                    "exact jet of shape ({}, {}) for a field with (n, k) = ({n}, {k})",
                    jet.n(),
                    jet.k()
                )));
            }
            values.extend_from_slice(jet.q());
        }
        let mut s = Self::from_values(grid, n, values)?;
        s.exact = Some(exact);
        Ok(s)
    }

    /// Analytic field given as a dual-number function of `t`; its jet is exact.
    pub fn from_dual_fn<F>(grid: Grid, n: usize, f: F) -> Result<Self>
    where
        F: Fn(&[Dual2]) -> Vec<Dual2> + Send + Sync + 'static,
    {
        if grid.k() > MAX_DIRECTIONS {
            return Err(Error::ShapeMismatch(format!(
                "{} parameter directions exceed the dual capacity {MAX_DIRECTIONS}",
                grid.k()
            )));
        }
        let f: Arc<DualFieldFn> = Arc::new(f);
        let g = f.clone();
        let exact = move |t: &[f64]| jet_of_dual_fn(&*g, t, n);
        let mut s = Self::analytic(grid, n, Arc::new(exact))?;
        s.dual = Some(f);
        Ok(s)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.grid.k()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_values(&self, linear: usize) -> &[f64] {
        &self.values[linear * self.n..(linear + 1) * self.n]
    }

    pub fn has_exact_jet(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact_jet(&self) -> Option<&Arc<ExactJetFn>> {
        self.exact.as_ref()
    }

    /// The same samples with the exact evaluator dropped, forcing stencil jets.
    pub fn without_exact(&self) -> Self {
        Self {
            exact: None,
            dual: None,
            ..self.clone()
        }
    }

    pub fn has_second_jet(&self) -> bool {
        self.dual.is_some()
    }

    /// Exact first and second `t`-derivatives at a node, if the field was given
    /// as a dual-number function.
    pub fn second_jet(&self, l: usize) -> Option<SecondJet> {
        let f = self.dual.as_ref()?;
        let t = self.grid.point(l);
        let (n, k) = (self.n, t.len());
        let td: Vec<Dual2> = t
            .iter()
            .enumerate()
            .map(|(a, &x)| Dual2::variable(x, a, k))
            .collect();
        let out = f(&td);
        let q = out.iter().map(Dual2::value).collect();
        let mut v = vec![0.0; n * k];
        let mut second = vec![0.0; n * k * k];
        for (i, c) in out.iter().enumerate() {
            for a in 0..k {
                v[i + n * a] = c.first(a);
                for b in 0..k {
                    second[i + n * (a + k * b)] = c.second(a, b);
                }
            }
        }
        Some(SecondJet {
            jet: KJet { k, q, v },
            second,
        })
    }

    /// Stencil derivative of component `i` along `axis` at a node.
    pub fn fd_partial(&self, component: usize, axis: usize, node: &[usize]) -> Result<f64> {
        let l = self.grid.linear(node)?;
        if component >= self.n || axis >= self.k() {
            return Err(Error::IndexError {
                index: vec![component, axis],
                counts: vec![self.n, self.k()],
            });
        }
        Ok(self.fd_partial_linear(component, axis, l))
    }

    pub(crate) fn fd_partial_linear(&self, component: usize, axis: usize, l: usize) -> f64 {
        let n = self.n;
        self.grid
            .derivative(|m| self.values[m * n + component], l, axis)
    }

    /// `φ⁽¹⁾(t)` at a node.
    pub fn prolong(&self, node: &[usize]) -> Result<KJet> {
        let l = self.grid.linear(node)?;
        Ok(self.prolong_linear(l))
    }

    /// `φ⁽¹⁾` at a node given by its linear index.
    ///
    /// # Panics
    /// If `l` is out of range.
    pub fn prolong_linear(&self, l: usize) -> KJet {
        assert!(l < self.grid.len(), "node out of range");
        if let Some(exact) = &self.exact {
            return exact(&self.grid.point(l));
        }
        let (n, k) = (self.n, self.k());
        let mut v = vec![0.0; n * k];
        for a in 0..k {
            for i in 0..n {
                v[i + n * a] = self.fd_partial_linear(i, a, l);
            }
        }
        KJet {
            k,
            q: self.node_values(l).to_vec(),
            v,
        }
    }

    /// Keep only the listed components (e.g. the base part of a lifted field).
    pub fn project(&self, components: &[usize]) -> Result<Self> {
        if let Some(&bad) = components.iter().find(|&&c| c >= self.n) {
            return Err(Error::IndexError {
                index: vec![bad],
                counts: vec![self.n],
            });
        }
        let n = components.len();
        let mut values = Vec::with_capacity(self.grid.len() * n);
        for l in 0..self.grid.len() {
            let row = self.node_values(l);
            values.extend(components.iter().map(|&c| row[c]));
        }
        let mut out = Self::from_values(self.grid.clone(), n, values)?;
        if let Some(exact) = self.exact.clone() {
            let comps = components.to_vec();
            let old_n = self.n;
            out.exact = Some(Arc::new(move |t: &[f64]| {
                let j = exact(t);
                let k = j.k();
                let q = comps.iter().map(|&c| j.q()[c]).collect();
                let mut v = Vec::with_capacity(comps.len() * k);
                for a in 0..k {
                    v.extend(comps.iter().map(|&c| j.v()[c + old_n * a]));
                }
                KJet { k, q, v }
            }));
        }
        if let Some(f) = self.dual.clone() {
            let comps = components.to_vec();
            out.dual = Some(Arc::new(move |t: &[Dual2]| {
                let all = f(t);
                comps.iter().map(|&c| all[c]).collect()
            }));
        }
        Ok(out)
    }
}

/// Exact jet of a dual-number field `t ↦ φ(t)`.
pub fn jet_of_dual_fn<F>(f: &F, t: &[f64], n: usize) -> KJet
where
    F: Fn(&[Dual2]) -> Vec<Dual2> + ?Sized,
{
    let k = t.len();
    let td: Vec<Dual2> = t
        .iter()
        .enumerate()
        .map(|(a, &x)| Dual2::variable(x, a, k))
        .collect();
    let out = f(&td);
    assert_eq!(out.len(), n, "field component count");
    let q = out.iter().map(Dual2::value).collect();
    let mut v = vec![0.0; n * k];
    for a in 0..k {
        for (i, c) in out.iter().enumerate() {
            v[i + n * a] = c.first(a);
        }
    }
    KJet { k, q, v }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_examples() {
        let q = vec![0.3, -1.0];
        let id = vec![1.0, 0.0, 0.0, 1.0];
        let a = KCojet::new(q.clone(), id.clone(), 2).unwrap();
        let v = KJet::new(q.clone(), id, 2).unwrap();
        assert_eq!(pairing(&a, &v).unwrap(), 2.0);
        assert_eq!(
            pairing(&KCojet::zero(2, 2), &KJet::zero(2, 2)).unwrap(),
            0.0
        );
        let a1 = KCojet::new(vec![0.0], vec![2.0], 1).unwrap();
        let v1 = KJet::new(vec![0.0], vec![3.0], 1).unwrap();
        assert_eq!(pairing(&a1, &v1).unwrap(), 6.0);
    }

    #[test]
    fn pairing_rejects_other_base_point() {
        let a = KCojet::new(vec![0.0], vec![2.0], 1).unwrap();
        let v = KJet::new(vec![1e-9], vec![3.0], 1).unwrap();
        assert!(matches!(
            pairing(&a, &v),
            Err(Error::BasePointMismatch { .. })
        ));
    }

    #[test]
    fn jets_reject_non_finite() {
        assert!(KJet::new(vec![f64::NAN], vec![0.0], 1).is_err());
        assert!(KJet::new(vec![0.0], vec![0.0, 1.0], 1).is_err());
    }

    #[test]
    fn prolong_product_field() {
        let g = Grid::uniform(2, 0.0, 2.0, 5).unwrap();
        let s = FieldSample::from_dual_fn(g, 2, |t| vec![t[0] * t[1], t[0]]).unwrap();
        let j = s.prolong(&[2, 2]).unwrap();
        assert_eq!(j.q(), &[1.0, 1.0]);
        assert_eq!(j.velocity(0, 0), 1.0);
        assert_eq!(j.velocity(0, 1), 1.0);
        let fd = s.without_exact().prolong(&[2, 2]).unwrap();
        assert!((fd.velocity(0, 0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fd_partial_checks_indices() {
        let g = Grid::uniform(1, 0.0, 1.0, 11).unwrap();
        let s = FieldSample::from_fn(g, 1, |t| vec![t[0] * t[0]]).unwrap();
        assert!((s.fd_partial(0, 0, &[5]).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            s.fd_partial(0, 0, &[11]),
            Err(Error::IndexError { .. })
        ));
    }
}
