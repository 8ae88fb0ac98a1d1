//! The solvable group `A₄,₁₀` acting on `Q = ℝ × G` by left multiplication.
//!
//! Coordinates on `Q` are `(q, x, y, z, θ)`; the algebra basis is ordered
//! `(e_x, e_y, e_z, e_θ)`.

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{InvariantMetricModel, LieAlgebraModel, MetricFn};
use crate::lagrangian::LagrangianSystem;
use crate::numerics::{Dual2, Lu, Matrix};
use crate::symmetry::SymmetryModel;

pub const N: usize = 5;
pub const M: usize = 4;

/// `[e_x,e_y] = −2e_z`, `[e_x,e_θ] = e_y`, `[e_y,e_θ] = −e_x`.
pub fn algebra() -> LieAlgebraModel {
    LieAlgebraModel::from_brackets(
        M,
        &[(0, 1, 2, -2.0), (0, 3, 1, 1.0), (1, 3, 0, -1.0)],
        ["x", "y", "z", "theta"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    )
    .expect("A4,10 structure constants are valid")
}

/// `E_x = ∂_x − y∂_z`, `E_y = ∂_y + x∂_z`, `E_z = ∂_z`, `E_θ = ∂_θ − x∂_y + y∂_x`.
pub fn generators(q: &[Dual2]) -> Vec<Dual2> {
    let (x, y) = (q[1], q[2]);
    let c = Dual2::constant;
    let z = c(0.0);
    let one = c(1.0);
    vec![
        z, one, z, -y, z, //
        z, z, one, x, z, //
        z, z, z, one, z, //
        z, y, -x, z, one,
    ]
}

/// `𝒢 = dq² + γ dq dθ + dx² + dy² − y dx dθ + x dy dθ + dz dθ` (symmetric products).
pub fn metric(gamma: f64) -> Arc<MetricFn> {
    Arc::new(move |q: &[Dual2]| {
        let (x, y) = (q[1], q[2]);
        let c = Dual2::constant;
        let mut g = vec![c(0.0); N * N];
        let mut set = |i: usize, j: usize, v: Dual2| {
            g[i * N + j] = v;
            g[j * N + i] = v;
        };
        set(0, 0, c(1.0));
        set(1, 1, c(1.0));
        set(2, 2, c(1.0));
        set(0, 4, c(gamma / 2.0));
        set(1, 4, -y * 0.5);
        set(2, 4, x * 0.5);
        set(3, 4, c(0.5));
        g
    })
}

/// `𝔽_{ab} = 𝒢(E_a, E_b)`.
pub fn algebra_metric() -> Matrix {
    Matrix::from_rows(&[
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.5],
        [0.0, 0.0, 0.5, 0.0],
    ])
}

/// Horizontal lift of `∂_q` for the mechanical connection: `∂_q − γ∂_z`.
pub fn horizontal(gamma: f64) -> [f64; N] {
    [1.0, 0.0, 0.0, -gamma, 0.0]
}

pub fn symmetry() -> SymmetryModel {
    SymmetryModel::new(algebra(), N, generators)
}

pub fn invariant_metric(gamma: f64) -> InvariantMetricModel {
    InvariantMetricModel::new(symmetry(), metric(gamma), algebra_metric())
        .expect("A4,10 algebra metric is invertible")
}

/// `L = ½ Σ_a 𝒢(v_a, v_a)`.
pub fn lagrangian(gamma: f64, k: usize) -> LagrangianSystem {
    invariant_metric(gamma).lagrangian(k, "harmonic_a410")
}

/// Matrix basis `e_x = e13 + e24`, `e_y = e12 − e34`, `e_z = e14`, `e_θ = −e23 + e32`.
pub fn basis_matrices() -> [Matrix; M] {
    let mut ex = Matrix::zeros(4, 4);
    ex[(0, 2)] = 1.0;
    ex[(1, 3)] = 1.0;
    let mut ey = Matrix::zeros(4, 4);
    ey[(0, 1)] = 1.0;
    ey[(2, 3)] = -1.0;
    let mut ez = Matrix::zeros(4, 4);
    ez[(0, 3)] = 1.0;
    let mut et = Matrix::zeros(4, 4);
    et[(1, 2)] = -1.0;
    et[(2, 1)] = 1.0;
    [ex, ey, ez, et]
}

/// Group element with coordinates `(x, y, z, θ)`.
pub fn group_matrix(x: f64, y: f64, z: f64, theta: f64) -> Matrix {
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    Matrix::from_rows(&[
        [1.0, y * c + x * s, -y * s + x * c, z],
        [0.0, c, -s, x],
        [0.0, s, c, -y],
        [0.0, 0.0, 0.0, 1.0],
    ])
}

/// Coordinates of an algebra matrix in [`basis_matrices`], by least squares.
pub fn algebra_coordinates(a: &Matrix) -> Vec<f64> {
    let basis = basis_matrices();
    let gram = Matrix::from_fn(M, M, |i, j| {
        basis[i]
            .as_slice()
            .iter()
            .zip(basis[j].as_slice())
            .map(|(p, q)| p * q)
            .sum()
    });
    let rhs: Vec<f64> = basis
        .iter()
        .map(|b| {
            b.as_slice()
                .iter()
                .zip(a.as_slice())
                .map(|(p, q)| p * q)
                .sum()
        })
        .collect();
    Lu::factor(&gram)
        .expect("basis matrices are independent")
        .solve(&rhs)
}

/// Matrix of `Ad_g` in the algebra basis: column `β` holds `g e_β g⁻¹`.
pub fn adjoint(g: &Matrix) -> Matrix {
    let ginv = Lu::factor(g)
        .expect("group elements are invertible")
        .inverse();
    let basis = basis_matrices();
    let mut ad = Matrix::zeros(M, M);
    for (b, e) in basis.iter().enumerate() {
        let col = algebra_coordinates(&g.matmul(e).matmul(&ginv));
        for a in 0..M {
            ad[(a, b)] = col[a];
        }
    }
    ad
}

/// `⟨Ad*_g μ, ξ⟩ = ⟨μ, Ad_g ξ⟩`.
pub fn coadjoint(g: &Matrix, mu: &[f64]) -> Vec<f64> {
    adjoint(g).transpose().mul_vec(mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(a: &Matrix, b: &Matrix) -> Matrix {
        a.matmul(b).sub(&b.matmul(a))
    }

    #[test]
    fn matrix_basis_realises_brackets() {
        let alg = algebra();
        let basis = basis_matrices();
        for al in 0..M {
            for be in 0..M {
                let c = algebra_coordinates(&commutator(&basis[al], &basis[be]));
                for ga in 0..M {
                    assert!((c[ga] - alg.structure(ga, al, be)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn generators_close_with_sign_flip() {
        let pts = [
            vec![0.1, 0.7, -0.4, 1.3, 0.5],
            vec![-2.0, 0.3, 0.9, 0.0, -1.1],
        ];
        assert!(symmetry().bracket_closure_gap(&pts).unwrap() < 1e-14);
    }

    #[test]
    fn algebra_metric_is_ad_invariant() {
        let f = algebra_metric();
        let ad = adjoint(&group_matrix(0.4, -1.2, 0.8, 2.1));
        assert!(ad.transpose().matmul(&f).matmul(&ad).sub(&f).max_abs() < 1e-13);
    }

    #[test]
    fn identity_tangent_is_e_x() {
        let h = 1e-6;
        let d = group_matrix(h, 0.0, 0.0, 0.0)
            .sub(&group_matrix(-h, 0.0, 0.0, 0.0))
            .scale(0.5 / h);
        assert!(d.sub(&basis_matrices()[0]).max_abs() < 1e-9);
    }
}
