mod common;

use common::close;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routhk_core::liegroup::{a410, orbit_routhian};
use routhk_core::numerics::{Dual2, Lu, Matrix};
use routhk_core::LieAlgebraModel;

fn so3() -> LieAlgebraModel {
    LieAlgebraModel::from_brackets(
        3,
        &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)],
        vec!["e1".into(), "e2".into(), "e3".into()],
    )
    .unwrap()
}

fn rotation(axis: [f64; 3], angle: f64) -> Matrix {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|a| a / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    Matrix::from_rows(&[
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])
}

/// `ℓ(ξ) = ½ Σ_a 𝒢(ξ_a, ξ_a)`.
fn quadratic(g: Matrix, m: usize, k: usize) -> impl Fn(&[Dual2]) -> Dual2 {
    move |xi: &[Dual2]| {
        let mut s = Dual2::constant(0.0);
        for a in 0..k {
            for i in 0..m {
                for j in 0..m {
                    s += xi[i + m * a] * xi[j + m * a] * (0.5 * g[(i, j)]);
                }
            }
        }
        s
    }
}

fn oracle(g: &Matrix, nu: &[Vec<f64>]) -> f64 {
    let g_inv = Lu::factor(g).unwrap().inverse();
    -0.5 * nu.iter().map(|n| g_inv.bilinear(n, n)).sum::<f64>()
}

#[test]
fn so3_orbit_routhian_is_minus_the_dual_energy() {
    let alg = so3();
    let g = Matrix::identity(3).scale(2.5);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let k = 2;
        let rot = rotation(
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                0.3,
            ],
            rng.random_range(-3.0..3.0),
        );
        let nu: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let mu: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                rot.transpose().mul_vec(&mu)
            })
            .collect();
        let r = orbit_routhian(&alg, quadratic(g.clone(), 3, k), &nu).unwrap();
        assert!(close(r, oracle(&g, &nu), 1e-10));
    }
}

#[test]
fn a410_orbit_routhian_is_minus_the_dual_energy() {
    let alg = a410::algebra();
    let f = a410::algebra_metric();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..20 {
        let g = a410::group_matrix(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-3.0..3.0),
        );
        let nu: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let mu: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
                a410::coadjoint(&g, &mu)
            })
            .collect();
        let r = orbit_routhian(&alg, quadratic(f.clone(), 4, 3), &nu).unwrap();
        assert!(close(r, oracle(&f, &nu), 1e-10));
    }
}
