#![allow(dead_code)]

use routhk_core::hamiltonian::ConnectionOneForm;
use routhk_core::numerics::{Dual2, Grid, Matrix};
use routhk_core::routh::{Reduction, ReductionChart};
use routhk_core::{LagrangianSystem, SymmetryModel};

pub fn navier(lambda: f64, nu: f64) -> LagrangianSystem {
    LagrangianSystem::new(2, 2, "navier", move |_q, v| {
        let (v11, v21, v12, v22) = (v[0], v[1], v[2], v[3]);
        (v11 * v11 + v22 * v22) * (lambda / 2.0 + nu)
            + (v12 * v12 + v21 * v21) * (nu / 2.0)
            + v11 * v22 * (lambda + nu)
    })
}

pub fn laplace(k: usize) -> LagrangianSystem {
    LagrangianSystem::new(1, k, "laplace", |_q, v| {
        v.iter().map(|x| *x * *x).sum::<Dual2>() * 0.5
    })
}

/// Translations of `φ¹`, trivial connection `dq¹`, base coordinate `φ²`.
pub fn navier_reduction(lambda: f64, nu: f64) -> Reduction {
    let sym = SymmetryModel::translations(2, &[0]);
    let conn = ConnectionOneForm::constant(Matrix::from_rows(&[[1.0, 0.0]]));
    let chart = ReductionChart::new(vec![1], vec![0.0, 0.0]).unwrap();
    Reduction::new(navier(lambda, nu), sym, conn, chart).unwrap()
}

pub fn square(count: usize) -> Grid {
    Grid::uniform(2, -1.0, 1.0, count).unwrap()
}

/// `√((λ+2ν)/(2λ+3ν))`.
pub fn coscosh_rate(lambda: f64, nu: f64) -> f64 {
    ((lambda + 2.0 * nu) / (2.0 * lambda + 3.0 * nu)).sqrt()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
