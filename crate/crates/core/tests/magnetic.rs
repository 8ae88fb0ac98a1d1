//! A particle in the plane coupled to a cyclic angle through `dθ + b x dy`.
//! The connection has constant curvature `b`, so the reduced equations carry a
//! genuine magnetic force; its sign is fixed by the full equations.

mod common;

use std::sync::Arc;

use common::close;
use routhk_core::numerics::{Dual2, Grid};
use routhk_core::routh::{reduced_el_residual_exact, Reduction, ReductionChart};
use routhk_core::{ConnectionOneForm, FieldSample, LagrangianSystem, MomentumValue, SymmetryModel};

const B: f64 = 2.0;
const MU: f64 = 1.0;
const R: f64 = 0.5;

fn reduction() -> Reduction {
    let sys = LagrangianSystem::new(3, 1, "charged", |q, v| {
        let s = v[2] + q[0] * v[1] * B;
        (v[0] * v[0] + v[1] * v[1] + s * s) * 0.5
    });
    let sym = SymmetryModel::translations(3, &[2]);
    let conn = ConnectionOneForm::new(1, 3, |q| {
        vec![Dual2::constant(0.0), q[0] * B, Dual2::constant(1.0)]
    });
    let chart = ReductionChart::new(vec![0, 1], vec![0.0, 0.0, 0.3]).unwrap();
    Reduction::new(sys, sym, conn, chart).unwrap()
}

fn grid() -> Grid {
    Grid::uniform(1, 0.0, 2.0, 41).unwrap()
}

/// `ẍ = μbẏ`, `ÿ = −μbẋ` are solved by circles of frequency `ω = −μb`.
fn circle() -> FieldSample {
    let w = -MU * B;
    FieldSample::from_dual_fn(grid(), 2, move |t: &[Dual2]| {
        vec![(t[0] * w).cos() * R, (t[0] * w).sin() * R]
    })
    .unwrap()
}

#[test]
fn magnetic_matrix_is_the_curvature() {
    let red = reduction();
    for qb in [[0.0, 0.0], [0.7, -1.2]] {
        let b = red.magnetic_term(&[MU], &qb).unwrap();
        assert!(close(b[(0, 1)], MU * B, 1e-8));
        assert!(close(b[(1, 0)], -MU * B, 1e-8));
        assert!(b.antisymmetry_gap() < 1e-12);
    }
}

#[test]
fn reduced_routhian_drops_the_angle() {
    // on the level set R = ½|ẋ|² − ½μ²
    let red = reduction();
    let mu = MomentumValue::new(1, 1, vec![MU]).unwrap();
    let r = red
        .reduced_routhian(&mu, &[0.4, 0.1], &[0.3, -0.2])
        .unwrap();
    assert!(close(r, 0.5 * (0.09 + 0.04) - 0.5, 1e-12));
}

#[test]
fn full_lift_of_the_circle_solves_the_full_equations() {
    let w = -MU * B;
    let full = FieldSample::from_dual_fn(grid(), 3, move |t: &[Dual2]| {
        let s = t[0];
        let theta = s * MU - (s * 0.5 + (s * (2.0 * w)).sin() / (4.0 * w)) * (B * R * R * w);
        vec![(s * w).cos() * R, (s * w).sin() * R, theta]
    })
    .unwrap();
    let red = reduction();
    assert!(red.system().el_residual_exact(&full).unwrap().max_abs() < 1e-10);
}

#[test]
fn magnetic_sign_agrees_with_the_full_equations() {
    let red = reduction();
    let mu = MomentumValue::new(1, 1, vec![MU]).unwrap();
    let rs = red.routh_system(mu, "charged");
    let r = reduced_el_residual_exact(&rs, &circle()).unwrap().max_abs();
    assert!(r < 1e-8, "{r}");

    let mut plain = rs.clone();
    plain.magnetic = None;
    let r0 = reduced_el_residual_exact(&plain, &circle())
        .unwrap()
        .max_abs();
    assert!(r0 > 0.5, "{r0}");

    let mut flipped = rs.clone();
    let red2 = reduction();
    flipped.magnetic = Some(Arc::new(move |qb: &[f64]| {
        Ok(vec![red2.magnetic_term(&[MU], qb)?.scale(-1.0)])
    }));
    let r1 = reduced_el_residual_exact(&flipped, &circle())
        .unwrap()
        .max_abs();
    assert!(r1 > 0.5, "{r1}");
}
