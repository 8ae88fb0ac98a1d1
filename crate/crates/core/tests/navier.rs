mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routhk_core::numerics::{Dual2, Lu};
use routhk_core::reconstruction::{
    consistency_check, default_consistency_tolerance, reconstruct_abelian,
    reconstruct_abelian_with, Constraints, QuadratureOptions,
};
use routhk_core::routh::{reduced_el_residual, reduced_el_residual_exact, routhian_full};
use routhk_core::symmetry::{
    momentum_constancy, momentum_deviation_field, noether_divergence, solve_g_regularity,
};
use routhk_core::{Error, FieldSample, KJet, MomentumValue, SymmetryModel};

fn mu11() -> MomentumValue {
    MomentumValue::new(1, 2, vec![1.0, 1.0]).unwrap()
}

#[test]
fn hessian_determinant_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut done = 0;
    while done < 25 {
        let lambda: f64 = rng.random_range(-3.0..3.0);
        let nu: f64 = rng.random_range(-3.0..3.0);
        if nu.abs() < 0.2
            || (2.0 * lambda + 3.0 * nu).abs() < 0.2
            || (lambda + 2.0 * nu).abs() < 0.2
        {
            continue;
        }
        let sys = navier(lambda, nu);
        let jet = KJet::new(vec![0.4, -0.1], vec![0.3, 1.2, -0.7, 0.05], 2).unwrap();
        let det = Lu::decompose(&sys.hessian(&jet).unwrap()).determinant();
        let expect = nu.powi(3) * (2.0 * lambda + 3.0 * nu);
        assert!(
            close(det, expect, 1e-10 * expect.abs()),
            "{det} vs {expect}"
        );
        done += 1;
    }
}

#[test]
fn hessian_block_at_default_parameters() {
    let h = navier(2.0, 1.0).hessian(&KJet::zero(2, 2)).unwrap();
    let expected = [
        [4.0, 0.0, 0.0, 3.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [3.0, 0.0, 0.0, 4.0],
    ];
    for (r, row) in expected.iter().enumerate() {
        for (c, x) in row.iter().enumerate() {
            assert_eq!(h[(r, c)], *x);
        }
    }
}

#[test]
fn lagrangian_value_at_unit_diagonal() {
    let jet = KJet::new(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0], 2).unwrap();
    assert!(close(navier(2.0, 1.0).value(&jet).unwrap(), 7.0, 1e-14));
}

#[test]
fn routhian_with_trivial_connection() {
    let red = navier_reduction(2.0, 1.0);
    let mu = MomentumValue::new(1, 2, vec![0.7, -1.3]).unwrap();
    let jet = KJet::new(vec![0.2, 0.5], vec![0.3, -0.4, 1.1, 0.9], 2).unwrap();
    let l = red.system().value(&jet).unwrap();
    let r = routhian_full(red.system(), red.connection(), &mu, &jet).unwrap();
    assert!(close(r, l - 0.7 * 0.3 + 1.3 * 1.1, 1e-14));
    let zero = MomentumValue::zero(1, 2);
    assert_eq!(
        routhian_full(red.system(), red.connection(), &zero, &jet).unwrap(),
        l
    );
}

#[test]
fn reduced_routhian_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let lambda: f64 = rng.random_range(0.5..3.0);
        let nu: f64 = rng.random_range(0.5..3.0);
        let m1: f64 = rng.random_range(-2.0..2.0);
        let m2: f64 = rng.random_range(-2.0..2.0);
        let mu = MomentumValue::new(1, 2, vec![m1, m2]).unwrap();
        let red = navier_reduction(lambda, nu);
        let rs = red.routh_system(mu.clone(), "navier");
        let e = rs.expansion(&[0.3]).unwrap();
        let c1 = (lambda + nu) * m1 / (lambda + 2.0 * nu);
        let c2 = -m1 * m1 / (2.0 * (lambda + 2.0 * nu)) - m2 * m2 / (2.0 * nu);
        assert!(close(e.constant, c2, 1e-10));
        assert!(close(e.linear[0], 0.0, 1e-10));
        assert!(close(e.linear[1], c1, 1e-10));
        assert!(close(e.quadratic[(0, 0)], nu, 1e-10));
        let q22 = nu * (2.0 * lambda + 3.0 * nu) / (lambda + 2.0 * nu);
        assert!(close(e.quadratic[(1, 1)], q22, 1e-10));
        assert!(close(e.quadratic[(0, 1)], 0.0, 1e-10));
        // the closed-form restriction, evaluated at a non-zero reduced velocity
        let w = [0.8, -0.6];
        let closed = nu / (2.0 * (lambda + 2.0 * nu))
            * ((lambda + 2.0 * nu) * w[0] * w[0] + (2.0 * lambda + 3.0 * nu) * w[1] * w[1])
            + c1 * w[1]
            + c2;
        let got = red.reduced_routhian(&mu, &[1.7], &w).unwrap();
        assert!(close(got, closed, 1e-10));
    }
}

#[test]
fn constants_at_default_parameters() {
    let rs = navier_reduction(2.0, 1.0).routh_system(mu11(), "navier");
    let e = rs.expansion(&[0.0]).unwrap();
    assert!(close(e.quadratic[(0, 0)] / 2.0, 0.5, 1e-12));
    assert!(close(e.quadratic[(1, 1)] / 2.0, 7.0 / 8.0, 1e-12));
    assert!(close(e.linear[1], 0.75, 1e-12));
    assert!(close(e.constant, -0.625, 1e-12));
}

#[test]
fn routhian_hessian_is_constant() {
    let red = navier_reduction(1.3, 0.7);
    let mu = MomentumValue::new(1, 2, vec![0.4, -2.0]).unwrap();
    let h0 = red
        .reduced_velocity_hessian(&mu, &[0.0], &[0.0, 0.0])
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let q = [rng.random_range(-2.0..2.0)];
        let w = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let h = red.reduced_velocity_hessian(&mu, &q, &w).unwrap();
        assert!(h.sub(&h0).max_abs() < 1e-10);
    }
}

#[test]
fn reduced_routhian_does_not_depend_on_newton_start() {
    let red = navier_reduction(2.0, 1.0);
    let mu = mu11();
    let base = red.reduced_routhian(&mu, &[0.2], &[0.3, -0.9]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let start = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let lift = red.lift_from(&mu, &[0.2], &[0.3, -0.9], &start).unwrap();
        let r = red.routhian_full(&mu, &lift.jet).unwrap();
        assert!(close(r, base, 1e-9));
    }
}

#[test]
fn level_set_lift_round_trips() {
    let red = navier_reduction(2.0, 1.0);
    let lift = red.lift(&mu11(), &[0.0], &[0.4, 0.1]).unwrap();
    // v¹₁ = (μ₁ − (λ+ν)v²₂)/(λ+2ν), v¹₂ = μ₂/ν
    assert!(close(
        lift.jet.velocity(0, 0),
        (1.0 - 3.0 * 0.1) / 4.0,
        1e-12
    ));
    assert!(close(lift.jet.velocity(0, 1), 1.0, 1e-12));
    let sym = SymmetryModel::translations(2, &[0]);
    let direct = solve_g_regularity(red.system(), &sym, &lift.jet, &mu11()).unwrap();
    assert!(direct.xi.iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn g_regularity_fails_when_lambda_plus_two_nu_vanishes() {
    let red = navier_reduction(-2.0, 1.0);
    let err = red
        .reduced_routhian(&mu11(), &[0.0], &[0.0, 0.0])
        .unwrap_err();
    assert!(matches!(err, Error::NewtonDivergence { .. }));
}

#[test]
fn magnetic_term_vanishes_for_the_trivial_connection() {
    let red = navier_reduction(2.0, 1.0);
    for q in [-0.8, 0.0, 0.3] {
        assert_eq!(red.magnetic_term(&[1.0], &[q]).unwrap().max_abs(), 0.0);
    }
}

fn xy(grid: routhk_core::numerics::Grid) -> FieldSample {
    FieldSample::from_dual_fn(grid, 1, |t: &[Dual2]| vec![t[0] * t[1]]).unwrap()
}

fn coscosh(grid: routhk_core::numerics::Grid, lambda: f64, nu: f64) -> FieldSample {
    let c = coscosh_rate(lambda, nu);
    FieldSample::from_dual_fn(grid, 1, move |t: &[Dual2]| {
        vec![t[0].cos() * (t[1] * c).cosh()]
    })
    .unwrap()
}

#[test]
fn xy_solves_the_reduced_equations() {
    let rs = navier_reduction(2.0, 1.0).routh_system(mu11(), "navier");
    let f = xy(square(21));
    assert!(reduced_el_residual(&rs, &f).unwrap().max_abs() <= 1e-8);
    assert!(reduced_el_residual_exact(&rs, &f).unwrap().max_abs() <= 1e-8);
}

#[test]
fn coscosh_solves_the_reduced_equations_exactly() {
    let rs = navier_reduction(2.0, 1.0).routh_system(mu11(), "navier");
    let f = coscosh(square(21), 2.0, 1.0);
    assert!(reduced_el_residual_exact(&rs, &f).unwrap().max_abs() <= 1e-8);
    // the stencil residual only sees truncation error, shrinking ~4x per halving
    let coarse = reduced_el_residual(&rs, &f).unwrap().max_abs();
    let fine = reduced_el_residual(&rs, &coscosh(square(41), 2.0, 1.0))
        .unwrap()
        .max_abs();
    let ratio = coarse / fine;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

fn constraints() -> Constraints {
    Constraints::from_reduction(&navier_reduction(2.0, 1.0), &mu11()).unwrap()
}

#[test]
fn consistency_of_the_two_reduced_solutions() {
    let c = constraints();
    let gap = consistency_check(&c, &xy(square(21))).unwrap();
    assert!(gap <= 1e-8, "gap {gap}");
    let f = coscosh(square(21), 2.0, 1.0);
    let gap = consistency_check(&c, &f).unwrap();
    // ∂_y w_x − ∂_x w_y = −(λ+ν)ψ_yy/(λ+2ν); at the centre this is 0.75·c²
    let rate = coscosh_rate(2.0, 1.0);
    assert!(gap >= 0.75 * rate * rate * 0.99, "gap {gap}");
    assert!(gap >= 100.0 * 1e-8);
    assert!(gap > default_consistency_tolerance(&f));
    assert!(matches!(
        reconstruct_abelian(&c, &f, &[0.0], 1e-8),
        Err(Error::InconsistentConstraints { .. })
    ));
}

#[test]
fn reconstruction_of_xy() {
    let c = constraints();
    let psi = xy(square(21));
    let phi = reconstruct_abelian(&c, &psi, &[0.0], 1e-8).unwrap();
    let grid = phi.grid().clone();
    let anchor = grid.point(grid.low_corner());
    let exact = |x: f64, y: f64| (2.0 * x - 3.0 * x * x) / 8.0 + y;
    let shift = -exact(anchor[0], anchor[1]);
    let mut worst = 0.0_f64;
    for l in 0..grid.len() {
        let t = grid.point(l);
        worst = worst.max((phi.node_values(l)[0] - exact(t[0], t[1]) - shift).abs());
        assert_eq!(phi.node_values(l)[1], psi.node_values(l)[0]);
    }
    assert!(worst <= 1e-6, "{worst}");
    let sys = navier(2.0, 1.0);
    assert!(sys.el_residual(&phi).unwrap().max_abs() <= 1e-6);
    let sym = SymmetryModel::translations(2, &[0]);
    assert!(
        momentum_constancy(&sys, &sym, &phi, &mu11())
            .unwrap()
            .max_abs()
            <= 1e-8
    );
    assert!(noether_divergence(&sys, &sym, &phi).unwrap().max_abs() <= 1e-8);
    // projecting back returns the input samples exactly
    assert_eq!(phi.project(&[1]).unwrap().values(), psi.values());
}

#[test]
fn reference_closed_form_does_not_carry_momentum_one_one() {
    // the reference φ¹ = C + (μ₁x − (λ+ν)x²)/(2(λ+2ν)) − μ₂y/ν with λ=2, ν=1, μ=(1,1)
    let reference = FieldSample::from_dual_fn(square(21), 2, |t: &[Dual2]| {
        let (x, y) = (t[0], t[1]);
        vec![(x - x * x * 3.0) / 8.0 - y, x * y]
    })
    .unwrap();
    let sys = navier(2.0, 1.0);
    assert!(sys.el_residual(&reference).unwrap().max_abs() <= 1e-8);
    let sym = SymmetryModel::translations(2, &[0]);
    let dev = momentum_constancy(&sys, &sym, &reference, &mu11()).unwrap();
    assert!(close(dev.get(0, 0), 0.5, 1e-12));
    assert!(close(dev.get(0, 1), 2.0, 1e-12));
    let half = MomentumValue::new(1, 2, vec![0.5, -1.0]).unwrap();
    assert!(
        momentum_constancy(&sys, &sym, &reference, &half)
            .unwrap()
            .max_abs()
            <= 1e-12
    );
}

#[test]
fn reconstruction_path_independence_is_second_order() {
    // w = ∇Φ with Φ = sin(x)cosh(y) + x²y: flat, but not integrated exactly
    let c = Constraints::new(1, 1, 2, |t, _jet| {
        let (x, y) = (t[0], t[1]);
        Ok(vec![
            x.cos() * y.cosh() + 2.0 * x * y,
            x.sin() * y.sinh() + x * x,
        ])
    });
    let swap = |count: usize| {
        let psi = xy(square(count));
        let a = reconstruct_abelian(&c, &psi, &[0.0], f64::INFINITY).unwrap();
        let opts = QuadratureOptions {
            anchor_node: None,
            axis_order: Some(vec![1, 0]),
        };
        let b = reconstruct_abelian_with(&c, &psi, &[0.0], f64::INFINITY, &opts).unwrap();
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let (g1, g2) = (swap(21), swap(41));
    assert!(g1 > 0.0);
    let ratio = g1 / g2;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn flat_constraints_give_identical_sweeps() {
    let c = constraints();
    let psi = xy(square(21));
    let a = reconstruct_abelian(&c, &psi, &[0.25], 1e-8).unwrap();
    let opts = QuadratureOptions {
        anchor_node: None,
        axis_order: Some(vec![1, 0]),
    };
    let b = reconstruct_abelian_with(&c, &psi, &[0.25], 1e-8, &opts).unwrap();
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!(close(*x, *y, 1e-12));
    }
    assert_eq!(a.node_values(psi.grid().low_corner())[0], 0.25);
}

#[test]
fn zero_constraints_keep_the_anchor_value() {
    let c = Constraints::new(1, 2, 2, |_t, _jet| Ok(vec![0.0; 4]));
    let psi = xy(square(5));
    assert_eq!(consistency_check(&c, &psi).unwrap(), 0.0);
    let phi = reconstruct_abelian(&c, &psi, &[1.5, -2.0], 0.0).unwrap();
    for l in 0..phi.grid().len() {
        assert_eq!(&phi.node_values(l)[1..], &[1.5, -2.0]);
    }
}

#[test]
fn affine_symmetric_constraints_are_exactly_consistent() {
    // w_x = 2x + 3y, w_y = 3x − y: a gradient field, affine in t
    let c = Constraints::new(1, 1, 2, |t, _jet| {
        Ok(vec![2.0 * t[0] + 3.0 * t[1], 3.0 * t[0] - t[1]])
    });
    // dyadic spacing keeps the stencils free of rounding
    assert_eq!(consistency_check(&c, &xy(square(9))).unwrap(), 0.0);
}

#[test]
fn non_reconstructible_solution() {
    let (lambda, nu) = (2.0, 1.0);
    let s = (lambda + 3.0 * nu) / (2.0 * (lambda + 2.0 * nu));
    let phi = FieldSample::from_dual_fn(square(21), 2, move |t: &[Dual2]| {
        let (x, y) = (t[0], t[1]);
        vec![y * y - x * x * s, x * y]
    })
    .unwrap();
    let sys = navier(lambda, nu);
    let sym = SymmetryModel::translations(2, &[0]);
    assert!(sys.el_residual(&phi).unwrap().max_abs() <= 1e-8);
    assert!(noether_divergence(&sys, &sym, &phi).unwrap().max_abs() <= 1e-8);
    let dev = momentum_deviation_field(&sys, &sym, &phi, &MomentumValue::zero(1, 2)).unwrap();
    let grid = phi.grid();
    for l in (0..grid.len()).step_by(7) {
        let x = grid.point(l)[0];
        assert!(close(dev.get(l, 0, 0), -2.0 * nu * x, 1e-8));
    }
    let worst = momentum_constancy(&sys, &sym, &phi, &MomentumValue::zero(1, 2)).unwrap();
    assert!(worst.get(0, 0) > 1.0 && worst.get(0, 1) > 1.0);
}
