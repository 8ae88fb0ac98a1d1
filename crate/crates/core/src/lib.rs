//! Numerical polysymplectic (k-symplectic) field theory.
//!
//! This crate evaluates first-order Lagrangian and Hamiltonian field theories on
//! the k-velocity bundle `T¹ₖQ` and the k-covelocity bundle `(T¹ₖ)*Q` in a single
//! global chart, and implements their symmetry reduction:
//!
//! * [`lagrangian`]: Legendre transform, energy, regularity, Euler–Lagrange field
//!   residuals and the Lagrangian polysymplectic forms.
//! * [`hamiltonian`]: canonical forms, the cotangent momentum map, the momentum
//!   shift and the k-Hamilton residual.
//! * [`symmetry`]: momentum maps of Lagrangian systems, Noether divergences,
//!   per-component momentum conservation and the G-regularity solve.
//! * [`routh`]: Routhians, their restriction to momentum level sets, magnetic
//!   terms and the reduced field equations.
//! * [`liegroup`]: Lie-algebra data, invariant metrics, locked inertia, the
//!   mechanical connection and Lie-group Routhians.
//! * [`reconstruction`]: flatness checks for lifting reduced solutions and
//!   abelian reconstruction by quadrature.
//!
//! User functions (Lagrangians, generators, connections, metrics) are written
//! against [`Dual2`], a second-order forward-mode dual number, so every first and
//! second derivative the constructions need is exact.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;

pub mod hamiltonian;
pub mod jets;
pub mod lagrangian;
pub mod liegroup;
pub mod numerics;
pub mod reconstruction;
pub mod routh;
pub mod symmetry;

pub use error::{Error, Result};
pub use hamiltonian::{ConnectionOneForm, HamiltonianSystem, KVectorFieldOnCojets};
pub use jets::{FieldSample, KCojet, KJet};
pub use lagrangian::{KVectorFieldOnJets, LagrangianSystem, ResidualGrid};
pub use liegroup::{InvariantMetricModel, LieAlgebraModel};
pub use numerics::{Dual2, Grid, Matrix};
pub use routh::{ReductionChart, RouthSystem};
pub use symmetry::{MomentumValue, SymmetryModel};

use alloc::sync::Arc;
use alloc::vec::Vec;

/// Scalar function of a point and a velocity/momentum block, e.g. `L(q, v)`.
///
/// The second slice is the flattened `n × k` block with index `i + n·a`.
pub type JetScalarFn = dyn Fn(&[Dual2], &[Dual2]) -> Dual2 + Send + Sync;

/// Vector- or matrix-valued function of a configuration point.
pub type PointFn = dyn Fn(&[Dual2]) -> Vec<Dual2> + Send + Sync;

/// Shared handle to a [`PointFn`].
pub type SharedPointFn = Arc<PointFn>;
