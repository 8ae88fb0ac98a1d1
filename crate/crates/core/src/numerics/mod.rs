//! Dual numbers, dense linear algebra, grids and derivative helpers.

mod diff;
mod dual;
mod grid;
mod linalg;

pub use diff::{
    central_difference, coordinate_derivs, directional_derivs, ensure_finite, point_jacobian,
    unit_vector, Derivatives, FD_STEP,
};
pub use dual::{powi, Dual2, MAX_DIRECTIONS};
pub use grid::Grid;
pub use linalg::{
    dot, gram_schmidt, inverse, max_abs, norm, null_space, solve_dense, solve_dual, Lu, Matrix,
    SINGULAR_RTOL,
};
