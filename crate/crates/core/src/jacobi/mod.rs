//! Jacobi fields in block form, matrix trigonometric functions, the
//! Hessian of the half squared distance from first variation, and the
//! small-τ expansion of the entropy.

mod curvature;
mod expansion;
mod solve;

pub use curvature::{matrix_trig, matrix_trig_full, matrix_trig_series, CurvatureFn, CurvatureSpec, MatrixTrig, SYMMETRY_TOLERANCE};
pub use expansion::{
    expansion_csv, lichnerowicz_density, lichnerowicz_integral, lichnerowicz_sweep, richardson, small_tau_expansion_terms,
    small_tau_with_k, LichnerowiczReport, LichnerowiczRow, SmallTauTerms,
};
pub use solve::{
    adapted_hessian, hessian_from_jacobi, jacobi_propagate, jacobi_solve, jacobi_state, rk4_jacobi, BlockState, RK4_STEPS,
};
