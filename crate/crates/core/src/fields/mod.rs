//! Scalar fields on structured sphere grids.

mod ctransform;
mod field;
mod grid;
pub mod harmonics;
mod poly;
mod random;

pub use ctransform::{
    c_transform, check_c_concavity, transport_map, transport_velocity, CConcavity,
    C_CONCAVITY_TOLERANCE, MAX_CERTIFICATE_POINTS,
};
pub use field::{
    gradient_field, hessian_field, poly_jet, quadrature, FieldFile, FieldJet, Interpolation,
    ScalarField, FIT_TOLERANCE,
};
pub(crate) use ctransform::velocity_ambient;
pub use grid::{Grid, GridKind, GridSpec};
pub use poly::{AmbientJet, AmbientPoly};
pub use random::{
    hessian_sup, normalize_hessian, normalized_potential, probe_grid, random_bandlimited,
    scale_until_c_concave, FieldRecipe, ScaledPotential, DEFAULT_EPSILON,
};
