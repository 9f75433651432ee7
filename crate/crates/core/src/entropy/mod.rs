//! Relative entropy, the entropy formula term by term, K and the Carleman
//! determinant, and the transportation inequality.

mod density;
mod formula;
mod kfunc;
mod measure;

pub use density::{
    density_by_fine_differences, density_by_map_differences, density_by_map_differences_with_step, density_from_map, inverse_transport_map,
    map_jacobian, relative_entropy, relative_entropy_with_tolerance, MapDensity, DENSITY_MASS_TOLERANCE, MAP_DIFFERENCE_STEP,
    PUSHFORWARD_MASS_TOLERANCE,
};
pub use formula::{
    entropy_formula_rhs, grid_terms, kappa_of_potential, point_terms, talagrand_check, u_hessian_line_integral,
    EntropyReport, PointTerms, TalagrandReport, ENTROPY_TOLERANCE, LINE_CHECK_NODES, LINE_NODES,
    LINE_QUADRATURE_TOLERANCE, NEAR_CUT_BAND, SPLIT_TOLERANCE, TALAGRAND_TOLERANCE,
};
pub use kfunc::{carleman_log_det2, k_function, k_series};
pub use measure::GridMeasure;
