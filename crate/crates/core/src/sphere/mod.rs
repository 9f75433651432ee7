//! Closed-form geometry of the round unit sphere Sⁿ in its ambient embedding.
//!
//! Points and tangent vectors live in Rⁿ⁺¹. Everything here is a pure
//! function of its arguments except the process-wide cut-locus margin, see
//! [`set_cut_margin`].

mod green;
mod maps;
mod types;

pub use green::{green_function, green_gradient};
pub use maps::{
    cut_limit, cut_margin, exp_map, geodesic_distance, hessian_half_dist_sq, jacobian_exp,
    jacobian_exp_norm, log_map, set_cut_margin, COINCIDENT_DISTANCE, DEFAULT_CUT_MARGIN,
};
pub(crate) use maps::{distance_ambient, exp_ambient, log_ambient};
pub use types::{SpherePoint, SymOperator, TangentFrame, TangentVector};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Uniformly distributed random point on Sⁿ.
pub fn random_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SpherePoint {
    loop {
        let v = nalgebra::DVector::from_fn(dim + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        if v.norm() > 1e-8 {
            return SpherePoint::from_ambient(v);
        }
    }
}

/// Random tangent vector at `x` with the given norm.
pub fn random_tangent<R: Rng + ?Sized>(x: &SpherePoint, norm: f64, rng: &mut R) -> TangentVector {
    loop {
        let v = nalgebra::DVector::from_fn(x.dim() + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let t = x.project(&v);
        let n = t.norm();
        if n > 1e-8 {
            return TangentVector::from_parts(x.clone(), t * (norm / n));
        }
    }
}

/// Haar-random rotation of Rⁿ⁺¹ (QR of a Gaussian matrix with sign fix).
pub fn random_rotation<R: Rng + ?Sized>(ambient_dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(ambient_dim, ambient_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..ambient_dim {
        if r[(j, j)] < 0.0 {
            for i in 0..ambient_dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if q.determinant() < 0.0 {
        for i in 0..ambient_dim {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    q
}
