use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use super::{SpherePoint, SymOperator, TangentFrame, TangentVector};
use crate::error::{Error, Result};
use crate::numeric::{sinc, theta_over_tan};

/// Default distance kept from the cut locus d = π, in radians.
pub const DEFAULT_CUT_MARGIN: f64 = 1e-3;

/// Distances at or below this are treated as coincident by the Hessian of d²/2.
pub const COINCIDENT_DISTANCE: f64 = 1e-8;

static CUT_MARGIN_BITS: AtomicU64 = AtomicU64::new(0x3F50_624D_D2F1_A9FC); // 1e-3

/// Current process-wide cut-locus margin δ_cut.
pub fn cut_margin() -> f64 {
    f64::from_bits(CUT_MARGIN_BITS.load(Ordering::Relaxed))
}

/// Sets the process-wide cut-locus margin. Panics unless 0 < δ < π.
pub fn set_cut_margin(margin: f64) {
    assert!(margin > 0.0 && margin < PI, "cut margin must lie in (0, pi)");
    CUT_MARGIN_BITS.store(margin.to_bits(), Ordering::Relaxed);
}

/// Largest admissible tangent norm / geodesic distance, π − δ_cut.
pub fn cut_limit() -> f64 {
    PI - cut_margin()
}

/// exp_x(v) = cos‖v‖ x + (sin‖v‖/‖v‖) v, renormalized. No validation.
pub(crate) fn exp_ambient(x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let r = v.norm();
    let mut y = x * r.cos();
    y.axpy(sinc(r), v, 1.0);
    let n = y.norm();
    y / n
}

/// Geodesic distance 2·atan2(‖x − y‖, ‖x + y‖), accurate near 0 and π.
pub(crate) fn distance_ambient(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// log_x(y), assuming d(x, y) < π. No validation.
pub(crate) fn log_ambient(x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let d = distance_ambient(x, y);
    let v = y - x * x.dot(y);
    let n = v.norm();
    if n < 1e-300 {
        return DVector::zeros(x.len());
    }
    v * (d / n)
}

fn check_base(x: &SpherePoint, tau: &TangentVector) -> Result<()> {
    if !tau.base().approx_eq(x, 1e-12) {
        return Err(Error::BaseMismatch);
    }
    Ok(())
}

/// The exponential map of the round sphere.
pub fn exp_map(x: &SpherePoint, tau: &TangentVector) -> Result<SpherePoint> {
    check_base(x, tau)?;
    let r = tau.norm();
    let limit = cut_limit();
    if r >= limit {
        return Err(Error::CutLocusViolation { norm: r, limit });
    }
    Ok(SpherePoint::from_ambient(exp_ambient(x.coords(), tau.vec())))
}

/// Inverse of [`exp_map`] away from the cut locus.
pub fn log_map(x: &SpherePoint, y: &SpherePoint) -> Result<TangentVector> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    let d = distance_ambient(x.coords(), y.coords());
    let limit = cut_limit();
    if d >= limit {
        return Err(Error::CutLocusViolation { norm: d, limit });
    }
    let v = log_ambient(x.coords(), y.coords());
    // remove the O(ε) normal residue left by rounding
    Ok(TangentVector::projected(x.clone(), &v))
}

/// Great-circle distance in radians, in [0, π].
pub fn geodesic_distance(x: &SpherePoint, y: &SpherePoint) -> f64 {
    distance_ambient(x.coords(), y.coords())
}

/// Jacobian determinant of exp_x at τ: (sin‖τ‖/‖τ‖)ⁿ⁻¹.
pub fn jacobian_exp(x: &SpherePoint, tau: &TangentVector) -> Result<f64> {
    check_base(x, tau)?;
    jacobian_exp_norm(x.dim(), tau.norm())
}

/// [`jacobian_exp`] as a function of the tangent norm alone.
pub fn jacobian_exp_norm(dim: usize, r: f64) -> Result<f64> {
    if r >= PI {
        return Err(Error::CutLocusViolation { norm: r, limit: PI });
    }
    Ok(sinc(r).powi(dim as i32 - 1))
}

/// The Hessian at x of y ↦ d(x, y)²/2 held fixed at y, i.e. A = Hess_x d(x,y)²/2,
/// expressed in `frame`.
///
/// ⟨Aτ,τ⟩ = (d/tan d)‖τ‖² + (1 − d/tan d)⟨u,τ⟩², with u the unit initial
/// direction of the geodesic from x to y. Coincident points give the identity.
pub fn hessian_half_dist_sq(x: &SpherePoint, y: &SpherePoint, frame: &TangentFrame) -> Result<SymOperator> {
    if !frame.base().approx_eq(x, 1e-12) {
        return Err(Error::BaseMismatch);
    }
    let d = geodesic_distance(x, y);
    if d >= cut_limit() {
        return Err(Error::DegenerateDistance(d));
    }
    let n = frame.dim();
    if d <= COINCIDENT_DISTANCE {
        return Ok(SymOperator::identity(frame.clone()));
    }
    let c = theta_over_tan(d);
    let u = log_ambient(x.coords(), y.coords()) / d;
    let uc = frame.components(&u);
    let m = DMatrix::identity(n, n) * c + &uc * uc.transpose() * (1.0 - c);
    Ok(SymOperator::from_parts(frame.clone(), crate::linalg::symmetrize(&m)))
}
