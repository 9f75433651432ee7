use std::f64::consts::PI;

use nalgebra::DVector;

use super::{SpherePoint, TangentVector};
use crate::error::{Error, Result};

/// `1 − cos d(b, c)` computed as ‖b − c‖²/2 to avoid cancellation.
fn one_minus_cos(b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    0.5 * (b - c).norm_squared()
}

/// G(b, c) = −(4π)⁻¹ log(1 − cos d(b, c)), the Green's function of the
/// Laplace–Beltrami operator on S² with respect to area measure.
///
/// With this sign, Δ_b G(·, c) = 1/(4π) − δ_c.
pub fn green_function(b: &SpherePoint, c: &SpherePoint) -> Result<f64> {
    if b.dim() != 2 || c.dim() != 2 {
        return Err(Error::DimensionUnsupported(b.dim().max(c.dim())));
    }
    let s = one_minus_cos(b.coords(), c.coords());
    if s <= 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(-s.ln() / (4.0 * PI))
}

/// ∇_b G(b, c) in T_b S²: (4π)⁻¹ (c − ⟨b,c⟩ b) / (1 − ⟨b,c⟩).
pub fn green_gradient(b: &SpherePoint, c: &SpherePoint) -> Result<TangentVector> {
    if b.dim() != 2 || c.dim() != 2 {
        return Err(Error::DimensionUnsupported(b.dim().max(c.dim())));
    }
    let s = one_minus_cos(b.coords(), c.coords());
    if s <= 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let v = b.project(c.coords()) / (4.0 * PI * s);
    Ok(TangentVector::from_parts(b.clone(), v))
}
