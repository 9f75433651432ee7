use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{FieldJet, ScalarField};
use super::grid::{Grid, GridSpec};
use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt_complete, sym_eigenvalues};
use crate::numeric::theta_over_tan;
use crate::sphere::{
    cut_limit, distance_ambient, exp_ambient, log_ambient, SpherePoint, TangentVector,
};

/// Deviation below which ψ is accepted as c-concave.
pub const C_CONCAVITY_TOLERANCE: f64 = 1e-8;

/// Certification grids larger than this are replaced by a coarse grid.
pub const MAX_CERTIFICATE_POINTS: usize = 4096;

/// φ^c(y) = min_w { d(y,w)²/2 − φ(w) } over the grid of `phi`, exhaustively.
/// Ties go to the lowest grid index.
pub fn c_transform(phi: &ScalarField) -> ScalarField {
    let grid = phi.grid();
    let pts = grid.points();
    let vals = phi.values();
    let out: Vec<f64> = pts
        .par_iter()
        .map(|y| {
            let mut best = f64::INFINITY;
            for (w, v) in pts.iter().zip(vals) {
                let d = distance_ambient(y, w);
                let c = 0.5 * d * d - v;
                if c < best {
                    best = c;
                }
            }
            best
        })
        .collect();
    ScalarField::from_values(grid.clone(), out).expect("same grid, finite values")
}

/// Ψ_t(x) = exp_x(t ∇ψ(x)).
pub fn transport_map(psi: &ScalarField, x: &SpherePoint, t: f64) -> Result<SpherePoint> {
    let g = checked_gradient(psi, x)?;
    Ok(SpherePoint::normalize(exp_ambient(x.coords(), &(g * t)))?)
}

/// ∂Ψ_t/∂t = −θ sin(tθ) x + cos(tθ) ∇ψ(x), tangent at Ψ_t(x), θ = ‖∇ψ(x)‖.
pub fn transport_velocity(psi: &ScalarField, x: &SpherePoint, t: f64) -> Result<TangentVector> {
    let g = checked_gradient(psi, x)?;
    let base = SpherePoint::normalize(exp_ambient(x.coords(), &(&g * t)))?;
    Ok(TangentVector::projected(base, &velocity_ambient(x.coords(), &g, t)))
}

pub(crate) fn velocity_ambient(x: &DVector<f64>, g: &DVector<f64>, t: f64) -> DVector<f64> {
    let theta = g.norm();
    let (s, c) = (t * theta).sin_cos();
    x * (-theta * s) + g * c
}

fn checked_gradient(psi: &ScalarField, x: &SpherePoint) -> Result<DVector<f64>> {
    let g = psi.grad(x.coords())?;
    let limit = cut_limit();
    let r = g.norm();
    if r >= limit {
        return Err(Error::CutLocusViolation { norm: r, limit });
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CConcavity {
    pub certified: bool,
    /// max over certification points of the c-concavity deviation
    pub margin: f64,
    pub tolerance: f64,
    pub points_checked: usize,
}

/// Certifies that x ↦ exp_x(∇ψ(x)) is the optimal map, i.e. that −ψ is
/// c-concave.
///
/// For each certification point x with y = Ψ(x), the deviation is
/// d(x,y)²/2 + ψ(x) − min_w { d(y,w)²/2 + ψ(w) }, which bounds
/// (−ψ)^{cc}(x) + ψ(x) from above and vanishes exactly when the infimum
/// defining (−ψ)^c(y) is attained at x. The minimum over w is taken over
/// the grid and refined by Riemannian Newton from the best grid candidates.
/// Fields without a smooth representation fall back to the fully discrete
/// comparison of (−ψ)^{cc} with −ψ.
pub fn check_c_concavity(psi: &ScalarField) -> CConcavity {
    if psi.representation().is_err() {
        return discrete_check(psi);
    }
    let grid = certificate_grid(psi);
    let field = match psi.resampled(grid.clone()) {
        Ok(f) => f,
        Err(_) => return discrete_check(psi),
    };
    let pts = grid.points();
    let vals = field.values();
    let devs: Vec<f64> = pts
        .par_iter()
        .zip(vals.par_iter())
        .map(|(x, &psi_x)| point_deviation(&field, pts, vals, x, psi_x))
        .collect();
    let margin = devs.iter().copied().fold(0.0, f64::max);
    CConcavity {
        certified: margin <= C_CONCAVITY_TOLERANCE,
        margin,
        tolerance: C_CONCAVITY_TOLERANCE,
        points_checked: pts.len(),
    }
}

fn certificate_grid(psi: &ScalarField) -> Arc<Grid> {
    if psi.grid().len() <= MAX_CERTIFICATE_POINTS {
        return psi.grid().clone();
    }
    let spec = match psi.dim() {
        2 => GridSpec::gauss_legendre(24, 48),
        _ => GridSpec::gauss_legendre_s3(10, 20),
    };
    spec.build().expect("fixed certificate grids are valid")
}

fn point_deviation(
    psi: &ScalarField,
    pts: &[DVector<f64>],
    vals: &[f64],
    x: &DVector<f64>,
    psi_x: f64,
) -> f64 {
    let g = match psi.grad(x) {
        Ok(g) => g,
        Err(_) => return f64::INFINITY,
    };
    if g.norm() >= cut_limit() {
        return f64::INFINITY;
    }
    let y = exp_ambient(x, &g);
    let dxy = distance_ambient(x, &y);
    let at_x = 0.5 * dxy * dxy + psi_x;
    let mut scored: Vec<(f64, usize)> = pts
        .iter()
        .zip(vals)
        .enumerate()
        .map(|(i, (w, v))| {
            let d = distance_ambient(&y, w);
            (0.5 * d * d + v, i)
        })
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = scored.len().min(4);
    if scored.len() > k {
        scored.select_nth_unstable_by(k, order);
    }
    scored.truncate(k);
    scored.sort_by(order);
    let mut best = at_x;
    for &(val, i) in &scored {
        best = best.min(val);
        if let Some(v) = newton_refine(psi, &y, &pts[i]) {
            best = best.min(v);
        }
    }
    (at_x - best).max(0.0)
}

/// Minimizes w ↦ d(y,w)²/2 + ψ(w) from `start`; returns the final value.
fn newton_refine(psi: &ScalarField, y: &DVector<f64>, start: &DVector<f64>) -> Option<f64> {
    let limit = cut_limit();
    let objective = |w: &DVector<f64>| -> Option<(f64, FieldJet, f64)> {
        let d = distance_ambient(y, w);
        if d >= limit {
            return None;
        }
        let jet = psi.jet(w).ok()?;
        Some((0.5 * d * d + jet.value, jet, d))
    };
    let mut w = start.clone();
    let (mut val, mut jet, mut d) = objective(&w)?;
    for _ in 0..40 {
        let grad = &jet.grad - log_ambient(&w, y);
        // the value error is O(|grad|²), far below the certificate tolerance
        if grad.norm() < 1e-10 {
            break;
        }
        let n = w.len() - 1;
        let axes = gram_schmidt_complete(std::slice::from_ref(&w), &[], n);
        let e = DMatrix::from_columns(&axes);
        // Hessian of d(·,y)²/2 at w, plus Hess ψ, in the frame e
        let mut amb = jet.hess.clone();
        let c = theta_over_tan(d);
        let proj = DMatrix::identity(n + 1, n + 1) - &w * w.transpose();
        amb += &proj * c;
        if d > 0.0 {
            let u = -log_ambient(&w, y) / d;
            amb += &u * u.transpose() * (1.0 - c);
        }
        let h = e.transpose() * amb * &e;
        let gc = e.transpose() * &grad;
        let step = if sym_eigenvalues(&h)[0] > 1e-12 {
            h.cholesky().map(|ch| -ch.solve(&gc)).unwrap_or(-&gc)
        } else {
            -&gc
        };
        let mut dir = &e * step;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = exp_ambient(&w, &dir);
            if let Some((tv, tj, td)) = objective(&trial) {
                if tv < val {
                    w = trial;
                    val = tv;
                    jet = tj;
                    d = td;
                    accepted = true;
                    break;
                }
            }
            dir *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some(val)
}

fn discrete_check(psi: &ScalarField) -> CConcavity {
    let neg = psi.scaled(-1.0);
    let cc = c_transform(&c_transform(&neg));
    let margin =
        cc.values().iter().zip(neg.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    CConcavity {
        certified: margin <= C_CONCAVITY_TOLERANCE,
        margin,
        tolerance: C_CONCAVITY_TOLERANCE,
        points_checked: psi.grid().len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::poly::AmbientPoly;
    use crate::sphere::geodesic_distance;

    fn grid() -> Arc<Grid> {
        GridSpec::gauss_legendre(8, 16).build().unwrap()
    }

    #[test]
    fn transform_of_zero_is_zero() {
        let f = c_transform(&ScalarField::zero(grid()));
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transform_matches_double_loop() {
        let g = grid();
        let phi = ScalarField::from_poly(g.clone(), AmbientPoly::var(3, 2).scale(0.1)).unwrap();
        let fast = c_transform(&phi);
        for (i, y) in g.points().iter().enumerate() {
            let mut best = f64::INFINITY;
            for j in 0..g.len() {
                let d = geodesic_distance(&g.point(i), &g.point(j));
                best = best.min(d * d / 2.0 - phi.values()[j]);
            }
            let _ = y;
            assert_eq!(fast.values()[i], best);
        }
    }

    #[test]
    fn triple_transform_equals_single() {
        let g = grid();
        let phi = ScalarField::from_poly(
            g,
            AmbientPoly::from_terms(3, [(vec![1, 1, 0], 0.4), (vec![0, 0, 2], -0.3)]),
        )
        .unwrap();
        let c1 = c_transform(&phi);
        let c3 = c_transform(&c_transform(&c1));
        for (a, b) in c1.values().iter().zip(c3.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn transform_reverses_order() {
        let g = grid();
        let lo = ScalarField::from_poly(g.clone(), AmbientPoly::var(3, 0).scale(0.2)).unwrap();
        let hi = lo.add_constant(0.05);
        for (a, b) in c_transform(&lo).values().iter().zip(c_transform(&hi).values()) {
            assert!(a >= b);
        }
    }

    #[test]
    fn map_at_zero_potential_is_identity() {
        let psi = ScalarField::zero(grid());
        let x = SpherePoint::from_slice(&[0.6, 0.0, 0.8]).unwrap();
        for t in [0.0, 0.5, 1.0] {
            assert_eq!(transport_map(&psi, &x, t).unwrap(), x);
        }
    }

    #[test]
    fn quarter_circle_from_pole() {
        // ψ = (π/2) x has gradient (π/2, 0, 0) at the north pole
        let psi = ScalarField::from_poly(grid(), AmbientPoly::var(3, 0).scale(std::f64::consts::FRAC_PI_2))
            .unwrap();
        let y = transport_map(&psi, &SpherePoint::north_pole(2), 1.0).unwrap();
        assert!(y.coords()[2].abs() < 1e-15);
        assert!((y.coords()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn velocity_has_constant_speed_and_is_tangent() {
        let psi = ScalarField::from_poly(
            grid(),
            AmbientPoly::from_terms(3, [(vec![1, 1, 0], 0.7), (vec![0, 1, 1], 0.4), (vec![1, 0, 0], 0.3)]),
        )
        .unwrap();
        let x = SpherePoint::normalize(DVector::from_vec(vec![0.3, 0.5, -0.4])).unwrap();
        let speed = psi.grad(x.coords()).unwrap().norm();
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let v = transport_velocity(&psi, &x, t).unwrap();
            assert!((v.norm() - speed).abs() < 1e-10);
            assert!(v.base().dot(&SpherePoint::from_ambient(v.base().coords().clone())).is_finite());
            assert!(v.vec().dot(v.base().coords()).abs() < 1e-12);
        }
    }

    #[test]
    fn certificate_accepts_small_and_rejects_large_potentials() {
        let g = GridSpec::gauss_legendre(12, 24).build().unwrap();
        let base = AmbientPoly::from_terms(
            3,
            [(vec![1, 1, 0], 1.0), (vec![0, 0, 2], -0.5), (vec![1, 0, 1], 0.8), (vec![0, 1, 0], 0.3)],
        );
        let zero = check_c_concavity(&ScalarField::zero(g.clone()));
        assert!(zero.certified);
        assert!(zero.margin.abs() < 1e-28);
        let small = check_c_concavity(&ScalarField::from_poly(g.clone(), base.scale(0.05)).unwrap());
        assert!(small.certified, "margin {}", small.margin);
        let large = check_c_concavity(&ScalarField::from_poly(g, base.scale(10.0)).unwrap());
        assert!(!large.certified);
    }
}
