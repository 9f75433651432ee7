use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::curvature::{matrix_trig_full, CurvatureSpec};
use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::sphere::{SymOperator, TangentFrame};

/// Steps used when a custom curvature has no closed form.
pub const RK4_STEPS: usize = 10_000;

/// A matrix Jacobi field and its covariant derivative, columns in the
/// geodesic-adapted parallel frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockState {
    pub y: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl BlockState {
    /// Y(0) = 0, V(0) = w.
    pub fn initial(w: DMatrix<f64>) -> Self {
        Self { y: DMatrix::zeros(w.nrows(), w.ncols()), v: w }
    }

    fn axpy(&self, h: f64, d: &BlockState) -> BlockState {
        BlockState { y: &self.y + &d.y * h, v: &self.v + &d.v * h }
    }
}

fn check_speed(spec: &CurvatureSpec, speed: f64) -> Result<()> {
    if !(speed >= 0.0 && speed.is_finite()) {
        return Err(Error::InvalidInput(format!("geodesic speed {speed}")));
    }
    if matches!(spec, CurvatureSpec::ConstantSphere(_)) && speed >= PI {
        return Err(Error::ConjugatePoint(speed));
    }
    Ok(())
}

fn check_rows(spec: &CurvatureSpec, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: m.nrows() });
    }
    Ok(())
}

/// The state at time t of Y'' + S Y = 0 started from `start`.
///
/// For the sphere: Y(t) = cos(t√S) Y₀ + sin(t√S)/√S V₀ and
/// V(t) = −√S sin(t√S) Y₀ + cos(t√S) V₀.
pub fn jacobi_propagate(spec: &CurvatureSpec, start: &BlockState, speed: f64, t: f64) -> Result<BlockState> {
    check_speed(spec, speed)?;
    check_rows(spec, &start.y)?;
    match spec {
        CurvatureSpec::ConstantSphere(_) => {
            let m = matrix_trig_full(&spec.operator(speed, 0.0), t)?;
            Ok(BlockState {
                y: &m.cos * &start.y + &m.sinc * &start.v,
                v: &m.cos * &start.v - &m.sqrt_sin * &start.y,
            })
        }
        CurvatureSpec::Custom { .. } => Ok(rk4_jacobi(spec, start, speed, t, RK4_STEPS)),
    }
}

/// Y(1), V(1) for Y(0) = 0, V(0) = w.
pub fn jacobi_solve(spec: &CurvatureSpec, w: &DMatrix<f64>, speed: f64) -> Result<BlockState> {
    jacobi_state(spec, w, speed, 1.0)
}

pub fn jacobi_state(spec: &CurvatureSpec, w: &DMatrix<f64>, speed: f64, t: f64) -> Result<BlockState> {
    jacobi_propagate(spec, &BlockState::initial(w.clone()), speed, t)
}

/// Classical RK4 on the first-order system Y' = V, V' = −S(t) Y.
pub fn rk4_jacobi(spec: &CurvatureSpec, start: &BlockState, speed: f64, t_end: f64, steps: usize) -> BlockState {
    let rhs = |t: f64, s: &BlockState| BlockState { y: s.v.clone(), v: -(spec.operator(speed, t) * &s.y) };
    let h = t_end / steps as f64;
    let mut s = start.clone();
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = rhs(t, &s);
        let k2 = rhs(t + 0.5 * h, &s.axpy(0.5 * h, &k1));
        let k3 = rhs(t + 0.5 * h, &s.axpy(0.5 * h, &k2));
        let k4 = rhs(t + h, &s.axpy(h, &k3));
        s = BlockState {
            y: &s.y + (&k1.y + (&k2.y + &k3.y) * 2.0 + &k4.y) * (h / 6.0),
            v: &s.v + (&k1.v + (&k2.v + &k3.v) * 2.0 + &k4.v) * (h / 6.0),
        };
    }
    s
}

/// A = V(1) Y(1)⁻¹ for Y(0) = 0, V(0) = I: the Hessian of d(·, γ(1))²/2 at
/// γ(0), in `frame`, whose first axis must be the geodesic direction.
pub fn hessian_from_jacobi(spec: &CurvatureSpec, frame: &TangentFrame, speed: f64) -> Result<SymOperator> {
    if frame.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: frame.dim() });
    }
    Ok(SymOperator::from_parts(frame.clone(), adapted_hessian(spec, speed)?))
}

/// [`hessian_from_jacobi`] as a bare matrix in adapted coordinates.
pub fn adapted_hessian(spec: &CurvatureSpec, speed: f64) -> Result<DMatrix<f64>> {
    let n = spec.dim();
    let s = jacobi_solve(spec, &DMatrix::identity(n, n), speed)?;
    let yinv = s.y.clone().try_inverse().ok_or(Error::ConjugatePoint(speed))?;
    Ok(symmetrize(&(&s.v * yinv)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{hessian_half_dist_sq, random_point, random_tangent, SpherePoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_limit_and_quarter_turn() {
        let spec = CurvatureSpec::ConstantSphere(2);
        let w = DMatrix::from_column_slice(2, 1, &[0.3, 0.7]);
        let s = jacobi_solve(&spec, &w, 0.0).unwrap();
        assert_eq!(s.y, w);
        let perp = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let s = jacobi_solve(&spec, &perp, PI / 2.0).unwrap();
        assert!((s.y[(1, 0)] - 2.0 / PI).abs() < 1e-15);
        assert!(s.v[(1, 0)].abs() < 1e-15);
        assert!(matches!(jacobi_solve(&spec, &perp, PI), Err(Error::ConjugatePoint(_))));
    }

    #[test]
    fn closed_form_matches_rk4() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in [2usize, 3] {
            let spec = CurvatureSpec::ConstantSphere(n);
            let rho = rng.random_range(0.1..3.0);
            let start = BlockState {
                y: DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)),
                v: DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)),
            };
            let a = jacobi_propagate(&spec, &start, rho, 1.0).unwrap();
            let b = rk4_jacobi(&spec, &start, rho, 1.0, 2000);
            assert!((a.y - b.y).amax() < 1e-10 && (a.v - b.v).amax() < 1e-10);
        }
    }

    #[test]
    fn custom_spec_uses_integrator() {
        let spec = CurvatureSpec::Custom {
            dim: 2,
            operator: std::sync::Arc::new(|speed, _| DMatrix::identity(2, 2) * (speed * speed)),
        };
        let s = jacobi_solve(&spec, &DMatrix::identity(2, 2), 1.0).unwrap();
        assert!((s.y[(0, 0)] - 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn hessian_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for n in [2usize, 3] {
            let spec = CurvatureSpec::ConstantSphere(n);
            for _ in 0..20 {
                let x = random_point(n, &mut rng);
                let u = random_tangent(&x, 1.0, &mut rng);
                let speed = rng.random_range(0.0..3.0);
                let frame = TangentFrame::from_direction(x.clone(), u.vec());
                let y = SpherePoint::normalize(crate::sphere::exp_ambient(x.coords(), &(u.vec() * speed))).unwrap();
                let a = hessian_from_jacobi(&spec, &frame, speed).unwrap();
                let b = hessian_half_dist_sq(&x, &y, &frame).unwrap();
                assert!((a.matrix() - b.matrix()).amax() < 1e-10);
            }
        }
        let a = adapted_hessian(&CurvatureSpec::ConstantSphere(2), 1.0).unwrap();
        assert!((a[(1, 1)] - 0.642_092_615_934_330_7).abs() < 1e-12);
    }
}
