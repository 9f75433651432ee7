use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, sym_apply, sym_eigenvalues, symmetrize};
use crate::numeric::sinc;

/// Relative asymmetry accepted by [`matrix_trig`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

pub type CurvatureFn = Arc<dyn Fn(f64, f64) -> DMatrix<f64> + Send + Sync>;

/// The curvature operator S(t) along a geodesic, in a parallel orthonormal
/// frame whose first axis is the geodesic direction.
#[derive(Clone)]
pub enum CurvatureSpec {
    /// The unit sphere Sⁿ: S = ρ² on the orthogonal complement of the
    /// direction, 0 along it, for a geodesic of speed ρ.
    ConstantSphere(usize),
    /// S(speed, t) supplied by the caller; only the RK4 integrator handles it.
    Custom { dim: usize, operator: CurvatureFn },
}

impl fmt::Debug for CurvatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConstantSphere(n) => write!(f, "ConstantSphere({n})"),
            Self::Custom { dim, .. } => write!(f, "Custom {{ dim: {dim} }}"),
        }
    }
}

impl CurvatureSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::ConstantSphere(n) => *n,
            Self::Custom { dim, .. } => *dim,
        }
    }

    pub fn operator(&self, speed: f64, t: f64) -> DMatrix<f64> {
        match self {
            Self::ConstantSphere(n) => {
                let mut s = DMatrix::identity(*n, *n) * (speed * speed);
                s[(0, 0)] = 0.0;
                s
            }
            Self::Custom { operator, .. } => operator(speed, t),
        }
    }
}

/// cos(t√T), sin(t√T)/√T and √T sin(t√T) for a symmetric PSD matrix T.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTrig {
    pub cos: DMatrix<f64>,
    pub sinc: DMatrix<f64>,
    pub sqrt_sin: DMatrix<f64>,
}

/// (cos(t√T), sin(t√T)/√T) by eigendecomposition; T = 0 gives (I, tI).
pub fn matrix_trig(t_op: &DMatrix<f64>, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = matrix_trig_full(t_op, t)?;
    Ok((m.cos, m.sinc))
}

pub fn matrix_trig_full(t_op: &DMatrix<f64>, t: f64) -> Result<MatrixTrig> {
    let scale = t_op.amax().max(1.0);
    let asym = asymmetry(t_op);
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let m = symmetrize(t_op);
    let min = sym_eigenvalues(&m).first().copied().unwrap_or(0.0);
    if min < -SYMMETRY_TOLERANCE * scale {
        return Err(Error::InvalidInput(format!("curvature operator has negative eigenvalue {min}")));
    }
    let root = |l: f64| l.max(0.0).sqrt();
    Ok(MatrixTrig {
        cos: sym_apply(&m, |l| (t * root(l)).cos()),
        sinc: sym_apply(&m, |l| t * sinc(t * root(l))),
        sqrt_sin: sym_apply(&m, |l| root(l) * (t * root(l)).sin()),
    })
}

/// Power series of cos(t√T) and sin(t√T)/√T truncated after `terms` terms.
pub fn matrix_trig_series(t_op: &DMatrix<f64>, t: f64, terms: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = t_op.nrows();
    let mut cos = DMatrix::zeros(n, n);
    let mut sinc = DMatrix::zeros(n, n);
    // p = (−t² T)^k / (2k)!
    let mut p = DMatrix::identity(n, n);
    for k in 0..terms {
        cos += &p;
        sinc += &p * (t / (2 * k + 1) as f64);
        p = (&p * t_op) * (-t * t / ((2 * k + 1) * (2 * k + 2)) as f64);
    }
    (cos, sinc)
}
