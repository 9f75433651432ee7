use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, PD_FLOOR};
use crate::numeric::{log_theta_over_sin, theta_over_tan, x_minus_log1p, zeta};
use crate::sphere::SymOperator;

/// Below this the Maclaurin series replaces the closed form of K.
const K_SERIES_BELOW: f64 = 0.5;

/// K(α) = 1 − α/tan α + log(α/sin α) on [0, π).
pub fn k_function(alpha: f64) -> Result<f64> {
    if !(0.0..PI).contains(&alpha) {
        return Err(Error::DomainError(alpha));
    }
    if alpha < K_SERIES_BELOW {
        // (α/π)² ≤ 0.026, so 14 terms reach f64 resolution
        return k_series(alpha, 14);
    }
    Ok(1.0 - theta_over_tan(alpha) + log_theta_over_sin(alpha))
}

/// Σ_{m=1}^{m_max} (2m+1) ζ(2m) α^{2m} / (π^{2m} m).
pub fn k_series(alpha: f64, m_max: usize) -> Result<f64> {
    if !(0.0..PI).contains(&alpha) {
        return Err(Error::DomainError(alpha));
    }
    let r = (alpha / PI).powi(2);
    let mut pow = 1.0;
    let mut terms = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        pow *= r;
        let mf = m as f64;
        terms.push((2.0 * mf + 1.0) * zeta(2.0 * mf) * pow / mf);
    }
    // smallest terms first
    Ok(terms.iter().rev().sum())
}

/// −log det₂(M) = trace(M − I − log M) = Σ (λ − 1 − log λ).
pub fn carleman_log_det2(m: &SymOperator) -> Result<f64> {
    carleman_of_matrix(m.matrix())
}

pub(crate) fn carleman_of_matrix(m: &nalgebra::DMatrix<f64>) -> Result<f64> {
    let ev = sym_eigenvalues(m);
    carleman_of_spectrum(&ev)
}

pub(crate) fn carleman_of_spectrum(ev: &[f64]) -> Result<f64> {
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= PD_FLOOR {
        return Err(Error::NotPositiveDefinite(min));
    }
    Ok(ev.iter().map(|l| x_minus_log1p(l - 1.0)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{SpherePoint, TangentFrame};
    use nalgebra::DMatrix;

    #[test]
    fn k_values() {
        assert_eq!(k_function(0.0).unwrap(), 0.0);
        assert!((k_function(PI / 2.0).unwrap() - (1.0 + (PI / 2.0).ln())).abs() < 1e-15);
        for a in [0.1, 0.5, 1.0, 2.0] {
            assert!((k_function(a).unwrap() - k_series(a, 50).unwrap()).abs() < 1e-10, "{a}");
        }
        assert!(matches!(k_function(PI), Err(Error::DomainError(_))));
        assert!(k_function(-0.1).is_err());
    }

    #[test]
    fn k_branches_agree_at_switch() {
        let a = K_SERIES_BELOW;
        let closed = 1.0 - theta_over_tan(a) + log_theta_over_sin(a);
        assert!((closed - k_series(a, 14).unwrap()).abs() < 1e-16);
        // α²/2 + α⁴/36 leading behaviour
        let s = 1e-3f64;
        assert!((k_function(s).unwrap() - (s * s / 2.0 + s.powi(4) / 36.0)).abs() < 1e-20);
    }

    #[test]
    fn carleman_spectrum() {
        let frame = TangentFrame::standard(SpherePoint::north_pole(2));
        let m = SymOperator::new(frame.clone(), DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]))).unwrap();
        assert!((carleman_log_det2(&m).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(carleman_log_det2(&SymOperator::identity(frame.clone())).unwrap(), 0.0);
        let bad = SymOperator::new(frame, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -0.5]))).unwrap();
        assert!(matches!(carleman_log_det2(&bad), Err(Error::NotPositiveDefinite(_))));
    }
}
