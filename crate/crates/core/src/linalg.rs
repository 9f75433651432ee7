//! Symmetric matrix functions by eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalue floor below which an operator is treated as not positive definite.
pub const PD_FLOOR: f64 = 1e-10;

/// Largest |M − Mᵀ| entry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// ½(M + Mᵀ).
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Applies `f` to the spectrum: Q f(Λ) Qᵀ.
pub fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let q = &eig.eigenvectors;
    let fd = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    q * DMatrix::from_diagonal(&fd) * q.transpose()
}

/// Matrix logarithm of a symmetric positive definite matrix.
pub fn sym_log(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let min = sym_eigenvalues(m).first().copied().unwrap_or(1.0);
    if min <= PD_FLOOR {
        return Err(Error::NotPositiveDefinite(min));
    }
    Ok(sym_apply(m, f64::ln))
}

/// log det of a symmetric positive definite matrix.
pub fn sym_log_det(m: &DMatrix<f64>) -> Result<f64> {
    let ev = sym_eigenvalues(m);
    if ev[0] <= PD_FLOOR {
        return Err(Error::NotPositiveDefinite(ev[0]));
    }
    Ok(ev.iter().map(|l| l.ln()).sum())
}

/// Frobenius (Hilbert–Schmidt) norm squared.
pub fn hs_norm_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Completes `seeds` to an orthonormal set of `count` vectors orthogonal to
/// every vector in `exclude`, by Gram–Schmidt against the standard basis.
pub fn gram_schmidt_complete(
    exclude: &[DVector<f64>],
    seeds: &[DVector<f64>],
    count: usize,
) -> Vec<DVector<f64>> {
    let dim = exclude
        .first()
        .or(seeds.first())
        .map(|v| v.len())
        .expect("need at least one vector to fix the dimension");
    let mut basis: Vec<DVector<f64>> = exclude.to_vec();
    let mut out = Vec::with_capacity(count);
    let candidates = seeds
        .iter()
        .cloned()
        .chain((0..dim).map(|i| DVector::from_fn(dim, |k, _| if k == i { 1.0 } else { 0.0 })));
    for c in candidates {
        if out.len() == count {
            break;
        }
        let mut v = c;
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for b in &basis {
                let p = b.dot(&v);
                v -= b * p;
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            v /= n;
            basis.push(v.clone());
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5, 1.0]));
        let l = sym_log(&m).unwrap();
        assert!((l[(0, 0)] - 2f64.ln()).abs() < 1e-14);
        assert!((l[(1, 1)] - 0.5f64.ln()).abs() < 1e-14);
        assert!(l[(2, 2)].abs() < 1e-14);
    }

    #[test]
    fn log_rejects_semidefinite() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        assert!(matches!(sym_log(&m), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn gram_schmidt_produces_orthonormal_complement() {
        let x = DVector::from_vec(vec![0.0, 0.6, 0.8, 0.0]);
        let seed = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]);
        let out = gram_schmidt_complete(std::slice::from_ref(&x), &[seed], 3);
        assert_eq!(out.len(), 3);
        for (i, a) in out.iter().enumerate() {
            assert!(a.dot(&x).abs() < 1e-14);
            for (j, b) in out.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((a.dot(b) - e).abs() < 1e-14);
            }
        }
    }
}
