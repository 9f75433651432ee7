//! Real spherical harmonics on S², orthonormal for the normalized area
//! measure, represented as polynomials in the ambient coordinates.
//!
//! Y_{l,m} with m > 0 carries cos(mφ), m < 0 carries sin(|m|φ); no
//! Condon–Shortley phase. Coefficient vectors are ordered (l, m)
//! lexicographically: (0,0), (1,−1), (1,0), (1,1), (2,−2), ...

use super::grid::Grid;
use super::poly::AmbientPoly;
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

/// Largest degree accepted for polynomial conversion. Beyond this the
/// monomial coefficients grow enough to cost several digits on evaluation.
pub const MAX_DEGREE: usize = 16;

pub fn num_coeffs(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 1)
}

/// Position of (l, m) in the lexicographic coefficient ordering.
pub fn coeff_index(l: usize, m: i64) -> usize {
    (l * l) as usize + (m + l as i64) as usize
}

/// Monomial coefficients of the Legendre polynomial P_l, lowest degree first.
fn legendre_coeffs(l: usize) -> Vec<f64> {
    let mut p0 = vec![1.0];
    if l == 0 {
        return p0;
    }
    let mut p1 = vec![0.0, 1.0];
    for k in 1..l {
        // (k+1) P_{k+1} = (2k+1) z P_k − k P_{k−1}
        let kf = k as f64;
        let mut next = vec![0.0; k + 2];
        for (i, c) in p1.iter().enumerate() {
            next[i + 1] += (2.0 * kf + 1.0) * c;
        }
        for (i, c) in p0.iter().enumerate() {
            next[i] -= kf * c;
        }
        for c in next.iter_mut() {
            *c /= kf + 1.0;
        }
        p0 = p1;
        p1 = next;
    }
    p1
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Y_{l,m} as a polynomial in (x, y, z), exact on the unit sphere.
pub fn real_harmonic(l: usize, m: i64) -> Result<AmbientPoly> {
    if l > MAX_DEGREE {
        return Err(Error::InvalidInput(format!("harmonic degree {l} exceeds {MAX_DEGREE}")));
    }
    let am = m.unsigned_abs() as usize;
    if am > l {
        return Err(Error::InvalidInput(format!("|m| = {am} exceeds l = {l}")));
    }
    // m-th derivative of P_l
    let mut p = legendre_coeffs(l);
    for _ in 0..am {
        p = p.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
    }
    let zpart = AmbientPoly::from_terms(
        3,
        p.iter().enumerate().map(|(i, &c)| (vec![0, 0, i as u16], c)),
    );
    // Re or Im of (x + iy)^|m|
    let trig = AmbientPoly::from_terms(
        3,
        (0..=am).filter_map(|k| {
            let binom = factorial(am) / (factorial(k) * factorial(am - k));
            let e = vec![(am - k) as u16, k as u16, 0];
            match (m >= 0, k % 2) {
                (true, 0) => Some((e, if (k / 2) % 2 == 0 { binom } else { -binom })),
                (false, 1) => Some((e, if ((k - 1) / 2) % 2 == 0 { binom } else { -binom })),
                _ => None,
            }
        }),
    );
    let norm = ((2 * l + 1) as f64 * if am == 0 { 1.0 } else { 2.0 } * factorial(l - am)
        / factorial(l + am))
    .sqrt();
    Ok(zpart.mul(&trig).scale(norm))
}

/// All harmonics up to `lmax` in coefficient order.
pub fn harmonic_basis(lmax: usize) -> Result<Vec<AmbientPoly>> {
    let mut out = Vec::with_capacity(num_coeffs(lmax));
    for l in 0..=lmax {
        for m in -(l as i64)..=(l as i64) {
            out.push(real_harmonic(l, m)?);
        }
    }
    Ok(out)
}

/// Σ c_{lm} Y_{lm} as a single polynomial.
pub fn synthesize(lmax: usize, coeffs: &[f64]) -> Result<AmbientPoly> {
    if coeffs.len() != num_coeffs(lmax) {
        return Err(Error::DimensionMismatch { expected: num_coeffs(lmax), got: coeffs.len() });
    }
    let basis = harmonic_basis(lmax)?;
    let mut out = AmbientPoly::zero(3);
    for (y, &c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            out = out.add(&y.scale(c));
        }
    }
    Ok(out)
}

/// Coefficients c_{lm} = ∫ f Y_{lm} dx by grid quadrature.
pub fn analyze(grid: &Grid, values: &[f64], lmax: usize) -> Result<Vec<f64>> {
    if grid.dim() != 2 {
        return Err(Error::DimensionUnsupported(grid.dim()));
    }
    let basis = harmonic_basis(lmax)?;
    Ok(basis
        .iter()
        .map(|y| {
            let mut s = NeumaierSum::default();
            for ((p, w), v) in grid.points().iter().zip(grid.weights()).zip(values) {
                s.add(w * v * y.eval(p.as_slice()));
            }
            s.value()
        })
        .collect())
}

/// Largest degree a grid resolves for analysis: the quadrature must
/// integrate products of two degree-L harmonics exactly.
pub fn analysis_degree(grid: &Grid) -> usize {
    let s = grid.spec();
    (s.n_colat.saturating_sub(1)).min(s.n_lon.saturating_sub(1) / 2).min(MAX_DEGREE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::grid::GridSpec;

    #[test]
    fn low_degree_closed_forms() {
        let p = [0.36, 0.48, 0.8];
        let y10 = real_harmonic(1, 0).unwrap();
        let y11 = real_harmonic(1, 1).unwrap();
        let y1m1 = real_harmonic(1, -1).unwrap();
        let y20 = real_harmonic(2, 0).unwrap();
        let s3 = 3f64.sqrt();
        assert!((y10.eval(&p) - s3 * 0.8).abs() < 1e-15);
        assert!((y11.eval(&p) - s3 * 0.36).abs() < 1e-15);
        assert!((y1m1.eval(&p) - s3 * 0.48).abs() < 1e-15);
        assert!((y20.eval(&p) - 5f64.sqrt() * 0.5 * (3.0 * 0.64 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn basis_is_orthonormal_on_gauss_grid() {
        let lmax = 6;
        let g = GridSpec::gauss_legendre(lmax + 1, 2 * lmax + 2).build().unwrap();
        let basis = harmonic_basis(lmax).unwrap();
        let samples: Vec<Vec<f64>> =
            basis.iter().map(|y| g.points().iter().map(|p| y.eval(p.as_slice())).collect()).collect();
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                let prod: Vec<f64> = samples[i].iter().zip(&samples[j]).map(|(a, b)| a * b).collect();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g.integrate(&prod) - expect).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn analysis_inverts_synthesis() {
        let lmax = 5;
        let coeffs: Vec<f64> = (0..num_coeffs(lmax)).map(|k| ((k * 7 % 11) as f64 - 5.0) / 7.0).collect();
        let f = synthesize(lmax, &coeffs).unwrap();
        let g = GridSpec::gauss_legendre(8, 16).build().unwrap();
        let vals: Vec<f64> = g.points().iter().map(|p| f.eval(p.as_slice())).collect();
        let back = analyze(&g, &vals, lmax).unwrap();
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(coeff_index(2, -2), 4);
    }

    #[test]
    fn harmonics_are_eigenfunctions_of_the_laplacian() {
        // Δ_S f = tr(P D²f P) − 2 ⟨x, ∇f⟩ on S²; eigenvalue −l(l+1)
        let p = nalgebra::DVector::from_vec(vec![0.2, -0.6, 0.3]).normalize();
        for (l, m) in [(3usize, -2i64), (4, 3), (7, 0), (12, 5)] {
            let y = real_harmonic(l, m).unwrap();
            let jet = y.jet(p.as_slice());
            let proj = nalgebra::DMatrix::identity(3, 3) - &p * p.transpose();
            let lap = (&proj * &jet.hess * &proj).trace() - 2.0 * p.dot(&jet.grad);
            assert!((lap + (l * (l + 1)) as f64 * jet.value).abs() < 1e-9 * (l * l) as f64);
        }
    }
}
