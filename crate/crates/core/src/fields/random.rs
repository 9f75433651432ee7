use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ctransform::{check_c_concavity, CConcavity};
use super::field::{poly_jet, ScalarField};
use super::grid::{Grid, GridSpec};
use super::harmonics;
use super::poly::AmbientPoly;
use crate::error::{Error, Result};
use crate::linalg::sym_eigenvalues;

/// Initial scale of the ε-halving protocol.
pub const DEFAULT_EPSILON: f64 = 0.05;
const MAX_HALVINGS: usize = 30;

/// A random polynomial of degree ≤ `lmax` on Sⁿ with no constant part.
///
/// On S² the coefficients are independent standard normals on the real
/// harmonics of degree 1..=lmax. In higher dimensions they sit on the
/// monomials of degree 1..=lmax in the ambient coordinates.
pub fn random_bandlimited<R: Rng + ?Sized>(dim: usize, lmax: usize, rng: &mut R) -> Result<AmbientPoly> {
    if lmax == 0 {
        return Err(Error::InvalidInput("bandlimit must be at least 1".into()));
    }
    if dim == 2 {
        let mut coeffs = vec![0.0; harmonics::num_coeffs(lmax)];
        for c in coeffs.iter_mut().skip(1) {
            *c = rng.sample(StandardNormal);
        }
        return harmonics::synthesize(lmax, &coeffs);
    }
    let nv = dim + 1;
    let mut terms = Vec::new();
    let mut e = vec![0u16; nv];
    monomials(&mut e, 0, lmax as u16, &mut |exps| {
        let deg: u16 = exps.iter().sum();
        if deg >= 1 {
            terms.push((exps.to_vec(), rng.sample::<f64, _>(StandardNormal)));
        }
    });
    Ok(AmbientPoly::from_terms(nv, terms))
}

fn monomials(e: &mut Vec<u16>, i: usize, budget: u16, f: &mut impl FnMut(&[u16])) {
    if i == e.len() {
        f(e);
        return;
    }
    for k in 0..=budget {
        e[i] = k;
        monomials(e, i + 1, budget - k, f);
    }
    e[i] = 0;
}

/// A grid fine enough to resolve a degree-`lmax` field for sup-norm probes.
pub fn probe_grid(dim: usize, lmax: usize) -> Result<Arc<Grid>> {
    match dim {
        2 => GridSpec::gauss_legendre(2 * lmax + 6, 4 * lmax + 12).build(),
        3 => GridSpec::gauss_legendre_s3(lmax + 4, 2 * lmax + 8).build(),
        d => Err(Error::DimensionUnsupported(d)),
    }
}

/// max over a probe grid of the operator norm of the Riemannian Hessian.
pub fn hessian_sup(poly: &AmbientPoly, dim: usize) -> Result<f64> {
    let g = probe_grid(dim, poly.degree().max(1))?;
    Ok(g.points()
        .iter()
        .map(|p| {
            let jet = poly_jet(poly, p);
            let ev = sym_eigenvalues(&jet.hess);
            ev.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .fold(0.0, f64::max))
}

/// Rescales so that [`hessian_sup`] equals `target`.
pub fn normalize_hessian(poly: &AmbientPoly, dim: usize, target: f64) -> Result<AmbientPoly> {
    let s = hessian_sup(poly, dim)?;
    if s == 0.0 {
        return Ok(poly.clone());
    }
    Ok(poly.scale(target / s))
}

/// Recipe for a seeded random test field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRecipe {
    pub lmax: usize,
    /// sup of the Hessian operator norm after scaling
    pub hessian_scale: f64,
}

impl FieldRecipe {
    pub fn build<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Result<AmbientPoly> {
        normalize_hessian(&random_bandlimited(dim, self.lmax, rng)?, dim, self.hessian_scale)
    }
}

/// Result of the ε-halving protocol.
#[derive(Debug, Clone)]
pub struct ScaledPotential {
    pub field: ScalarField,
    pub epsilon: f64,
    pub certificate: CConcavity,
}

/// Scales `base` by ε = ε₀, ε₀/2, ... until the c-concavity certificate passes.
pub fn scale_until_c_concave(grid: Arc<Grid>, base: &AmbientPoly, eps0: f64) -> Result<ScaledPotential> {
    let mut eps = eps0;
    for _ in 0..MAX_HALVINGS {
        let field = ScalarField::from_poly(grid.clone(), base.scale(eps))?;
        let certificate = check_c_concavity(&field);
        if certificate.certified {
            return Ok(ScaledPotential { field, epsilon: eps, certificate });
        }
        eps *= 0.5;
    }
    Err(Error::NotCConcave(eps))
}

/// A potential U shifted so that e^{−U} dx is a probability measure on `grid`.
pub fn normalized_potential(grid: Arc<Grid>, poly: &AmbientPoly) -> Result<ScalarField> {
    let raw = ScalarField::from_poly(grid.clone(), poly.clone())?;
    let w: Vec<f64> = raw.values().iter().map(|u| (-u).exp()).collect();
    let z = grid.integrate(&w);
    raw.resampled(grid).map(|f| f.add_constant(z.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::field::quadrature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_fields_are_seeded_and_bandlimited() {
        let a = random_bandlimited(2, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = random_bandlimited(2, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.degree() <= 4);
        let c = random_bandlimited(3, 3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(c.nvars(), 4);
        assert!(c.degree() <= 3 && c.num_terms() == 34);
    }

    #[test]
    fn hessian_normalization_hits_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = FieldRecipe { lmax: 3, hessian_scale: 0.7 }.build(2, &mut rng).unwrap();
        assert!((hessian_sup(&p, 2).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn protocol_records_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base = FieldRecipe { lmax: 3, hessian_scale: 1.0 }.build(2, &mut rng).unwrap();
        let g = GridSpec::gauss_legendre(12, 24).build().unwrap();
        let s = scale_until_c_concave(g, &base, DEFAULT_EPSILON).unwrap();
        assert!(s.certificate.certified);
        assert_eq!(s.epsilon, DEFAULT_EPSILON);
        // a very rough base needs halving
        let rough = base.scale(400.0);
        let g = GridSpec::gauss_legendre(12, 24).build().unwrap();
        let s = scale_until_c_concave(g, &rough, DEFAULT_EPSILON).unwrap();
        assert!(s.epsilon < DEFAULT_EPSILON);
    }

    #[test]
    fn normalized_potential_is_a_probability_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = GridSpec::gauss_legendre(10, 20).build().unwrap();
        let u = normalized_potential(g.clone(), &random_bandlimited(2, 3, &mut rng).unwrap()).unwrap();
        let w = ScalarField::from_values(g, u.values().iter().map(|v| (-v).exp()).collect()).unwrap();
        assert!((quadrature(&w) - 1.0).abs() < 1e-13);
    }
}
