//! The W₁ bound through the Green's function of S².
//!
//! Measures enter as mixtures of normalized indicator caps so that the
//! potential G(μ − ν) has a closed-form, Lipschitz gradient. Integrals
//! against area measure carry the factor 4π over the normalized grid
//! quadrature.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measure::DiscreteMeasure;
use super::{wasserstein_p, Method};
use crate::error::{Error, Result};
use crate::fields::{harmonics, poly_jet, GridSpec, ScalarField};
use crate::numeric::{compensated_sum, gauss_legendre};
use crate::sphere::{exp_ambient, SpherePoint, TangentFrame};

/// Default cap radius in grid cells.
pub const CAP_CELLS: f64 = 3.0;

const LP_POINTS: usize = 2000;
const DENSITY_LP_GRID: (usize, usize) = (30, 60);

/// A mixture of normalized indicator caps of common angular radius.
#[derive(Debug, Clone, PartialEq)]
pub struct CapMeasure {
    pub centers: Vec<SpherePoint>,
    pub weights: Vec<f64>,
    pub radius: f64,
}

/// Replaces every atom of `mu` by a cap of `CAP_CELLS` grid spacings.
pub fn mollify(mu: &DiscreteMeasure, spec: &GridSpec) -> Result<CapMeasure> {
    if mu.dim() != 2 {
        return Err(Error::DimensionUnsupported(mu.dim()));
    }
    Ok(CapMeasure {
        centers: mu.points().to_vec(),
        weights: mu.weights().to_vec(),
        radius: CAP_CELLS * spec.spacing(),
    })
}

/// ∇ of the potential ∫ G(x, y) dσ(y) for σ the normalized cap of radius
/// `a` about `c`, in ambient coordinates.
pub fn cap_green_gradient(x: &DVector<f64>, c: &DVector<f64>, a: f64) -> DVector<f64> {
    let omc = 0.5 * (x - c).norm_squared();
    let cos_r = 1.0 - omc;
    let omc_a = 2.0 * (0.5 * a).sin().powi(2);
    // [(1 − cos r)/2 − M(r)] / sin² r with M the cap mass inside radius r
    let g = if omc <= omc_a {
        (0.5 - 1.0 / omc_a) / (2.0 - omc)
    } else if omc > 0.0 {
        -0.5 / omc
    } else {
        0.0
    };
    (c - x * cos_r) * (-g / (2.0 * PI))
}

impl CapMeasure {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// ∇G(σ) at `x`.
    pub fn green_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        for (c, w) in self.centers.iter().zip(&self.weights) {
            out += cap_green_gradient(x, c.coords(), self.radius) * *w;
        }
        out
    }

    fn frames(&self) -> Vec<TangentFrame> {
        self.centers.iter().map(|c| TangentFrame::standard(c.clone())).collect()
    }

    /// ∫ f dσ by Gauss–Legendre in the radius and the trapezoid rule in angle.
    pub fn integrate(&self, f: impl Fn(&DVector<f64>) -> f64 + Sync) -> f64 {
        let (nodes, wts) = gauss_legendre(24);
        let n_ang = 96;
        let a = self.radius;
        let norm = 1.0 - a.cos();
        let per_cap: Vec<f64> = self
            .frames()
            .par_iter()
            .zip(&self.weights)
            .map(|(frame, w)| {
                let c = frame.base().coords();
                let ax = frame.axes();
                let mut terms = Vec::with_capacity(nodes.len() * n_ang);
                for (t, wt) in nodes.iter().zip(&wts) {
                    let r = 0.5 * a * (t + 1.0);
                    let radial = 0.5 * a * wt * r.sin() / norm / n_ang as f64;
                    for k in 0..n_ang {
                        let (s, co) = (2.0 * PI * k as f64 / n_ang as f64).sin_cos();
                        let v = (&ax[0] * co + &ax[1] * s) * r;
                        terms.push(radial * f(&exp_ambient(c, &v)));
                    }
                }
                w * compensated_sum(terms)
            })
            .collect();
        compensated_sum(per_cap)
    }

    /// Point masses at polar cell centers carrying the exact cell masses,
    /// with an upper bound on W₁ to the continuous caps.
    pub fn discretize(&self, n_r: usize, n_ang: usize) -> Result<(DiscreteMeasure, f64)> {
        let a = self.radius;
        let dr = a / n_r as f64;
        let dphi = 2.0 * PI / n_ang as f64;
        let norm = 1.0 - a.cos();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut bound = 0.0;
        for (frame, w) in self.frames().iter().zip(&self.weights) {
            let c = frame.base().coords();
            let ax = frame.axes();
            for i in 0..n_r {
                let (lo, hi) = (i as f64 * dr, (i + 1) as f64 * dr);
                let rm = 0.5 * (lo + hi);
                let mass = w * (lo.cos() - hi.cos()) / norm / n_ang as f64;
                bound += n_ang as f64 * mass * (0.5 * dr + hi.sin() * 0.5 * dphi);
                for k in 0..n_ang {
                    let (s, co) = ((k as f64 + 0.5) * dphi).sin_cos();
                    let v = (&ax[0] * co + &ax[1] * s) * rm;
                    points.push(SpherePoint::normalize(exp_ambient(c, &v))?);
                    weights.push(mass);
                }
            }
        }
        Ok((DiscreteMeasure::normalized(points, weights)?, bound))
    }
}

/// Both sides of W₁(μ,ν) ≤ ∫ ‖∇G(μ − ν)‖ dx.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenBound {
    /// W₁ between the discretized measures
    pub lhs: f64,
    /// bound on |lhs − W₁| from the discretization
    pub discretization: f64,
    pub rhs: f64,
    /// mollification radius, 0 for density input
    pub cap_radius: f64,
}

impl GreenBound {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs + self.discretization <= self.rhs + tol
    }
}

fn rhs_on_grid(spec: &GridSpec, grad: impl Fn(&DVector<f64>) -> DVector<f64> + Sync) -> Result<f64> {
    let grid = spec.build()?;
    let vals: Vec<f64> = grid.points().par_iter().map(|x| grad(x).norm()).collect();
    Ok(4.0 * PI * grid.integrate(&vals))
}

/// The bound for atomic μ, ν mollified onto `spec`.
pub fn green_w1_bound(mu: &DiscreteMeasure, nu: &DiscreteMeasure, spec: &GridSpec) -> Result<GreenBound> {
    if spec.dim != 2 {
        return Err(Error::DimensionUnsupported(spec.dim));
    }
    let cm = mollify(mu, spec)?;
    let cn = mollify(nu, spec)?;
    let rhs = rhs_on_grid(spec, |x| cm.green_gradient(x) - cn.green_gradient(x))?;
    let per_atom = LP_POINTS / cm.len().max(cn.len());
    let (n_r, n_ang) = polar_resolution(per_atom);
    let (dm, bm) = cm.discretize(n_r, n_ang)?;
    let (dn, bn) = cn.discretize(n_r, n_ang)?;
    let lhs = wasserstein_p(&dm, &dn, 1.0, Method::ExactLp)?.distance;
    let discretization = if dm == dn { 0.0 } else { bm + bn };
    Ok(GreenBound { lhs, discretization, rhs, cap_radius: cm.radius })
}

fn polar_resolution(budget: usize) -> (usize, usize) {
    // four angular cells per radial ring
    let n_r = ((budget as f64 / 4.0).sqrt() as usize).clamp(1, 8);
    let n_ang = (budget / n_r).clamp(4, 32);
    (n_r, n_ang)
}

/// G(μ − ν) for densities against the normalized measure, by spectral
/// inversion of Δu = −(v_μ − v_ν)/(4π).
fn density_potential(v_mu: &ScalarField, v_nu: &ScalarField) -> Result<crate::fields::AmbientPoly> {
    let rho = v_mu.representation()?.add(&v_nu.representation()?.scale(-1.0));
    let lmax = rho.degree().max(1);
    let grid = GridSpec::gauss_legendre(lmax + 1, 2 * lmax + 2).build()?;
    let vals: Vec<f64> = grid.points().iter().map(|p| rho.eval(p.as_slice())).collect();
    let mut coeffs = harmonics::analyze(&grid, &vals, lmax)?;
    coeffs[0] = 0.0;
    for l in 1..=lmax {
        for m in -(l as i64)..=(l as i64) {
            coeffs[harmonics::coeff_index(l, m)] /= 4.0 * PI * (l * (l + 1)) as f64;
        }
    }
    harmonics::synthesize(lmax, &coeffs)
}

/// The bound for smooth densities on S² relative to the normalized measure.
/// The left side is exact W₁ between quadrature discretizations.
pub fn green_w1_bound_densities(v_mu: &ScalarField, v_nu: &ScalarField) -> Result<GreenBound> {
    if v_mu.dim() != 2 || v_nu.dim() != 2 {
        return Err(Error::DimensionUnsupported(v_mu.dim().max(v_nu.dim())));
    }
    let u = density_potential(v_mu, v_nu)?;
    let rhs = rhs_on_grid(v_mu.spec(), |x| poly_jet(&u, x).grad)?;
    let lp = GridSpec::gauss_legendre(DENSITY_LP_GRID.0, DENSITY_LP_GRID.1).build()?;
    let dm = DiscreteMeasure::from_density(&v_mu.resampled(lp.clone())?)?;
    let dn = DiscreteMeasure::from_density(&v_nu.resampled(lp)?)?;
    let lhs = wasserstein_p(&dm, &dn, 1.0, Method::ExactLp)?.distance;
    Ok(GreenBound { lhs, discretization: 0.0, rhs, cap_radius: 0.0 })
}

/// ∫ φ d(μ − ν) − ∫ ⟨∇φ, ∇G(μ − ν)⟩ dA for mollified μ, ν; zero in exact
/// arithmetic since Δ G(μ − ν) = −(μ − ν).
pub fn duality_residual(mu: &DiscreteMeasure, nu: &DiscreteMeasure, phi: &ScalarField, spec: &GridSpec) -> Result<f64> {
    let cm = mollify(mu, spec)?;
    let cn = mollify(nu, spec)?;
    let poly = phi.representation()?;
    let direct = cm.integrate(|x| poly.eval(x.as_slice())) - cn.integrate(|x| poly.eval(x.as_slice()));
    let grid = spec.build()?;
    let vals: Vec<f64> = grid
        .points()
        .par_iter()
        .map(|x| poly_jet(poly, x).grad.dot(&(cm.green_gradient(x) - cn.green_gradient(x))))
        .collect();
    Ok(direct - 4.0 * PI * grid.integrate(&vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::AmbientPoly;
    use crate::sphere::green_gradient;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cap_gradient_outside_matches_point_mass() {
        let c = SpherePoint::from_slice(&[0.0, 0.6, 0.8]).unwrap();
        let x = DVector::from_vec(vec![0.48, 0.0, 0.6]).normalize();
        let g = cap_green_gradient(&x, c.coords(), 0.05);
        let p = green_gradient(&SpherePoint::from_ambient(x.clone()), &c).unwrap();
        assert!((g - p.vec()).norm() < 1e-14);
    }

    #[test]
    fn cap_gradient_is_continuous_at_the_rim() {
        let c = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let a = 0.1f64;
        let at = |r: f64| DVector::from_vec(vec![r.sin(), 0.0, r.cos()]);
        let inside = cap_green_gradient(&at(a - 1e-9), &c, a);
        let outside = cap_green_gradient(&at(a + 1e-9), &c, a);
        assert!((inside - outside).norm() < 1e-6);
        assert!(cap_green_gradient(&c, &c, a).norm() == 0.0);
    }

    #[test]
    fn cap_integration_is_normalized() {
        let cm = CapMeasure {
            centers: vec![SpherePoint::north_pole(2)],
            weights: vec![1.0],
            radius: 0.2,
        };
        assert!((cm.integrate(|_| 1.0) - 1.0).abs() < 1e-13);
        // mean height of a cap: (1 + cos a)/2
        assert!((cm.integrate(|x| x[2]) - 0.5 * (1.0 + 0.2f64.cos())).abs() < 1e-13);
        let (d, b) = cm.discretize(4, 16).unwrap();
        assert_eq!(d.len(), 64);
        assert!(b > 0.0 && b < 0.2);
    }

    #[test]
    fn identical_measures_give_zero() {
        let mu = DiscreteMeasure::random(2, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = green_w1_bound(&mu, &mu, &GridSpec::gauss_legendre(32, 64)).unwrap();
        assert_eq!((b.lhs, b.rhs), (0.0, 0.0));
    }

    #[test]
    fn bound_holds_for_separated_caps() {
        let mu = DiscreteMeasure::dirac(SpherePoint::north_pole(2));
        let nu = DiscreteMeasure::dirac(SpherePoint::from_slice(&[1.0, 0.0, 0.0]).unwrap());
        let b = green_w1_bound(&mu, &nu, &GridSpec::gauss_legendre(64, 128)).unwrap();
        assert!((b.lhs - PI / 2.0).abs() < 0.01);
        assert!(b.holds(0.0), "{b:?}");
    }

    #[test]
    fn spectral_potential_inverts_laplacian() {
        let g = GridSpec::gauss_legendre(12, 24).build().unwrap();
        let z = AmbientPoly::var(3, 2);
        let v_mu = ScalarField::from_poly(g.clone(), z.scale(0.5).add_constant(1.0)).unwrap();
        let v_nu = ScalarField::from_poly(g, AmbientPoly::constant(3, 1.0)).unwrap();
        let u = density_potential(&v_mu, &v_nu).unwrap();
        // Δ(z) = −2z, so u = z/(16π)
        let p = [0.3, -0.2, 0.9f64.sqrt() * (0.87f64).sqrt()];
        let q = DVector::from_column_slice(&p).normalize();
        assert!((u.eval(q.as_slice()) - q[2] / (16.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn rejects_other_dimensions() {
        let mu = DiscreteMeasure::dirac(SpherePoint::north_pole(3));
        assert!(matches!(
            green_w1_bound(&mu, &mu, &GridSpec::gauss_legendre(8, 16)),
            Err(Error::DimensionUnsupported(3))
        ));
    }
}
