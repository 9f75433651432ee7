use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::grid::{Grid, GridSpec};
use super::harmonics;
use super::poly::AmbientPoly;
use crate::error::{Error, Result};
use crate::sphere::{SpherePoint, SymOperator, TangentFrame, TangentVector};

/// Relative residual above which a spherical-harmonic fit of sampled values
/// is rejected as not representing a smooth field.
pub const FIT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    BilinearInAngles,
    #[default]
    SphericalHarmonic,
}

/// Value, Riemannian gradient and Riemannian Hessian at a point, all in
/// ambient coordinates. The Hessian is P(D²f − ⟨x,∇f⟩I)P with P the
/// tangent projector, so it annihilates the normal direction.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl FieldJet {
    /// ⟨Hess f · u, u⟩ for a tangent vector u.
    pub fn hess_form(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.hess * u))
    }
}

/// Riemannian jet of a polynomial restricted to the sphere at `x`.
pub fn poly_jet(poly: &AmbientPoly, x: &DVector<f64>) -> FieldJet {
    let j = poly.jet(x.as_slice());
    let radial = x.dot(&j.grad);
    let grad = &j.grad - x * radial;
    let n = x.len();
    let proj = DMatrix::identity(n, n) - x * x.transpose();
    let mut inner = j.hess;
    for i in 0..n {
        inner[(i, i)] -= radial;
    }
    let hess = &proj * inner * &proj;
    FieldJet { value: j.value, grad, hess: crate::linalg::symmetrize(&hess) }
}

/// A scalar field on a sphere grid.
///
/// Samples are always stored. A field built from a polynomial or from
/// harmonic coefficients also keeps that representation and is
/// differentiated exactly; a field built from samples alone is fitted
/// by spherical-harmonic analysis on first use.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    smooth: Option<Arc<AmbientPoly>>,
    interpolation: Interpolation,
    fitted: Arc<OnceLock<Result<Arc<AmbientPoly>>>>,
}

impl ScalarField {
    pub fn from_poly(grid: Arc<Grid>, poly: AmbientPoly) -> Result<Self> {
        if poly.nvars() != grid.dim() + 1 {
            return Err(Error::DimensionMismatch { expected: grid.dim() + 1, got: poly.nvars() });
        }
        let values = grid.points().iter().map(|p| poly.eval(p.as_slice())).collect();
        Ok(Self {
            grid,
            values,
            smooth: Some(Arc::new(poly)),
            interpolation: Interpolation::SphericalHarmonic,
            fitted: Arc::default(),
        })
    }

    /// Builds Σ c_{lm} Y_{lm} on an S² grid.
    pub fn from_sh_coeffs(grid: Arc<Grid>, lmax: usize, coeffs: &[f64]) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::DimensionUnsupported(grid.dim()));
        }
        if lmax + 1 > grid.spec().n_colat {
            return Err(Error::InvalidInput(format!(
                "bandlimit {lmax} exceeds n_colat - 1 = {}",
                grid.spec().n_colat - 1
            )));
        }
        Self::from_poly(grid, harmonics::synthesize(lmax, coeffs)?)
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite field value {v}")));
        }
        Ok(Self {
            grid,
            values,
            smooth: None,
            interpolation: Interpolation::SphericalHarmonic,
            fitted: Arc::default(),
        })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&DVector<f64>) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(f).collect();
        Self::from_values(grid, values)
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        let nv = grid.dim() + 1;
        Self::from_poly(grid, AmbientPoly::zero(nv)).expect("dimensions agree by construction")
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &GridSpec {
        self.grid.spec()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// The polynomial supplied at construction, if any.
    pub fn poly(&self) -> Option<&AmbientPoly> {
        self.smooth.as_deref()
    }

    /// Smooth representation used for differentiation and off-grid evaluation.
    pub fn representation(&self) -> Result<&AmbientPoly> {
        if let Some(p) = &self.smooth {
            return Ok(p);
        }
        self.fitted.get_or_init(|| self.fit().map(Arc::new)).as_deref().map_err(Clone::clone)
    }

    fn fit(&self) -> Result<AmbientPoly> {
        if self.dim() != 2 {
            return Err(Error::NonSmoothField(format!(
                "sampled fields on S^{} have no spectral fit",
                self.dim()
            )));
        }
        let lmax = harmonics::analysis_degree(&self.grid);
        let coeffs = harmonics::analyze(&self.grid, &self.values, lmax)?;
        let poly = harmonics::synthesize(lmax, &coeffs)?;
        let scale = self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let residual = self
            .grid
            .points()
            .iter()
            .zip(&self.values)
            .map(|(p, v)| (poly.eval(p.as_slice()) - v).abs())
            .fold(0.0, f64::max);
        if residual > FIT_TOLERANCE * scale {
            return Err(Error::NonSmoothField(format!(
                "degree-{lmax} harmonic fit leaves residual {residual:.3e}"
            )));
        }
        Ok(poly)
    }

    /// Field value at an arbitrary point.
    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() + 1 {
            return Err(Error::DimensionMismatch { expected: self.dim() + 1, got: x.len() });
        }
        if let Some(p) = &self.smooth {
            return Ok(p.eval(x.as_slice()));
        }
        match self.interpolation {
            Interpolation::BilinearInAngles => self.grid.interpolate_bilinear(&self.values, x.as_slice()),
            Interpolation::SphericalHarmonic => Ok(self.representation()?.eval(x.as_slice())),
        }
    }

    pub fn eval_at(&self, x: &SpherePoint) -> Result<f64> {
        self.eval(x.coords())
    }

    /// Value, gradient and Hessian at an ambient unit vector.
    pub fn jet(&self, x: &DVector<f64>) -> Result<FieldJet> {
        if x.len() != self.dim() + 1 {
            return Err(Error::DimensionMismatch { expected: self.dim() + 1, got: x.len() });
        }
        Ok(poly_jet(self.representation()?, x))
    }

    /// Riemannian gradient as an ambient tangent vector.
    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let rep = self.representation()?;
        let (_, g) = rep.eval_grad(x.as_slice());
        let radial = x.dot(&g);
        Ok(g - x * radial)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            smooth: self.smooth.as_ref().map(|p| Arc::new(p.scale(s))),
            interpolation: self.interpolation,
            fitted: Arc::default(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
            smooth: self.smooth.as_ref().map(|p| Arc::new(p.add_constant(c))),
            interpolation: self.interpolation,
            fitted: Arc::default(),
        }
    }

    /// The same field resampled on another grid. Needs a smooth representation.
    pub fn resampled(&self, grid: Arc<Grid>) -> Result<Self> {
        let poly = self.representation()?.clone();
        let mut out = Self::from_poly(grid, poly)?;
        out.interpolation = self.interpolation;
        Ok(out)
    }

    /// x ↦ f(Rᵀx), the field moved by the rotation R.
    pub fn rotated(&self, r: &DMatrix<f64>) -> Result<Self> {
        let poly = self.representation()?.compose_linear(&r.transpose());
        Self::from_poly(self.grid.clone(), poly)
    }
}

/// JSON field file: either sampled values on a grid or harmonic coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldFile {
    Samples { grid: GridSpec, values: Vec<f64> },
    Harmonics { lmax: usize, coeffs: Vec<f64> },
}

impl FieldFile {
    /// Harmonic files carry no grid and are sampled on `default_grid`.
    pub fn into_field(self, default_grid: &GridSpec) -> Result<ScalarField> {
        match self {
            FieldFile::Samples { grid, values } => ScalarField::from_values(grid.build()?, values),
            FieldFile::Harmonics { lmax, coeffs } => {
                ScalarField::from_sh_coeffs(default_grid.build()?, lmax, &coeffs)
            }
        }
    }

    pub fn from_field(field: &ScalarField) -> Self {
        FieldFile::Samples { grid: *field.spec(), values: field.values().to_vec() }
    }
}

/// ∫ f dx over the normalized measure.
pub fn quadrature(field: &ScalarField) -> f64 {
    field.grid.integrate(&field.values)
}

pub fn gradient_field(f: &ScalarField, x: &SpherePoint) -> Result<TangentVector> {
    Ok(TangentVector::projected(x.clone(), &f.grad(x.coords())?))
}

pub fn hessian_field(f: &ScalarField, x: &SpherePoint, frame: &TangentFrame) -> Result<SymOperator> {
    if (frame.base().coords() - x.coords()).amax() > 1e-12 {
        return Err(Error::BaseMismatch);
    }
    let jet = f.jet(x.coords())?;
    SymOperator::new(frame.clone(), crate::linalg::symmetrize(&frame.restrict(&jet.hess)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::exp_map;

    fn grid() -> Arc<Grid> {
        GridSpec::gauss_legendre(12, 24).build().unwrap()
    }

    fn sample_poly() -> AmbientPoly {
        // x y + 0.3 z³ − 0.5 x
        AmbientPoly::from_terms(
            3,
            [(vec![1, 1, 0], 1.0), (vec![0, 0, 3], 0.3), (vec![1, 0, 0], -0.5)],
        )
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let f = ScalarField::zero(grid()).add_constant(2.5);
        let x = SpherePoint::from_slice(&[0.0, 0.6, 0.8]).unwrap();
        assert_eq!(gradient_field(&f, &x).unwrap().norm(), 0.0);
        let h = hessian_field(&f, &x, &TangentFrame::standard(x.clone())).unwrap();
        assert_eq!(h.hs_norm_sq(), 0.0);
        assert!((quadrature(&f) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn gradient_of_height_at_equator() {
        let f = ScalarField::from_poly(grid(), AmbientPoly::var(3, 2)).unwrap();
        let x = SpherePoint::from_slice(&[1.0, 0.0, 0.0]).unwrap();
        let g = gradient_field(&f, &x).unwrap();
        assert!((g.vec() - DVector::from_vec(vec![0.0, 0.0, 1.0])).amax() < 1e-15);
    }

    #[test]
    fn hessian_matches_geodesic_second_differences() {
        let f = ScalarField::from_poly(grid(), sample_poly()).unwrap();
        let x = SpherePoint::normalize(DVector::from_vec(vec![0.3, -0.4, 0.5])).unwrap();
        let frame = TangentFrame::standard(x.clone());
        let h = hessian_field(&f, &x, &frame).unwrap();
        let step = 1e-3;
        let f0 = f.eval_at(&x).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let e = &frame.axes()[a] + &frame.axes()[b];
                let e = if a == b { frame.axes()[a].clone() } else { e / 2f64.sqrt() };
                let at = |s: f64| {
                    let tau = TangentVector::new(x.clone(), &e * s).unwrap();
                    f.eval_at(&exp_map(&x, &tau).unwrap()).unwrap()
                };
                let second = (at(step) - 2.0 * f0 + at(-step)) / (step * step);
                assert!((second - h.quadratic_form(&e)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn gradient_is_shift_invariant() {
        let f = ScalarField::from_poly(grid(), sample_poly()).unwrap();
        let g = f.add_constant(7.0);
        let x = SpherePoint::normalize(DVector::from_vec(vec![0.1, 0.9, -0.2])).unwrap();
        assert_eq!(gradient_field(&f, &x).unwrap().vec(), gradient_field(&g, &x).unwrap().vec());
    }

    #[test]
    fn homogeneous_extension_identity() {
        // For the degree-0 extension f̂(x) = f(x/|x|): D²f̂(x) x = −∇f(x).
        let f = ScalarField::from_poly(grid(), sample_poly()).unwrap();
        let x = DVector::from_vec(vec![0.48, 0.6, 0.64]);
        let h = 1e-5;
        let grad_hat = |p: &DVector<f64>| -> DVector<f64> {
            let r = p.norm();
            f.grad(&(p / r)).unwrap() / r
        };
        let along = (grad_hat(&(&x * (1.0 + h))) - grad_hat(&(&x * (1.0 - h)))) / (2.0 * h);
        let g = f.grad(&x).unwrap();
        assert!((along + g).amax() < 1e-8);
    }

    #[test]
    fn sampled_field_is_fitted_spectrally() {
        let g = GridSpec::gauss_legendre(10, 20).build().unwrap();
        let exact = ScalarField::from_poly(g.clone(), sample_poly()).unwrap();
        let sampled = ScalarField::from_values(g, exact.values().to_vec()).unwrap();
        let x = DVector::from_vec(vec![0.2, 0.3, -0.6]).normalize();
        let a = exact.jet(&x).unwrap();
        let b = sampled.jet(&x).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        assert!((a.hess - b.hess).amax() < 1e-10);
    }

    #[test]
    fn rough_samples_are_rejected() {
        let g = GridSpec::gauss_legendre(6, 12).build().unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let f = ScalarField::from_values(g, vals).unwrap();
        let x = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert!(matches!(f.jet(&x), Err(Error::NonSmoothField(_))));
        assert!(f.clone().with_interpolation(Interpolation::BilinearInAngles).eval(&x).is_ok());
    }

    #[test]
    fn field_file_roundtrip() {
        let f = ScalarField::from_poly(grid(), sample_poly()).unwrap();
        let json = serde_json::to_string(&FieldFile::from_field(&f)).unwrap();
        let back: FieldFile = serde_json::from_str(&json).unwrap();
        let g = back.into_field(f.spec()).unwrap();
        assert_eq!(g.values(), f.values());
        let coeffs: FieldFile = serde_json::from_str(r#"{"lmax":1,"coeffs":[0,0,1,0]}"#).unwrap();
        let h = coeffs.into_field(&GridSpec::gauss_legendre(4, 8)).unwrap();
        let z = h.grid().points()[0][2];
        assert!((h.values()[0] - 3f64.sqrt() * z).abs() < 1e-15);
    }
}
