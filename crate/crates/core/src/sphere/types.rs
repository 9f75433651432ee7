use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

const UNIT_TOL: f64 = 1e-12;
const TANGENT_TOL: f64 = 1e-12;
const GRAM_TOL: f64 = 1e-10;
const SYM_TOL: f64 = 1e-12;

/// A point of the unit sphere Sⁿ ⊂ Rⁿ⁺¹.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: DVector<f64>,
}

impl SpherePoint {
    /// Validates that `coords` has unit norm.
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(Error::DimensionUnsupported(coords.len().saturating_sub(1)));
        }
        let n = coords.norm();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit(n));
        }
        Ok(Self { coords })
    }

    /// Projects a nonzero vector radially onto the sphere.
    pub fn normalize(v: DVector<f64>) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotUnit(n));
        }
        Self::new(v / n)
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(v))
    }

    /// Unchecked constructor for internal hot loops; renormalizes.
    pub(crate) fn from_ambient(v: DVector<f64>) -> Self {
        let n = v.norm();
        Self { coords: v / n }
    }

    /// The pole e_{n+1} of Sⁿ.
    pub fn north_pole(dim: usize) -> Self {
        let mut v = DVector::zeros(dim + 1);
        v[dim] = 1.0;
        Self { coords: v }
    }

    /// Intrinsic dimension n.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.coords.dot(&other.coords)
    }

    /// The orthogonal projection of an ambient vector onto the tangent space.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.coords * self.coords.dot(v)
    }

    pub(crate) fn approx_eq(&self, other: &SpherePoint, tol: f64) -> bool {
        self.coords.len() == other.coords.len() && (&self.coords - &other.coords).amax() <= tol
    }
}

/// A vector in the tangent space T_x Sⁿ, held in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: SpherePoint,
    vec: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: SpherePoint, vec: DVector<f64>) -> Result<Self> {
        if vec.len() != base.coords.len() {
            return Err(Error::DimensionMismatch { expected: base.coords.len(), got: vec.len() });
        }
        let ip = base.coords.dot(&vec);
        if ip.abs() > TANGENT_TOL * vec.norm().max(1.0) {
            return Err(Error::NotTangent(ip));
        }
        Ok(Self { base, vec })
    }

    /// Tangent projection of an arbitrary ambient vector.
    pub fn projected(base: SpherePoint, v: &DVector<f64>) -> Self {
        let vec = base.project(v);
        Self { base, vec }
    }

    pub fn zero(base: SpherePoint) -> Self {
        let vec = DVector::zeros(base.coords.len());
        Self { base, vec }
    }

    pub(crate) fn from_parts(base: SpherePoint, vec: DVector<f64>) -> Self {
        Self { base, vec }
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn vec(&self) -> &DVector<f64> {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { base: self.base.clone(), vec: &self.vec * s }
    }
}

/// An orthonormal basis of T_x Sⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    base: SpherePoint,
    axes: Vec<DVector<f64>>,
}

impl TangentFrame {
    /// Validates orthonormality and tangency of the axes.
    pub fn new(base: SpherePoint, axes: Vec<DVector<f64>>) -> Result<Self> {
        let n = base.dim();
        if axes.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: axes.len() });
        }
        for (i, a) in axes.iter().enumerate() {
            if a.len() != n + 1 {
                return Err(Error::DimensionMismatch { expected: n + 1, got: a.len() });
            }
            let ip = a.dot(base.coords());
            if ip.abs() > GRAM_TOL {
                return Err(Error::NotTangent(ip));
            }
            for (j, b) in axes.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                if (a.dot(b) - e).abs() > GRAM_TOL {
                    return Err(Error::InvalidInput(format!(
                        "frame axes {i} and {j} are not orthonormal"
                    )));
                }
            }
        }
        Ok(Self { base, axes })
    }

    /// A frame whose first axis is `direction / ‖direction‖`.
    ///
    /// On S² the second axis is `x × direction/‖direction‖`; in higher
    /// dimensions the remaining axes come from Gram–Schmidt. A zero direction
    /// yields [`TangentFrame::standard`].
    pub fn from_direction(base: SpherePoint, direction: &DVector<f64>) -> Self {
        let d = base.project(direction);
        let norm = d.norm();
        if norm < 1e-300 {
            return Self::standard(base);
        }
        let e1 = d / norm;
        let axes = if base.dim() == 2 {
            let x = base.coords();
            let cross = DVector::from_vec(vec![
                x[1] * e1[2] - x[2] * e1[1],
                x[2] * e1[0] - x[0] * e1[2],
                x[0] * e1[1] - x[1] * e1[0],
            ]);
            vec![e1, cross]
        } else {
            let rest = linalg::gram_schmidt_complete(
                &[base.coords().clone(), e1.clone()],
                &[],
                base.dim() - 1,
            );
            std::iter::once(e1).chain(rest).collect()
        };
        Self { base, axes }
    }

    /// Gram–Schmidt frame seeded from the ambient standard basis.
    pub fn standard(base: SpherePoint) -> Self {
        let axes = linalg::gram_schmidt_complete(std::slice::from_ref(base.coords()), &[], base.dim());
        Self { base, axes }
    }

    /// Gram–Schmidt frame seeded from the given ambient vectors.
    pub fn from_seeds(base: SpherePoint, seeds: &[DVector<f64>]) -> Self {
        let axes = linalg::gram_schmidt_complete(std::slice::from_ref(base.coords()), seeds, base.dim());
        Self { base, axes }
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn axes(&self) -> &[DVector<f64>] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Components of an ambient vector along the axes.
    pub fn components(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.axes.len(), self.axes.iter().map(|a| a.dot(v)))
    }

    /// The ambient vector with the given frame components.
    pub fn to_ambient(&self, c: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.base.coords().len());
        for (a, ci) in self.axes.iter().zip(c.iter()) {
            v.axpy(*ci, a, 1.0);
        }
        v
    }

    /// (n+1)×n matrix whose columns are the axes.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.axes)
    }

    /// Restricts an ambient bilinear form to the frame: Eᵀ M E.
    pub fn restrict(&self, ambient: &DMatrix<f64>) -> DMatrix<f64> {
        let e = self.matrix();
        e.transpose() * ambient * e
    }
}

/// A symmetric operator on T_x Sⁿ, stored as its matrix in a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SymOperator {
    frame: TangentFrame,
    matrix: DMatrix<f64>,
}

impl SymOperator {
    pub fn new(frame: TangentFrame, matrix: DMatrix<f64>) -> Result<Self> {
        let n = frame.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.nrows() });
        }
        let asym = linalg::asymmetry(&matrix);
        if asym > SYM_TOL * matrix.amax().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { frame, matrix: linalg::symmetrize(&matrix) })
    }

    pub fn identity(frame: TangentFrame) -> Self {
        let n = frame.dim();
        Self { frame, matrix: DMatrix::identity(n, n) }
    }

    pub(crate) fn from_parts(frame: TangentFrame, matrix: DMatrix<f64>) -> Self {
        Self { frame, matrix }
    }

    pub fn frame(&self) -> &TangentFrame {
        &self.frame
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::sym_eigenvalues(&self.matrix)
    }

    /// ⟨M v, v⟩ for an ambient tangent vector v.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        let c = self.frame.components(v);
        (&self.matrix * &c).dot(&c)
    }

    /// The same operator expressed in another frame at the same base point.
    pub fn in_frame(&self, other: &TangentFrame) -> Self {
        // change of basis B_ab = ⟨e_a, f_b⟩
        let b = DMatrix::from_fn(self.frame.dim(), other.dim(), |a, bb| {
            self.frame.axes()[a].dot(&other.axes()[bb])
        });
        let m = b.transpose() * &self.matrix * b;
        Self { frame: other.clone(), matrix: linalg::symmetrize(&m) }
    }

    /// Hilbert–Schmidt norm squared (frame independent).
    pub fn hs_norm_sq(&self) -> f64 {
        linalg::hs_norm_sq(&self.matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_unit_points() {
        assert!(matches!(SpherePoint::from_slice(&[1.0, 1.0, 0.0]), Err(Error::NotUnit(_))));
        assert!(SpherePoint::from_slice(&[0.0, 0.6, 0.8]).is_ok());
    }

    #[test]
    fn rejects_non_tangent_vectors() {
        let x = SpherePoint::north_pole(2);
        let bad = DVector::from_vec(vec![0.0, 0.0, 0.1]);
        assert!(matches!(TangentVector::new(x.clone(), bad), Err(Error::NotTangent(_))));
        let good = DVector::from_vec(vec![0.3, 0.0, 0.0]);
        assert!(TangentVector::new(x, good).is_ok());
    }

    #[test]
    fn direction_frame_on_s2_uses_cross_product() {
        let x = SpherePoint::from_slice(&[1.0, 0.0, 0.0]).unwrap();
        let g = DVector::from_vec(vec![0.0, 2.0, 0.0]);
        let f = TangentFrame::from_direction(x.clone(), &g);
        assert_eq!(f.axes()[0], DVector::from_vec(vec![0.0, 1.0, 0.0]));
        assert_eq!(f.axes()[1], DVector::from_vec(vec![0.0, 0.0, 1.0]));
        assert!(TangentFrame::new(x, f.axes().to_vec()).is_ok());
    }

    #[test]
    fn direction_frame_in_higher_dimension_is_orthonormal() {
        let x = SpherePoint::normalize(DVector::from_vec(vec![0.2, -0.4, 0.1, 0.7, 0.3, 0.1])).unwrap();
        let g = x.project(&DVector::from_vec(vec![1.0, 0.5, -0.3, 0.0, 0.2, 0.9]));
        let f = TangentFrame::from_direction(x.clone(), &g);
        assert!((f.axes()[0].dot(&g) - g.norm()).abs() < 1e-14);
        assert!(TangentFrame::new(x, f.axes().to_vec()).is_ok());
    }

    #[test]
    fn operator_change_of_frame_preserves_invariants() {
        let x = SpherePoint::north_pole(3);
        let f1 = TangentFrame::standard(x.clone());
        let g = DVector::from_vec(vec![0.3, -1.0, 0.5, 0.0]);
        let f2 = TangentFrame::from_direction(x, &g);
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, -0.3, 0.1, -0.3, 0.7]);
        let op = SymOperator::new(f1, m).unwrap();
        let op2 = op.in_frame(&f2);
        assert!((op.trace() - op2.trace()).abs() < 1e-13);
        assert!((op.hs_norm_sq() - op2.hs_norm_sq()).abs() < 1e-13);
        let v = DVector::from_vec(vec![0.2, 0.1, -0.4, 0.0]);
        assert!((op.quadratic_form(&v) - op2.quadratic_form(&v)).abs() < 1e-13);
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        let f = TangentFrame::standard(SpherePoint::north_pole(2));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SymOperator::new(f, m), Err(Error::NotSymmetric(_))));
    }
}
