use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField};
use crate::numeric::compensated_sum;
use crate::sphere::{random_point, SpherePoint};

/// Weights must sum to one within this.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Marginals of a returned plan match within this.
pub const PLAN_TOLERANCE: f64 = 1e-9;

/// A weighted point cloud on Sⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<SpherePoint>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<SpherePoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty measure".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: weights.len() });
        }
        let dim = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::NotADensity(format!("weight {w}")));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NotADensity(format!("total mass {total}")));
        }
        Ok(Self { points, weights })
    }

    /// Rescales nonnegative `weights` to unit mass first.
    pub fn normalized(points: Vec<SpherePoint>, mut weights: Vec<f64>) -> Result<Self> {
        let total = compensated_sum(weights.iter().copied());
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NotADensity(format!("total mass {total}")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(points, weights)
    }

    pub fn dirac(x: SpherePoint) -> Self {
        Self { points: vec![x], weights: vec![1.0] }
    }

    pub fn uniform(points: Vec<SpherePoint>) -> Result<Self> {
        let n = points.len();
        Self::normalized(points, vec![1.0; n])
    }

    /// `n` independent uniform points with Dirichlet(1) weights.
    pub fn random<R: Rng + ?Sized>(dim: usize, n: usize, rng: &mut R) -> Result<Self> {
        let points = (0..n).map(|_| random_point(dim, rng)).collect();
        let weights = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        Self::normalized(points, weights)
    }

    /// Grid points weighted by quadrature weights.
    pub fn from_grid(grid: &Grid) -> Self {
        let points = grid.points().iter().map(|p| SpherePoint::from_ambient(p.clone())).collect();
        Self { points, weights: grid.weights().to_vec() }
    }

    /// Grid points weighted by quadrature weight times `density`.
    pub fn from_density(density: &ScalarField) -> Result<Self> {
        let grid = density.grid();
        let points = grid.points().iter().map(|p| SpherePoint::from_ambient(p.clone())).collect();
        let weights = grid.weights().iter().zip(density.values()).map(|(w, v)| w * v).collect();
        Self::normalized(points, weights)
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫ f dμ with compensated summation.
    pub fn integrate(&self, f: impl Fn(&SpherePoint) -> f64) -> f64 {
        compensated_sum(self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)))
    }

    /// The measure with every point replaced by R·x.
    pub fn rotated(&self, r: &DMatrix<f64>) -> Result<Self> {
        let points =
            self.points.iter().map(|p| SpherePoint::normalize(r * p.coords())).collect::<Result<_>>()?;
        Ok(Self { points, weights: self.weights.clone() })
    }

    pub(crate) fn with_points(&self, points: Vec<SpherePoint>) -> Self {
        debug_assert_eq!(points.len(), self.weights.len());
        Self { points, weights: self.weights.clone() }
    }
}

/// JSON form `{ "dim": n, "points": [[...], ...], "weights": [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl MeasureFile {
    pub fn from_measure(mu: &DiscreteMeasure) -> Self {
        Self {
            dim: mu.dim(),
            points: mu.points.iter().map(|p| p.coords().iter().copied().collect()).collect(),
            weights: mu.weights.clone(),
        }
    }

    pub fn into_measure(self) -> Result<DiscreteMeasure> {
        let points = self
            .points
            .iter()
            .map(|c| {
                if c.len() != self.dim + 1 {
                    return Err(Error::DimensionMismatch { expected: self.dim + 1, got: c.len() });
                }
                SpherePoint::new(DVector::from_column_slice(c))
            })
            .collect::<Result<Vec<_>>>()?;
        DiscreteMeasure::new(points, self.weights)
    }
}

/// A coupling between two discrete measures.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    pub coupling: DMatrix<f64>,
}

impl TransportPlan {
    pub fn new(source: DiscreteMeasure, target: DiscreteMeasure, coupling: DMatrix<f64>) -> Result<Self> {
        if coupling.nrows() != source.len() || coupling.ncols() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: source.len() * target.len(),
                got: coupling.len(),
            });
        }
        if let Some(m) = coupling.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::InvalidInput(format!("coupling entry {m}")));
        }
        Ok(Self { source, target, coupling })
    }

    /// The product coupling μ ⊗ ν.
    pub fn independent(source: DiscreteMeasure, target: DiscreteMeasure) -> Self {
        let a = DVector::from_column_slice(source.weights());
        let b = DVector::from_column_slice(target.weights());
        let coupling = &a * b.transpose();
        Self { source, target, coupling }
    }

    /// Largest deviation of a row or column sum from its marginal.
    pub fn marginal_violation(&self) -> f64 {
        let rows = (0..self.coupling.nrows())
            .map(|i| (compensated_sum(self.coupling.row(i).iter().copied()) - self.source.weights[i]).abs());
        let cols = (0..self.coupling.ncols())
            .map(|j| (compensated_sum(self.coupling.column(j).iter().copied()) - self.target.weights[j]).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    pub fn is_feasible(&self) -> bool {
        self.marginal_violation() <= PLAN_TOLERANCE
    }

    /// Σ π_ij c(x_i, y_j).
    pub fn cost(&self, c: impl Fn(&SpherePoint, &SpherePoint) -> f64) -> f64 {
        let mut terms = Vec::new();
        for (i, x) in self.source.points.iter().enumerate() {
            for (j, y) in self.target.points.iter().enumerate() {
                let m = self.coupling[(i, j)];
                if m != 0.0 {
                    terms.push(m * c(x, y));
                }
            }
        }
        compensated_sum(terms)
    }

    /// Nonzero entries as `i,j,mass` lines under a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,mass\n");
        for i in 0..self.coupling.nrows() {
            for j in 0..self.coupling.ncols() {
                let m = self.coupling[(i, j)];
                if m > 0.0 {
                    let _ = writeln!(out, "{i},{j},{m:e}");
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weights_are_validated() {
        let p = SpherePoint::north_pole(2);
        assert!(DiscreteMeasure::new(vec![p.clone()], vec![0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![p.clone(), p.clone()], vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![p.clone(), SpherePoint::north_pole(3)], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::normalized(vec![p.clone(), p], vec![2.0, 6.0]).is_ok());
    }

    #[test]
    fn measure_file_roundtrip() {
        let mu = DiscreteMeasure::random(3, 5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let json = serde_json::to_string(&MeasureFile::from_measure(&mu)).unwrap();
        let back = serde_json::from_str::<MeasureFile>(&json).unwrap().into_measure().unwrap();
        assert_eq!(back, mu);
        let bad = r#"{"dim":2,"points":[[1,0,0,0]],"weights":[1]}"#;
        assert!(serde_json::from_str::<MeasureFile>(bad).unwrap().into_measure().is_err());
    }

    #[test]
    fn product_plan_is_feasible_and_exports() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DiscreteMeasure::random(2, 3, &mut rng).unwrap();
        let b = DiscreteMeasure::random(2, 2, &mut rng).unwrap();
        let plan = TransportPlan::independent(a, b);
        assert!(plan.is_feasible());
        let csv = plan.to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("i,j,mass\n0,0,"));
    }
}
