use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField};
use crate::numeric::compensated_sum;
use crate::sphere::SpherePoint;
use crate::transport::DiscreteMeasure;

/// μ = e^{−U} dx on a quadrature grid, with U shifted so that μ has unit
/// mass under the grid quadrature.
#[derive(Debug, Clone)]
pub struct GridMeasure {
    potential: ScalarField,
    /// quadrature weight times e^{−U} at each grid point
    weights: Vec<f64>,
}

impl GridMeasure {
    pub fn uniform(grid: Arc<Grid>) -> Self {
        let weights = grid.weights().to_vec();
        Self { potential: ScalarField::zero(grid), weights }
    }

    /// Normalizes `u` on its own grid.
    pub fn from_potential(u: &ScalarField) -> Result<Self> {
        let grid = u.grid();
        if let Some(v) = u.values().iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("potential value {v}")));
        }
        let raw: Vec<f64> = u.values().iter().map(|v| (-v).exp()).collect();
        let z = grid.integrate(&raw);
        let potential = u.add_constant(z.ln());
        let weights = grid
            .weights()
            .iter()
            .zip(potential.values())
            .map(|(w, v)| w * (-v).exp())
            .collect();
        Ok(Self { potential, weights })
    }

    /// `u` moved to `grid` first.
    pub fn on_grid(u: &ScalarField, grid: Arc<Grid>) -> Result<Self> {
        if Arc::ptr_eq(u.grid(), &grid) {
            return Self::from_potential(u);
        }
        Self::from_potential(&u.resampled(grid)?)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.potential.grid()
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    /// The normalized potential U.
    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫ f dμ for samples of f on the grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        compensated_sum(self.weights.iter().zip(values).map(|(w, v)| w * v))
    }

    pub fn to_discrete(&self) -> Result<DiscreteMeasure> {
        let points = self.grid().points().iter().map(|p| SpherePoint::from_ambient(p.clone())).collect();
        DiscreteMeasure::normalized(points, self.weights.clone())
    }
}
