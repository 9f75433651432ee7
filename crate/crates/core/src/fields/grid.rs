use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, gauss_legendre, gauss_legendre_unit};
use crate::sphere::SpherePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Gauss–Legendre in cos(colatitude), uniform in longitude.
    GaussLegendreColatitude,
    /// Midpoint rule in colatitude, uniform in longitude.
    UniformLonlat,
}

/// A structured quadrature grid on S² or S³.
///
/// On S² points are ordered colatitude-major: index = i_colat · n_lon + j_lon.
/// On S³ the grid uses Hopf coordinates
/// (cos η e^{iξ₁}, sin η e^{iξ₂}) with s = sin²η playing the role of the
/// colatitude variable and ξ₁, ξ₂ both uniform with `n_lon` points;
/// index = (i_s · n_lon + j₁) · n_lon + j₂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub n_colat: usize,
    pub n_lon: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    2
}

impl GridSpec {
    pub fn gauss_legendre(n_colat: usize, n_lon: usize) -> Self {
        Self { kind: GridKind::GaussLegendreColatitude, n_colat, n_lon, dim: 2 }
    }

    pub fn gauss_legendre_s3(n_s: usize, n_angle: usize) -> Self {
        Self { kind: GridKind::GaussLegendreColatitude, n_colat: n_s, n_lon: n_angle, dim: 3 }
    }

    pub fn uniform(n_colat: usize, n_lon: usize) -> Self {
        Self { kind: GridKind::UniformLonlat, n_colat, n_lon, dim: 2 }
    }

    /// Same kind and dimension with both resolutions doubled.
    pub fn refined(&self) -> Self {
        Self { n_colat: 2 * self.n_colat, n_lon: 2 * self.n_lon, ..*self }
    }

    pub fn len(&self) -> usize {
        match self.dim {
            3 => self.n_colat * self.n_lon * self.n_lon,
            _ => self.n_colat * self.n_lon,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nominal spacing π / n_colat in radians.
    pub fn spacing(&self) -> f64 {
        PI / self.n_colat as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::DimensionUnsupported(self.dim));
        }
        if self.n_colat == 0 || self.n_lon < 3 {
            return Err(Error::InvalidInput(format!(
                "grid needs n_colat >= 1 and n_lon >= 3, got {} x {}",
                self.n_colat, self.n_lon
            )));
        }
        Ok(())
    }

    /// Largest degree L such that products of two degree-L polynomials are
    /// integrated exactly (Gauss–Legendre grids only).
    pub fn exact_bandlimit(&self) -> usize {
        match self.dim {
            2 => (self.n_colat.saturating_sub(1)).min((self.n_lon.saturating_sub(1)) / 2),
            _ => (self.n_colat.saturating_sub(1)).min((self.n_lon.saturating_sub(1)) / 2),
        }
    }

    pub fn build(&self) -> Result<Arc<Grid>> {
        self.validate()?;
        Ok(Arc::new(match self.dim {
            2 => Grid::build_s2(*self),
            _ => Grid::build_s3(*self),
        }))
    }
}

/// A materialized grid: points and normalized quadrature weights.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    points: Vec<DVector<f64>>,
    weights: Vec<f64>,
    /// colatitudes (S²) or s = sin²η values (S³), increasing
    colat: Vec<f64>,
}

impl Grid {
    fn build_s2(spec: GridSpec) -> Self {
        let (colat, row_w): (Vec<f64>, Vec<f64>) = match spec.kind {
            GridKind::GaussLegendreColatitude => {
                let (t, w) = gauss_legendre(spec.n_colat);
                // increasing colatitude = decreasing cos
                t.iter().rev().zip(w.iter().rev()).map(|(t, w)| (t.acos(), 0.5 * w)).unzip()
            }
            GridKind::UniformLonlat => (0..spec.n_colat)
                .map(|i| {
                    let th = (i as f64 + 0.5) * PI / spec.n_colat as f64;
                    (th, th.sin())
                })
                .unzip(),
        };
        let nl = spec.n_lon;
        let mut points = Vec::with_capacity(spec.len());
        let mut weights = Vec::with_capacity(spec.len());
        for (th, rw) in colat.iter().zip(&row_w) {
            let (st, ct) = th.sin_cos();
            for j in 0..nl {
                let ph = 2.0 * PI * j as f64 / nl as f64;
                let (sp, cp) = ph.sin_cos();
                points.push(DVector::from_vec(vec![st * cp, st * sp, ct]));
                weights.push(rw / nl as f64);
            }
        }
        normalize(&mut weights);
        Self { spec, points, weights, colat }
    }

    fn build_s3(spec: GridSpec) -> Self {
        let (s_nodes, s_w) = match spec.kind {
            GridKind::GaussLegendreColatitude => gauss_legendre_unit(spec.n_colat),
            GridKind::UniformLonlat => (
                (0..spec.n_colat).map(|i| (i as f64 + 0.5) / spec.n_colat as f64).collect(),
                vec![1.0 / spec.n_colat as f64; spec.n_colat],
            ),
        };
        let nl = spec.n_lon;
        let mut points = Vec::with_capacity(spec.len());
        let mut weights = Vec::with_capacity(spec.len());
        for (s, ws) in s_nodes.iter().zip(&s_w) {
            let (c, sn) = ((1.0 - s).sqrt(), s.sqrt());
            for j1 in 0..nl {
                let (s1, c1) = (2.0 * PI * j1 as f64 / nl as f64).sin_cos();
                for j2 in 0..nl {
                    let (s2, c2) = (2.0 * PI * j2 as f64 / nl as f64).sin_cos();
                    points.push(DVector::from_vec(vec![c * c1, c * s1, sn * c2, sn * s2]));
                    weights.push(ws / (nl * nl) as f64);
                }
            }
        }
        normalize(&mut weights);
        Self { spec, points, weights, colat: s_nodes }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> SpherePoint {
        SpherePoint::from_ambient(self.points[i].clone())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn colatitudes(&self) -> &[f64] {
        &self.colat
    }

    /// Σ wᵢ fᵢ with ordered compensated summation.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        compensated_sum(self.weights.iter().zip(values).map(|(w, v)| w * v))
    }

    /// Bilinear interpolation in (colatitude, longitude) on S² grids.
    pub fn interpolate_bilinear(&self, values: &[f64], x: &[f64]) -> Result<f64> {
        if self.spec.dim != 2 {
            return Err(Error::DimensionUnsupported(self.spec.dim));
        }
        let th = x[2].clamp(-1.0, 1.0).acos();
        let mut ph = x[1].atan2(x[0]);
        if ph < 0.0 {
            ph += 2.0 * PI;
        }
        let nl = self.spec.n_lon;
        let dphi = 2.0 * PI / nl as f64;
        let jf = ph / dphi;
        let j0 = (jf.floor() as usize) % nl;
        let j1 = (j0 + 1) % nl;
        let fj = jf - jf.floor();
        let nc = self.colat.len();
        let (i0, i1, fi) = if th <= self.colat[0] {
            (0, 0, 0.0)
        } else if th >= self.colat[nc - 1] {
            (nc - 1, nc - 1, 0.0)
        } else {
            let i1 = self.colat.partition_point(|&c| c < th);
            let i0 = i1 - 1;
            (i0, i1, (th - self.colat[i0]) / (self.colat[i1] - self.colat[i0]))
        };
        let v = |i: usize, j: usize| values[i * nl + j];
        let top = v(i0, j0) * (1.0 - fj) + v(i0, j1) * fj;
        let bot = v(i1, j0) * (1.0 - fj) + v(i1, j1) * fj;
        Ok(top * (1.0 - fi) + bot * fi)
    }
}

fn normalize(w: &mut [f64]) {
    let s = compensated_sum(w.iter().copied());
    for v in w.iter_mut() {
        *v /= s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_normalized_and_positive() {
        for spec in [
            GridSpec::gauss_legendre(16, 32),
            GridSpec::uniform(16, 32),
            GridSpec::gauss_legendre_s3(6, 12),
            GridSpec { kind: GridKind::UniformLonlat, n_colat: 5, n_lon: 8, dim: 3 },
        ] {
            let g = spec.build().unwrap();
            assert_eq!(g.len(), spec.len());
            assert!(g.weights().iter().all(|&w| w > 0.0));
            assert!((compensated_sum(g.weights().iter().copied()) - 1.0).abs() < 1e-12);
            for p in g.points() {
                assert!((p.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn s3_grid_integrates_even_moments() {
        // ∫ x₀² dσ = 1/4, ∫ x₀⁴ dσ = 1/8 on S³ (normalized)
        let g = GridSpec::gauss_legendre_s3(4, 8).build().unwrap();
        let m2: Vec<f64> = g.points().iter().map(|p| p[0] * p[0]).collect();
        let m4: Vec<f64> = g.points().iter().map(|p| p[3].powi(4)).collect();
        assert!((g.integrate(&m2) - 0.25).abs() < 1e-14);
        assert!((g.integrate(&m4) - 0.125).abs() < 1e-14);
    }

    #[test]
    fn bilinear_reproduces_grid_values() {
        let g = GridSpec::gauss_legendre(8, 16).build().unwrap();
        let vals: Vec<f64> = g.points().iter().map(|p| p[0] + 2.0 * p[2]).collect();
        for (i, p) in g.points().iter().enumerate() {
            let v = g.interpolate_bilinear(&vals, p.as_slice()).unwrap();
            assert!((v - vals[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::gauss_legendre(0, 8).build().is_err());
        assert!(matches!(
            GridSpec { dim: 4, ..GridSpec::gauss_legendre(4, 8) }.build(),
            Err(Error::DimensionUnsupported(4))
        ));
    }
}
