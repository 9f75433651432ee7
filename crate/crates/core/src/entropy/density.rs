use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::measure::GridMeasure;
use crate::error::{Error, Result};
use crate::fields::{poly_jet, AmbientPoly, ScalarField};
use crate::linalg::{sym_eigenvalues, PD_FLOOR};
use crate::numeric::compensated_sum;
use crate::sphere::{cut_limit, exp_ambient, hessian_half_dist_sq, jacobian_exp_norm, log_ambient, SpherePoint, TangentFrame};

/// Mass tolerance for densities handed to [`relative_entropy`].
pub const DENSITY_MASS_TOLERANCE: f64 = 1e-9;
/// Mass tolerance for densities reconstructed from a transport map.
pub const PUSHFORWARD_MASS_TOLERANCE: f64 = 1e-6;

const NEWTON_MAX_ITER: usize = 40;
const NEWTON_TOLERANCE: f64 = 1e-14;
const NEWTON_FD_STEP: f64 = 1e-6;

/// ∫ v log v dμ, with 0 log 0 = 0.
pub fn relative_entropy(nu_density: &ScalarField, mu: &GridMeasure) -> Result<f64> {
    relative_entropy_with_tolerance(nu_density, mu, DENSITY_MASS_TOLERANCE)
}

pub fn relative_entropy_with_tolerance(nu_density: &ScalarField, mu: &GridMeasure, mass_tol: f64) -> Result<f64> {
    if nu_density.spec() != mu.grid().spec() {
        return Err(Error::InvalidInput("density and measure live on different grids".into()));
    }
    let v = nu_density.values();
    if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::NotADensity(format!("density value {bad}")));
    }
    let mass = mu.integrate(v);
    if (mass - 1.0).abs() > mass_tol {
        return Err(Error::NotADensity(format!("total mass {mass}")));
    }
    let vlogv: Vec<f64> = v.iter().map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 }).collect();
    Ok(mu.integrate(&vlogv))
}

/// Evaluates Ψ(x) = exp_x(∇ψ(x)) straight from the polynomial representation.
#[derive(Clone, Copy)]
pub(crate) struct MapEval<'a> {
    poly: &'a AmbientPoly,
}

impl<'a> MapEval<'a> {
    pub(crate) fn new(psi: &'a ScalarField) -> Result<Self> {
        Ok(Self { poly: psi.representation()? })
    }

    pub(crate) fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let (_, g) = self.poly.eval_grad(x.as_slice());
        let radial = x.dot(&g);
        g - x * radial
    }

    pub(crate) fn image(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self.grad(x);
        let r = g.norm();
        let limit = cut_limit();
        if r >= limit {
            return Err(Error::CutLocusViolation { norm: r, limit });
        }
        Ok(exp_ambient(x, &g))
    }

    /// Components in `fy` of log_y Ψ(exp_x(E c)).
    fn chart(&self, x: &DVector<f64>, ex: &TangentFrame, y: &DVector<f64>, fy: &TangentFrame, c: &DVector<f64>) -> Result<DVector<f64>> {
        let moved = exp_ambient(x, &ex.to_ambient(c));
        Ok(fy.components(&log_ambient(y, &self.image(&moved)?)))
    }
}

fn frame_at(x: &DVector<f64>) -> TangentFrame {
    TangentFrame::standard(SpherePoint::from_ambient(x.clone()))
}

/// Sign of det[p, e₁, …, eₙ], the orientation of a frame at p.
fn orientation(p: &DVector<f64>) -> f64 {
    let frame = frame_at(p);
    let mut cols = vec![p.clone()];
    cols.extend(frame.axes().iter().cloned());
    DMatrix::from_columns(&cols).determinant().signum()
}

/// det dΨ_x with both frames positively oriented.
fn oriented_jacobian(map: MapEval, x: &DVector<f64>, y: &DVector<f64>, h: f64) -> Result<f64> {
    let d = map_differential(map, x, y, h, true)?;
    Ok(d.determinant() * orientation(x) * orientation(y))
}

/// Differential of c ↦ log_y Ψ(exp_x(c)) at c = 0 in orthonormal frames, by
/// central differences of order two (`fourth = false`) or four. When
/// y = Ψ(x) this is dΨ_x.
fn map_differential(map: MapEval, x: &DVector<f64>, y: &DVector<f64>, h: f64, fourth: bool) -> Result<DMatrix<f64>> {
    let ex = frame_at(x);
    let fy = frame_at(y);
    let n = ex.dim();
    let mut d = DMatrix::zeros(n, n);
    let mut e = DVector::zeros(n);
    for k in 0..n {
        let mut at = |s: f64| {
            e.fill(0.0);
            e[k] = s;
            map.chart(x, &ex, y, &fy, &e)
        };
        let col = if fourth {
            (at(-2.0 * h)? - at(2.0 * h)? + (at(h)? - at(-h)?) * 8.0) / (12.0 * h)
        } else {
            (at(h)? - at(-h)?) / (2.0 * h)
        };
        d.set_column(k, &col);
    }
    Ok(d)
}

/// Ψ⁻¹(y) by Newton's method in normal coordinates, started from exp_y(−∇ψ(y)).
pub fn inverse_transport_map(psi: &ScalarField, y: &SpherePoint) -> Result<SpherePoint> {
    Ok(SpherePoint::from_ambient(invert(MapEval::new(psi)?, y.coords())?))
}

fn invert(map: MapEval, y: &DVector<f64>) -> Result<DVector<f64>> {
    let fy = frame_at(y);
    let mut x = exp_ambient(y, &(-map.grad(y)));
    let mut resid = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let z = map.image(&x)?;
        let r = fy.components(&log_ambient(y, &z));
        let norm = r.norm();
        if norm < NEWTON_TOLERANCE || (norm < 1e-12 && norm > 0.5 * resid) {
            return Ok(x);
        }
        resid = norm;
        let d = map_differential(map, &x, y, NEWTON_FD_STEP, false)?;
        let step = d.lu().solve(&(-r)).ok_or(Error::SolverNotConverged { iterations: 0, residual: norm })?;
        x = exp_ambient(&x, &frame_at(&x).to_ambient(&step));
    }
    Err(Error::SolverNotConverged { iterations: NEWTON_MAX_ITER, residual: resid })
}

/// det dΨ_x by fourth-order central differences with step `h`.
pub fn map_jacobian(psi: &ScalarField, x: &SpherePoint, h: f64) -> Result<f64> {
    let map = MapEval::new(psi)?;
    let y = map.image(x.coords())?;
    oriented_jacobian(map, x.coords(), &y, h)
}

/// ν = Ψ_#μ recovered on the target grid by inverting Ψ point by point
/// and differencing the map at the preimage with the grid spacing.
#[derive(Debug, Clone)]
pub struct MapDensity {
    /// v = dν/dμ at the grid points
    pub density: ScalarField,
    pub preimages: Vec<DVector<f64>>,
    pub jacobians: Vec<f64>,
    /// ∫ v dμ
    pub mass: f64,
}

pub fn density_by_map_differences(psi: &ScalarField, mu: &GridMeasure) -> Result<MapDensity> {
    density_by_map_differences_with_step(psi, mu, mu.grid().spec().spacing())
}

/// Largest finite-difference step used by [`density_by_fine_differences`].
pub const MAP_DIFFERENCE_STEP: f64 = 1e-2;

/// As [`density_by_map_differences`] with a step no larger than
/// [`MAP_DIFFERENCE_STEP`], for when accuracy matters more than a
/// grid-tied convergence rate.
pub fn density_by_fine_differences(psi: &ScalarField, mu: &GridMeasure) -> Result<MapDensity> {
    density_by_map_differences_with_step(psi, mu, MAP_DIFFERENCE_STEP.min(mu.grid().spec().spacing()))
}

pub fn density_by_map_differences_with_step(psi: &ScalarField, mu: &GridMeasure, h: f64) -> Result<MapDensity> {
    check_same_grid(psi, mu)?;
    let map = MapEval::new(psi)?;
    let u = mu.potential();
    let pts = mu.grid().points();
    let rows = pts
        .par_iter()
        .zip(u.values().par_iter())
        .map(|(y, &u_y)| {
            let x = invert(map, y)?;
            let det = oriented_jacobian(map, &x, y, h)?;
            if !(det > 0.0) {
                return Err(Error::NotPositiveDefinite(det));
            }
            let u_x = u.eval(&x)?;
            let v = (u_y - u_x - det.ln()).exp();
            Ok((x, det, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut preimages = Vec::with_capacity(rows.len());
    let mut jacobians = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (x, det, v) in rows {
        preimages.push(x);
        jacobians.push(det);
        values.push(v);
    }
    let mass = mu.integrate(&values);
    let density = ScalarField::from_values(mu.grid().clone(), values)?;
    Ok(MapDensity { density, preimages, jacobians, mass })
}

/// log J_Ψ(x) = log J_exp(‖∇ψ‖) + log det(A + H), in closed form.
pub(crate) fn log_map_jacobian(psi: &AmbientPoly, x: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
    let jet = poly_jet(psi, x);
    let r = jet.grad.norm();
    let limit = cut_limit();
    if r >= limit {
        return Err(Error::CutLocusViolation { norm: r, limit });
    }
    let base = SpherePoint::from_ambient(x.clone());
    let frame = TangentFrame::from_direction(base.clone(), &jet.grad);
    let y = SpherePoint::from_ambient(exp_ambient(x, &jet.grad));
    let a = hessian_half_dist_sq(&base, &y, &frame)?;
    let m = a.matrix() + frame.restrict(&jet.hess);
    let ev = sym_eigenvalues(&m);
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= PD_FLOOR {
        return Err(Error::NotPositiveDefinite(min));
    }
    let log_det: f64 = ev.iter().map(|l| l.ln()).sum();
    Ok((jacobian_exp_norm(frame.dim(), r)?.ln() + log_det, ev))
}

/// log v(Ψ(x)) = U(Ψ(x)) − U(x) − log J_Ψ(x) on the grid of ψ, where
/// ν = Ψ_#μ = v μ and μ = e^{−U} dx.
pub fn density_from_map(psi: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
    let mu = GridMeasure::on_grid(u, psi.grid().clone())?;
    let (log_v, mass) = log_density_at_image(psi, &mu)?;
    if (mass - 1.0).abs() > PUSHFORWARD_MASS_TOLERANCE {
        return Err(Error::NotADensity(format!("pushforward mass {mass}")));
    }
    ScalarField::from_values(psi.grid().clone(), log_v)
}

/// Samples of log v∘Ψ and ∫ J_Ψ dx over the sphere (which is 1 for a bijection).
pub(crate) fn log_density_at_image(psi: &ScalarField, mu: &GridMeasure) -> Result<(Vec<f64>, f64)> {
    check_same_grid(psi, mu)?;
    let poly = psi.representation()?;
    let map = MapEval::new(psi)?;
    let u = mu.potential();
    let grid = mu.grid();
    let rows = grid
        .points()
        .par_iter()
        .zip(u.values().par_iter())
        .map(|(x, &u_x)| {
            let (log_j, _) = log_map_jacobian(poly, x)?;
            let u_y = u.eval(&map.image(x)?)?;
            Ok((u_y - u_x - log_j, log_j.exp()))
        })
        .collect::<Result<Vec<_>>>()?;
    let area: f64 = grid.weights().iter().sum();
    let mass = compensated_sum(rows.iter().zip(grid.weights()).map(|((_, j), w)| w * j)) / area;
    Ok((rows.into_iter().map(|(l, _)| l).collect(), mass))
}

fn check_same_grid(psi: &ScalarField, mu: &GridMeasure) -> Result<()> {
    if psi.dim() != mu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: psi.dim() });
    }
    if psi.spec() != mu.grid().spec() {
        return Err(Error::InvalidInput("potential and measure live on different grids".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{scale_until_c_concave, FieldRecipe, GridSpec, DEFAULT_EPSILON};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64, nc: usize) -> (ScalarField, GridMeasure) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GridSpec::gauss_legendre(nc, 2 * nc).build().unwrap();
        let base = FieldRecipe { lmax: 3, hessian_scale: 1.0 }.build(2, &mut rng).unwrap();
        let psi = scale_until_c_concave(g.clone(), &base, DEFAULT_EPSILON).unwrap().field;
        (psi, GridMeasure::uniform(g))
    }

    #[test]
    fn uniform_density_has_zero_entropy() {
        let g = GridSpec::gauss_legendre(8, 16).build().unwrap();
        let mu = GridMeasure::uniform(g.clone());
        let ones = ScalarField::from_values(g.clone(), vec![1.0; g.len()]).unwrap();
        assert_eq!(relative_entropy(&ones, &mu).unwrap(), 0.0);
        let twos = ScalarField::from_values(g.clone(), vec![2.0; g.len()]).unwrap();
        assert!(matches!(relative_entropy(&twos, &mu), Err(Error::NotADensity(_))));
        let neg = ScalarField::from_values(g.clone(), vec![-1.0; g.len()]).unwrap();
        assert!(matches!(relative_entropy(&neg, &mu), Err(Error::NotADensity(_))));
    }

    #[test]
    fn inversion_roundtrip() {
        let (psi, mu) = setup(3, 12);
        let map = MapEval::new(&psi).unwrap();
        for y in mu.grid().points().iter().step_by(7) {
            let x = invert(map, y).unwrap();
            let back = map.image(&x).unwrap();
            assert!((back - y).norm() < 1e-13);
        }
    }

    #[test]
    fn differenced_jacobian_matches_closed_form() {
        let (psi, mu) = setup(4, 12);
        let poly = psi.representation().unwrap();
        for x in mu.grid().points().iter().step_by(11) {
            let (log_j, _) = log_map_jacobian(poly, x).unwrap();
            let fd = map_jacobian(&psi, &SpherePoint::from_ambient(x.clone()), 1e-3).unwrap();
            assert!((fd.ln() - log_j).abs() < 1e-9, "{} vs {}", fd.ln(), log_j);
        }
    }

    #[test]
    fn zero_potential_is_identity() {
        let g = GridSpec::gauss_legendre(8, 16).build().unwrap();
        let u = ScalarField::from_poly(g.clone(), AmbientPoly::var(3, 2).scale(0.3)).unwrap();
        let lv = density_from_map(&ScalarField::zero(g.clone()), &u).unwrap();
        assert!(lv.values().iter().all(|v| v.abs() < 1e-15));
        let md = density_by_map_differences(&ScalarField::zero(g.clone()), &GridMeasure::from_potential(&u).unwrap()).unwrap();
        assert!(md.density.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn pushforward_mass_is_conserved() {
        let (psi, mu) = setup(5, 32);
        let (_, mass) = log_density_at_image(&psi, &mu).unwrap();
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        let md = density_by_map_differences(&psi, &mu).unwrap();
        assert!((md.mass - 1.0).abs() < 1e-6, "{}", md.mass);
    }
}
