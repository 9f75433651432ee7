//! Discrete measures, Wasserstein distances and pushforwards.

mod entropic;
mod exact;
mod green;
mod measure;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use entropic::{sinkhorn, sinkhorn_divergence, sinkhorn_symmetric, EntropicConfig, SinkhornSolution, SINKHORN_TOLERANCE};
pub use exact::{solve_transport, ExactSolution, EXACT_SIZE_LIMIT};
pub use green::{
    cap_green_gradient, duality_residual, green_w1_bound, green_w1_bound_densities, mollify,
    CapMeasure, GreenBound, CAP_CELLS,
};
pub use measure::{DiscreteMeasure, MeasureFile, TransportPlan, MASS_TOLERANCE, PLAN_TOLERANCE};

use crate::error::{Error, Result};
use crate::fields::{check_c_concavity, CConcavity, ScalarField};
use crate::sphere::{cut_limit, distance_ambient, exp_ambient, SpherePoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactLp,
    Entropic(EntropicConfig),
}

#[derive(Debug, Clone)]
pub struct Wasserstein {
    /// W_p; for the entropic method, ⟨π_ε, dᵖ⟩^{1/p}
    pub distance: f64,
    /// the p-th power of `distance`
    pub cost: f64,
    pub plan: TransportPlan,
    /// regularization used, if entropic
    pub epsilon: Option<f64>,
    /// debiased Sinkhorn estimate of W_p, if entropic
    pub debiased: Option<f64>,
    pub iterations: usize,
}

/// Row-major matrix of d(x_i, y_j)ᵖ.
pub fn cost_matrix(xs: &[SpherePoint], ys: &[SpherePoint], p: f64) -> Vec<f64> {
    xs.par_iter()
        .flat_map_iter(|x| ys.iter().map(move |y| distance_ambient(x.coords(), y.coords()).powf(p)))
        .collect()
}

/// W_p(μ, ν) with geodesic ground distance.
pub fn wasserstein_p(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, method: Method) -> Result<Wasserstein> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!("exponent p = {p}")));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: nu.dim() });
    }
    match method {
        Method::ExactLp => {
            let size = mu.len().max(nu.len());
            if size > EXACT_SIZE_LIMIT {
                return Err(Error::SizeLimit { size, limit: EXACT_SIZE_LIMIT });
            }
            let c = cost_matrix(mu.points(), nu.points(), p);
            let sol = solve_transport(mu.weights(), nu.weights(), &c)?;
            let mut coupling = DMatrix::zeros(mu.len(), nu.len());
            for &(i, j, f) in &sol.flows {
                coupling[(i, j)] += f;
            }
            let cost = sol.cost.max(0.0);
            Ok(Wasserstein {
                distance: cost.powf(1.0 / p),
                cost,
                plan: TransportPlan::new(mu.clone(), nu.clone(), coupling)?,
                epsilon: None,
                debiased: None,
                iterations: sol.iterations,
            })
        }
        Method::Entropic(config) => {
            let c = cost_matrix(mu.points(), nu.points(), p);
            let sol = sinkhorn(mu.weights(), nu.weights(), &c, &config)?;
            let caa = cost_matrix(mu.points(), mu.points(), p);
            let cbb = cost_matrix(nu.points(), nu.points(), p);
            let aa = sinkhorn_symmetric(mu.weights(), &caa, &config)?;
            let bb = sinkhorn_symmetric(nu.weights(), &cbb, &config)?;
            let divergence = sol.dual_value - 0.5 * (aa + bb);
            let coupling = DMatrix::from_row_slice(mu.len(), nu.len(), &sol.plan);
            Ok(Wasserstein {
                distance: sol.primal_cost.max(0.0).powf(1.0 / p),
                cost: sol.primal_cost,
                plan: TransportPlan::new(mu.clone(), nu.clone(), coupling)?,
                epsilon: Some(config.epsilon),
                debiased: Some(divergence.max(0.0).powf(1.0 / p)),
                iterations: sol.iterations,
            })
        }
    }
}

/// (Ψ_t)_# μ: points moved by exp_x(t ∇ψ(x)), weights unchanged.
pub fn pushforward(mu: &DiscreteMeasure, psi: &ScalarField, t: f64) -> Result<DiscreteMeasure> {
    if mu.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: psi.dim(), got: mu.dim() });
    }
    let limit = cut_limit();
    let points = mu
        .points()
        .par_iter()
        .map(|x| {
            let g = psi.grad(x.coords())?;
            let r = g.norm();
            if r >= limit {
                return Err(Error::CutLocusViolation { norm: r, limit });
            }
            if t * r == 0.0 {
                return Ok(x.clone());
            }
            SpherePoint::normalize(exp_ambient(x.coords(), &(g * t)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mu.with_points(points))
}

/// Both sides of W₂(Ψ_#μ, μ)² = ∫ ‖∇ψ‖² dμ = ∫ d(Ψ(x), x)² dμ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialCost {
    pub gradient_form: f64,
    pub map_form: f64,
    pub certificate: CConcavity,
}

impl PotentialCost {
    pub fn value(&self) -> f64 {
        self.gradient_form
    }
}

/// The W₂² cost of the map exp_x(∇ψ(x)), after certifying c-concavity.
pub fn transport_cost_of_potential(psi: &ScalarField, mu: &DiscreteMeasure) -> Result<PotentialCost> {
    let certificate = check_c_concavity(psi);
    if !certificate.certified {
        return Err(Error::NotCConcave(certificate.margin));
    }
    let grads = mu.points().par_iter().map(|x| psi.grad(x.coords())).collect::<Result<Vec<_>>>()?;
    let limit = cut_limit();
    if let Some(r) = grads.iter().map(|g| g.norm()).find(|r| *r >= limit) {
        return Err(Error::CutLocusViolation { norm: r, limit });
    }
    let gradient_form =
        crate::numeric::compensated_sum(grads.iter().zip(mu.weights()).map(|(g, w)| w * g.norm_squared()));
    let map_form = crate::numeric::compensated_sum(mu.points().iter().zip(&grads).zip(mu.weights()).map(
        |((x, g), w)| {
            let y = exp_ambient(x.coords(), g);
            let d = distance_ambient(x.coords(), &y.normalize());
            w * d * d
        },
    ));
    Ok(PotentialCost { gradient_form, map_form, certificate })
}
