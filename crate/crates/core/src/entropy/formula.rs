use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::{density_by_map_differences, density_by_fine_differences, log_density_at_image, relative_entropy_with_tolerance, PUSHFORWARD_MASS_TOLERANCE};
use super::kfunc::{carleman_of_spectrum, k_function};
use super::measure::GridMeasure;
use crate::error::{Error, Result};
use crate::fields::{check_c_concavity, poly_jet, AmbientPoly, GridSpec, ScalarField};
use crate::linalg::{sym_eigenvalues, PD_FLOOR};
use crate::numeric::{compensated_sum, gauss_legendre_unit, log_theta_over_sin};
use crate::sphere::{cut_limit, exp_ambient, hessian_half_dist_sq, SpherePoint, TangentFrame};

/// Gauss–Legendre nodes for the t-integral of the U term.
pub const LINE_NODES: usize = 16;
/// Reference rule for estimating the error of [`LINE_NODES`].
pub const LINE_CHECK_NODES: usize = 32;
pub const LINE_QUADRATURE_TOLERANCE: f64 = 1e-10;
/// Agreement required between the two assemblies of the right-hand side.
pub const SPLIT_TOLERANCE: f64 = 1e-10;
/// Relative tolerance between the direct entropy and the formula.
pub const ENTROPY_TOLERANCE: f64 = 1e-3;
pub const TALAGRAND_TOLERANCE: f64 = 1e-6;
/// Gradient norms within this distance of the cut limit count as near-cut.
pub const NEAR_CUT_BAND: f64 = 0.1;

/// The integrands of the entropy formula at one point x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointTerms {
    /// ‖∇ψ(x)‖
    pub theta: f64,
    /// trace(H − log(A + H))
    pub trace_term: f64,
    /// −log J_exp(∇ψ)
    pub jacobian_term: f64,
    /// ∫₀¹ (1−t) ⟨Hess U(Ψ_t) Ψ̇_t, Ψ̇_t⟩ dt with [`LINE_NODES`] nodes
    pub u_line: f64,
    /// the same with [`LINE_CHECK_NODES`] nodes
    pub u_line_check: f64,
    /// U(Ψ(x)) − U(x) − ⟨∇U(x), ∇ψ(x)⟩
    pub u_taylor: f64,
    /// −log det₂(A + H)
    pub carleman: f64,
    /// (n−1) K(‖∇ψ‖)
    pub k_term: f64,
    /// trace(I − A)
    pub trace_i_minus_a: f64,
    pub min_eigenvalue: f64,
}

impl PointTerms {
    pub fn total(&self) -> f64 {
        self.trace_term + self.jacobian_term + self.u_line
    }

    pub fn split_total(&self) -> f64 {
        self.carleman + self.k_term + self.u_line
    }

    /// trace(H − log(A+H)) − [−log det₂(A+H) + trace(I − A)]
    pub fn regrouping_residual(&self) -> f64 {
        self.trace_term - (self.carleman + self.trace_i_minus_a)
    }
}

pub fn point_terms(psi: &ScalarField, u: &ScalarField, x: &SpherePoint) -> Result<PointTerms> {
    if psi.dim() != x.dim() || u.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: psi.dim() });
    }
    terms_at(psi.representation()?, u.representation()?, x.coords())
}

fn terms_at(psi: &AmbientPoly, u: &AmbientPoly, x: &DVector<f64>) -> Result<PointTerms> {
    let jet = poly_jet(psi, x);
    let g = &jet.grad;
    let theta = g.norm();
    let limit = cut_limit();
    if theta >= limit {
        return Err(Error::CutLocusViolation { norm: theta, limit });
    }
    let base = SpherePoint::from_ambient(x.clone());
    let frame = TangentFrame::from_direction(base.clone(), g);
    let n = frame.dim();
    let y = exp_ambient(x, g);
    let a = hessian_half_dist_sq(&base, &SpherePoint::from_ambient(y.clone()), &frame)?;
    let h = frame.restrict(&jet.hess);
    let ev = sym_eigenvalues(&(a.matrix() + &h));
    let min_eigenvalue = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eigenvalue <= PD_FLOOR {
        return Err(Error::NotPositiveDefinite(min_eigenvalue));
    }
    let trace_term = h.trace() - ev.iter().map(|l| l.ln()).sum::<f64>();
    let nm1 = (n - 1) as f64;
    let u_line = line_integral(u, x, g, LINE_NODES);
    let u_line_check = line_integral(u, x, g, LINE_CHECK_NODES);
    let u_x = poly_jet(u, x);
    let u_taylor = u.eval(y.as_slice()) - u_x.value - u_x.grad.dot(g);
    Ok(PointTerms {
        theta,
        trace_term,
        jacobian_term: nm1 * log_theta_over_sin(theta),
        u_line,
        u_line_check,
        u_taylor,
        carleman: carleman_of_spectrum(&ev)?,
        k_term: nm1 * k_function(theta)?,
        trace_i_minus_a: n as f64 - a.trace(),
        min_eigenvalue,
    })
}

fn line_integral(u: &AmbientPoly, x: &DVector<f64>, g: &DVector<f64>, nodes: usize) -> f64 {
    if u.num_terms() == 0 || g.norm() == 0.0 {
        return 0.0;
    }
    let (ts, ws) = gauss_legendre_unit(nodes);
    let parts = ts.iter().zip(&ws).map(|(&t, &w)| {
        let p = exp_ambient(x, &(g * t));
        let v = crate::fields::velocity_ambient(x, g, t);
        w * (1.0 - t) * poly_jet(u, &p).hess_form(&v)
    });
    compensated_sum(parts)
}

/// ∫₀¹ (1−t) ⟨Hess U(Ψ_t(x)) ∂_tΨ_t, ∂_tΨ_t⟩ dt.
pub fn u_hessian_line_integral(psi: &ScalarField, u: &ScalarField, x: &SpherePoint) -> Result<f64> {
    let g = psi.grad(x.coords())?;
    let limit = cut_limit();
    if g.norm() >= limit {
        return Err(Error::CutLocusViolation { norm: g.norm(), limit });
    }
    Ok(line_integral(u.representation()?, x.coords(), &g, LINE_NODES))
}

/// min over the grid of the smallest eigenvalue of (n−1)I + Hess U.
pub fn kappa_of_potential(u: &ScalarField, n: usize) -> Result<f64> {
    if u.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.dim() });
    }
    let poly = u.representation()?;
    let nm1 = (n - 1) as f64;
    let mins = u
        .grid()
        .points()
        .par_iter()
        .map(|x| {
            let frame = TangentFrame::standard(SpherePoint::from_ambient(x.clone()));
            let h = frame.restrict(&poly_jet(poly, x).hess);
            sym_eigenvalues(&h)[0] + nm1
        })
        .collect::<Vec<_>>();
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min))
}

/// Ent(Ψ_#μ | μ) computed directly and through the entropy formula, term by term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub dim: usize,
    pub grid: GridSpec,
    pub epsilon: Option<f64>,
    /// ∫ v log v dμ from the density recovered by inverting Ψ
    pub direct_entropy: f64,
    /// ∫ log v(Ψ(x)) dμ(x) with the closed-form Jacobian
    pub formula_entropy: f64,
    pub trace_term: f64,
    pub jacobian_term: f64,
    pub u_line_term: f64,
    pub rhs_total: f64,
    pub carleman_term: f64,
    pub k_term: f64,
    pub split_total: f64,
    pub w2_squared: f64,
    pub kappa: f64,
    /// |direct − rhs| / max(direct, 1e-6)
    pub relative_gap: f64,
    pub split_gap: f64,
    pub line_quadrature_error: f64,
    pub taylor_residual: f64,
    pub regrouping_residual: f64,
    pub mass_error: f64,
    pub max_gradient_norm: f64,
    pub near_cut_mass: f64,
    pub c_concavity_margin: f64,
    pub tolerance: f64,
}

impl EntropyReport {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    /// Ent − (κ/2) W₂².
    pub fn slack(&self) -> f64 {
        self.direct_entropy - 0.5 * self.kappa * self.w2_squared
    }

    pub fn passes(&self) -> bool {
        self.relative_gap < self.tolerance
            && self.split_gap < SPLIT_TOLERANCE
            && self.line_quadrature_error < LINE_QUADRATURE_TOLERANCE
            && self.mass_error <= PUSHFORWARD_MASS_TOLERANCE
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are plain numbers")
    }

    pub fn csv_header() -> &'static str {
        "epsilon,kappa,entropy,rhs_total,w2sq,slack"
    }

    pub fn csv_row(&self) -> String {
        let eps = self.epsilon.map(|e| e.to_string()).unwrap_or_default();
        format!(
            "{eps},{},{},{},{},{}",
            self.kappa,
            self.direct_entropy,
            self.rhs_total,
            self.w2_squared,
            self.slack()
        )
    }
}

fn certify(psi: &ScalarField) -> Result<f64> {
    let cert = check_c_concavity(psi);
    if !cert.certified {
        return Err(Error::NotCConcave(cert.margin));
    }
    Ok(cert.margin)
}

/// All per-point terms on the grid of ψ.
pub fn grid_terms(psi: &ScalarField, mu: &GridMeasure) -> Result<Vec<PointTerms>> {
    if psi.spec() != mu.grid().spec() {
        return Err(Error::InvalidInput("potential and measure live on different grids".into()));
    }
    let p = psi.representation()?;
    let u = mu.potential().representation()?;
    mu.grid().points().par_iter().map(|x| terms_at(p, u, x)).collect()
}

pub fn entropy_formula_rhs(psi: &ScalarField, u: &ScalarField) -> Result<EntropyReport> {
    let margin = certify(psi)?;
    let mu = GridMeasure::on_grid(u, psi.grid().clone())?;
    let terms = grid_terms(psi, &mu)?;
    let sum = |f: &dyn Fn(&PointTerms) -> f64| -> f64 {
        let vals: Vec<f64> = terms.iter().map(f).collect();
        mu.integrate(&vals)
    };
    let trace_term = sum(&|t| t.trace_term);
    let jacobian_term = sum(&|t| t.jacobian_term);
    let u_line_term = sum(&|t| t.u_line);
    let rhs_total = trace_term + jacobian_term + u_line_term;
    let carleman_term = sum(&|t| t.carleman);
    let k_term = sum(&|t| t.k_term);
    let split_total = carleman_term + k_term + u_line_term;
    let w2_squared = sum(&|t| t.theta * t.theta);
    let near_cut_mass = sum(&|t| if t.theta >= cut_limit() - NEAR_CUT_BAND { 1.0 } else { 0.0 });
    let max_abs = |f: &dyn Fn(&PointTerms) -> f64| terms.iter().map(f).fold(0.0, f64::max);
    let line_quadrature_error = max_abs(&|t| (t.u_line - t.u_line_check).abs());
    let taylor_residual = max_abs(&|t| (t.u_taylor - t.u_line).abs());
    let regrouping_residual = max_abs(&|t| t.regrouping_residual().abs());
    let max_gradient_norm = max_abs(&|t| t.theta);

    let md = density_by_map_differences(psi, &mu)?;
    let mass_error = (md.mass - 1.0).abs();
    let direct_entropy = relative_entropy_with_tolerance(&md.density, &mu, PUSHFORWARD_MASS_TOLERANCE)?;
    let (log_v, formula_mass) = log_density_at_image(psi, &mu)?;
    if (formula_mass - 1.0).abs() > PUSHFORWARD_MASS_TOLERANCE {
        return Err(Error::NotADensity(format!("pushforward mass {formula_mass}")));
    }
    let formula_entropy = mu.integrate(&log_v);
    let kappa = kappa_of_potential(mu.potential(), mu.dim())?;

    Ok(EntropyReport {
        dim: mu.dim(),
        grid: *psi.spec(),
        epsilon: None,
        direct_entropy,
        formula_entropy,
        trace_term,
        jacobian_term,
        u_line_term,
        rhs_total,
        carleman_term,
        k_term,
        split_total,
        w2_squared,
        kappa,
        relative_gap: (direct_entropy - rhs_total).abs() / direct_entropy.max(1e-6),
        split_gap: (split_total - rhs_total).abs(),
        line_quadrature_error,
        taylor_residual,
        regrouping_residual,
        mass_error,
        max_gradient_norm,
        near_cut_mass,
        c_concavity_margin: margin,
        tolerance: ENTROPY_TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TalagrandReport {
    pub entropy: f64,
    pub w2_squared: f64,
    pub kappa: f64,
    /// Ent − (κ/2) W₂²
    pub slack: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub mass_error: f64,
}

/// Checks Ent(Ψ_#μ | μ) ≥ (κ_U/2) W₂(Ψ_#μ, μ)² with W₂² = ∫‖∇ψ‖² dμ.
pub fn talagrand_check(psi: &ScalarField, u: &ScalarField) -> Result<TalagrandReport> {
    let mu = GridMeasure::on_grid(u, psi.grid().clone())?;
    let kappa = kappa_of_potential(mu.potential(), mu.dim())?;
    if kappa <= 0.0 {
        return Err(Error::KappaNonpositive(kappa));
    }
    certify(psi)?;
    let md = density_by_fine_differences(psi, &mu)?;
    let entropy = relative_entropy_with_tolerance(&md.density, &mu, PUSHFORWARD_MASS_TOLERANCE)?;
    let grads = mu
        .grid()
        .points()
        .par_iter()
        .map(|x| psi.grad(x).map(|g| g.norm_squared()))
        .collect::<Result<Vec<_>>>()?;
    let w2_squared = mu.integrate(&grads);
    let slack = entropy - 0.5 * kappa * w2_squared;
    Ok(TalagrandReport {
        entropy,
        w2_squared,
        kappa,
        slack,
        tolerance: TALAGRAND_TOLERANCE,
        holds: slack >= -TALAGRAND_TOLERANCE,
        mass_error: (md.mass - 1.0).abs(),
    })
}
