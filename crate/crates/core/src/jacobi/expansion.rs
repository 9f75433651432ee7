use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{density_by_fine_differences, k_function, relative_entropy_with_tolerance, GridMeasure, PUSHFORWARD_MASS_TOLERANCE};
use crate::error::{Error, Result};
use crate::fields::{check_c_concavity, poly_jet, AmbientPoly, ScalarField};
use crate::linalg::{hs_norm_sq, sym_eigenvalues, PD_FLOOR};
use crate::numeric::{fit_slope, log_theta_over_sin, x_minus_log1p};
use crate::sphere::{exp_ambient, hessian_half_dist_sq, SpherePoint, TangentFrame};

/// ½ (‖Hess ψ‖²_HS + (n−1)‖∇ψ‖² + ⟨Hess U ∇ψ, ∇ψ⟩) at x, with the Hessian
/// norm taken in `frame`.
pub fn lichnerowicz_density(psi: &ScalarField, u: &ScalarField, x: &SpherePoint, frame: &TangentFrame) -> Result<f64> {
    if !frame.base().coords().relative_eq(x.coords(), 1e-12, 1e-12) {
        return Err(Error::BaseMismatch);
    }
    Ok(density_at(psi.representation()?, u.representation()?, x.coords(), frame))
}

fn density_at(psi: &AmbientPoly, u: &AmbientPoly, x: &DVector<f64>, frame: &TangentFrame) -> f64 {
    let jet = poly_jet(psi, x);
    let n = frame.dim();
    let hs = hs_norm_sq(&frame.restrict(&jet.hess));
    let g2 = jet.grad.norm_squared();
    let u_term = if u.num_terms() == 0 { 0.0 } else { poly_jet(u, x).hess_form(&jet.grad) };
    0.5 * (hs + (n - 1) as f64 * g2 + u_term)
}

/// ½ ∫ (‖Hess ψ‖²_HS + (n−1)‖∇ψ‖² + ⟨Hess U ∇ψ, ∇ψ⟩) dμ with μ = e^{−U} dx
/// normalized on the grid of ψ.
pub fn lichnerowicz_integral(psi: &ScalarField, u: &ScalarField, n: usize) -> Result<f64> {
    if psi.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: psi.dim() });
    }
    let mu = GridMeasure::on_grid(u, psi.grid().clone())?;
    let p = psi.representation()?;
    let up = mu.potential().representation()?;
    let vals: Vec<f64> = mu
        .grid()
        .points()
        .par_iter()
        .map(|x| density_at(p, up, x, &TangentFrame::standard(SpherePoint::from_ambient(x.clone()))))
        .collect();
    Ok(mu.integrate(&vals))
}

/// Integrated small-τ terms for the potential τψ against the uniform measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallTauTerms {
    pub tau: f64,
    /// ∫ trace(I − A)
    pub trace_i_minus_a: f64,
    /// ∫ −log J_exp(τ∇ψ)
    pub log_jexp: f64,
    /// ∫ −log det₂(A + τH)
    pub det2: f64,
    /// ∫ trace S_{∇ψ} = (n−1) ∫ ‖∇ψ‖²
    pub trace_s: f64,
    /// ∫ ‖Hess ψ‖²_HS
    pub hs_norm_sq: f64,
}

impl SmallTauTerms {
    pub fn ratios(&self) -> [(&'static str, f64, f64); 3] {
        let t2 = self.tau * self.tau;
        [
            ("trace_i_minus_a", self.trace_i_minus_a, self.trace_i_minus_a / t2),
            ("log_jexp", self.log_jexp, self.log_jexp / t2),
            ("det2", self.det2, self.det2 / t2),
        ]
    }

    /// (trace(I−A) − log J_exp) / (τ² ∫ trace S), which tends to 1/3 + 1/6.
    pub fn sum_rule(&self) -> f64 {
        (self.trace_i_minus_a + self.log_jexp) / (self.tau * self.tau * self.trace_s)
    }

    /// The same combination as (n−1)∫K(τ‖∇ψ‖) / (τ² ∫ trace S).
    pub fn k_ratio(&self, k_integral: f64) -> f64 {
        k_integral / (self.tau * self.tau * self.trace_s)
    }
}

pub fn small_tau_expansion_terms(psi: &ScalarField, tau: f64) -> Result<SmallTauTerms> {
    small_tau_with_k(psi, tau).map(|(t, _)| t)
}

/// Also returns (n−1)∫K(τ‖∇ψ‖) dμ.
pub fn small_tau_with_k(psi: &ScalarField, tau: f64) -> Result<(SmallTauTerms, f64)> {
    let poly = psi.representation()?;
    let grid = psi.grid();
    let rows = grid
        .points()
        .par_iter()
        .map(|x| {
            let jet = poly_jet(poly, x);
            let g = &jet.grad * tau;
            let theta = g.norm();
            if theta >= FRAC_PI_2 {
                return Err(Error::CutLocusViolation { norm: theta, limit: FRAC_PI_2 });
            }
            let base = SpherePoint::from_ambient(x.clone());
            let frame = TangentFrame::from_direction(base.clone(), &g);
            let n = frame.dim();
            let y = SpherePoint::from_ambient(exp_ambient(x, &g));
            let a = hessian_half_dist_sq(&base, &y, &frame)?;
            let h = frame.restrict(&jet.hess) * tau;
            let ev = sym_eigenvalues(&(a.matrix() + &h));
            if ev[0] <= PD_FLOOR {
                return Err(Error::NotPositiveDefinite(ev[0]));
            }
            let nm1 = (n - 1) as f64;
            let h0 = frame.restrict(&jet.hess);
            Ok([
                n as f64 - a.trace(),
                nm1 * log_theta_over_sin(theta),
                ev.iter().map(|l| x_minus_log1p(l - 1.0)).sum(),
                nm1 * jet.grad.norm_squared(),
                hs_norm_sq(&h0),
                nm1 * k_function(theta)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |k: usize| grid.integrate(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    let terms = SmallTauTerms {
        tau,
        trace_i_minus_a: col(0),
        log_jexp: col(1),
        det2: col(2),
        trace_s: col(3),
        hs_norm_sq: col(4),
    };
    Ok((terms, col(5)))
}

/// Rows (tau, term, integrated_value, tau_sq_ratio).
pub fn expansion_csv(terms: &[SmallTauTerms]) -> String {
    let mut out = String::from("tau,term,integrated_value,tau_sq_ratio\n");
    for t in terms {
        for (name, v, r) in t.ratios() {
            out.push_str(&format!("{},{name},{v},{r}\n", t.tau));
        }
    }
    out
}

/// Repeated Richardson extrapolation of values at h, h/2, h/4, ...,
/// eliminating error terms of the given orders in turn.
pub fn richardson(values: &[f64], orders: &[u32]) -> Result<f64> {
    if values.len() != orders.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "{} values cannot eliminate {} orders",
            values.len(),
            orders.len()
        )));
    }
    let mut level = values.to_vec();
    for &p in orders {
        let f = 2f64.powi(p as i32);
        level = level.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
    }
    Ok(level[0])
}

/// Ent(ν_τ | μ)/τ² for ν_τ = exp(τ∇ψ)_# μ, against the Lichnérowicz integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LichnerowiczReport {
    pub integral: f64,
    pub rows: Vec<LichnerowiczRow>,
    /// log–log slope of the relative gap against τ
    pub order: f64,
    /// first-order Richardson limit of the ratio from the two smallest τ
    pub extrapolated: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LichnerowiczRow {
    pub tau: f64,
    pub entropy: f64,
    pub ratio: f64,
    pub relative_gap: f64,
}

impl LichnerowiczReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,entropy,ratio,integral,relative_gap\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.tau, r.entropy, r.ratio, self.integral, r.relative_gap));
        }
        out
    }
}

pub fn lichnerowicz_sweep(psi: &ScalarField, u: &ScalarField, taus: &[f64]) -> Result<LichnerowiczReport> {
    if taus.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidInput("tau values must be positive".into()));
    }
    let mu = GridMeasure::on_grid(u, psi.grid().clone())?;
    let integral = lichnerowicz_integral(psi, mu.potential(), psi.dim())?;
    let rows = taus
        .par_iter()
        .map(|&tau| {
            let scaled = psi.scaled(tau);
            let cert = check_c_concavity(&scaled);
            if !cert.certified {
                return Err(Error::NotCConcave(cert.margin));
            }
            let md = density_by_fine_differences(&scaled, &mu)?;
            let entropy = relative_entropy_with_tolerance(&md.density, &mu, PUSHFORWARD_MASS_TOLERANCE)?;
            let ratio = entropy / (tau * tau);
            Ok(LichnerowiczRow { tau, entropy, ratio, relative_gap: (ratio - integral).abs() / integral.abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    let order = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.tau.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.relative_gap.ln()).collect();
        fit_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| b.tau.total_cmp(&a.tau));
    let extrapolated = match sorted.as_slice() {
        [.., a, b] if (a.tau - 2.0 * b.tau).abs() < 1e-12 * a.tau => richardson(&[a.ratio, b.ratio], &[1]).ok(),
        _ => None,
    };
    Ok(LichnerowiczReport { integral, rows, order, extrapolated })
}
