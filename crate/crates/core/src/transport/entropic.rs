//! Log-domain Sinkhorn iterations with ε-scaling.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Stop once both marginals are this close in total variation.
pub const SINKHORN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropicConfig {
    /// regularization ε in units of the cost
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for EntropicConfig {
    fn default() -> Self {
        Self { epsilon: 0.05, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornSolution {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// row-major coupling
    pub plan: Vec<f64>,
    /// ⟨π, C⟩
    pub primal_cost: f64,
    /// Σ a f + Σ b g
    pub dual_value: f64,
    pub iterations: usize,
    pub violation: f64,
}

const OVER_RELAXATION: f64 = 1.9;
const NEWTON_AFTER: usize = 500;
const NEWTON_MAX_SIZE: usize = 1200;

fn relax(x: &mut [f64], new: &[f64], omega: f64) {
    for (x, n) in x.iter_mut().zip(new) {
        *x = if omega == 1.0 || !x.is_finite() { *n } else { (1.0 - omega) * *x + omega * n };
    }
}

fn log_weights(w: &[f64]) -> Vec<f64> {
    w.iter().map(|x| if *x > 0.0 { x.ln() } else { f64::NEG_INFINITY }).collect()
}

fn lse(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|v| (v - m).exp()).sum::<f64>().ln()
}

struct Problem<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    la: Vec<f64>,
    lb: Vec<f64>,
}

impl Problem<'_> {
    fn update_f(&self, g: &[f64], eps: f64) -> Vec<f64> {
        (0..self.m)
            .into_par_iter()
            .map(|i| {
                let row = &self.cost[i * self.n..(i + 1) * self.n];
                let it = row.iter().zip(g).zip(&self.lb).map(|((c, g), lb)| (g - c) / eps + lb);
                -eps * lse(it)
            })
            .collect()
    }

    fn update_g(&self, f: &[f64], eps: f64) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|j| {
                let it = (0..self.m).map(|i| (f[i] - self.cost[i * self.n + j]) / eps + self.la[i]);
                -eps * lse(it)
            })
            .collect()
    }

    fn log_plan(&self, f: &[f64], g: &[f64], eps: f64, i: usize, j: usize) -> f64 {
        (f[i] + g[j] - self.cost[i * self.n + j]) / eps + self.la[i] + self.lb[j]
    }

    /// L¹ distance of the row and column sums from a and b.
    fn violation(&self, f: &[f64], g: &[f64], eps: f64, a: &[f64], b: &[f64]) -> f64 {
        let rows: Vec<f64> = (0..self.m)
            .into_par_iter()
            .map(|i| {
                let s: f64 = (0..self.n).map(|j| self.log_plan(f, g, eps, i, j).exp()).sum();
                (s - a[i]).abs()
            })
            .collect();
        let cols: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|j| {
                let s: f64 = (0..self.m).map(|i| self.log_plan(f, g, eps, i, j).exp()).sum();
                (s - b[j]).abs()
            })
            .collect();
        compensated_sum(rows.into_iter().chain(cols))
    }

    /// ⟨a,f⟩ + ⟨b,g⟩ − ε Σ π_ij.
    fn dual(&self, f: &[f64], g: &[f64], eps: f64, a: &[f64], b: &[f64]) -> f64 {
        let mass: Vec<f64> = (0..self.m)
            .into_par_iter()
            .map(|i| (0..self.n).map(|j| self.log_plan(f, g, eps, i, j).exp()).sum())
            .collect();
        compensated_sum(
            a.iter()
                .zip(f)
                .chain(b.iter().zip(g))
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, v)| w * v)
                .chain(mass.into_iter().map(|s| -eps * s)),
        )
    }

    /// Damped Newton ascent on the dual over rows and columns of positive
    /// mass, with the last such column held fixed to remove the gauge.
    fn newton_polish(
        &self,
        f: &mut [f64],
        g: &mut [f64],
        eps: f64,
        a: &[f64],
        b: &[f64],
        budget: usize,
    ) -> (usize, f64) {
        let rows: Vec<usize> = (0..self.m).filter(|&i| a[i] > 0.0).collect();
        let mut cols: Vec<usize> = (0..self.n).filter(|&j| b[j] > 0.0).collect();
        cols.pop();
        let (r, k) = (rows.len(), rows.len() + cols.len());
        let mut violation = self.violation(f, g, eps, a, b);
        let mut used = 0;
        while used < budget && violation >= SINKHORN_TOLERANCE {
            used += 1;
            let mut mat = DMatrix::zeros(k, k);
            let mut rhs = DVector::zeros(k);
            for (p, &i) in rows.iter().enumerate() {
                let mut row_sum = 0.0;
                for j in 0..self.n {
                    let pij = self.log_plan(f, g, eps, i, j).exp();
                    row_sum += pij;
                    if let Some(q) = cols.iter().position(|&c| c == j) {
                        mat[(p, r + q)] = pij;
                        mat[(r + q, p)] = pij;
                    }
                }
                mat[(p, p)] = row_sum;
                rhs[p] = eps * (a[i] - row_sum);
            }
            for (q, &j) in cols.iter().enumerate() {
                let col_sum: f64 = (0..self.m).map(|i| self.log_plan(f, g, eps, i, j).exp()).sum();
                mat[(r + q, r + q)] = col_sum;
                rhs[r + q] = eps * (b[j] - col_sum);
            }
            // a plan that splits into blocks leaves one gauge per block
            let shift = 1e-13 * mat.diagonal().max();
            for d in 0..k {
                mat[(d, d)] += shift;
            }
            let Some(chol) = mat.cholesky() else { break };
            let step = chol.solve(&rhs);
            let d0 = self.dual(f, g, eps, a, b);
            let mut accepted = false;
            let mut s = 1.0;
            for _ in 0..20 {
                let mut f1 = f.to_vec();
                let mut g1 = g.to_vec();
                for (p, &i) in rows.iter().enumerate() {
                    f1[i] += s * step[p];
                }
                for (q, &j) in cols.iter().enumerate() {
                    g1[j] += s * step[r + q];
                }
                let v1 = self.violation(&f1, &g1, eps, a, b);
                if self.dual(&f1, &g1, eps, a, b) >= d0 - 1e-14 * (1.0 + d0.abs()) || v1 < violation {
                    f.copy_from_slice(&f1);
                    g.copy_from_slice(&g1);
                    violation = v1;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (used, violation)
    }
}

/// Entropic optimal transport min ⟨π,C⟩ + ε KL(π | a⊗b).
pub fn sinkhorn(a: &[f64], b: &[f64], cost: &[f64], config: &EntropicConfig) -> Result<SinkhornSolution> {
    let (m, n) = (a.len(), b.len());
    if cost.len() != m * n {
        return Err(Error::DimensionMismatch { expected: m * n, got: cost.len() });
    }
    if !(config.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("regularization {}", config.epsilon)));
    }
    let p = Problem { m, n, cost, la: log_weights(a), lb: log_weights(b) };
    let cmax = cost.iter().fold(0.0f64, |s, c| s.max(c.abs()));
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];

    // ε-scaling warm start
    let mut eps = cmax.max(config.epsilon);
    while eps > config.epsilon {
        for _ in 0..10 {
            f = p.update_f(&g, eps);
            g = p.update_g(&f, eps);
        }
        eps = (eps * 0.5).max(config.epsilon);
        if eps == config.epsilon {
            break;
        }
    }
    let eps = config.epsilon;
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    // over-relaxed updates, dropped back to plain Sinkhorn if the
    // marginal error grows between checks
    let mut omega = OVER_RELAXATION;
    let mut polished = false;
    while iterations < config.max_iter {
        let g_new = p.update_g(&f, eps);
        relax(&mut g, &g_new, omega);
        let f_new = p.update_f(&g, eps);
        relax(&mut f, &f_new, omega);
        iterations += 1;
        if iterations % 5 == 0 || iterations == config.max_iter {
            let v = p.violation(&f, &g, eps, a, b);
            if v > 2.0 * violation {
                omega = 1.0;
            }
            violation = v;
            if violation < SINKHORN_TOLERANCE {
                break;
            }
        }
        // nearly decoupled plans mix slowly under alternation; finish
        // small problems with Newton steps on the dual
        if !polished && iterations >= NEWTON_AFTER && m + n <= NEWTON_MAX_SIZE {
            polished = true;
            let (used, v) = p.newton_polish(&mut f, &mut g, eps, a, b, config.max_iter - iterations);
            iterations += used;
            violation = v;
            if violation < SINKHORN_TOLERANCE {
                break;
            }
        }
    }
    if violation >= SINKHORN_TOLERANCE {
        return Err(Error::SolverNotConverged { iterations, residual: violation });
    }
    let plan: Vec<f64> = (0..m * n).map(|k| p.log_plan(&f, &g, eps, k / n, k % n).exp()).collect();
    let primal_cost = compensated_sum(plan.iter().zip(cost).map(|(p, c)| p * c));
    let dual_value = compensated_sum(
        a.iter().zip(&f).chain(b.iter().zip(&g)).filter(|(w, _)| **w > 0.0).map(|(w, v)| w * v),
    );
    Ok(SinkhornSolution { f, g, plan, primal_cost, dual_value, iterations, violation })
}

/// OT_ε(a, a) for a symmetric cost by the averaged fixed-point iteration
/// f ← ½(f + T f), which avoids the oscillation of alternating updates.
pub fn sinkhorn_symmetric(a: &[f64], cost: &[f64], config: &EntropicConfig) -> Result<f64> {
    let m = a.len();
    if cost.len() != m * m {
        return Err(Error::DimensionMismatch { expected: m * m, got: cost.len() });
    }
    if !(config.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("regularization {}", config.epsilon)));
    }
    let la = log_weights(a);
    let p = Problem { m, n: m, cost, la: la.clone(), lb: la };
    let eps = config.epsilon;
    let mut f = vec![0.0; m];
    let mut violation = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let t = p.update_f(&f, eps);
        for (x, y) in f.iter_mut().zip(&t) {
            *x = if x.is_finite() { 0.5 * (*x + y) } else { *y };
        }
        iterations += 1;
        if iterations % 5 == 0 || iterations == config.max_iter {
            violation = p.violation(&f, &f, eps, a, a);
            if violation < SINKHORN_TOLERANCE {
                break;
            }
        }
    }
    if violation >= SINKHORN_TOLERANCE {
        return Err(Error::SolverNotConverged { iterations, residual: violation });
    }
    Ok(2.0 * compensated_sum(a.iter().zip(&f).filter(|(w, _)| **w > 0.0).map(|(w, v)| w * v)))
}

/// Debiased divergence OT_ε(a,b) − ½ OT_ε(a,a) − ½ OT_ε(b,b).
pub fn sinkhorn_divergence(
    a: &[f64],
    b: &[f64],
    cost_ab: &[f64],
    cost_aa: &[f64],
    cost_bb: &[f64],
    config: &EntropicConfig,
) -> Result<f64> {
    let ab = sinkhorn(a, b, cost_ab, config)?.dual_value;
    let aa = sinkhorn_symmetric(a, cost_aa, config)?;
    let bb = sinkhorn_symmetric(b, cost_bb, config)?;
    Ok(ab - 0.5 * (aa + bb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::exact::solve_transport;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(m: usize, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.1).collect();
        let mut b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        a.iter_mut().for_each(|x| *x /= sa);
        b.iter_mut().for_each(|x| *x /= sb);
        (a, b, (0..m * n).map(|_| rng.random::<f64>()).collect())
    }

    #[test]
    fn marginals_and_duality() {
        let (a, b, c) = random_problem(12, 9, 1);
        let s = sinkhorn(&a, &b, &c, &EntropicConfig { epsilon: 0.05, max_iter: 10_000 }).unwrap();
        let rows: f64 = (0..12).map(|i| (s.plan[i * 9..(i + 1) * 9].iter().sum::<f64>() - a[i]).abs()).sum();
        let cols: f64 = (0..9).map(|j| ((0..12).map(|i| s.plan[i * 9 + j]).sum::<f64>() - b[j]).abs()).sum();
        assert!(rows + cols < SINKHORN_TOLERANCE);
        // dual = primal + ε KL(π | a⊗b)
        let kl: f64 = s
            .plan
            .iter()
            .enumerate()
            .map(|(k, p)| p * (p / (a[k / 9] * b[k % 9])).ln())
            .sum();
        assert!((s.dual_value - (s.primal_cost + 0.05 * kl)).abs() < 1e-8);
    }

    #[test]
    fn converges_to_exact_cost_from_above() {
        let (a, b, c) = random_problem(10, 10, 2);
        let exact = solve_transport(&a, &b, &c).unwrap().cost;
        let mut last = f64::INFINITY;
        for eps in [0.1, 0.05, 0.01, 0.002] {
            let s = sinkhorn(&a, &b, &c, &EntropicConfig { epsilon: eps, max_iter: 100_000 }).unwrap();
            assert!(s.primal_cost >= exact - 1e-9);
            assert!(s.primal_cost - exact <= last);
            last = s.primal_cost - exact;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn symmetric_iteration_matches_alternating() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a: Vec<f64> = (0..8).map(|_| rng.random::<f64>() + 0.2).collect();
        let sa: f64 = a.iter().sum();
        a.iter_mut().for_each(|x| *x /= sa);
        let pts: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..64).map(|k| (pts[k / 8] - pts[k % 8]).powi(2)).collect();
        let cfg = EntropicConfig { epsilon: 0.1, max_iter: 100_000 };
        let sym = sinkhorn_symmetric(&a, &c, &cfg).unwrap();
        let alt = sinkhorn(&a, &a, &c, &cfg).unwrap().dual_value;
        assert!((sym - alt).abs() < 1e-8);
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let (a, b, c) = random_problem(10, 10, 3);
        let r = sinkhorn(&a, &b, &c, &EntropicConfig { epsilon: 1e-4, max_iter: 3 });
        assert!(matches!(r, Err(Error::SolverNotConverged { .. })));
    }
}
