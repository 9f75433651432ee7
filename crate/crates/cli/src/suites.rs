use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphere_ot::entropy::{entropy_formula_rhs, talagrand_check};
use sphere_ot::fields::{scale_until_c_concave, AmbientPoly, FieldFile, FieldRecipe, GridSpec, ScalarField, DEFAULT_EPSILON};
use sphere_ot::jacobi::{hessian_from_jacobi, jacobi_propagate, lichnerowicz_sweep, rk4_jacobi, small_tau_with_k, BlockState, CurvatureSpec, RK4_STEPS};
use sphere_ot::numeric::fit_slope;
use sphere_ot::sphere::{exp_map, geodesic_distance, hessian_half_dist_sq, log_map, random_point, random_tangent, TangentFrame};
use sphere_ot::transport::{duality_residual, green_w1_bound, green_w1_bound_densities, DiscreteMeasure, MeasureFile};

use crate::config::{read_json, Command, ConfigError, ExperimentConfig};
use crate::report::Report;

type Outcome = Result<Report, ConfigError>;

pub fn run(command: Command, cfg: &ExperimentConfig) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = Report::new(command, cfg.dim, cfg.seed);
    match command {
        Command::GeometryCheck => geometry(cfg, &mut rng, &mut report),
        Command::EntropyVerify => entropy(cfg, &mut rng, &mut report)?,
        Command::Talagrand => talagrand(cfg, &mut rng, &mut report)?,
        Command::Lichnerowicz => lichnerowicz(cfg, &mut rng, &mut report)?,
        Command::W1Green => w1_green(cfg, &mut rng, &mut report)?,
        Command::JacobiCheck => jacobi(cfg, &mut rng, &mut report)?,
    }
    Ok(report)
}

fn geometry(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, report: &mut Report) {
    let n = cfg.dim;
    let samples = if cfg.samples == 0 { 10_000 } else { cfg.samples };
    let mut roundtrip: f64 = 0.0;
    let mut cosine: f64 = 0.0;
    for _ in 0..samples {
        let x = random_point(n, rng);
        let r = rng.random_range(0.0..PI - 0.1);
        let tau = random_tangent(&x, r, rng);
        let y = exp_map(&x, &tau).expect("inside the injectivity radius");
        let back = log_map(&x, &y).expect("not antipodal");
        roundtrip = roundtrip.max((back.vec() - tau.vec()).norm());
        let z = random_point(n, rng);
        let sinc = if r == 0.0 { 1.0 } else { r.sin() / r };
        let rhs = r.cos() * geodesic_distance(&x, &z).cos() + sinc * tau.vec().dot(z.coords());
        cosine = cosine.max((geodesic_distance(&y, &z).cos() - rhs).abs());
    }
    let tol = cfg.tolerance("geometry");
    report.info("samples", samples as f64, "random exp/log pairs");
    report.at_most("exp_log_roundtrip", roundtrip, tol, "log is the inverse of exp");
    report.at_most("cosine_rule_residual", cosine, tol, "spherical cosine rule for exp");
}

fn read_field(path: &std::path::Path, grid: &GridSpec) -> Result<AmbientPoly, ConfigError> {
    let file: FieldFile = read_json(path)?;
    Ok(file.into_field(grid)?.representation()?.clone())
}

/// ψ before ε-scaling: from `psi_path`, else a seeded random field.
fn psi_base(cfg: &ExperimentConfig, grid: &GridSpec, rng: &mut ChaCha8Rng) -> Result<AmbientPoly, ConfigError> {
    let recipe = FieldRecipe { lmax: cfg.psi_lmax, hessian_scale: cfg.psi_amplitude };
    let random = recipe.build(cfg.dim, rng)?;
    match &cfg.psi_path {
        Some(p) => read_field(p, grid),
        None if cfg.psi_amplitude == 0.0 => Ok(AmbientPoly::zero(cfg.dim + 1)),
        None => Ok(random),
    }
}

fn potential(cfg: &ExperimentConfig, grid: &GridSpec, rng: &mut ChaCha8Rng) -> Result<ScalarField, ConfigError> {
    let recipe = FieldRecipe { lmax: cfg.u_lmax, hessian_scale: cfg.u_amplitude };
    let random = recipe.build(cfg.dim, rng)?;
    let poly = match &cfg.u_path {
        Some(p) => read_field(p, grid)?,
        None if cfg.u_amplitude == 0.0 => AmbientPoly::zero(cfg.dim + 1),
        None => random,
    };
    Ok(ScalarField::from_poly(grid.build()?, poly)?)
}

/// The ε-scaled potentials to test: the configured list, or the first ε
/// of the halving protocol that certifies c-concavity.
fn scaled_potentials(cfg: &ExperimentConfig, grid: &GridSpec, base: &AmbientPoly) -> Result<Vec<(f64, ScalarField)>, ConfigError> {
    let g = grid.build()?;
    if base.degree() == 0 {
        // a constant ψ moves nothing
        return Ok(vec![(1.0, ScalarField::from_poly(g, base.clone())?)]);
    }
    if cfg.epsilon_list.is_empty() {
        let sp = scale_until_c_concave(g, base, DEFAULT_EPSILON)?;
        return Ok(vec![(sp.epsilon, sp.field)]);
    }
    cfg.epsilon_list
        .iter()
        .map(|&e| Ok((e, ScalarField::from_poly(g.clone(), base.scale(e))?)))
        .collect()
}

fn entropy(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, report: &mut Report) -> Result<(), ConfigError> {
    let grid = cfg.grid_or(64, 128);
    report.grid = Some(grid);
    let base = psi_base(cfg, &grid, rng)?;
    let u = potential(cfg, &grid, rng)?;
    for (eps, psi) in scaled_potentials(cfg, &grid, &base)? {
        let r = entropy_formula_rhs(&psi, &u)?;
        let tag = |s: &str| format!("{s}[eps={eps}]");
        report.info(tag("direct_entropy"), r.direct_entropy, "relative entropy of the pushforward");
        report.info(tag("rhs_total"), r.rhs_total, "entropy formula, right side");
        report.info(tag("trace_term"), r.trace_term, "trace of H - log(A+H)");
        report.info(tag("jacobian_term"), r.jacobian_term, "log Jacobian of exp");
        report.info(tag("u_line_term"), r.u_line_term, "Hessian of U along the geodesic");
        report.info(tag("w2_squared"), r.w2_squared, "quadratic transport cost");
        report.at_most(tag("relative_gap"), r.relative_gap, cfg.tolerance("entropy"), "entropy formula");
        report.at_most(tag("split_gap"), r.split_gap, cfg.tolerance("split"), "Carleman and K split of the trace term");
        report.info(tag("mass_error"), r.mass_error, "mass of the recovered density");
    }
    Ok(())
}

fn talagrand(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, report: &mut Report) -> Result<(), ConfigError> {
    let grid = cfg.grid_or(48, 96);
    report.grid = Some(grid);
    let base = psi_base(cfg, &grid, rng)?;
    let u = potential(cfg, &grid, rng)?;
    for (eps, psi) in scaled_potentials(cfg, &grid, &base)? {
        let r = talagrand_check(&psi, &u)?;
        let tag = |s: &str| format!("{s}[eps={eps}]");
        report.info(tag("entropy"), r.entropy, "relative entropy of the pushforward");
        report.info(tag("w2_squared"), r.w2_squared, "quadratic transport cost");
        report.info(tag("kappa"), r.kappa, "curvature-dimension lower bound");
        report.nonnegative(tag("slack"), r.slack, cfg.tolerance("talagrand"), "Talagrand inequality");
    }
    Ok(())
}

fn lichnerowicz(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, report: &mut Report) -> Result<(), ConfigError> {
    let grid = cfg.grid_or(64, 128);
    report.grid = Some(grid);
    let base = psi_base(cfg, &grid, rng)?;
    let u = potential(cfg, &grid, rng)?;
    let psi = ScalarField::from_poly(grid.build()?, base)?;
    let taus = if cfg.tau_list.is_empty() { vec![0.1, 0.05, 0.025] } else { cfg.tau_list.clone() };
    let sweep = lichnerowicz_sweep(&psi, &u, &taus)?;
    let tol = cfg.tolerance("lichnerowicz");
    report.info("integral", sweep.integral, "second-order entropy integral");
    for row in &sweep.rows {
        report.info(format!("entropy[tau={}]", row.tau), row.entropy, "relative entropy along the flow");
        report.info(format!("ratio[tau={}]", row.tau), row.ratio, "entropy over tau squared");
        report.at_most(format!("relative_gap[tau={}]", row.tau), row.relative_gap, tol, "second-order expansion");
    }
    if sweep.rows.len() >= 2 {
        let xs: Vec<f64> = sweep.rows.iter().map(|r| r.tau.ln()).collect();
        let ys: Vec<f64> = sweep.rows.iter().map(|r| r.entropy.ln()).collect();
        report.at_most("entropy_slope_minus_two", fit_slope(&xs, &ys) - 2.0, 0.1, "entropy is quadratic in tau");
        report.at_least("gap_order", sweep.order, 1.0, "convergence of the expansion");
    }
    let tau = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let (terms, k) = small_tau_with_k(&psi, tau)?;
    let sum_tol = cfg.tolerance("sum-rule");
    report.at_most("sum_rule_minus_half", terms.sum_rule() - 0.5, sum_tol, "one third plus one sixth");
    report.at_most("k_coefficient_minus_half", terms.k_ratio(k) - 0.5, sum_tol, "small-angle limit of K");
    Ok(())
}

fn read_measure(path: &std::path::Path) -> Result<DiscreteMeasure, ConfigError> {
    let file: MeasureFile = read_json(path)?;
    Ok(file.into_measure()?)
}

fn w1_green(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, report: &mut Report) -> Result<(), ConfigError> {
    if cfg.dim != 2 {
        return Err(ConfigError("w1-green is only defined on the 2-sphere".into()));
    }
    let spec = cfg.grid_or(64, 128);
    report.grid = Some(spec);
    let grid = spec.build()?;
    let tag = "Green function bound on W1";
    let (mu, nu) = match (&cfg.mu_path, &cfg.nu_path) {
        (Some(a), Some(b)) => (read_measure(a)?, read_measure(b)?),
        (None, None) => {
            // densities 1 and 1 + z relative to the normalized area
            let v_mu = ScalarField::from_fn(grid.clone(), |_| 1.0)?;
            let v_nu = ScalarField::from_fn(grid.clone(), |x| 1.0 + x[2])?;
            let b = green_w1_bound_densities(&v_mu, &v_nu)?;
            report.info("w1", b.lhs, tag);
            report.info("green_rhs", b.rhs, tag);
            report.nonnegative("margin", b.rhs - b.lhs - b.discretization, 0.0, tag);
            return Ok(());
        }
        _ => return Err(ConfigError("w1-green needs both mu_path and nu_path".into())),
    };
    let b = green_w1_bound(&mu, &nu, &spec)?;
    report.info("w1", b.lhs, tag);
    report.info("green_rhs", b.rhs, tag);
    report.info("discretization", b.discretization, "discretization of the mollified measures");
    report.info("cap_radius", b.cap_radius, "mollification cap radius");
    report.nonnegative("margin", b.rhs - b.lhs - b.discretization, 0.0, tag);
    let phi = ScalarField::from_poly(grid, FieldRecipe { lmax: 4, hessian_scale: 1.0 }.build(2, rng)?)?;
    report.at_most("duality_residual", duality_residual(&mu, &nu, &phi, &spec)?, cfg.tolerance("duality"), "Green duality");
    Ok(())
}

fn jacobi(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, report: &mut Report) -> Result<(), ConfigError> {
    let n = cfg.dim;
    let spec = CurvatureSpec::ConstantSphere(n);
    let mut rk4: f64 = 0.0;
    let mut hessian: f64 = 0.0;
    for k in 1..=30 {
        let rho = 3.0 * k as f64 / 31.0;
        let start = BlockState {
            y: DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)),
            v: DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)),
        };
        let closed = jacobi_propagate(&spec, &start, rho, 1.0)?;
        let numeric = rk4_jacobi(&spec, &start, rho, 1.0, RK4_STEPS);
        rk4 = rk4.max((closed.y - numeric.y).amax()).max((closed.v - numeric.v).amax());

        let x = random_point(n, rng);
        let u = random_tangent(&x, 1.0, rng);
        let y = exp_map(&x, &u.scaled(rho))?;
        let frame = TangentFrame::from_direction(x.clone(), u.vec());
        let a = hessian_from_jacobi(&spec, &frame, rho)?;
        hessian = hessian.max((a.matrix() - hessian_half_dist_sq(&x, &y, &frame)?.matrix()).amax());
    }
    report.at_most("closed_form_vs_rk4", rk4, cfg.tolerance("jacobi"), "Jacobi equation on the sphere");
    report.at_most("hessian_from_jacobi", hessian, cfg.tolerance("hessian"), "Hessian of half squared distance");
    Ok(())
}
