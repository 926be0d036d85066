//! The built-in experiments. Each parses its settings up front, runs its
//! trials (in parallel where trials are independent) and returns reports,
//! trajectories and auxiliary tables.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;

use neuronlab_core::activations::Activation;
use neuronlab_core::distributions::{discrete, uniform_ball, DistributionKey};
use neuronlab_core::linalg::{angle, basis_vector, dist_sq, norm, scale};
use neuronlab_core::mc;
use neuronlab_core::objective::Problem;
use neuronlab_core::optimize::{
    run_gd, run_gradient_flow, run_sgd, GradientMode, Horizon, Initializer, Method, OptimizerConfig,
    Sampler1d, Trajectory,
};
use neuronlab_core::rng::{derive_seed, rng_from_seed, LabRng};
use neuronlab_core::theory::{
    self, check_adversarial_failure, check_angle_monotone, check_correlation, check_flow_rate,
    check_gd_rate, check_init_probability, check_norm_safe_region, check_norm_safe_region_gaussian,
    check_pie_slice_bound, check_sgd_convergence, check_strict_monotone_rate, lambda_min_eig,
    pie_slice_directions, pie_slice_integral_with, rate_constants, AdversarialSetup,
    SpreadCertificate, TheoremReport,
};
use neuronlab_core::quadrature::GaussLegendre;
use neuronlab_core::Error as CoreError;

use crate::error::Result;
use crate::settings::{invalid, Settings};

/// Inputs to one experiment run.
pub struct Context<'a> {
    pub settings: &'a Settings,
    pub trials: usize,
    pub seed: u64,
}

impl Context<'_> {
    pub fn trial_seed(&self, k: usize) -> u64 {
        derive_seed(self.seed, k as u64)
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<TheoremReport>,
    pub trajectories: Vec<Trajectory>,
    /// Extra CSV files as `(file name, contents)`.
    pub tables: Vec<(String, String)>,
}

pub type Runner = fn(&Context) -> Result<Outcome>;

fn random_unit(d: usize, rng: &mut LabRng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&g);
        if n > 0.0 {
            return scale(&g, 1.0 / n);
        }
    }
}

fn uniform01(rng: &mut LabRng) -> f64 {
    Uniform::new(0.0, 1.0).expect("valid range").sample(rng)
}

fn parse_init(s: &Settings, key: &str, dim: usize) -> Result<Initializer> {
    let raw = s.raw(key)?;
    let parts: Vec<&str> = raw.split(':').map(str::trim).collect();
    let num = |x: &str| crate::settings::parse_real(x).ok_or_else(|| invalid(key, raw, "bad number"));
    Ok(match parts.as_slice() {
        ["xavier"] => Initializer::xavier(dim),
        ["gaussian", tau] => Initializer::gaussian_isotropic(num(tau)?)?,
        ["uniform", lo, hi] => Initializer::Product(vec![
            Sampler1d::Uniform {
                lo: num(lo)?,
                hi: num(hi)?,
            };
            dim
        ]),
        ["sphere", r] => Initializer::UniformSphere { radius: num(r)? },
        _ => return Err(invalid(key, raw, "expected xavier, gaussian:tau, uniform:lo:hi or sphere:r")),
    })
}

fn keep_strided(traj: &Trajectory, stride: usize) -> Trajectory {
    let n = traj.len();
    Trajectory {
        entries: traj
            .entries
            .iter()
            .enumerate()
            .filter(|(i, _)| i % stride == 0 || *i + 1 == n)
            .map(|(_, e)| e.clone())
            .collect(),
    }
}

pub fn thm31_failure(ctx: &Context) -> Result<Outcome> {
    let s = ctx.settings;
    let dim: usize = s.get("dim")?;
    let method = match s.raw("method")? {
        "gd" => Method::Gd,
        "sgd" => Method::Sgd,
        "flow" => Method::GradientFlow,
        other => return Err(invalid("method", other, "expected gd, sgd or flow")),
    };
    let horizon = match method {
        Method::GradientFlow => Horizon::Time(s.real("horizon")?),
        _ => Horizon::Iterations(s.get("horizon")?),
    };
    let keep: usize = s.get("save_trajectories")?;
    let stride: usize = s.get("save_stride")?;
    let setup = AdversarialSetup {
        dim,
        init: parse_init(s, "init", dim)?,
        method,
        trials: ctx.trials,
        horizon,
        step_size: s.real("eta")?,
        seed: ctx.seed,
        keep_trajectories: keep,
    };
    let out = check_adversarial_failure(&setup)?;
    let mut table = String::from("trial,seed,stuck,min_loss,failed,stuck_unchanged\n");
    for (k, t) in out.trials.iter().enumerate() {
        let _ = writeln!(
            table,
            "{k},{},{},{:.16e},{},{}",
            t.seed,
            t.stuck.len(),
            t.min_loss,
            t.failed(dim),
            t.stuck_unchanged
        );
    }
    let trajectories = out
        .trials
        .iter()
        .filter_map(|t| t.trajectory.as_ref())
        .map(|tr| keep_strided(tr, stride.max(1)))
        .collect();
    Ok(Outcome {
        reports: vec![out.report],
        trajectories,
        tables: vec![("trials.csv".into(), table)],
    })
}

pub fn thm33_strict_rate(ctx: &Context) -> Result<Outcome> {
    let s = ctx.settings;
    let acts: Vec<Activation> = s
        .list("acts")?
        .iter()
        .map(|k| k.parse::<Activation>())
        .collect::<std::result::Result<_, _>>()?;
    let n_atoms: usize = s.get("atoms")?;
    let steps: usize = s.get("steps")?;
    let frac = s.real("eta_fraction")?;
    let dims = s.usizes("dims")?;
    let results = (0..ctx.trials)
        .into_par_iter()
        .map(|k| -> Result<(TheoremReport, Trajectory)> {
            let seed = ctx.trial_seed(k);
            let act = acts[k % acts.len()];
            let d = dims[k % dims.len()];
            let samples = mc::draw_samples(&uniform_ball(d, 1.0)?, n_atoms, seed);
            let atoms: Vec<Vec<f64>> = samples.chunks_exact(d).map(<[f64]>::to_vec).collect();
            let dist = discrete(atoms, vec![1.0 / n_atoms as f64; n_atoms])?;
            let lam = lambda_min_eig(&dist, 0, 0);
            let gamma = act.global_derivative_lower_bound();
            let (c1, c2) = (1.0, act.derivative_upper_bound());
            let eta = frac * lam * gamma * gamma / (c1 * c1 * c2.powi(4));
            let mut rng = rng_from_seed(derive_seed(seed, 1));
            let v = scale(&random_unit(d, &mut rng), 0.8);
            let w0 = scale(&random_unit(d, &mut rng), 1.5 * uniform01(&mut rng));
            let p = Problem::new(dist, act, v)?;
            let tr = run_gd(&p, &w0, &OptimizerConfig::gd(eta, steps, GradientMode::ExactDiscrete), seed)?;
            let r = check_strict_monotone_rate(&p, gamma, lam, c1, c2, eta, &tr)?
                .with_meta(seed, n_atoms, vec![d]);
            let notes = format!("{} act={act} lambda_min={lam:.6e} eta={eta:.6e}", r.notes);
            Ok((r.with_notes(notes), tr))
        })
        .collect::<Result<Vec<_>>>()?;
    let (reports, trajectories) = results.into_iter().unzip();
    Ok(Outcome {
        reports,
        trajectories,
        tables: Vec::new(),
    })
}

fn gaussian_relu_problem(s: &Settings, dim: usize) -> Result<Problem> {
    let dist = s.get::<DistributionKey>("dist")?.build(dim)?;
    let act: Activation = s.get("act")?;
    let target = target_vector(s, dim)?;
    Ok(Problem::new(dist, act, target)?)
}

fn target_vector(s: &Settings, dim: usize) -> Result<Vec<f64>> {
    let raw = s.raw("target")?;
    if raw == "e1" {
        return Ok(basis_vector(dim, 0));
    }
    let v = s.reals("target")?;
    if v.len() != dim {
        return Err(invalid("target", raw, "length differs from dim"));
    }
    Ok(v)
}

fn certificate(s: &Settings, c1: f64) -> Result<SpreadCertificate> {
    Ok(SpreadCertificate::new(
        s.real("alpha")?,
        s.real("beta")?,
        s.real("gamma")?,
        c1,
        1.0,
    )?)
}

pub fn thm42_correlation(ctx: &Context) -> Result<Outcome> {
    let s = ctx.settings;
    let dim: usize = s.get("dim")?;
    let n: usize = s.get("samples")?;
    let max_angle = s.real("max_angle")?;
    let p = gaussian_relu_problem(s, dim)?;
    let cert = certificate(s, dim as f64)?;
    let reports = (0..ctx.trials)
        .into_par_iter()
        .map(|k| -> Result<TheoremReport> {
            let seed = ctx.trial_seed(k);
            let mut rng = rng_from_seed(seed);
            let w = loop {
                let w = scale(&random_unit(dim, &mut rng), 2.0 * uniform01(&mut rng));
                let ok = angle(&w, &p.target).is_some_and(|t| t <= max_angle);
                if ok && dist_sq(&w, &p.target) > 0.0 {
                    break w;
                }
            };
            Ok(check_correlation(&p, &cert, &w, None, n, derive_seed(seed, 1))?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome {
        reports,
        ..Outcome::default()
    })
}

pub fn lemb1_pie_slice(ctx: &Context) -> Result<Outcome> {
    let s = ctx.settings;
    let alphas = s.reals("alphas")?;
    let deltas = s.reals("deltas")?;
    let n_dirs: usize = s.get("directions")?;
    let radial: usize = s.get("radial_nodes")?;
    let angular: usize = s.get("angular_nodes")?;
    let (r1, a1) = (GaussLegendre::new(radial), GaussLegendre::new(angular));
    let (r2, a2) = (GaussLegendre::new(2 * radial), GaussLegendre::new(2 * angular));
    let mut reports = Vec::new();
    let mut table = String::from("alpha,delta,min_integral,bound,max_rel_change_doubled\n");
    let mut worst_change: f64 = 0.0;
    for &alpha in &alphas {
        for &delta in &deltas {
            let r = check_pie_slice_bound(alpha, delta, n_dirs)?;
            let change = pie_slice_directions(n_dirs)
                .into_iter()
                .map(|u| {
                    let base = pie_slice_integral_with(&r1, &a1, alpha, delta, u);
                    let fine = pie_slice_integral_with(&r2, &a2, alpha, delta, u);
                    ((fine - base) / fine).abs()
                })
                .fold(0.0, f64::max);
            worst_change = worst_change.max(change);
            let _ = writeln!(
                table,
                "{alpha:.16e},{delta:.16e},{:.16e},{:.16e},{change:.3e}",
                r.observed, r.predicted
            );
            reports.push(r);
        }
    }
    reports.push(
        TheoremReport::new("lemB1_quadrature", 1e-6, worst_change, 0.0, worst_change < 1e-6)
            .with_meta(0, n_dirs, vec![2])
            .with_notes(format!("nodes {radial}x{angular} vs {}x{}", 2 * radial, 2 * angular)),
    );
    Ok(Outcome {
        reports,
        trajectories: Vec::new(),
        tables: vec![("pie_slice.csv".into(), table)],
    })
}

pub fn lem51_init_prob(ctx: &Context) -> Result<Outcome> {
    let s = ctx.settings;
    let dims = s.usizes("dims")?;
    let draws: usize = s.get("draws")?;
    let reports = dims
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let tau = match s.raw("tau")? {
                "auto" => 1.0 / (d as f64 * SQRT_2),
                _ => s.real("tau")?,
            };
            Ok(check_init_probability(d, tau, draws, ctx.trial_seed(k))?.with_notes(format!("tau={tau:.6e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome {
        reports,
        ..Outcome::default()
    })
}

/// `v + sqrt(dist_sq0) u` for a random unit `u`, avoiding `w = 0`.
fn init_at_distance(v: &[f64], dist_sq0: f64, rng: &mut LabRng) -> Vec<f64> {
    loop {
        let u = random_unit(v.len(), rng);
        let w: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a + dist_sq0.sqrt() * b).collect();
        if norm(&w) > 1e-3 {
            return w;
        }
    }
}

pub fn thm53_gd_rate(ctx: &Context) -> Result<Outcome> {
    let s = ctx.settings;
    let dim: usize = s.get("dim")?;
    let steps: usize = s.get("steps")?;
    let dist_sq0 = s.real("dist_sq0")?;
    let p = gaussian_relu_problem(s, dim)?;
    let cert = certificate(s, dim as f64)?;
    let rc = rate_constants(&cert, 0.5, 0.5, 0.5)?;
    let eta = rc.eta_max_gd;
    let results = (0..ctx.trials)
        .into_par_iter()
        .map(|k| -> Result<(TheoremReport, Trajectory)> {
            let seed = ctx.trial_seed(k);
            let w0 = init_at_distance(&p.target, dist_sq0, &mut rng_from_seed(seed));
            let tr = run_gd(&p, &w0, &OptimizerConfig::gd(eta, steps, GradientMode::ClosedForm), seed)?;
            let r = check_gd_rate(&tr, rc.lambda_gd, eta)?.with_meta(seed, steps, vec![dim]);
            let notes = format!("{} eta={eta:.6e} lambda={:.6e}", r.notes, rc.lambda_gd);
            Ok((r.with_notes(notes), tr))
        })
        .collect::<Result<Vec<_>>>()?;
    let (reports, trajectories) = results.into_iter().unzip();
    Ok(Outcome {
        reports,
        trajectories,
        tables: Vec::new(),
    })
}

pub fn thm53_sgd(ctx: &Context) -> Result<Outcome> {
    let s = ctx.settings;
    let dim: usize = s.get("dim")?;
    let (eps1, eps2, delta_fail) = (s.real("eps1")?, s.real("eps2")?, s.real("delta_fail")?);
    let dist_sq0 = s.real("dist_sq0")?;
    let cap: usize = s.get("max_iterations")?;
    let p = gaussian_relu_problem(s, dim)?;
    let cert = certificate(s, dim as f64)?;
    let rc = rate_constants(&cert, eps1, eps2, delta_fail)?;
    let eta = match s.raw("eta")? {
        "auto" => rc.eta_max_sgd,
        _ => s.real("eta")?,
    };
    let required = (2.0 * (1.0 / eps2).ln() / (rc.lambda_flow * eta)).ceil();
    let steps = if required <= cap as f64 { required as usize } else { cap };
    let truncated = (steps as f64) < required;
    let stride = (steps / 100).max(1);
    let results = (0..ctx.trials)
        .into_par_iter()
        .map(|k| -> Result<Trajectory> {
            let seed = ctx.trial_seed(k);
            let w0 = init_at_distance(&p.target, dist_sq0, &mut rng_from_seed(seed));
            let cfg = OptimizerConfig::sgd(eta, steps).with_stride(stride);
            Ok(run_sgd(&p, &w0, &cfg, derive_seed(seed, 1))?)
        })
        .collect::<Result<Vec<_>>>()?;
    let finals: Vec<f64> = results.iter().map(|t| t.last().dist_sq).collect();
    let mut r = check_sgd_convergence(&finals, eps2, rc.sgd_failure_prob).with_meta(ctx.seed, ctx.trials, vec![dim]);
    let mut notes = format!(
        "eta={eta:.3e} required_T={required:.3e} run_T={steps} claimed_failure_prob={:.3e}",
        rc.sgd_failure_prob
    );
    if truncated {
        r.passed = false;
        notes.push_str(" horizon truncated: required T exceeds max_iterations");
    }
    if !r.notes.is_empty() {
        notes = format!("{}; {notes}", r.notes);
    }
    Ok(Outcome {
        reports: vec![r.with_notes(notes)],
        trajectories: results,
        tables: Vec::new(),
    })
}

/// A flow and, if integration stopped early, why.
type Flow = (Trajectory, Option<String>);

/// Gradient flows from random inits with `0 < |w(0)| <= 2` and
/// `theta(w(0), v) <= pi - eps`; integration failures keep the partial path.
fn gaussian_flows(ctx: &Context) -> Result<(Vec<Flow>, f64, f64)> {
    let s = ctx.settings;
    let dim: usize = s.get("dim")?;
    let t_max = s.real("t_max")?;
    let eps = s.real("eps")?;
    let tol = s.real("flow_tol")?;
    let p = gaussian_relu_problem(s, dim)?;
    let cert = certificate(s, dim as f64)?;
    let lambda = cert.alpha.powi(4) * cert.beta / (8.0 * SQRT_2) * (eps / 8.0).sin().powi(3);
    let cfg = OptimizerConfig::flow(t_max, GradientMode::ClosedForm).with_tolerance(tol);
    let flows = (0..ctx.trials)
        .into_par_iter()
        .map(|k| -> Result<Flow> {
            let mut rng = rng_from_seed(ctx.trial_seed(k));
            let w0 = loop {
                let r = 2.0 * uniform01(&mut rng);
                let w = scale(&random_unit(dim, &mut rng), r);
                if r > 0.0 && angle(&w, &p.target).is_some_and(|t| t <= PI - eps) {
                    break w;
                }
            };
            match run_gradient_flow(&p, &w0, &cfg) {
                Ok(t) => Ok((t, None)),
                Err(CoreError::IntegrationFailure { time, partial, .. }) => {
                    Ok((*partial, Some(format!("integration failed at t={time}"))))
                }
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((flows, lambda, tol))
}

fn with_failure_note(mut r: TheoremReport, failure: &Option<String>) -> TheoremReport {
    if let Some(f) = failure {
        r.passed = false;
        r.notes = if r.notes.is_empty() { f.clone() } else { format!("{}; {f}", r.notes) };
    }
    r
}

pub fn lem61_angle(ctx: &Context) -> Result<Outcome> {
    let (flows, _, tol) = gaussian_flows(ctx)?;
    let mut reports = Vec::new();
    for (k, (tr, failure)) in flows.iter().enumerate() {
        let r = match check_angle_monotone(tr, 1e-6 + tol) {
            Ok(r) => r,
            Err(e) => TheoremReport::new("lem61_angle", 0.0, f64::NAN, 0.0, false).with_notes(e.to_string()),
        };
        let dims = r.dims.clone();
        reports.push(with_failure_note(r.with_meta(ctx.trial_seed(k), tr.len(), dims), failure));
    }
    Ok(Outcome {
        reports,
        trajectories: flows.into_iter().map(|(t, _)| t).collect(),
        tables: Vec::new(),
    })
}

pub fn thm63_flow_rate(ctx: &Context) -> Result<Outcome> {
    let (flows, lambda, tol) = gaussian_flows(ctx)?;
    let reports = flows
        .iter()
        .enumerate()
        .map(|(k, (tr, failure))| {
            let r = check_flow_rate(tr, lambda, tol);
            let dims = r.dims.clone();
            let notes = format!("{} lambda={lambda:.6e}", r.notes);
            with_failure_note(r.with_meta(ctx.trial_seed(k), tr.len(), dims).with_notes(notes), failure)
        })
        .collect();
    Ok(Outcome {
        reports,
        trajectories: flows.into_iter().map(|(t, _)| t).collect(),
        tables: Vec::new(),
    })
}

pub fn lem62_norm_region(ctx: &Context) -> Result<Outcome> {
    let s = ctx.settings;
    let dim: usize = s.get("dim")?;
    let n: usize = s.get("samples")?;
    let p = gaussian_relu_problem(s, dim)?;
    if dim < 2 {
        return Err(invalid("dim", &dim.to_string(), "needs at least 2"));
    }
    let e1 = p.target.iter().map(|x| x / norm(&p.target)).collect::<Vec<_>>();
    let e2 = {
        let b = basis_vector(dim, if e1[0].abs() < 0.9 { 0 } else { 1 });
        let proj = neuronlab_core::linalg::dot(&b, &e1);
        let r: Vec<f64> = b.iter().zip(&e1).map(|(x, y)| x - proj * y).collect();
        scale(&r, 1.0 / norm(&r))
    };
    let in_plane = |r: f64, theta: f64| -> Vec<f64> {
        e1.iter().zip(&e2).map(|(a, b)| r * (theta.cos() * a + theta.sin() * b)).collect()
    };
    let results = (0..ctx.trials)
        .into_par_iter()
        .map(|k| -> Result<Vec<TheoremReport>> {
            let seed = ctx.trial_seed(k);
            let mut rng = rng_from_seed(seed);
            let theta = PI * (0.02 + 0.96 * uniform01(&mut rng));
            let u = 0.05 + 0.95 * uniform01(&mut rng);
            let w = in_plane(u * theory::norm_safe_threshold(theta), theta);
            let mc_report = check_norm_safe_region(&p, &w, n, derive_seed(seed, 1))?;
            let a = PI - theta;
            let wg = in_plane(u * norm(&p.target) * a.powi(3) / PI.powi(4), theta);
            let cf_report = check_norm_safe_region_gaussian(&wg, &p.target)?.with_meta(seed, 0, vec![dim]);
            Ok(vec![mc_report, cf_report])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome {
        reports: results.into_iter().flatten().collect(),
        ..Outcome::default()
    })
}

pub fn sec32_variance(ctx: &Context) -> Result<Outcome> {
    let s = ctx.settings;
    let dims = s.usizes("dims")?;
    let targets: usize = s.get("targets")?;
    let n: usize = s.get("samples")?;
    let act: Activation = s.get("act")?;
    let control: Activation = s.get("control")?;
    let w = |d: usize| basis_vector(d, 0);
    let var = theory::gradient_variance_experiment(&act, &dims, targets, n, w, ctx.seed)?;
    let ctl = theory::gradient_variance_experiment(&control, &dims, targets, n, w, ctx.seed)?;
    let mut table = format!("d,{act},{control}\n");
    for ((d, a), (_, b)) in var.iter().zip(&ctl) {
        let _ = writeln!(table, "{d},{a:.16e},{b:.16e}");
    }
    let decreasing = var.windows(2).filter(|p| p[1].1 < p[0].1).count();
    let first = var.first().map_or(f64::NAN, |x| x.1);
    let last = var.last().map_or(f64::NAN, |x| x.1);
    let ratio = last / first;
    let ctl_ratio = ctl.last().map_or(f64::NAN, |x| x.1) / ctl.first().map_or(f64::NAN, |x| x.1);
    let dims_meta = dims.clone();
    let meta = |r: TheoremReport| r.with_meta(ctx.seed, n, dims_meta.clone());
    let steps = var.len().saturating_sub(1);
    Ok(Outcome {
        reports: vec![
            meta(TheoremReport::new(
                "sec32_variance_decreasing",
                steps as f64,
                decreasing as f64,
                0.0,
                decreasing == steps,
            )),
            meta(TheoremReport::new("sec32_variance_ratio", 0.1, ratio, 0.0, ratio <= 0.1)),
            meta(TheoremReport::new("sec32_control_ratio", 0.5, ctl_ratio, 0.0, ctl_ratio >= 0.5)),
        ],
        trajectories: Vec::new(),
        tables: vec![("variance.csv".into(), table)],
    })
}

/// Largest gap in `[lo, hi]` left uncovered by the sorted angle samples.
pub fn coverage_gap(angles: &[f64], lo: f64, hi: f64) -> f64 {
    let mut pts: Vec<f64> = angles.iter().copied().filter(|a| *a >= lo && *a <= hi).collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

pub fn fig1(ctx: &Context) -> Result<Outcome> {
    let s = ctx.settings;
    let inits = s.vectors("inits")?;
    let dim = inits.first().map_or(0, Vec::len);
    if ctx.trials > inits.len() {
        return Err(invalid("trials", &ctx.trials.to_string(), "more trials than inits"));
    }
    let p = gaussian_relu_problem(s, dim)?;
    let eta = s.real("eta")?;
    let horizon: usize = s.get("horizon")?;
    let samples: usize = s.get("samples")?;
    let stride: usize = s.get("stride")?;
    let cfg = OptimizerConfig::gd(eta, horizon, GradientMode::MonteCarlo { samples }).with_stride(stride);
    let trajectories = inits[..ctx.trials]
        .par_iter()
        .enumerate()
        .map(|(k, w0)| Ok(run_gd(&p, w0, &cfg, ctx.trial_seed(k))?))
        .collect::<Result<Vec<Trajectory>>>()?;

    let target_dist = s.real("target_dist")?;
    let mut reports = Vec::new();
    let mut all_angles = Vec::new();
    let mut best_rise = f64::NEG_INFINITY;
    let mut in_range = true;
    for (k, tr) in trajectories.iter().enumerate() {
        let d = tr.last().dist();
        reports.push(
            TheoremReport::new("fig1_converged", target_dist, d, 0.0, d <= target_dist)
                .with_meta(ctx.trial_seed(k), samples, vec![dim])
                .with_notes(format!("init {k}")),
        );
        let angles: Vec<f64> = tr.entries.iter().filter_map(|e| e.angle).collect();
        in_range &= angles.len() == tr.len() && angles.iter().all(|a| *a > 0.0 && *a <= PI);
        if let Some(&a0) = angles.first() {
            let rise = angles.iter().fold(f64::NEG_INFINITY, |m, a| m.max(*a)) - a0;
            best_rise = best_rise.max(rise);
        }
        all_angles.extend(angles);
    }
    let min_rise = s.real("min_rise")?;
    reports.push(
        TheoremReport::new("fig1_nonmonotone", min_rise, best_rise, 0.0, best_rise >= min_rise)
            .with_meta(ctx.seed, samples, vec![dim]),
    );
    let (lo, hi) = (s.real("cover_lo")?, s.real("cover_hi")?);
    let max_gap = s.real("cover_gap")?;
    let gap = coverage_gap(&all_angles, lo, hi);
    reports.push(
        TheoremReport::new("fig1_coverage", max_gap, gap, 0.0, gap <= max_gap)
            .with_meta(ctx.seed, samples, vec![dim])
            .with_notes(format!("[{lo}, {hi}]")),
    );
    reports.push(
        TheoremReport::new("fig1_angle_range", PI, all_angles.iter().fold(0.0, |m: f64, a| m.max(*a)), 0.0, in_range)
            .with_meta(ctx.seed, samples, vec![dim]),
    );

    let mut tables = Vec::new();
    let grid: usize = s.get("grid")?;
    if grid > 0 && dim == 2 {
        tables.push(("loss_grid.csv".into(), loss_grid(&p, grid, s.real("grid_range")?, s.get("grid_samples")?, ctx.seed)));
    }
    Ok(Outcome {
        reports,
        trajectories,
        tables,
    })
}

/// `w0,w1,loss` on a `grid x grid` lattice over `[-range, range]^2`, with one
/// shared Monte Carlo sample set.
fn loss_grid(p: &Problem, grid: usize, range: f64, n: usize, seed: u64) -> String {
    let x = mc::draw_samples(&p.dist, n, derive_seed(seed, u64::MAX));
    let coord = |i: usize| {
        if grid == 1 {
            0.0
        } else {
            -range + 2.0 * range * i as f64 / (grid - 1) as f64
        }
    };
    let vx: Vec<f64> = x.chunks_exact(2).map(|s| p.act.value(p.target[0] * s[0] + p.target[1] * s[1])).collect();
    let rows: Vec<String> = (0..grid * grid)
        .into_par_iter()
        .map(|k| {
            let (w0, w1) = (coord(k / grid), coord(k % grid));
            let sum: f64 = x
                .chunks_exact(2)
                .zip(&vx)
                .map(|(s, fv)| {
                    let r = p.act.value(w0 * s[0] + w1 * s[1]) - fv;
                    0.5 * r * r
                })
                .sum();
            format!("{w0:.16e},{w1:.16e},{:.16e}\n", sum / n as f64)
        })
        .collect();
    let mut out = String::from("w0,w1,loss\n");
    for r in rows {
        out.push_str(&r);
    }
    out
}
