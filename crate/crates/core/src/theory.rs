//! Predicted quantities of the convergence and failure results, and checkers
//! that compare them against measured behavior.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::activations::{make_relu, Activation};
use crate::distributions::{
    adversarial_instance, spread_params_for_gaussian, standard_gaussian, AdversarialDataset,
    InputDistribution,
};
use crate::error::{Error, Result};
use crate::linalg::{angle, basis_vector, check_dim, dist_sq, dot, norm, scale, sub};
use crate::mc;
use crate::objective::{directional_gradient_mc, gradient_closed_form_gaussian_relu, Problem};
use crate::optimize::{
    initialize, run_gd, run_gradient_flow, run_sgd, GradientMode, Horizon, Initializer, Method,
    OptimizerConfig, Trajectory,
};
use crate::quadrature::{integrate_polar, GaussLegendre};
use crate::rng::{derive_seed, rng_from_seed};

/// Number of standard errors used by one-sided statistical checks.
pub const SE_MULT: f64 = 4.0;
/// Absolute slack for deterministic checks.
pub const DET_TOL: f64 = 1e-6;

pub const PIE_RADIAL_NODES: usize = 128;
pub const PIE_ANGULAR_NODES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadCertificate {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
}

impl SpreadCertificate {
    pub fn new(alpha: f64, beta: f64, gamma: f64, c1: f64, c2: f64) -> Result<Self> {
        let pos = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be positive",
                })
            }
        };
        pos("alpha", alpha)?;
        pos("beta", beta)?;
        pos("c1", c1)?;
        pos("c2", c2)?;
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
                reason: "must be non-negative",
            });
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            c1,
            c2,
        })
    }

    /// `gamma` taken from the activation on `(0, 2 alpha)` and `c2` from its
    /// derivative bound.
    pub fn for_activation(act: &Activation, alpha: f64, beta: f64, c1: f64) -> Result<Self> {
        if !act.is_monotone() {
            return Err(Error::Precondition(format!("activation {act} is not monotone")));
        }
        Self::new(alpha, beta, act.monotone_lower_bound(alpha), c1, act.derivative_upper_bound())
    }

    /// ReLU under `N(0, I_d)` at `alpha = 1`, with `c1 = E|x|^2 = d`.
    pub fn standard_gaussian_relu(dim: usize) -> Result<Self> {
        let sp = spread_params_for_gaussian(1.0)?;
        Self::new(sp.alpha, sp.beta, 1.0, dim as f64, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    pub theorem_id: String,
    pub predicted: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
    pub n: usize,
    pub dims: Vec<usize>,
    pub notes: String,
}

impl TheoremReport {
    pub fn new(id: &str, predicted: f64, observed: f64, tolerance: f64, passed: bool) -> Self {
        Self {
            theorem_id: id.to_string(),
            predicted,
            observed,
            tolerance,
            passed,
            seed: 0,
            n: 0,
            dims: Vec::new(),
            notes: String::new(),
        }
    }

    pub fn with_meta(mut self, seed: u64, n: usize, dims: Vec<usize>) -> Self {
        self.seed = seed;
        self.n = n;
        self.dims = dims;
        self
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        self.notes = notes.into();
        self
    }

    /// `theorem_id, predicted, observed, tolerance, passed, seed, n`
    pub fn record_line(&self) -> String {
        format!(
            "{}, {:.10e}, {:.10e}, {:.3e}, {}, {}, {}",
            self.theorem_id, self.predicted, self.observed, self.tolerance, self.passed, self.seed, self.n
        )
    }
}

impl fmt::Display for TheoremReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.record_line())?;
        if !self.notes.is_empty() {
            write!(f, "  # {}", self.notes)?;
        }
        Ok(())
    }
}

/// Merges reports into one that passes iff all of them do; observed is the
/// pass count and predicted the total.
pub fn summarize(id: &str, reports: &[TheoremReport]) -> TheoremReport {
    let passed = reports.iter().filter(|r| r.passed).count();
    TheoremReport::new(id, reports.len() as f64, passed as f64, 0.0, passed == reports.len())
        .with_meta(
            reports.first().map_or(0, |r| r.seed),
            reports.iter().map(|r| r.n).sum(),
            reports.first().map_or(Vec::new(), |r| r.dims.clone()),
        )
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= PI + 1e-12 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "delta_angle",
            value: delta,
            reason: "must lie in (0, pi]",
        })
    }
}

/// `alpha^4 beta gamma^2 / (8 sqrt 2) * sin^3(delta / 4) * dist_sq`.
pub fn correlation_bound(cert: &SpreadCertificate, delta: f64, dist_sq: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(dist_sq >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "dist_sq",
            value: dist_sq,
            reason: "must be non-negative",
        });
    }
    Ok(cert.alpha.powi(4) * cert.beta * cert.gamma.powi(2) / (8.0 * SQRT_2)
        * (delta / 4.0).sin().powi(3)
        * dist_sq)
}

/// Monte Carlo check of `<grad F(w), w - v> >= correlation_bound`. When
/// `delta` is `None` the tightest admissible gap `pi - theta(w, v)` is used.
pub fn check_correlation(
    p: &Problem,
    cert: &SpreadCertificate,
    w: &[f64],
    delta: Option<f64>,
    n: usize,
    seed: u64,
) -> Result<TheoremReport> {
    check_dim(p.dim(), w.len())?;
    if norm(w) > 2.0 + 1e-12 {
        return Err(Error::Precondition(format!("|w| = {} exceeds 2", norm(w))));
    }
    let diff = sub(w, &p.target);
    if norm(&diff) == 0.0 {
        return Err(Error::Precondition("w equals the target".into()));
    }
    let theta = angle(w, &p.target).ok_or(Error::UndefinedAngle)?;
    let delta = delta.unwrap_or(PI - theta);
    check_delta(delta)?;
    if theta > PI - delta + 1e-12 {
        return Err(Error::Precondition(format!(
            "theta = {theta} exceeds pi - delta = {}",
            PI - delta
        )));
    }
    let predicted = correlation_bound(cert, delta, dist_sq(w, &p.target))?;
    let est = directional_gradient_mc(p, w, &diff, n, seed)?;
    let tol = SE_MULT * est.std_err;
    Ok(
        TheoremReport::new("thm42_correlation", predicted, est.mean, tol, est.mean + tol >= predicted)
            .with_meta(seed, n, vec![p.dim()]),
    )
}

/// Closed form of the pie-slice integral for `u = (cos psi, sin psi)`.
pub fn pie_slice_integral_exact(alpha: f64, delta: f64, u: [f64; 2]) -> f64 {
    let cos2psi = u[0] * u[0] - u[1] * u[1];
    alpha.powi(4) / 8.0 * (delta + delta.sin() * cos2psi)
}

/// `int (u.y)^2 dy` over `{ y : angle(y, e1) <= delta/2, |y| <= alpha }`.
pub fn pie_slice_integral(alpha: f64, delta: f64, u: [f64; 2]) -> f64 {
    let radial = GaussLegendre::new(PIE_RADIAL_NODES);
    let angular = GaussLegendre::new(PIE_ANGULAR_NODES);
    pie_slice_integral_with(&radial, &angular, alpha, delta, u)
}

pub fn pie_slice_integral_with(
    radial: &GaussLegendre,
    angular: &GaussLegendre,
    alpha: f64,
    delta: f64,
    u: [f64; 2],
) -> f64 {
    // the integrand factorizes as r^2 (u.(cos phi, sin phi))^2, so the
    // tensor-product rule is a product of two one-dimensional sums
    let r_part: f64 = radial.mapped(0.0, alpha).map(|(r, w)| w * r * r * r).sum();
    let phi_part = angular.integrate(-delta / 2.0, delta / 2.0, |phi| {
        let proj = u[0] * phi.cos() + u[1] * phi.sin();
        proj * proj
    });
    r_part * phi_part
}

/// Same rule evaluated node by node over the polar rectangle.
pub fn pie_slice_integral_tensor(
    radial: &GaussLegendre,
    angular: &GaussLegendre,
    alpha: f64,
    delta: f64,
    u: [f64; 2],
) -> f64 {
    integrate_polar(radial, angular, (0.0, alpha), (-delta / 2.0, delta / 2.0), |r, phi| {
        let proj = r * (u[0] * phi.cos() + u[1] * phi.sin());
        proj * proj
    })
}

/// `alpha^4 / (8 sqrt 2) * sin^3(delta / 4)`.
pub fn pie_slice_bound(alpha: f64, delta: f64) -> f64 {
    alpha.powi(4) / (8.0 * SQRT_2) * (delta / 4.0).sin().powi(3)
}

/// Directions on a uniform half-circle grid plus `e1` and `e2`.
pub fn pie_slice_directions(n_directions: usize) -> Vec<[f64; 2]> {
    let mut dirs: Vec<[f64; 2]> = (0..n_directions)
        .map(|k| {
            let psi = PI * k as f64 / n_directions as f64;
            [psi.cos(), psi.sin()]
        })
        .collect();
    dirs.push([1.0, 0.0]);
    dirs.push([0.0, 1.0]);
    dirs
}

pub fn check_pie_slice_bound(alpha: f64, delta: f64, n_directions: usize) -> Result<TheoremReport> {
    if n_directions < 1 {
        return Err(Error::InvalidParameter {
            name: "n_directions",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let radial = GaussLegendre::new(PIE_RADIAL_NODES);
    let angular = GaussLegendre::new(PIE_ANGULAR_NODES);
    let min = pie_slice_directions(n_directions)
        .into_iter()
        .map(|u| pie_slice_integral_with(&radial, &angular, alpha, delta, u))
        .fold(f64::INFINITY, f64::min);
    let bound = pie_slice_bound(alpha, delta);
    Ok(TheoremReport::new("lemB1_pie_slice", bound, min, 0.0, min >= bound)
        .with_meta(0, n_directions, vec![2])
        .with_notes(format!("alpha={alpha} delta={delta}")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstants {
    /// `alpha^4 beta gamma^2 / 210`.
    pub lambda_flow: f64,
    /// `min(1, lambda_flow)`.
    pub lambda_gd: f64,
    /// `c1^2 c2^4`.
    pub c: f64,
    pub eta_max_gd: f64,
    pub c3: f64,
    pub eta_max_sgd: f64,
    /// Epoch length `1 / (9 eta c1 c2^2)` at `eta_max_sgd`.
    pub m_epoch: f64,
    /// Iterations `2 log(1/eps2) / (lambda eta)` at `eta_max_sgd`, rounded up.
    pub t_sgd: f64,
    /// `ceil(20 c1 c2^2 log(1/eps2) / lambda) * delta_fail`.
    pub sgd_failure_prob: f64,
    /// Set when `gamma = 0` makes every rate vanish.
    pub degenerate: bool,
}

pub fn rate_constants(
    cert: &SpreadCertificate,
    eps1: f64,
    eps2: f64,
    delta_fail: f64,
) -> Result<RateConstants> {
    for (name, v) in [("eps1", eps1), ("eps2", eps2), ("delta_fail", delta_fail)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidParameter {
                name,
                value: v,
                reason: "must lie in (0, 1)",
            });
        }
    }
    let (c1, c2) = (cert.c1, cert.c2);
    let lambda_flow = cert.alpha.powi(4) * cert.beta * cert.gamma.powi(2) / 210.0;
    let lambda_gd = lambda_flow.min(1.0);
    let c = c1 * c1 * c2.powi(4);
    let a = lambda_flow / (20.0 * c1 * c2 * c2);
    let b = lambda_flow / (18.0 * c1 * c2 * c2);
    // 0.5^a - 0.5^b without cancellation
    let ln2 = std::f64::consts::LN_2;
    let c3 = (-b * ln2).exp() * ((b - a) * ln2).exp_m1();
    let eta_max_sgd = lambda_flow * eps1 * eps1 * eps2 * eps2 * c3 * c3
        / (60.0 * c1.powi(3) * c2.powi(6) * (2.0 / delta_fail).ln());
    let log_inv_eps2 = (1.0 / eps2).ln();
    Ok(RateConstants {
        lambda_flow,
        lambda_gd,
        c,
        eta_max_gd: lambda_gd / (2.0 * c),
        c3,
        eta_max_sgd,
        m_epoch: 1.0 / (9.0 * eta_max_sgd * c1 * c2 * c2),
        t_sgd: (2.0 * log_inv_eps2 / (lambda_flow * eta_max_sgd)).ceil(),
        sgd_failure_prob: (20.0 * c1 * c2 * c2 * log_inv_eps2 / lambda_flow).ceil() * delta_fail,
        degenerate: lambda_flow == 0.0,
    })
}

/// Max over records of `dist_sq - prefactor * factor(t)`; reports pass iff
/// it stays within `tol`.
fn envelope_excess<F: Fn(f64) -> f64>(traj: &Trajectory, factor: F) -> (f64, usize) {
    let d0 = traj.first().dist_sq;
    let mut worst = f64::NEG_INFINITY;
    let mut at = 0;
    for (k, e) in traj.entries.iter().enumerate() {
        let excess = e.dist_sq - d0 * factor(e.time);
        if excess > worst {
            worst = excess;
            at = k;
        }
    }
    (worst, at)
}

/// Linear-rate envelope for activations with `sigma' >= gamma > 0`:
/// `|w_t - v|^2 <= |w_0 - v|^2 (1 - lambda gamma^2 eta)^t`.
#[allow(clippy::too_many_arguments)]
pub fn check_strict_monotone_rate(
    p: &Problem,
    gamma: f64,
    lambda_min_eig: f64,
    c1: f64,
    c2: f64,
    eta: f64,
    traj: &Trajectory,
) -> Result<TheoremReport> {
    if !(gamma > 0.0) {
        return Err(Error::NotApplicable(format!("gamma = {gamma} is not positive")));
    }
    if p.act.global_derivative_lower_bound() < gamma - 1e-12 {
        return Err(Error::Precondition(format!(
            "activation {} does not satisfy sigma' >= {gamma}",
            p.act
        )));
    }
    let eta_max = lambda_min_eig * gamma * gamma / (c1 * c1 * c2.powi(4));
    if !(eta < eta_max) {
        return Err(Error::Precondition(format!("eta = {eta} is not below {eta_max}")));
    }
    let rate = 1.0 - lambda_min_eig * gamma * gamma * eta;
    let (excess, at) = envelope_excess(traj, |t| rate.powf(t));
    let e = &traj.entries[at];
    Ok(TheoremReport::new(
        "thm33_strict_rate",
        traj.first().dist_sq * rate.powf(e.time),
        e.dist_sq,
        DET_TOL,
        excess <= DET_TOL,
    )
    .with_meta(0, traj.len(), vec![p.dim()])
    .with_notes("prefactor |w0-v|^2"))
}

/// Envelope `|w_t - v|^2 <= |w_0 - v|^2 (1 - eta lambda / 2)^t` plus
/// monotonicity of the squared distance.
pub fn check_gd_rate(traj: &Trajectory, lambda: f64, eta: f64) -> Result<TheoremReport> {
    if traj.first().dist_sq >= 1.0 {
        return Err(Error::Precondition("|w0 - v|^2 must be below 1".into()));
    }
    let rate = 1.0 - eta * lambda / 2.0;
    let (excess, at) = envelope_excess(traj, |t| rate.powf(t));
    let monotone = traj.entries.windows(2).all(|w| w[1].dist_sq <= w[0].dist_sq);
    let e = &traj.entries[at];
    let dim = e.w.len();
    Ok(TheoremReport::new(
        "thm53_gd_rate",
        traj.first().dist_sq * rate.powf(e.time),
        e.dist_sq,
        DET_TOL,
        excess <= DET_TOL && monotone,
    )
    .with_meta(0, traj.len(), vec![dim])
    .with_notes(if monotone { "monotone" } else { "distance increased" }))
}

/// Exponential envelope `|w(t) - v|^2 <= |w(0) - v|^2 exp(-lambda t)`, with
/// slack `DET_TOL + 10 * flow_tol`.
pub fn check_flow_rate(traj: &Trajectory, lambda: f64, flow_tol: f64) -> TheoremReport {
    let (excess, at) = envelope_excess(traj, |t| (-lambda * t).exp());
    let e = &traj.entries[at];
    let tol = DET_TOL + 10.0 * flow_tol;
    TheoremReport::new(
        "thm63_flow_rate",
        traj.first().dist_sq * (-lambda * e.time).exp(),
        e.dist_sq,
        tol,
        excess <= tol,
    )
    .with_meta(0, traj.len(), vec![e.w.len()])
    .with_notes("prefactor |w(0)-v|^2")
}

/// Angle to the target is non-increasing across records up to `slack`.
pub fn check_angle_monotone(traj: &Trajectory, slack: f64) -> Result<TheoremReport> {
    let mut angles = Vec::with_capacity(traj.len());
    for e in &traj.entries {
        angles.push(e.angle.ok_or_else(|| {
            Error::NotApplicable(format!("angle undefined at t = {}", e.time))
        })?);
    }
    let worst = angles
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::max);
    let dim = traj.first().w.len();
    Ok(TheoremReport::new("lem61_angle", 0.0, worst, slack, worst <= slack)
        .with_meta(0, traj.len(), vec![dim]))
}

/// `max{(sin t + cos t)/2, sin t (1 + cos t)/2}`.
pub fn norm_safe_threshold(theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    ((s + c) / 2.0).max(s * (1.0 + c) / 2.0)
}

/// Inside the safe region `d|w|^2/dt = -2 <w, grad F(w)>` must be
/// non-negative; checked by Monte Carlo with `SE_MULT` standard errors.
pub fn check_norm_safe_region(p: &Problem, w: &[f64], n: usize, seed: u64) -> Result<TheoremReport> {
    check_dim(p.dim(), w.len())?;
    if !(p.dist.is_spherically_symmetric() && p.act.is_relu()) {
        return Err(Error::Precondition(
            "needs a spherically symmetric distribution and ReLU".into(),
        ));
    }
    if norm(w) == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    let theta = angle(w, &p.target).ok_or(Error::UndefinedAngle)?;
    let threshold = norm_safe_threshold(theta);
    if norm(w) > threshold {
        return Err(Error::NotApplicable(format!(
            "|w| = {} exceeds the safe threshold {threshold}",
            norm(w)
        )));
    }
    let neg_w = scale(w, -1.0);
    let est = directional_gradient_mc(p, w, &neg_w, n, seed)?;
    let tol = SE_MULT * est.std_err;
    Ok(TheoremReport::new("lem62_norm_region", 0.0, est.mean, tol, est.mean >= -tol)
        .with_meta(seed, n, vec![p.dim()])
        .with_notes(format!("theta={theta:.6} threshold={threshold:.6}")))
}

/// Gaussian closed-form variant: with `a = pi - theta`, if
/// `|w| <= |v| a^3 / pi^4` then `-<w, grad F(w)> >= 0` exactly.
pub fn check_norm_safe_region_gaussian(w: &[f64], v: &[f64]) -> Result<TheoremReport> {
    check_dim(v.len(), w.len())?;
    let theta = angle(w, v).ok_or(Error::UndefinedAngle)?;
    let a = PI - theta;
    let threshold = norm(v) * a.powi(3) / PI.powi(4);
    if norm(w) > threshold {
        return Err(Error::NotApplicable(format!(
            "|w| = {} exceeds {threshold}",
            norm(w)
        )));
    }
    let g = gradient_closed_form_gaussian_relu(w, v)?;
    let rate = -dot(w, &g);
    Ok(TheoremReport::new("lem62_norm_region_gaussian", 0.0, rate, 0.0, rate >= 0.0)
        .with_meta(0, 0, vec![w.len()]))
}

/// On the ray `w = -a v` the directional derivative `<grad F(-a v), v>` must
/// be negative (so no stationary point lies there).
pub fn check_stationary_ray(p: &Problem, a_values: &[f64], n: usize, seed: u64) -> Result<TheoremReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_tol = 0.0;
    for (k, &a) in a_values.iter().enumerate() {
        let w = scale(&p.target, -a);
        let est = directional_gradient_mc(p, &w, &p.target, n, derive_seed(seed, k as u64))?;
        let upper = est.mean + SE_MULT * est.std_err;
        if upper > worst {
            worst = upper;
            worst_tol = SE_MULT * est.std_err;
        }
    }
    Ok(TheoremReport::new("rem43_stationary_ray", 0.0, worst - worst_tol, worst_tol, worst < 0.0)
        .with_meta(seed, n, vec![p.dim()]))
}

/// `1/2 - tau d / 4 - 1.2^-d`.
pub fn init_probability_bound(dim: usize, tau: f64) -> f64 {
    0.5 - tau * dim as f64 / 4.0 - 1.2f64.powi(-(dim as i32))
}

/// Empirical `P(|w - v|^2 <= 1 - 2 tau^2 d)` for `w ~ N(0, tau^2 I)` and a
/// unit target, against the lower bound.
pub fn check_init_probability(dim: usize, tau: f64, draws: usize, seed: u64) -> Result<TheoremReport> {
    let init = Initializer::gaussian_isotropic(tau)?;
    let v = basis_vector(dim, 0);
    let radius = 1.0 - 2.0 * tau * tau * dim as f64;
    let hits = (0..draws)
        .into_par_iter()
        .map(|k| -> Result<usize> {
            let w = initialize(&init, dim, derive_seed(seed, k as u64))?;
            Ok(usize::from(dist_sq(&w, &v) <= radius))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let p_hat = hits as f64 / draws as f64;
    let se = (p_hat * (1.0 - p_hat) / draws as f64).sqrt();
    let bound = init_probability_bound(dim, tau);
    Ok(
        TheoremReport::new("lem51_init_prob", bound, p_hat, SE_MULT * se, p_hat >= bound - SE_MULT * se)
            .with_meta(seed, draws, vec![dim]),
    )
}

/// Fraction of SGD runs ending within `eps2` against the claimed success
/// probability.
pub fn check_sgd_convergence(final_dist_sq: &[f64], eps2: f64, failure_prob: f64) -> TheoremReport {
    let n = final_dist_sq.len();
    let hits = final_dist_sq.iter().filter(|d| **d <= eps2).count();
    let frac = hits as f64 / n.max(1) as f64;
    let predicted = 1.0 - failure_prob;
    let p = predicted.clamp(0.0, 1.0);
    let tol = SE_MULT * (p * (1.0 - p) / n.max(1) as f64).sqrt();
    let mut r = TheoremReport::new("thm53_sgd", predicted, frac, tol, n > 0 && frac >= predicted - tol)
        .with_meta(0, n, Vec::new());
    if failure_prob >= 1.0 {
        r.notes = "claimed failure probability is at least 1".into();
    }
    r
}

/// Symmetric matrix `mean(x x^T)` over row-major samples.
pub fn second_moment_matrix(samples: &[f64], dim: usize) -> DMatrix<f64> {
    let n = samples.len() / dim;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for x in samples.chunks_exact(dim) {
        for i in 0..dim {
            for j in i..dim {
                m[(i, j)] += x[i] * x[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = m[(i, j)] / n as f64;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

/// Smallest eigenvalue of `E[x x^T]` from `n` Monte Carlo samples, or exactly
/// for finitely supported distributions.
pub fn lambda_min_eig(dist: &InputDistribution, n: usize, seed: u64) -> f64 {
    let d = dist.dim();
    if let Some((atoms, weights)) = dist.atoms() {
        let mut m = DMatrix::<f64>::zeros(d, d);
        for (x, q) in atoms.iter().zip(weights) {
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += q * x[i] * x[j];
                }
            }
        }
        return min_eigenvalue(m);
    }
    min_eigenvalue(second_moment_matrix(&mc::draw_samples(dist, n, seed), d))
}

/// Relative slack on the `1/(8d)` loss floor, which is approached from above.
const FAIL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct AdversarialSetup {
    pub dim: usize,
    pub init: Initializer,
    pub method: Method,
    pub trials: usize,
    pub horizon: Horizon,
    pub step_size: f64,
    pub seed: u64,
    /// Trajectories of the first this-many trials are returned.
    pub keep_trajectories: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialTrial {
    pub seed: u64,
    pub init: Vec<f64>,
    pub stuck: Vec<usize>,
    pub min_loss: f64,
    /// Every stuck coordinate kept its initial bit pattern at every record.
    pub stuck_unchanged: bool,
    pub final_dist_sq: f64,
    pub trajectory: Option<Trajectory>,
}

impl AdversarialTrial {
    pub fn failed(&self, dim: usize) -> bool {
        self.min_loss >= (1.0 - FAIL_SLACK) / (8.0 * dim as f64)
    }

    pub fn triggered(&self, dim: usize) -> bool {
        4 * self.stuck.len() >= dim
    }
}

#[derive(Debug, Clone)]
pub struct AdversarialOutcome {
    pub report: TheoremReport,
    pub trials: Vec<AdversarialTrial>,
}

/// Runs the failure experiment on the instance built from the initializer's
/// sign probabilities.
pub fn check_adversarial_failure(setup: &AdversarialSetup) -> Result<AdversarialOutcome> {
    if setup.dim < 4 || !setup.dim.is_multiple_of(4) {
        return Err(Error::Precondition(format!(
            "dimension {} must be a positive multiple of 4",
            setup.dim
        )));
    }
    let probs = setup.init.sign_probs(setup.dim)?;
    let data = adversarial_instance(setup.dim, &probs)?;
    run_adversarial_trials(setup, &data)
}

/// Runs the failure experiment on an explicit instance. GD and SGD use
/// `sigma'(0) = 0` and count `w.x_i <= 0` as stuck; gradient flow uses
/// `sigma'(0) = 1` and counts `w.x_i < 0`.
pub fn run_adversarial_trials(setup: &AdversarialSetup, data: &AdversarialDataset) -> Result<AdversarialOutcome> {
    let d = setup.dim;
    check_dim(d, data.dim())?;
    if setup.trials < 1 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let flow = setup.method == Method::GradientFlow;
    let act = make_relu(if flow { 1.0 } else { 0.0 })?;
    let p = Problem::new(data.distribution(), act, data.target.clone())?;
    let cfg = match (setup.method, setup.horizon) {
        (Method::Gd, Horizon::Iterations(n)) => OptimizerConfig::gd(setup.step_size, n, GradientMode::ExactDiscrete),
        (Method::Sgd, Horizon::Iterations(n)) => OptimizerConfig::sgd(setup.step_size, n),
        (Method::GradientFlow, Horizon::Time(t)) => OptimizerConfig::flow(t, GradientMode::ExactDiscrete),
        _ => return Err(Error::InvalidConfig("horizon does not match the method".into())),
    };
    cfg.validate()?;
    let trials = (0..setup.trials)
        .into_par_iter()
        .map(|k| -> Result<AdversarialTrial> {
            let seed = derive_seed(setup.seed, k as u64);
            let w0 = initialize(&setup.init, d, seed)?;
            let stuck: Vec<usize> = data
                .points
                .iter()
                .enumerate()
                .filter(|(_, x)| {
                    let z = dot(&w0, x);
                    if flow { z < 0.0 } else { z <= 0.0 }
                })
                .map(|(i, _)| i)
                .collect();
            let traj = match setup.method {
                Method::Gd => run_gd(&p, &w0, &cfg, seed)?,
                Method::Sgd => run_sgd(&p, &w0, &cfg, derive_seed(seed, 1))?,
                Method::GradientFlow => match run_gradient_flow(&p, &w0, &cfg) {
                    Ok(t) => t,
                    Err(Error::IntegrationFailure { partial, .. }) => *partial,
                    Err(e) => return Err(e),
                },
            };
            let stuck_unchanged = traj
                .entries
                .iter()
                .all(|e| stuck.iter().all(|&i| e.w[i].to_bits() == w0[i].to_bits()));
            Ok(AdversarialTrial {
                seed,
                min_loss: traj.min_loss(),
                init: w0,
                stuck,
                stuck_unchanged,
                final_dist_sq: traj.last().dist_sq,
                trajectory: (k < setup.keep_trajectories).then_some(traj),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = trials.len();
    let failed = trials.iter().filter(|t| t.failed(d)).count();
    let triggered = trials.iter().filter(|t| t.triggered(d)).count();
    let bitwise = trials.iter().all(|t| t.stuck_unchanged);
    let frac = failed as f64 / n as f64;
    let report = if triggered == 0 {
        TheoremReport::new("thm31_failure", 0.0, frac, 0.0, bitwise).with_notes("not-triggered")
    } else {
        let predicted = 1.0 - (-(d as f64) / 4.0).exp();
        let tol = SE_MULT * (predicted * (1.0 - predicted) / n as f64).sqrt();
        TheoremReport::new("thm31_failure", predicted, frac, tol, bitwise && frac >= predicted - tol)
            .with_notes(format!(
                "triggered={triggered}/{n} stuck_bitwise={bitwise}"
            ))
    };
    Ok(AdversarialOutcome {
        report: report.with_meta(setup.seed, n, vec![d]),
        trials,
    })
}

/// For each dimension: draw `n_targets` uniform unit targets, estimate
/// `grad F(w(d))` for each under `N(0, I_d)` from one shared sample set, and
/// return the trace of the covariance of those gradients across targets.
pub fn gradient_variance_experiment<W>(
    act: &Activation,
    dims: &[usize],
    n_targets: usize,
    n_mc: usize,
    w_of_dim: W,
    seed: u64,
) -> Result<Vec<(usize, f64)>>
where
    W: Fn(usize) -> Vec<f64>,
{
    let mut out = Vec::with_capacity(dims.len());
    for (k, &d) in dims.iter().enumerate() {
        let dseed = derive_seed(seed, k as u64);
        let dist = standard_gaussian(d)?;
        let w = w_of_dim(d);
        check_dim(d, w.len())?;
        let samples = mc::draw_samples(&dist, n_mc, dseed);
        let mut rng = rng_from_seed(derive_seed(dseed, u64::MAX));
        let targets: Vec<Vec<f64>> = (0..n_targets)
            .map(|_| loop {
                let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = norm(&g);
                if n > 0.0 {
                    break scale(&g, 1.0 / n);
                }
            })
            .collect();
        let grads: Vec<Vec<f64>> = targets
            .par_iter()
            .map(|v| {
                mc::estimate_on(&samples, d, d, |x, out| {
                    let wx = dot(&w, x);
                    let c = (act.value(wx) - act.value(dot(v, x))) * act.derivative(wx);
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = c * xi;
                    }
                })
                .mean
            })
            .collect();
        let mut m = mc::Moments::new(d);
        for g in &grads {
            m.push(g);
        }
        let trace: f64 = if n_targets < 2 { 0.0 } else { m.variance().iter().sum() };
        out.push((d, trace));
    }
    Ok(out)
}
