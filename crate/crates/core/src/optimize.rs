//! Gradient descent, stochastic gradient descent and gradient flow on the
//! population loss, with initializers and trajectory recording.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{angle, check_dim, dist_sq, norm};
use crate::objective::{
    gradient_closed_form_gaussian_relu, loss_and_gradient_mc, loss_closed_form_gaussian_relu,
    population_gradient_exact_discrete, population_loss_exact_discrete, population_loss_mc,
    stochastic_gradient_into, Problem,
};
use crate::ode::{self, OdeError, StepControl};
use crate::rng::{derive_seed, rng_from_seed};

const LOSS_SALT: u64 = 0x6c6f_7373_5f65_7374;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gd,
    Sgd,
    GradientFlow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Iterations(usize),
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    MonteCarlo { samples: usize },
    ClosedForm,
    ExactDiscrete,
}

impl GradientMode {
    /// Closed form for Gaussian-ReLU, exact sums for finite support, Monte
    /// Carlo with `samples` otherwise.
    pub fn best_for(p: &Problem, samples: usize) -> Self {
        if p.has_closed_form() {
            Self::ClosedForm
        } else if p.dist.atoms().is_some() {
            Self::ExactDiscrete
        } else {
            Self::MonteCarlo { samples }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub step_size: f64,
    pub horizon: Horizon,
    pub flow_tolerance: f64,
    pub record_stride: usize,
    pub gradient_mode: GradientMode,
    /// Samples for Monte Carlo loss values when no exact loss is available.
    pub loss_samples: usize,
}

impl OptimizerConfig {
    pub fn gd(step_size: f64, iterations: usize, gradient_mode: GradientMode) -> Self {
        Self {
            method: Method::Gd,
            step_size,
            horizon: Horizon::Iterations(iterations),
            flow_tolerance: 1e-8,
            record_stride: 1,
            gradient_mode,
            loss_samples: 10_000,
        }
    }

    pub fn sgd(step_size: f64, iterations: usize) -> Self {
        Self {
            method: Method::Sgd,
            ..Self::gd(step_size, iterations, GradientMode::MonteCarlo { samples: 1 })
        }
    }

    pub fn flow(t_max: f64, gradient_mode: GradientMode) -> Self {
        Self {
            method: Method::GradientFlow,
            step_size: 1.0,
            horizon: Horizon::Time(t_max),
            flow_tolerance: 1e-8,
            record_stride: 1,
            gradient_mode,
            loss_samples: 10_000,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.flow_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        match (self.method, self.horizon) {
            (Method::GradientFlow, Horizon::Time(t)) => {
                if !(t > 0.0 && t.is_finite()) {
                    return bad("flow horizon must be a positive time");
                }
            }
            (Method::GradientFlow, Horizon::Iterations(_)) => {
                return bad("gradient flow needs a time horizon")
            }
            (_, Horizon::Iterations(n)) => {
                if n < 1 {
                    return bad("horizon must be at least one iteration");
                }
            }
            (_, Horizon::Time(_)) => return bad("GD and SGD need an iteration horizon"),
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step size must be positive");
        }
        if !(self.flow_tolerance > 0.0) {
            return bad("flow tolerance must be positive");
        }
        if self.record_stride < 1 {
            return bad("record stride must be at least 1");
        }
        if let GradientMode::MonteCarlo { samples } = self.gradient_mode {
            if self.method == Method::GradientFlow {
                return bad("gradient flow requires closed_form or exact_discrete gradients");
            }
            if samples < 1 {
                return bad("Monte Carlo gradients need at least one sample");
            }
        }
        Ok(())
    }

    fn iterations(&self) -> usize {
        match self.horizon {
            Horizon::Iterations(n) => n,
            Horizon::Time(_) => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEntry {
    pub time: f64,
    pub w: Vec<f64>,
    pub loss: f64,
    pub dist_sq: f64,
    pub angle: Option<f64>,
    pub norm: f64,
}

impl TrajectoryEntry {
    pub fn new(time: f64, w: &[f64], target: &[f64], loss: f64) -> Self {
        Self {
            time,
            w: w.to_vec(),
            loss,
            dist_sq: dist_sq(w, target),
            angle: if norm(w) == 0.0 { None } else { angle(w, target) },
            norm: norm(w),
        }
    }

    pub fn dist(&self) -> f64 {
        self.dist_sq.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub entries: Vec<TrajectoryEntry>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first(&self) -> &TrajectoryEntry {
        &self.entries[0]
    }

    pub fn last(&self) -> &TrajectoryEntry {
        self.entries.last().expect("trajectory has at least the initial entry")
    }

    pub fn min_loss(&self) -> f64 {
        self.entries.iter().map(|e| e.loss).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let d = self.entries.first().map_or(0, |e| e.w.len());
        let mut s = String::from("time,loss,dist_sq,angle,norm");
        for i in 0..d {
            let _ = write!(s, ",w_{i}");
        }
        s.push('\n');
        for e in &self.entries {
            let _ = write!(s, "{:.16e},{:.16e},{:.16e},", e.time, e.loss, e.dist_sq);
            match e.angle {
                Some(a) => {
                    let _ = write!(s, "{a:.16e}");
                }
                None => s.push_str("undef"),
            }
            let _ = write!(s, ",{:.16e}", e.norm);
            for x in &e.w {
                let _ = write!(s, ",{x:.16e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidConfig(format!("trajectory csv: {m}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 5 || cols[..5] != ["time", "loss", "dist_sq", "angle", "norm"] {
            return Err(bad(format!("unexpected header `{header}`")));
        }
        let num = |s: &str| f64::from_str(s).map_err(|_| bad(format!("bad number `{s}`")));
        let mut entries = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(bad(format!("row has {} fields, expected {}", f.len(), cols.len())));
            }
            entries.push(TrajectoryEntry {
                time: num(f[0])?,
                loss: num(f[1])?,
                dist_sq: num(f[2])?,
                angle: if f[3] == "undef" { None } else { Some(num(f[3])?) },
                norm: num(f[4])?,
                w: f[5..].iter().map(|s| num(s)).collect::<Result<_>>()?,
            });
        }
        Ok(Self { entries })
    }
}

/// One-dimensional factor of a product initializer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler1d {
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    Constant(f64),
}

impl Sampler1d {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Sampler1d::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            Sampler1d::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Sampler1d::Constant(c) => c,
        }
    }

    /// `P(X > 0)`.
    pub fn prob_positive(&self) -> f64 {
        match *self {
            Sampler1d::Normal { mean, std } => {
                if std == 0.0 {
                    if mean > 0.0 { 1.0 } else { 0.0 }
                } else {
                    normal_cdf(mean / std)
                }
            }
            Sampler1d::Uniform { lo, hi } => {
                if hi <= lo {
                    if lo > 0.0 { 1.0 } else { 0.0 }
                } else {
                    ((hi - lo.max(0.0)) / (hi - lo)).clamp(0.0, 1.0)
                }
            }
            Sampler1d::Constant(c) => {
                if c > 0.0 { 1.0 } else { 0.0 }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initializer {
    GaussianIsotropic { tau: f64 },
    Product(Vec<Sampler1d>),
    Fixed(Vec<f64>),
    Zero,
    /// Uniform on the sphere of the given radius; not a product distribution.
    UniformSphere { radius: f64 },
}

impl Initializer {
    pub fn gaussian_isotropic(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tau",
                value: tau,
                reason: "must be positive",
            });
        }
        Ok(Self::GaussianIsotropic { tau })
    }

    /// `N(0, 1/d)` in every coordinate.
    pub fn xavier(dim: usize) -> Self {
        Self::Product(vec![
            Sampler1d::Normal {
                mean: 0.0,
                std: (1.0 / dim as f64).sqrt(),
            };
            dim
        ])
    }

    pub fn is_product(&self) -> bool {
        !matches!(self, Initializer::UniformSphere { .. })
    }

    /// Per-coordinate `P(w_i > 0)` for product initializers.
    pub fn sign_probs(&self, dim: usize) -> Result<Vec<f64>> {
        match self {
            Initializer::GaussianIsotropic { .. } => Ok(vec![0.5; dim]),
            Initializer::Product(s) => {
                check_dim(dim, s.len())?;
                Ok(s.iter().map(Sampler1d::prob_positive).collect())
            }
            Initializer::Fixed(w) => {
                check_dim(dim, w.len())?;
                Ok(w.iter().map(|x| if *x > 0.0 { 1.0 } else { 0.0 }).collect())
            }
            Initializer::Zero => Ok(vec![0.0; dim]),
            Initializer::UniformSphere { .. } => Err(Error::Precondition(
                "initializer is not a product distribution".into(),
            )),
        }
    }
}

pub fn initialize(init: &Initializer, dim: usize, seed: u64) -> Result<Vec<f64>> {
    if dim < 1 {
        return Err(Error::InvalidParameter {
            name: "dim",
            value: dim as f64,
            reason: "must be at least 1",
        });
    }
    let mut rng = rng_from_seed(seed);
    match init {
        Initializer::GaussianIsotropic { tau } => {
            let n = Normal::new(0.0, *tau).map_err(|_| Error::InvalidParameter {
                name: "tau",
                value: *tau,
                reason: "must be positive",
            })?;
            Ok((0..dim).map(|_| n.sample(&mut rng)).collect())
        }
        Initializer::Product(s) => {
            check_dim(dim, s.len())?;
            Ok(s.iter().map(|f| f.sample(&mut rng)).collect())
        }
        Initializer::Fixed(w) => {
            check_dim(dim, w.len())?;
            Ok(w.clone())
        }
        Initializer::Zero => Ok(vec![0.0; dim]),
        Initializer::UniformSphere { radius } => loop {
            let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = norm(&g);
            if n > 0.0 {
                break Ok(g.iter().map(|x| radius * x / n).collect());
            }
        },
    }
}

/// Standard normal CDF via a rational erfc approximation (relative error
/// below 1.2e-7).
pub fn normal_cdf(x: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98
                                + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

fn check_problem_mode(p: &Problem, mode: GradientMode) -> Result<()> {
    match mode {
        GradientMode::ClosedForm if !p.has_closed_form() => Err(Error::UnsupportedClosedForm(
            format!("activation {} under this input distribution", p.act),
        )),
        GradientMode::ExactDiscrete if p.dist.atoms().is_none() => Err(
            Error::UnsupportedDistribution("exact_discrete needs a finitely supported distribution".into()),
        ),
        _ => Ok(()),
    }
}

fn expect_method(cfg: &OptimizerConfig, m: Method) -> Result<()> {
    cfg.validate()?;
    if cfg.method != m {
        return Err(Error::Precondition(format!(
            "config method is {:?}, expected {m:?}",
            cfg.method
        )));
    }
    Ok(())
}

/// Exact loss if available, otherwise Monte Carlo with `cfg.loss_samples`.
fn loss_at(p: &Problem, w: &[f64], cfg: &OptimizerConfig, seed: u64) -> Result<f64> {
    if p.has_closed_form() {
        Ok(loss_closed_form_gaussian_relu(w, &p.target))
    } else if p.dist.atoms().is_some() {
        population_loss_exact_discrete(p, w)
    } else {
        Ok(population_loss_mc(p, w, cfg.loss_samples, seed)?.mean)
    }
}

/// Gradient (and the loss at the same point) under an exact mode.
fn exact_gradient(p: &Problem, w: &[f64], mode: GradientMode) -> Result<(Vec<f64>, f64)> {
    match mode {
        GradientMode::ClosedForm => Ok((
            gradient_closed_form_gaussian_relu(w, &p.target)?,
            loss_closed_form_gaussian_relu(w, &p.target),
        )),
        GradientMode::ExactDiscrete => Ok((
            population_gradient_exact_discrete(p, w)?,
            population_loss_exact_discrete(p, w)?,
        )),
        GradientMode::MonteCarlo { .. } => unreachable!("exact_gradient called in Monte Carlo mode"),
    }
}

fn records(t: usize, stride: usize, last: usize) -> bool {
    t.is_multiple_of(stride) || t == last
}

/// Full-batch gradient descent. `seed` drives Monte Carlo gradients (a fresh
/// derived seed per step) and is unused by the exact modes.
pub fn run_gd(p: &Problem, init: &[f64], cfg: &OptimizerConfig, seed: u64) -> Result<Trajectory> {
    expect_method(cfg, Method::Gd)?;
    check_dim(p.dim(), init.len())?;
    check_problem_mode(p, cfg.gradient_mode)?;
    let steps = cfg.iterations();
    let mut w = init.to_vec();
    let mut traj = Trajectory::default();
    for t in 0..=steps {
        let (grad, loss) = match cfg.gradient_mode {
            GradientMode::MonteCarlo { samples } => {
                if t == steps {
                    let l = population_loss_mc(p, &w, samples, derive_seed(seed, t as u64))?;
                    (Vec::new(), l.mean)
                } else {
                    let (l, g) = loss_and_gradient_mc(p, &w, samples, derive_seed(seed, t as u64))?;
                    (g.mean, l.mean)
                }
            }
            mode => {
                if t == steps {
                    (Vec::new(), exact_loss(p, &w, mode)?)
                } else {
                    exact_gradient(p, &w, mode)?
                }
            }
        };
        if records(t, cfg.record_stride, steps) {
            traj.entries.push(TrajectoryEntry::new(t as f64, &w, &p.target, loss));
        }
        if t < steps {
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= cfg.step_size * gi;
            }
        }
    }
    Ok(traj)
}

fn exact_loss(p: &Problem, w: &[f64], mode: GradientMode) -> Result<f64> {
    match mode {
        GradientMode::ClosedForm => Ok(loss_closed_form_gaussian_relu(w, &p.target)),
        GradientMode::ExactDiscrete => population_loss_exact_discrete(p, w),
        GradientMode::MonteCarlo { .. } => unreachable!(),
    }
}

/// Single-sample SGD on the population loss. Recorded losses are exact when
/// possible and Monte Carlo estimates otherwise.
pub fn run_sgd(p: &Problem, init: &[f64], cfg: &OptimizerConfig, seed: u64) -> Result<Trajectory> {
    expect_method(cfg, Method::Sgd)?;
    check_dim(p.dim(), init.len())?;
    let steps = cfg.iterations();
    let d = p.dim();
    let mut rng = rng_from_seed(seed);
    let loss_seed = seed ^ LOSS_SALT;
    let mut w = init.to_vec();
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut traj = Trajectory::default();
    for t in 0..=steps {
        if records(t, cfg.record_stride, steps) {
            let loss = loss_at(p, &w, cfg, derive_seed(loss_seed, t as u64))?;
            traj.entries.push(TrajectoryEntry::new(t as f64, &w, &p.target, loss));
        }
        if t < steps {
            p.dist.sample_into(&mut rng, &mut x);
            stochastic_gradient_into(p, &w, &x, &mut g);
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi -= cfg.step_size * gi;
            }
        }
    }
    Ok(traj)
}

/// Gradient flow `w' = -grad F(w)` integrated by an adaptive Dormand-Prince
/// pair. Records every `record_stride` accepted steps and the final time.
pub fn run_gradient_flow(p: &Problem, init: &[f64], cfg: &OptimizerConfig) -> Result<Trajectory> {
    expect_method(cfg, Method::GradientFlow)?;
    check_dim(p.dim(), init.len())?;
    check_problem_mode(p, cfg.gradient_mode)?;
    let t_end = match cfg.horizon {
        Horizon::Time(t) => t,
        Horizon::Iterations(_) => unreachable!(),
    };
    let mode = cfg.gradient_mode;
    let mut traj = Trajectory::default();
    traj.entries.push(TrajectoryEntry::new(
        0.0,
        init,
        &p.target,
        exact_loss(p, init, mode)?,
    ));
    let mut accepted = 0usize;
    let mut loss_err: Option<Error> = None;
    let result = ode::integrate(
        init,
        t_end,
        StepControl::new(cfg.flow_tolerance),
        |w, dw| {
            let (g, _) = exact_gradient(p, w, mode)?;
            for (o, gi) in dw.iter_mut().zip(g) {
                *o = -gi;
            }
            Ok::<(), Error>(())
        },
        |t, w| {
            accepted += 1;
            if accepted.is_multiple_of(cfg.record_stride) || t == t_end {
                match exact_loss(p, w, mode) {
                    Ok(l) => traj.entries.push(TrajectoryEntry::new(t, w, &p.target, l)),
                    Err(e) => {
                        loss_err.get_or_insert(e);
                    }
                }
            }
        },
    );
    if let Some(e) = loss_err {
        return Err(e);
    }
    match result {
        Ok(_) => Ok(traj),
        Err(OdeError::Rhs(e)) => Err(e),
        Err(OdeError::Underflow(u)) => Err(Error::IntegrationFailure {
            time: u.time,
            step: u.step,
            partial: Box::new(traj),
        }),
    }
}

/// Dispatches on `cfg.method`.
pub fn run(p: &Problem, init: &[f64], cfg: &OptimizerConfig, seed: u64) -> Result<Trajectory> {
    match cfg.method {
        Method::Gd => run_gd(p, init, cfg, seed),
        Method::Sgd => run_sgd(p, init, cfg, seed),
        Method::GradientFlow => run_gradient_flow(p, init, cfg),
    }
}
