//! Input distributions, their 2D marginals, and the adversarial discrete instance.
//!
//! Config keys: `gaussian:mean=0,var=1`, `gaussian:mean=(0,1),var=1`,
//! `ball:r=1`, `sphere:r=1`, `adversarial`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, norm_sq, orthonormal_pair};
use crate::rng::{rng_from_seed, LabRng};

/// Certified lower bound `beta` on every 2D marginal density over the disk of
/// radius `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadParams {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistributionKind {
    Gaussian { mean: Vec<f64>, variance: f64 },
    UniformBall { radius: f64 },
    UniformSphere { radius: f64 },
    /// Finitely supported; `cumulative` holds the running sum of the weights.
    Discrete {
        atoms: Vec<Vec<f64>>,
        weights: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputDistribution {
    dim: usize,
    kind: DistributionKind,
    spread: Option<SpreadParams>,
}

/// Exact infimum of the standard 2D normal density over `|y| <= alpha`.
pub fn spread_params_for_gaussian(alpha: f64) -> Result<SpreadParams> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "alpha must be positive",
        });
    }
    Ok(SpreadParams {
        alpha,
        beta: (-0.5 * alpha * alpha).exp() / (2.0 * PI),
    })
}

pub fn gaussian(dim: usize, mean: &[f64], variance: f64) -> Result<InputDistribution> {
    check_positive_dim(dim)?;
    check_dim(dim, mean.len())?;
    if !(variance > 0.0) {
        return Err(Error::InvalidParameter {
            name: "variance",
            value: variance,
            reason: "variance must be positive",
        });
    }
    let centered = mean.iter().all(|&m| m == 0.0);
    // Default certificate at alpha = 1; 2D marginal is N(0, variance I).
    let spread = centered.then(|| {
        let alpha = 1.0;
        SpreadParams {
            alpha,
            beta: (-0.5 * alpha * alpha / variance).exp() / (2.0 * PI * variance),
        }
    });
    Ok(InputDistribution {
        dim,
        kind: DistributionKind::Gaussian {
            mean: mean.to_vec(),
            variance,
        },
        spread,
    })
}

pub fn standard_gaussian(dim: usize) -> Result<InputDistribution> {
    gaussian(dim, &vec![0.0; dim], 1.0)
}

pub fn uniform_ball(dim: usize, radius: f64) -> Result<InputDistribution> {
    check_positive_dim(dim)?;
    check_radius(radius)?;
    Ok(InputDistribution {
        dim,
        kind: DistributionKind::UniformBall { radius },
        spread: None,
    })
}

pub fn uniform_sphere(dim: usize, radius: f64) -> Result<InputDistribution> {
    check_positive_dim(dim)?;
    check_radius(radius)?;
    Ok(InputDistribution {
        dim,
        kind: DistributionKind::UniformSphere { radius },
        spread: None,
    })
}

/// Finitely supported distribution; weights are normalized.
pub fn discrete(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<InputDistribution> {
    let dim = atoms.first().map(Vec::len).unwrap_or(0);
    check_positive_dim(dim)?;
    check_dim(atoms.len(), weights.len())?;
    for a in &atoms {
        check_dim(dim, a.len())?;
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidConfig(
            "discrete weights must be nonnegative with positive sum".into(),
        ));
    }
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut acc = 0.0;
    let cumulative = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    Ok(InputDistribution {
        dim,
        kind: DistributionKind::Discrete {
            atoms,
            weights,
            cumulative,
        },
        spread: None,
    })
}

fn check_positive_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidParameter {
            name: "dim",
            value: 0.0,
            reason: "dimension must be at least 1",
        })
    } else {
        Ok(())
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "radius",
            value: radius,
            reason: "radius must be positive",
        })
    }
}

impl InputDistribution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn spread_params(&self) -> Option<SpreadParams> {
        self.spread
    }

    pub fn with_spread_params(mut self, spread: SpreadParams) -> Self {
        self.spread = Some(spread);
        self
    }

    pub fn is_spherically_symmetric(&self) -> bool {
        match &self.kind {
            DistributionKind::Gaussian { mean, .. } => mean.iter().all(|&m| m == 0.0),
            DistributionKind::UniformBall { .. } | DistributionKind::UniformSphere { .. } => true,
            DistributionKind::Discrete { .. } => false,
        }
    }

    pub fn is_standard_gaussian(&self) -> bool {
        matches!(&self.kind, DistributionKind::Gaussian { mean, variance }
            if *variance == 1.0 && mean.iter().all(|&m| m == 0.0))
    }

    /// `c1` with `|x|^2 <= c1` almost surely, when the support is bounded.
    pub fn support_bound_sq(&self) -> Option<f64> {
        match &self.kind {
            DistributionKind::Gaussian { .. } => None,
            DistributionKind::UniformBall { radius } | DistributionKind::UniformSphere { radius } => {
                Some(radius * radius)
            }
            DistributionKind::Discrete { atoms, .. } => {
                Some(atoms.iter().map(|a| norm_sq(a)).fold(0.0, f64::max))
            }
        }
    }

    /// `E |x|^2`.
    pub fn second_moment_trace(&self) -> f64 {
        let d = self.dim as f64;
        match &self.kind {
            DistributionKind::Gaussian { mean, variance } => d * variance + norm_sq(mean),
            DistributionKind::UniformBall { radius } => radius * radius * d / (d + 2.0),
            DistributionKind::UniformSphere { radius } => radius * radius,
            DistributionKind::Discrete { atoms, weights, .. } => atoms
                .iter()
                .zip(weights)
                .map(|(a, w)| w * norm_sq(a))
                .sum(),
        }
    }

    /// Atoms and normalized weights of a finitely supported distribution.
    pub fn atoms(&self) -> Option<(&[Vec<f64>], &[f64])> {
        match &self.kind {
            DistributionKind::Discrete { atoms, weights, .. } => Some((atoms, weights)),
            _ => None,
        }
    }

    pub fn sample(&self, rng: &mut LabRng) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.sample_into(rng, &mut x);
        x
    }

    #[inline]
    pub fn sample_into(&self, rng: &mut LabRng, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            DistributionKind::Gaussian { mean, variance } => {
                let sd = variance.sqrt();
                for (xi, m) in x.iter_mut().zip(mean) {
                    let z: f64 = rng.sample(StandardNormal);
                    *xi = m + sd * z;
                }
            }
            DistributionKind::UniformSphere { radius } => {
                sample_direction(rng, x);
                for xi in x.iter_mut() {
                    *xi *= radius;
                }
            }
            DistributionKind::UniformBall { radius } => {
                sample_direction(rng, x);
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / self.dim as f64);
                for xi in x.iter_mut() {
                    *xi *= r;
                }
            }
            DistributionKind::Discrete {
                atoms, cumulative, ..
            } => {
                let u: f64 = rng.random();
                let idx = cumulative
                    .partition_point(|&c| c <= u)
                    .min(atoms.len() - 1);
                x.copy_from_slice(&atoms[idx]);
            }
        }
    }
}

fn sample_direction(rng: &mut LabRng, x: &mut [f64]) {
    loop {
        for xi in x.iter_mut() {
            *xi = rng.sample(StandardNormal);
        }
        let n = norm_sq(x).sqrt();
        if n > 1e-300 {
            for xi in x.iter_mut() {
                *xi /= n;
            }
            return;
        }
    }
}

/// The discrete hard instance: atoms `b_i e_i` with `b_i = +1` when the
/// initializer puts less than half its mass on `w_i > 0`, and target
/// `v_i = b_i / sqrt(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialDataset {
    pub points: Vec<Vec<f64>>,
    pub signs: Vec<f64>,
    pub target: Vec<f64>,
}

pub fn adversarial_instance(dim: usize, init_sign_probs: &[f64]) -> Result<AdversarialDataset> {
    check_positive_dim(dim)?;
    check_dim(dim, init_sign_probs.len())?;
    if let Some(&p) = init_sign_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter {
            name: "p_i",
            value: p,
            reason: "sign probabilities must lie in [0, 1]",
        });
    }
    let signs: Vec<f64> = init_sign_probs
        .iter()
        .map(|&p| if p < 0.5 { 1.0 } else { -1.0 })
        .collect();
    Ok(AdversarialDataset::from_signs(&signs))
}

impl AdversarialDataset {
    pub fn from_signs(signs: &[f64]) -> Self {
        let dim = signs.len();
        let scale = 1.0 / (dim as f64).sqrt();
        let points = signs
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                let mut e = vec![0.0; dim];
                e[i] = b;
                e
            })
            .collect();
        Self {
            points,
            signs: signs.to_vec(),
            target: signs.iter().map(|b| b * scale).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    /// Uniform distribution over the atoms.
    pub fn distribution(&self) -> InputDistribution {
        let n = self.points.len();
        discrete(self.points.clone(), vec![1.0; n]).expect("atoms are well formed")
    }
}

/// Projects `n` samples onto an orthonormal basis of `span{w, v}` (first axis
/// along `w`).
pub fn marginal_2d(
    dist: &InputDistribution,
    w: &[f64],
    v: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; 2]>> {
    check_dim(dist.dim(), w.len())?;
    let (e1, e2) = orthonormal_pair(w, v)?;
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; dist.dim()];
    Ok((0..n)
        .map(|_| {
            dist.sample_into(&mut rng, &mut x);
            [dot(&e1, &x), dot(&e2, &x)]
        })
        .collect())
}

/// Minimum histogram density over square bins lying entirely inside the disk
/// `|y| <= alpha`, using a `bins x bins` grid on `[-alpha, alpha]^2`. Bins
/// with no samples are skipped. Returns `None` if no bin is occupied.
pub fn min_histogram_density(points: &[[f64; 2]], alpha: f64, bins: usize) -> Option<f64> {
    let width = 2.0 * alpha / bins as f64;
    let mut counts = vec![0usize; bins * bins];
    for p in points {
        let i = ((p[0] + alpha) / width).floor();
        let j = ((p[1] + alpha) / width).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < bins && (j as usize) < bins {
            counts[i as usize * bins + j as usize] += 1;
        }
    }
    let n = points.len() as f64;
    let mut min = None::<f64>;
    for i in 0..bins {
        for j in 0..bins {
            let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
            let inside = corners.iter().all(|&(a, b)| {
                let x = -alpha + a as f64 * width;
                let y = -alpha + b as f64 * width;
                x * x + y * y <= alpha * alpha
            });
            let c = counts[i * bins + j];
            if inside && c > 0 {
                let dens = c as f64 / (n * width * width);
                min = Some(min.map_or(dens, |m| m.min(dens)));
            }
        }
    }
    min
}

/// Parsed form of a distribution config key; the dimension is supplied when
/// building.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionKey {
    Gaussian { mean: Option<Vec<f64>>, variance: f64 },
    Ball { radius: f64 },
    Sphere { radius: f64 },
    Adversarial,
}

impl DistributionKey {
    /// Builds the distribution. `Adversarial` needs the initializer's sign
    /// probabilities and is built with [`adversarial_instance`] instead.
    pub fn build(&self, dim: usize) -> Result<InputDistribution> {
        match self {
            DistributionKey::Gaussian { mean, variance } => {
                let m = mean.clone().unwrap_or_else(|| vec![0.0; dim]);
                gaussian(dim, &m, *variance)
            }
            DistributionKey::Ball { radius } => uniform_ball(dim, *radius),
            DistributionKey::Sphere { radius } => uniform_sphere(dim, *radius),
            DistributionKey::Adversarial => Err(Error::InvalidConfig(
                "the adversarial distribution is derived from the initializer".into(),
            )),
        }
    }
}

impl FromStr for DistributionKey {
    type Err = Error;

    fn from_str(key: &str) -> Result<Self> {
        let bad = || Error::UnknownKey {
            kind: "distribution",
            key: key.to_string(),
        };
        let key_trim = key.trim();
        let (name, args) = key_trim.split_once(':').unwrap_or((key_trim, ""));
        // split on commas outside parentheses
        let mut fields = Vec::new();
        let mut depth = 0;
        let mut start = 0;
        for (i, ch) in args.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    fields.push(&args[start..i]);
                    start = i + 1;
                }
                _ => {}
            }
        }
        if !args.is_empty() {
            fields.push(&args[start..]);
        }
        let mut pairs = Vec::new();
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(bad)?;
            pairs.push((k.trim(), v.trim()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        match name {
            "gaussian" => {
                let mut mean = None;
                let mut variance = 1.0;
                for (k, v) in pairs {
                    match k {
                        "mean" => {
                            if let Some(inner) = v.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
                                let vals = inner
                                    .split(',')
                                    .map(|s| num(s.trim()))
                                    .collect::<Result<Vec<_>>>()?;
                                mean = Some(vals);
                            } else if num(v)? == 0.0 {
                                mean = None;
                            } else {
                                return Err(bad());
                            }
                        }
                        "var" => variance = num(v)?,
                        _ => return Err(bad()),
                    }
                }
                Ok(DistributionKey::Gaussian { mean, variance })
            }
            "ball" | "sphere" => {
                let mut radius = 1.0;
                for (k, v) in pairs {
                    match k {
                        "r" => radius = num(v)?,
                        _ => return Err(bad()),
                    }
                }
                Ok(if name == "ball" {
                    DistributionKey::Ball { radius }
                } else {
                    DistributionKey::Sphere { radius }
                })
            }
            "adversarial" if pairs.is_empty() => Ok(DistributionKey::Adversarial),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for DistributionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionKey::Gaussian { mean: None, variance } => {
                write!(f, "gaussian:mean=0,var={variance}")
            }
            DistributionKey::Gaussian {
                mean: Some(m),
                variance,
            } => {
                let parts: Vec<String> = m.iter().map(|x| x.to_string()).collect();
                write!(f, "gaussian:mean=({}),var={variance}", parts.join(","))
            }
            DistributionKey::Ball { radius } => write!(f, "ball:r={radius}"),
            DistributionKey::Sphere { radius } => write!(f, "sphere:r={radius}"),
            DistributionKey::Adversarial => write!(f, "adversarial"),
        }
    }
}
