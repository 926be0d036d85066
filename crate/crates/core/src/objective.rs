//! The population loss `F(w) = E[(sigma(w.x) - sigma(v.x))^2 / 2]`, its
//! gradient, per-sample stochastic gradients, the standard-Gaussian ReLU closed
//! forms, and finite-difference / Monte Carlo oracles.

use std::f64::consts::PI;

use crate::activations::Activation;
use crate::distributions::InputDistribution;
use crate::error::{Error, Result};
use crate::linalg::{angle, check_dim, dot, norm, norm_sq};
use crate::mc;

#[derive(Debug, Clone)]
pub struct Problem {
    pub dist: InputDistribution,
    pub act: Activation,
    pub target: Vec<f64>,
}

impl Problem {
    pub fn new(dist: InputDistribution, act: Activation, target: Vec<f64>) -> Result<Self> {
        check_dim(dist.dim(), target.len())?;
        Ok(Self { dist, act, target })
    }

    pub fn dim(&self) -> usize {
        self.dist.dim()
    }

    pub fn has_closed_form(&self) -> bool {
        self.dist.is_standard_gaussian() && self.act.is_relu()
    }

    /// Residual `sigma(w.x) - sigma(v.x)` and `sigma'(w.x)`.
    #[inline]
    fn residual(&self, w: &[f64], x: &[f64]) -> (f64, f64) {
        let wx = dot(w, x);
        let vx = dot(&self.target, x);
        (self.act.value(wx) - self.act.value(vx), self.act.derivative(wx))
    }

    fn check_w(&self, w: &[f64]) -> Result<()> {
        check_dim(self.dim(), w.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n_samples: usize,
}

impl ScalarEstimate {
    fn from_moments(m: &mc::Moments, i: usize) -> Self {
        Self {
            mean: m.mean[i],
            std_err: m.std_err()[i],
            n_samples: m.n,
        }
    }
}

/// Stochastic gradient `(sigma(w.x) - sigma(v.x)) sigma'(w.x) x`.
pub fn stochastic_gradient(p: &Problem, w: &[f64], x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    stochastic_gradient_into(p, w, x, &mut g);
    g
}

#[inline]
pub fn stochastic_gradient_into(p: &Problem, w: &[f64], x: &[f64], out: &mut [f64]) {
    let (r, ds) = p.residual(w, x);
    let c = r * ds;
    for (o, xi) in out.iter_mut().zip(x) {
        *o = c * xi;
    }
}

pub fn population_loss_mc(p: &Problem, w: &[f64], n: usize, seed: u64) -> Result<ScalarEstimate> {
    p.check_w(w)?;
    let m = mc::estimate(&p.dist, n, seed, 1, |x, out| {
        let (r, _) = p.residual(w, x);
        out[0] = 0.5 * r * r;
    });
    Ok(ScalarEstimate::from_moments(&m, 0))
}

pub fn population_gradient_mc(p: &Problem, w: &[f64], n: usize, seed: u64) -> Result<GradEstimate> {
    Ok(loss_and_gradient_mc(p, w, n, seed)?.1)
}

/// Loss and gradient estimated from the same samples.
pub fn loss_and_gradient_mc(
    p: &Problem,
    w: &[f64],
    n: usize,
    seed: u64,
) -> Result<(ScalarEstimate, GradEstimate)> {
    p.check_w(w)?;
    let d = p.dim();
    let m = mc::estimate(&p.dist, n, seed, d + 1, |x, out| {
        let (r, ds) = p.residual(w, x);
        let c = r * ds;
        for (o, xi) in out[..d].iter_mut().zip(x) {
            *o = c * xi;
        }
        out[d] = 0.5 * r * r;
    });
    let se = m.std_err();
    let grad = GradEstimate {
        mean: m.mean[..d].to_vec(),
        std_err: se[..d].to_vec(),
        n_samples: m.n,
    };
    Ok((ScalarEstimate::from_moments(&m, d), grad))
}

/// Monte Carlo estimate of `<grad F(w), direction>` with the standard error of
/// the scalar per-sample products.
pub fn directional_gradient_mc(
    p: &Problem,
    w: &[f64],
    direction: &[f64],
    n: usize,
    seed: u64,
) -> Result<ScalarEstimate> {
    p.check_w(w)?;
    check_dim(p.dim(), direction.len())?;
    let m = mc::estimate(&p.dist, n, seed, 1, |x, out| {
        let (r, ds) = p.residual(w, x);
        out[0] = r * ds * dot(direction, x);
    });
    Ok(ScalarEstimate::from_moments(&m, 0))
}

pub fn population_loss_exact_discrete(p: &Problem, w: &[f64]) -> Result<f64> {
    p.check_w(w)?;
    let (atoms, weights) = discrete_parts(p)?;
    Ok(atoms
        .iter()
        .zip(weights)
        .map(|(x, q)| {
            let (r, _) = p.residual(w, x);
            0.5 * q * r * r
        })
        .sum())
}

pub fn population_gradient_exact_discrete(p: &Problem, w: &[f64]) -> Result<Vec<f64>> {
    p.check_w(w)?;
    let (atoms, weights) = discrete_parts(p)?;
    let mut g = vec![0.0; p.dim()];
    for (x, q) in atoms.iter().zip(weights) {
        let (r, ds) = p.residual(w, x);
        let c = q * r * ds;
        if c != 0.0 {
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += c * xi;
            }
        }
    }
    Ok(g)
}

fn discrete_parts(p: &Problem) -> Result<(&[Vec<f64>], &[f64])> {
    p.dist.atoms().ok_or_else(|| {
        Error::UnsupportedDistribution("exact evaluation needs a finitely supported distribution".into())
    })
}

/// Closed-form population gradient for ReLU under `N(0, I)`:
/// `w/2 - (|v| sin(theta) w/|w| + (pi - theta) v) / (2 pi)`.
pub fn gradient_closed_form_gaussian_relu(w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_dim(w.len(), v.len())?;
    let wn = norm(w);
    if wn == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    let vn = norm(v);
    let Some(theta) = angle(w, v) else {
        // v = 0: only the w/2 term survives
        return Ok(w.iter().map(|x| 0.5 * x).collect());
    };
    let a = 0.5 - vn * theta.sin() / (2.0 * PI * wn);
    let b = (PI - theta) / (2.0 * PI);
    Ok(w.iter().zip(v).map(|(wi, vi)| a * wi - b * vi).collect())
}

/// Closed-form population loss for ReLU under `N(0, I)`, continuously extended
/// to `F(0) = |v|^2 / 4`.
pub fn loss_closed_form_gaussian_relu(w: &[f64], v: &[f64]) -> f64 {
    let wn2 = norm_sq(w);
    let vn2 = norm_sq(v);
    let quad = 0.25 * (wn2 + vn2);
    match angle(w, v) {
        Some(theta) => {
            quad - (wn2.sqrt() * vn2.sqrt() * theta.sin() + (PI - theta) * dot(w, v)) / (2.0 * PI)
        }
        None => quad,
    }
}

/// Central differences, one coordinate at a time.
pub fn finite_difference_gradient<F>(f: F, w: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = w.to_vec();
    (0..w.len())
        .map(|i| {
            x[i] = w[i] + h;
            let fp = f(&x);
            x[i] = w[i] - h;
            let fm = f(&x);
            x[i] = w[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::{make_identity, make_relu};
    use crate::distributions::{adversarial_instance, standard_gaussian, uniform_ball};
    use crate::linalg::sub;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn relu() -> Activation {
        make_relu(1.0).unwrap()
    }

    fn unit_e(d: usize, i: usize) -> Vec<f64> {
        crate::linalg::basis_vector(d, i)
    }

    /// E[max(0,z)^2] for z ~ N(0,1) by trapezoid quadrature on [0, 12].
    fn half_gaussian_second_moment() -> f64 {
        let n = 200_000;
        let h = 12.0 / n as f64;
        let f = |z: f64| z * z * (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let mut s = 0.5 * (f(0.0) + f(12.0));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        s * h
    }

    #[test]
    fn loss_mc_at_target_is_exactly_zero() {
        let p = Problem::new(standard_gaussian(5).unwrap(), relu(), unit_e(5, 0)).unwrap();
        let est = population_loss_mc(&p, &unit_e(5, 0), 10_000, 1).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_err, 0.0);
    }

    #[test]
    fn loss_mc_at_origin() {
        let oracle = 0.5 * half_gaussian_second_moment();
        assert!((oracle - 0.25).abs() < 1e-9);
        let p = Problem::new(standard_gaussian(5).unwrap(), relu(), unit_e(5, 2)).unwrap();
        let est = population_loss_mc(&p, &[0.0; 5], 400_000, 2).unwrap();
        assert!((est.mean - oracle).abs() <= 4.0 * est.std_err, "{est:?}");
    }

    #[test]
    fn adversarial_loss_by_enumeration() {
        // w with every w.x_i <= 0: each atom contributes (1/d)(1/2)(1/d)
        let d = 8;
        let inst = adversarial_instance(d, &[0.5; 8]).unwrap();
        let p = Problem::new(inst.distribution(), relu(), inst.target.clone()).unwrap();
        let w: Vec<f64> = inst.signs.iter().map(|b| -0.3 * b).collect();
        let exact = population_loss_exact_discrete(&p, &w).unwrap();
        let oracle: f64 = inst
            .points
            .iter()
            .map(|x| {
                let vx = dot(&inst.target, x).max(0.0);
                let wx = dot(&w, x).max(0.0);
                (wx - vx).powi(2) / (2.0 * d as f64)
            })
            .sum();
        assert!((exact - oracle).abs() < 1e-15);
        assert!((exact - 1.0 / 16.0).abs() < 1e-15);
        let mc = population_loss_mc(&p, &w, 100_000, 4).unwrap();
        assert!((mc.mean - exact).abs() <= 4.0 * mc.std_err + 1e-15);
    }

    #[test]
    fn exact_discrete_examples() {
        let inst = adversarial_instance(4, &[0.5; 4]).unwrap();
        let p = Problem::new(inst.distribution(), relu(), inst.target.clone()).unwrap();
        assert_eq!(population_loss_exact_discrete(&p, &inst.target).unwrap(), 0.0);
        assert!((population_loss_exact_discrete(&p, &[0.0; 4]).unwrap() - 0.125).abs() < 1e-15);
        // one stuck coordinate (w_0 b_0 < 0), the rest at the target
        let mut w = inst.target.clone();
        w[0] = -w[0];
        let f = population_loss_exact_discrete(&p, &w).unwrap();
        assert!(f >= 1.0 / 32.0 - 1e-15);
        let g = standard_gaussian(4).unwrap();
        let q = Problem::new(g, relu(), inst.target.clone()).unwrap();
        assert!(matches!(
            population_loss_exact_discrete(&q, &w),
            Err(Error::UnsupportedDistribution(_))
        ));
    }

    #[test]
    fn stuck_coordinates_have_zero_gradient() {
        let inst = adversarial_instance(6, &[0.5; 6]).unwrap();
        let p = Problem::new(inst.distribution(), make_relu(0.0).unwrap(), inst.target.clone())
            .unwrap();
        let w = vec![0.4, -0.2, 0.3, 0.1, -0.5, 0.0];
        let g = population_gradient_exact_discrete(&p, &w).unwrap();
        for i in 0..6 {
            if w[i] * inst.signs[i] <= 0.0 {
                assert_eq!(g[i], 0.0);
            }
        }
    }

    #[test]
    fn gradient_mc_identity_is_linear_regression() {
        let p = Problem::new(standard_gaussian(3).unwrap(), make_identity(), vec![1.0, 0.0, 0.0])
            .unwrap();
        let w = [0.3, -0.7, 1.1];
        let est = population_gradient_mc(&p, &w, 400_000, 5).unwrap();
        let expect = sub(&w, &p.target);
        for i in 0..3 {
            assert!((est.mean[i] - expect[i]).abs() <= 4.0 * est.std_err[i]);
        }
    }

    #[test]
    fn gradient_mc_at_target_vanishes() {
        let v = vec![0.6, 0.8];
        let p = Problem::new(standard_gaussian(2).unwrap(), relu(), v.clone()).unwrap();
        let est = population_gradient_mc(&p, &v, 50_000, 6).unwrap();
        assert!(est.mean.iter().zip(&est.std_err).all(|(m, s)| m.abs() <= 4.0 * s));
    }

    #[test]
    fn average_of_stochastic_gradients_is_the_mc_estimate() {
        let p = Problem::new(uniform_ball(3, 1.0).unwrap(), relu(), vec![0.0, 1.0, 0.0]).unwrap();
        let w = [0.5, 0.2, -0.4];
        let n = 5000;
        let est = population_gradient_mc(&p, &w, n, 8).unwrap();
        let xs = mc::draw_samples(&p.dist, n, 8);
        let mut acc = [0.0; 3];
        for x in xs.chunks_exact(3) {
            let g = stochastic_gradient(&p, &w, x);
            for i in 0..3 {
                acc[i] += g[i];
            }
        }
        for i in 0..3 {
            assert!((acc[i] / n as f64 - est.mean[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn stochastic_gradient_zero_on_inactive_relu() {
        let p = Problem::new(standard_gaussian(2).unwrap(), relu(), vec![1.0, 0.0]).unwrap();
        let g = stochastic_gradient(&p, &[-1.0, 0.0], &[2.0, 5.0]);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn stochastic_gradient_norm_bound_on_bounded_support() {
        let dist = uniform_ball(4, 1.3).unwrap();
        let c1 = dist.support_bound_sq().unwrap();
        let act = make_relu(1.0).unwrap();
        let c2 = act.derivative_upper_bound();
        let mut rng = rng_from_seed(10);
        let v = vec![0.5, 0.5, 0.5, 0.5];
        let p = Problem::new(dist, act, v.clone()).unwrap();
        for _ in 0..20_000 {
            let w: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let x = p.dist.sample(&mut rng);
            let g = stochastic_gradient(&p, &w, &x);
            let bound = c1 * c1 * c2.powi(4) * crate::linalg::dist_sq(&w, &v);
            assert!(norm_sq(&g) <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn closed_form_examples() {
        let g = gradient_closed_form_gaussian_relu(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((g[0] + 0.25).abs() < 1e-15);
        assert!((g[1] - (0.5 - 1.0 / (2.0 * PI))).abs() < 1e-15);
        let v = [0.6, 0.8];
        let g = gradient_closed_form_gaussian_relu(&v, &v).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-15));
        let w = [-0.6, -0.8];
        let g = gradient_closed_form_gaussian_relu(&w, &v).unwrap();
        assert!((g[0] - 0.5 * w[0]).abs() < 1e-15 && (g[1] - 0.5 * w[1]).abs() < 1e-15);
        assert!(matches!(
            gradient_closed_form_gaussian_relu(&[0.0, 0.0], &v),
            Err(Error::UndefinedAngle)
        ));
        assert!(loss_closed_form_gaussian_relu(&v, &v).abs() < 1e-15);
        assert!((loss_closed_form_gaussian_relu(&[0.0, 0.0], &[1.0, 0.0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn closed_form_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(12);
        let mut checked = 0;
        while checked < 200 {
            let d = 2 + checked % 4;
            let w: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let th = angle(&w, &v).unwrap();
            if norm(&w) < 0.1 || !(0.1..PI - 0.1).contains(&th) {
                continue;
            }
            let fd = finite_difference_gradient(|x| loss_closed_form_gaussian_relu(x, &v), &w, 1e-5);
            let cf = gradient_closed_form_gaussian_relu(&w, &v).unwrap();
            for i in 0..d {
                assert!((fd[i] - cf[i]).abs() < 1e-6, "{fd:?} vs {cf:?}");
            }
            checked += 1;
        }
    }

    #[test]
    fn closed_form_matches_mc_at_reference_point() {
        let p = Problem::new(standard_gaussian(2).unwrap(), relu(), vec![1.0, 0.0]).unwrap();
        let est = population_gradient_mc(&p, &[0.0, 1.0], 4_000_000, 13).unwrap();
        let cf = gradient_closed_form_gaussian_relu(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        for i in 0..2 {
            assert!((est.mean[i] - cf[i]).abs() <= 4.0 * est.std_err[i], "{est:?} {cf:?}");
        }
        let loss = population_loss_mc(&p, &[0.0, 1.0], 1_000_000, 14).unwrap();
        let lcf = loss_closed_form_gaussian_relu(&[0.0, 1.0], &[1.0, 0.0]);
        assert!((loss.mean - lcf).abs() <= 4.0 * loss.std_err);
    }

    #[test]
    fn finite_difference_examples() {
        let w = [0.3, -1.2, 2.0];
        let g = finite_difference_gradient(|x| 0.5 * norm_sq(x), &w, 1e-5);
        for i in 0..3 {
            assert!((g[i] - w[i]).abs() < 1e-8);
        }
        let g = finite_difference_gradient(|_| 4.2, &w, 1e-5);
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn std_err_halves_when_samples_quadruple() {
        let p = Problem::new(standard_gaussian(3).unwrap(), relu(), vec![0.0, 0.0, 1.0]).unwrap();
        let w = [0.4, 0.1, -0.3];
        for seed in 0..5 {
            let a = population_gradient_mc(&p, &w, 20_000, 100 + seed).unwrap();
            let b = population_gradient_mc(&p, &w, 80_000, 200 + seed).unwrap();
            for i in 0..3 {
                let ratio = b.std_err[i] / a.std_err[i];
                assert!((0.4..=0.6).contains(&ratio), "{ratio}");
            }
        }
    }

    #[test]
    fn correlation_nonnegative_for_monotone_activations() {
        let mut rng = rng_from_seed(15);
        for act in ["relu", "leaky_relu:0.1", "softplus", "sigmoid", "identity"] {
            let act: Activation = act.parse().unwrap();
            for k in 0..4 {
                let w: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let v: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let p = Problem::new(standard_gaussian(3).unwrap(), act, v.clone()).unwrap();
                let dir = sub(&w, &v);
                let est = directional_gradient_mc(&p, &w, &dir, 50_000, 300 + k).unwrap();
                assert!(est.mean + 4.0 * est.std_err >= 0.0, "{act}: {est:?}");
            }
        }
    }

    #[test]
    fn closed_form_vanishes_only_at_target() {
        let v = [1.0, 0.0];
        let delta = 0.2;
        for i in 1..=40 {
            let r = 2.0 * i as f64 / 40.0;
            for j in 0..=60 {
                let th = (PI - delta) * j as f64 / 60.0;
                let w = [r * th.cos(), r * th.sin()];
                if crate::linalg::dist_sq(&w, &v) < 1e-12 {
                    continue;
                }
                let g = gradient_closed_form_gaussian_relu(&w, &v).unwrap();
                assert!(norm(&g) > 1e-6, "stationary at {w:?}");
            }
        }
    }
}
