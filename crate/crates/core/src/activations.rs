//! Scalar activations with an explicit derivative convention at kinks.
//!
//! Activations are named by string keys in configs: `relu`, `relu@0.5`,
//! `leaky_relu:0.01`, `softplus`, `sigmoid`, `identity`, `abs`, `periodic:2.0`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Relu,
    LeakyRelu { slope: f64 },
    Softplus,
    Sigmoid,
    Identity,
    Absolute,
    /// Triangle wave of slope +-1: distance to the nearest multiple of `period`.
    Periodic { period: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    kind: ActivationKind,
    /// Derivative used at kinks. For the periodic wave it applies at the troughs;
    /// peaks use its negation.
    kink_value: f64,
}

/// A kink and the declared subderivative there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kink {
    pub at: f64,
    pub left: f64,
    pub right: f64,
    pub chosen: f64,
}

pub fn make_relu(kink_value: f64) -> Result<Activation> {
    if !(0.0..=1.0).contains(&kink_value) {
        return Err(Error::InvalidConvention {
            value: kink_value,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(Activation {
        kind: ActivationKind::Relu,
        kink_value,
    })
}

pub fn make_leaky_relu(slope: f64) -> Result<Activation> {
    make_leaky_relu_with_kink(slope, 1.0)
}

pub fn make_leaky_relu_with_kink(slope: f64, kink_value: f64) -> Result<Activation> {
    if !(slope > 0.0 && slope < 1.0) {
        return Err(Error::InvalidParameter {
            name: "slope",
            value: slope,
            reason: "leaky-ReLU slope must lie in (0, 1)",
        });
    }
    if !(slope..=1.0).contains(&kink_value) {
        return Err(Error::InvalidConvention {
            value: kink_value,
            lo: slope,
            hi: 1.0,
        });
    }
    Ok(Activation {
        kind: ActivationKind::LeakyRelu { slope },
        kink_value,
    })
}

pub fn make_softplus() -> Activation {
    Activation {
        kind: ActivationKind::Softplus,
        kink_value: 0.0,
    }
}

pub fn make_sigmoid() -> Activation {
    Activation {
        kind: ActivationKind::Sigmoid,
        kink_value: 0.0,
    }
}

pub fn make_identity() -> Activation {
    Activation {
        kind: ActivationKind::Identity,
        kink_value: 0.0,
    }
}

pub fn make_absolute() -> Activation {
    make_absolute_with_kink(1.0).expect("1 is a valid subderivative of |z| at 0")
}

pub fn make_absolute_with_kink(kink_value: f64) -> Result<Activation> {
    if !(-1.0..=1.0).contains(&kink_value) {
        return Err(Error::InvalidConvention {
            value: kink_value,
            lo: -1.0,
            hi: 1.0,
        });
    }
    Ok(Activation {
        kind: ActivationKind::Absolute,
        kink_value,
    })
}

pub fn make_periodic(period: f64) -> Result<Activation> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "period",
            value: period,
            reason: "period must be positive",
        });
    }
    Ok(Activation {
        kind: ActivationKind::Periodic { period },
        kink_value: 1.0,
    })
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn is_relu(&self) -> bool {
        matches!(self.kind, ActivationKind::Relu)
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu => z.max(0.0),
            ActivationKind::LeakyRelu { slope } => {
                if z >= 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            // log(1 + e^z) without overflow
            ActivationKind::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            ActivationKind::Sigmoid => logistic(z),
            ActivationKind::Identity => z,
            ActivationKind::Absolute => z.abs(),
            ActivationKind::Periodic { period } => {
                let r = z.rem_euclid(period);
                if r <= 0.5 * period {
                    r
                } else {
                    period - r
                }
            }
        }
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    0.0
                } else {
                    self.kink_value
                }
            }
            ActivationKind::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    slope
                } else {
                    self.kink_value
                }
            }
            ActivationKind::Softplus => logistic(z),
            ActivationKind::Sigmoid => {
                let s = logistic(z);
                s * (1.0 - s)
            }
            ActivationKind::Identity => 1.0,
            ActivationKind::Absolute => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    -1.0
                } else {
                    self.kink_value
                }
            }
            ActivationKind::Periodic { period } => {
                let r = z.rem_euclid(period);
                let half = 0.5 * period;
                if r == 0.0 {
                    self.kink_value
                } else if r == half {
                    -self.kink_value
                } else if r < half {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Kinks with their one-sided derivatives. For the periodic wave the list
    /// covers one period `[0, period)`; kinks repeat with that period.
    pub fn kinks(&self) -> Vec<Kink> {
        let k = self.kink_value;
        match self.kind {
            ActivationKind::Relu => vec![Kink {
                at: 0.0,
                left: 0.0,
                right: 1.0,
                chosen: k,
            }],
            ActivationKind::LeakyRelu { slope } => vec![Kink {
                at: 0.0,
                left: slope,
                right: 1.0,
                chosen: k,
            }],
            ActivationKind::Absolute => vec![Kink {
                at: 0.0,
                left: -1.0,
                right: 1.0,
                chosen: k,
            }],
            ActivationKind::Periodic { period } => vec![
                Kink {
                    at: 0.0,
                    left: -1.0,
                    right: 1.0,
                    chosen: k,
                },
                Kink {
                    at: 0.5 * period,
                    left: 1.0,
                    right: -1.0,
                    chosen: -k,
                },
            ],
            ActivationKind::Softplus | ActivationKind::Sigmoid | ActivationKind::Identity => {
                Vec::new()
            }
        }
    }

    pub fn kink_points(&self) -> Vec<f64> {
        self.kinks().iter().map(|k| k.at).collect()
    }

    pub fn kink_value(&self) -> f64 {
        self.kink_value
    }

    /// Distance from `z` to the nearest kink (periodic kinks included).
    pub fn distance_to_kink(&self, z: f64) -> f64 {
        match self.kind {
            ActivationKind::Periodic { period } => {
                let half = 0.5 * period;
                let r = z.rem_euclid(half);
                r.min(half - r)
            }
            _ => self
                .kink_points()
                .iter()
                .map(|k| (z - k).abs())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// `c2` with `sigma'(z) <= c2` everywhere; also the Lipschitz constant of
    /// every library member.
    pub fn derivative_upper_bound(&self) -> f64 {
        match self.kind {
            ActivationKind::Sigmoid => 0.25,
            _ => 1.0,
        }
    }

    /// Weak monotonicity (non-decreasing).
    pub fn is_monotone(&self) -> bool {
        !matches!(
            self.kind,
            ActivationKind::Absolute | ActivationKind::Periodic { .. }
        )
    }

    /// `gamma = inf_{0 < z < 2 alpha} sigma'(z)`. Zero for non-monotone members.
    pub fn monotone_lower_bound(&self, alpha: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu
            | ActivationKind::LeakyRelu { .. }
            | ActivationKind::Identity => 1.0,
            // logistic is increasing, inf at 0+
            ActivationKind::Softplus => 0.5,
            // sigma' decreasing on z > 0
            ActivationKind::Sigmoid => self.derivative(2.0 * alpha),
            ActivationKind::Absolute | ActivationKind::Periodic { .. } => 0.0,
        }
    }

    /// `inf_z sigma'(z)` over the whole line.
    pub fn global_derivative_lower_bound(&self) -> f64 {
        match self.kind {
            ActivationKind::Identity => 1.0,
            ActivationKind::LeakyRelu { slope } => slope,
            ActivationKind::Absolute | ActivationKind::Periodic { .. } => -1.0,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActivationKind::Relu if self.kink_value == 1.0 => write!(f, "relu"),
            ActivationKind::Relu => write!(f, "relu@{}", self.kink_value),
            ActivationKind::LeakyRelu { slope } => write!(f, "leaky_relu:{slope}"),
            ActivationKind::Softplus => write!(f, "softplus"),
            ActivationKind::Sigmoid => write!(f, "sigmoid"),
            ActivationKind::Identity => write!(f, "identity"),
            ActivationKind::Absolute => write!(f, "abs"),
            ActivationKind::Periodic { period } => write!(f, "periodic:{period:?}"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(key: &str) -> Result<Self> {
        let bad = || Error::UnknownKey {
            kind: "activation",
            key: key.to_string(),
        };
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let key_trim = key.trim();
        let (head, kink) = match key_trim.split_once('@') {
            Some((h, k)) => (h, Some(num(k)?)),
            None => (key_trim, None),
        };
        let (name, arg) = match head.split_once(':') {
            Some((n, a)) => (n, Some(num(a)?)),
            None => (head, None),
        };
        match (name, arg, kink) {
            ("relu", None, k) => make_relu(k.unwrap_or(1.0)),
            ("leaky_relu", Some(s), k) => make_leaky_relu_with_kink(s, k.unwrap_or(1.0)),
            ("softplus", None, None) => Ok(make_softplus()),
            ("sigmoid", None, None) => Ok(make_sigmoid()),
            ("identity", None, None) => Ok(make_identity()),
            ("abs", None, k) => make_absolute_with_kink(k.unwrap_or(1.0)),
            ("periodic", Some(p), None) => make_periodic(p),
            _ => Err(bad()),
        }
    }
}
