//! Teacher-student learning of a single neuron: activations, input
//! distributions, the population objective, optimizers and checks of the
//! convergence and failure results.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod activations;
pub mod distributions;
pub mod error;
pub mod linalg;
pub mod mc;
pub mod objective;
pub mod ode;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod theory;

pub use activations::{Activation, ActivationKind};
pub use distributions::{DistributionKey, InputDistribution};
pub use error::{Error, Result};
pub use objective::Problem;
pub use optimize::{GradientMode, Horizon, Initializer, Method, OptimizerConfig, Trajectory};
pub use theory::{SpreadCertificate, TheoremReport};
