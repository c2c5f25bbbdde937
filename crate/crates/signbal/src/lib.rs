//! Band-limited random waves on the round sphere: covariance kernels,
//! Gaussian samplers, volume-bias functionals on geodesic caps, barrier
//! constructions and the Monte Carlo experiments built on them.

// `!(x > 0.0)` style guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod constants;
pub mod defect;
pub mod emit;
pub mod error;
pub mod experiments;
pub mod harmonics;
pub mod kernels;
pub mod quad;
pub mod sampler;
pub mod specfun;
pub mod sphere;

pub use error::{Error, Result};
pub use kernels::KernelSpec;
