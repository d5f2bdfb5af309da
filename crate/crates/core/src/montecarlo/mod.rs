//! Sampling designs, fixture functions and the Monte Carlo estimator of `C_kl`.

mod design;
mod estimator;
mod function;

pub use design::lhs_design;
pub use estimator::{mc_cmat, McEstimate, McReport};
pub use function::{
    fd_gradient, piston_native, FdGradient, Fixture, GradientMode, SampledFunction, DEFAULT_FD_STEP,
    PISTON_RANGES,
};
