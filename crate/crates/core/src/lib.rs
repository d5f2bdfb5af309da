//! Co-active subspaces for pairs of computer models.
//!
//! Fit hinge-spline surrogates, integrate their gradient cross-products in
//! closed form, and summarise the result as concordance, co-active
//! directions, co-activity scores and a discordance embedding.

// `!(x > 0.0)` style guards reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod closedform;
pub mod cluster;
pub mod error;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod verify;

pub use error::{Error, Result};
