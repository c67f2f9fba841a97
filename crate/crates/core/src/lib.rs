//! Decoupled changepoint detection: fit a Bayesian dynamic linear model by Gibbs
//! sampling, then read changepoints off its posterior with a weighted adaptive
//! lasso path and a projected-posterior `R^2` count selection.

// Index loops mirror the banded and triangular recurrences; negated comparisons
// deliberately route NaN to the failure branch.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod par;
pub mod pelt;
pub mod pipeline;
pub mod projection;
pub mod sampler;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use model::*;
