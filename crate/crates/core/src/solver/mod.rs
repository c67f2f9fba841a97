//! Decoupled penalized loss over the posterior: difference operators, weights and
//! normalizers, and the solution path.

pub mod design;
pub mod difference;
pub mod path;
pub mod weights;

pub use difference::{build_inverse_difference, DifferenceOperator};
pub use path::{fit_path, kkt_check, solve_with_covariates, CdSolver, KktReport, PathOptions};
pub use weights::{compute_psi, compute_weights, Normalizers};
