//! Infinite-horizon positive semilinear dynamic programming.
//!
//! Under every policy of the structured class the system is `x -> A_mu x` with
//! stage cost `q_mu' x`, so cost functions stay linear, `J(x) = c'x`, and dynamic
//! programming runs on the parameter vector `c` through the operator
//! `G(c) = min_mu (q_mu + alpha A_mu' c)`.

pub mod algorithms;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod markovjump;
pub mod models;
pub mod operators;
pub mod oracle;
pub mod stochastic;
pub mod types;

pub use error::{Error, Result};
pub use operators::{apply_g, apply_g_mu, bellman_residual, certify_stability, evaluate_policy, SemilinearModel};
pub use types::{CostVector, Engine, PolicyControl, SolveReport, StructuredPolicy, TracePoint};
