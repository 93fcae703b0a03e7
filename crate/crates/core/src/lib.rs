//! Fluid limits of time-varying many-server loss systems.
//!
//! The crate solves the discontinuous Volterra integral equations that
//! describe the large-`n` limit of `M_t/G/n/n` and `M_t/G/n/(n+b_n)`
//! queues, simulates the stochastic systems themselves, compares the two,
//! and sizes servers and buffers against a transient blocking target.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod export;
pub mod model;
pub mod optimize;
pub mod simulator;
pub mod validate;
pub mod vie_finite;
pub mod vie_zero;

mod kernel;

pub use error::{Error, Result};
pub use kernel::boundary_tolerance;
pub use model::{Grid, RateFunction, ServiceDistribution, SystemConfig};
pub use vie_finite::{classify_state, solve_finite_buffer, FiniteTrajectory, FluidState};
pub use vie_zero::{solve_zero_buffer, ZeroTrajectory};
