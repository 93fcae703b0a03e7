//! System primitives: arrival rates, service distributions, configuration
//! and time grids.

mod config;
mod dist;
mod grid;
mod rate;

pub use config::{ConfigFile, InitialSection, SystemConfig, SystemSection};
pub use dist::{Evaluation, ServiceDistribution};
pub use grid::Grid;
pub use rate::{RateFunction, RateKind, RateSpec};
