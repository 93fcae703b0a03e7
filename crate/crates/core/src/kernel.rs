//! Discretized convolution kernels shared by the fluid solvers.
//!
//! Inflow arriving during grid cell `(t_{j-1}, t_j]` is treated as uniformly
//! spread over the cell, so the fraction of it still in service at `t_i` is
//! the cell average of the survival function over ages
//! `[(i-j)Δt, (i-j+1)Δt]`. For exponential service this product
//! integration is exact for piecewise-constant inflow.

use crate::model::{Grid, ServiceDistribution};

pub(crate) struct Kernels {
    /// Cell-averaged survival, `K_k`.
    pub survival: Vec<f64>,
    /// Cell-averaged cdf, `1 - K_k`.
    pub cdf: Vec<f64>,
    /// Cell-averaged density, `(G((k+1)Δt) - G(kΔt)) / Δt`.
    pub density: Vec<f64>,
    /// `F̄(t_i)`, `F(t_i)` and `f(t_i)` for the initial population.
    pub init_survival: Vec<f64>,
    pub init_cdf: Vec<f64>,
    pub init_density: Vec<f64>,
}

impl Kernels {
    pub fn new(service: &ServiceDistribution, initial: &ServiceDistribution, grid: &Grid) -> Self {
        let n = grid.len();
        let dt = grid.step();
        let mut survival = Vec::with_capacity(n);
        let mut cdf = Vec::with_capacity(n);
        let mut density = Vec::with_capacity(n);
        let mut prev_mean = 0.0;
        let mut prev = service.cdf_survival(0.0);
        for k in 0..n {
            let hi = (k + 1) as f64 * dt;
            let mean = service.limited_mean(hi);
            let avg = ((mean - prev_mean) / dt).clamp(0.0, 1.0);
            prev_mean = mean;
            survival.push(avg);
            cdf.push(1.0 - avg);
            let next = service.cdf_survival(hi);
            // difference the smaller tail to avoid cancellation
            let mass = if next.1 < 0.5 {
                prev.1 - next.1
            } else {
                next.0 - prev.0
            };
            density.push(mass.max(0.0) / dt);
            prev = next;
        }
        let mut init_survival = Vec::with_capacity(n);
        let mut init_cdf = Vec::with_capacity(n);
        let mut init_density = Vec::with_capacity(n);
        for t in grid.points() {
            let (c, s) = initial.cdf_survival(t);
            init_survival.push(s);
            init_cdf.push(c);
            init_density.push(initial.pdf(t));
        }
        Kernels {
            survival,
            cdf,
            density,
            init_survival,
            init_cdf,
            init_density,
        }
    }
}

/// Boundary tolerance used for state labels and feasibility checks: two
/// steps' worth of the largest possible inflow.
pub fn boundary_tolerance(grid: &Grid, rate_bound: f64) -> f64 {
    (2.0 * grid.step() * rate_bound).max(1e-9)
}
