//! Fluid limit of the zero-buffer loss system `M_t/G/n/n`.
//!
//! Solves `ρ_t = r₀F̄(t) + ∫₀ᵗ w(u) Ḡ(t−u) λ(u) du` together with the
//! acceptance function `w`, which equals one while `ρ < c` and equals
//! `d/λ ∧ 1` while `ρ` sits at the capacity `c`, where `d` is the fluid
//! departure rate.
//!
//! The scheme is explicit. At each step the mass still in service from
//! earlier inflow (the *carry*) leaves `room = c − carry` for new
//! customers. Arrivals are admitted in full when they fit; otherwise the
//! admitted fraction is exactly what holds `ρ` at `c`, which is the
//! departure rate averaged over the step divided by `λ`.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::kernel::{boundary_tolerance, Kernels};
use crate::model::{Grid, SystemConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroTrajectory {
    pub grid: Grid,
    pub capacity: f64,
    pub initial_fraction: f64,
    pub boundary_tol: f64,
    /// Fraction of busy servers.
    pub rho: Vec<f64>,
    /// Acceptance function.
    pub w: Vec<f64>,
    /// Instantaneous departure rate.
    pub d: Vec<f64>,
    /// Cumulative departures.
    pub departures: Vec<f64>,
    /// Cumulative accepted inflow `Σ w_j λ_j Δt`.
    pub accepted: Vec<f64>,
    /// `λ(t_i)`.
    pub lambda: Vec<f64>,
    pub at_boundary: Vec<bool>,
}

fn check(quantity: &'static str, v: f64, index: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical { quantity, index })
    }
}

pub fn solve_zero_buffer(cfg: &SystemConfig, grid: &Grid) -> Result<ZeroTrajectory> {
    cfg.validate()?;
    cfg.require_bounded_densities()?;
    let c = cfg.capacity;
    let r0 = cfg.initial_fraction;
    if r0 > c {
        return Err(Error::Config(format!(
            "initial fraction {r0} exceeds capacity {c}"
        )));
    }
    if !grid.same_horizon(&Grid::new(cfg.horizon(), 1)?) {
        return domain(format!(
            "grid horizon {} does not match config horizon {}",
            grid.horizon(),
            cfg.horizon()
        ));
    }

    let n = grid.len();
    let dt = grid.step();
    let tol = boundary_tolerance(grid, cfg.rate.rate_bound());
    let k = Kernels::new(&cfg.service, &cfg.initial_dist, grid);
    let lambda: Vec<f64> = grid.points().map(|t| cfg.rate.at(t)).collect();

    let mut rho = vec![0.0; n];
    let mut w = vec![1.0; n];
    let mut d = vec![0.0; n];
    let mut departures = vec![0.0; n];
    let mut accepted = vec![0.0; n];
    // inflow rate into service on cell (t_{j-1}, t_j]; index 0 unused
    let mut inflow = vec![0.0; n];

    rho[0] = r0;
    d[0] = check("d", r0 * k.init_density[0], 0)?;
    if r0 >= c - tol && lambda[0] > 0.0 {
        w[0] = (d[0] / lambda[0]).clamp(0.0, 1.0);
    }

    for m in 1..n {
        let (mut carry, mut dep_rate, mut dep_cum) = (0.0, 0.0, 0.0);
        for j in 1..m {
            let a = inflow[j];
            carry += a * k.survival[m - j];
            dep_rate += a * k.density[m - j];
            dep_cum += a * k.cdf[m - j];
        }
        let carry = check("rho", r0 * k.init_survival[m] + carry * dt, m)?;
        let room = (c - carry).max(0.0);
        let admissible = lambda[m] * k.survival[0] * dt;
        let wm = if admissible <= room {
            1.0
        } else {
            room / admissible
        };
        let a = check("w", wm, m)? * lambda[m];
        inflow[m] = a;

        w[m] = wm;
        rho[m] = (carry + a * k.survival[0] * dt).clamp(0.0, c);
        d[m] = check(
            "d",
            r0 * k.init_density[m] + (dep_rate + a * k.density[0]) * dt,
            m,
        )?;
        departures[m] = check("D", r0 * k.init_cdf[m] + (dep_cum + a * k.cdf[0]) * dt, m)?;
        accepted[m] = accepted[m - 1] + a * dt;
    }

    let at_boundary = rho.iter().map(|&r| r >= c - tol).collect();
    Ok(ZeroTrajectory {
        grid: *grid,
        capacity: c,
        initial_fraction: r0,
        boundary_tol: tol,
        rho,
        w,
        d,
        departures,
        accepted,
        lambda,
        at_boundary,
    })
}

impl ZeroTrajectory {
    /// Acceptance probability in the fluid limit: `w` at the last grid
    /// point at or before `t`.
    pub fn acceptance_at(&self, t: f64) -> Result<f64> {
        match self.grid.index_at_or_before(t) {
            Some(i) => Ok(self.w[i]),
            None => domain(format!("time {t} outside [0, {}]", self.grid.horizon())),
        }
    }

    /// Largest violation of `ρ + D = r₀ + accepted inflow` over the grid.
    pub fn mass_balance_error(&self) -> f64 {
        (0..self.rho.len())
            .map(|i| {
                (self.rho[i] + self.departures[i] - self.initial_fraction - self.accepted[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}
