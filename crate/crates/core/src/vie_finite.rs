//! Fluid limit of the finite-buffer loss system `M_t/G/n/(n+b_n)`.
//!
//! The state is the fraction of busy servers `ρ ∈ [0, c]`, the buffer
//! content `η ∈ [0, β]` and cumulative departures `D`. Three auxiliary
//! functions route the flows: `z¹` is the share of arrivals that go
//! straight into service, `z²` the share of departures that are replaced
//! from the buffer, and `z³` the share of arrivals that are accepted at
//! all (the fluid acceptance probability).
//!
//! Each step first promotes buffered fluid into the service room freed by
//! departures, then routes new arrivals into service, the buffer, or
//! blocks them. The resulting `z` values follow the four-state table:
//!
//! | state | condition            | z¹ | z² | z³        |
//! |-------|----------------------|----|----|-----------|
//! | S1    | ρ < c, η = 0         | 1  | 0  | 1         |
//! | S2    | ρ = c, η = 0         | 1  | 0  | 1         |
//! | S3    | ρ = c, 0 < η < β     | 0  | 1  | 1         |
//! | S4    | ρ = c, η = β         | 0  | 1  | d/λ ∧ 1   |
//!
//! In S2 with `λ > d` the excess arrivals start filling the buffer, which
//! is the transition into S3.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{boundary_tolerance, Kernels};
use crate::model::{Grid, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FluidState {
    /// Servers not full, buffer empty.
    S1,
    /// Servers full, buffer empty.
    S2,
    /// Servers full, buffer partially occupied.
    S3,
    /// Servers full, buffer full.
    S4,
}

impl fmt::Display for FluidState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FluidState::S1 => "S1",
            FluidState::S2 => "S2",
            FluidState::S3 => "S3",
            FluidState::S4 => "S4",
        };
        f.write_str(s)
    }
}

/// Label a (clamped) fluid state. With `beta = 0` the buffer is always
/// empty, so a saturated system is reported as `S2`.
pub fn classify_state(rho: f64, eta: f64, c: f64, beta: f64, tol: f64) -> FluidState {
    let full = rho >= c - tol;
    if eta <= tol {
        if full {
            FluidState::S2
        } else {
            FluidState::S1
        }
    } else if eta >= beta - tol {
        FluidState::S4
    } else {
        FluidState::S3
    }
}

/// A state change the fluid dynamics cannot make within one grid step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepWarning {
    pub index: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiniteTrajectory {
    pub grid: Grid,
    pub capacity: f64,
    pub buffer_ratio: f64,
    pub initial_fraction: f64,
    pub boundary_tol: f64,
    pub rho: Vec<f64>,
    pub eta: Vec<f64>,
    pub dcum: Vec<f64>,
    pub d: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub z3: Vec<f64>,
    pub states: Vec<FluidState>,
    /// Cumulative accepted inflow `Σ [z¹ + (1−z¹)z³] λ Δt`.
    pub accepted: Vec<f64>,
    pub lambda: Vec<f64>,
    pub warnings: Vec<StepWarning>,
}

fn check(quantity: &'static str, v: f64, index: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical { quantity, index })
    }
}

pub fn solve_finite_buffer(cfg: &SystemConfig, grid: &Grid) -> Result<FiniteTrajectory> {
    cfg.validate()?;
    cfg.require_bounded_densities()?;
    let (c, beta, r0) = (cfg.capacity, cfg.buffer_ratio, cfg.initial_fraction);
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
    let k0 = k.survival[0];

    let in_service0 = r0.min(c);
    let mut rho = vec![0.0; n];
    let mut eta = vec![0.0; n];
    let mut dcum = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut z1 = vec![1.0; n];
    let mut z2 = vec![0.0; n];
    let mut z3 = vec![1.0; n];
    let mut accepted = vec![0.0; n];
    let mut inflow = vec![0.0; n];

    rho[0] = in_service0;
    eta[0] = (r0 - c).clamp(0.0, beta);
    d[0] = check("d", in_service0 * k.init_density[0], 0)?;
    let s0 = classify_state(rho[0], eta[0], c, beta, tol);
    let boundary_share = |d: f64, lam: f64| {
        if lam > 0.0 {
            (d / lam).clamp(0.0, 1.0)
        } else {
            1.0
        }
    };
    match s0 {
        FluidState::S1 => {}
        FluidState::S2 if beta > 0.0 => {}
        FluidState::S2 => z3[0] = boundary_share(d[0], lambda[0]),
        FluidState::S3 => {
            z1[0] = 0.0;
            z2[0] = 1.0;
        }
        FluidState::S4 => {
            z1[0] = 0.0;
            z2[0] = 1.0;
            z3[0] = boundary_share(d[0], lambda[0]);
        }
    }

    for m in 1..n {
        let (mut carry, mut dep_rate, mut dep_cum) = (0.0, 0.0, 0.0);
        for j in 1..m {
            let a = inflow[j];
            carry += a * k.survival[m - j];
            dep_rate += a * k.density[m - j];
            dep_cum += a * k.cdf[m - j];
        }
        let carry = check("rho", in_service0 * k.init_survival[m] + carry * dt, m)?;
        let room = (c - carry).max(0.0);
        // inflow volume over the step that the freed room can absorb
        let capacity = room / k0;
        let arrivals = lambda[m] * dt;
        let eta_prev = eta[m - 1];
        let departed = (rho[m - 1] - carry).max(0.0);

        let (direct, promoted, admitted, eta_next);
        if eta_prev <= 0.0 && arrivals <= capacity {
            direct = arrivals;
            promoted = 0.0;
            admitted = arrivals;
            eta_next = 0.0;
            z1[m] = 1.0;
            z2[m] = 0.0;
            z3[m] = 1.0;
        } else {
            direct = 0.0;
            if eta_prev + arrivals <= capacity {
                promoted = eta_prev + arrivals;
                admitted = arrivals;
                eta_next = 0.0;
            } else {
                promoted = capacity;
                admitted = arrivals.min(beta - eta_prev + capacity).max(0.0);
                eta_next = (eta_prev + admitted - capacity).clamp(0.0, beta);
            }
            let step_departures = departed + promoted * (1.0 - k0);
            z1[m] = 0.0;
            z2[m] = if step_departures > 0.0 {
                (promoted / step_departures).min(1.0)
            } else if promoted > 0.0 {
                1.0
            } else {
                0.0
            };
            z3[m] = if arrivals > 0.0 {
                check("z3", admitted / arrivals, m)?.min(1.0)
            } else {
                1.0
            };
        }

        let a = (direct + promoted) / dt;
        inflow[m] = a;
        rho[m] = (carry + a * k0 * dt).clamp(0.0, c);
        eta[m] = eta_next;
        d[m] = check(
            "d",
            in_service0 * k.init_density[m] + (dep_rate + a * k.density[0]) * dt,
            m,
        )?;
        dcum[m] = check(
            "D",
            in_service0 * k.init_cdf[m] + (dep_cum + a * k.cdf[0]) * dt,
            m,
        )?;
        accepted[m] = accepted[m - 1] + admitted;
    }

    let states: Vec<FluidState> = (0..n)
        .map(|i| classify_state(rho[i], eta[i], c, beta, tol))
        .collect();
    let pinned: Vec<bool> = eta
        .iter()
        .map(|&e| beta > 0.0 && e >= beta * (1.0 - 1e-12))
        .collect();
    let warnings = transition_warnings(&states, &pinned, &d, &lambda);

    Ok(FiniteTrajectory {
        grid: *grid,
        capacity: c,
        buffer_ratio: beta,
        initial_fraction: r0,
        boundary_tol: tol,
        rho,
        eta,
        dcum,
        d,
        z1,
        z2,
        z3,
        states,
        accepted,
        lambda,
        warnings,
    })
}

/// Flags state jumps between non-adjacent states, and steps where the
/// buffer stays exactly full although departures outpace arrivals.
fn transition_warnings(
    states: &[FluidState],
    pinned: &[bool],
    d: &[f64],
    lambda: &[f64],
) -> Vec<StepWarning> {
    let n = states.len();
    let mut warnings = Vec::new();
    for i in 1..n {
        let (a, b) = (states[i - 1], states[i]);
        if (a as i32 - b as i32).abs() > 1 {
            warnings.push(StepWarning {
                index: i,
                message: format!("jump {a} -> {b} within one step; grid may be too coarse"),
            });
        }
        if pinned[i] && d[i] > lambda[i] && i + 1 < n && pinned[i + 1] {
            warnings.push(StepWarning {
                index: i,
                message: "departure rate exceeds arrival rate with a full buffer".into(),
            });
        }
    }
    warnings
}

impl FiniteTrajectory {
    /// Acceptance probability in the fluid limit: `z³` at the last grid
    /// point at or before `t`.
    pub fn acceptance_at(&self, t: f64) -> Result<f64> {
        match self.grid.index_at_or_before(t) {
            Some(i) => Ok(self.z3[i]),
            None => domain(format!("time {t} outside [0, {}]", self.grid.horizon())),
        }
    }

    /// Largest violation of `ρ + η + D = r₀ + accepted inflow`.
    pub fn mass_balance_error(&self) -> f64 {
        (0..self.rho.len())
            .map(|i| {
                (self.rho[i] + self.eta[i] + self.dcum[i]
                    - self.initial_fraction
                    - self.accepted[i])
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Run-length compressed state sequence.
    pub fn state_sequence(&self) -> Vec<FluidState> {
        let mut out: Vec<FluidState> = Vec::new();
        for &s in &self.states {
            if out.last() != Some(&s) {
                out.push(s);
            }
        }
        out
    }

    /// First grid index carrying `state`.
    pub fn first_in(&self, state: FluidState) -> Option<usize> {
        self.states.iter().position(|&s| s == state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RateFunction, ServiceDistribution};

    fn mm(rate: f64, c: f64, beta: f64, r0: f64, horizon: f64) -> SystemConfig {
        SystemConfig {
            rate: RateFunction::constant(rate, horizon).unwrap(),
            service: ServiceDistribution::exponential(1.0),
            initial_fraction: r0,
            initial_dist: ServiceDistribution::exponential(1.0),
            capacity: c,
            buffer_ratio: beta,
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_state(0.0, 0.0, 1.0, 0.5, 1e-6), FluidState::S1);
        assert_eq!(classify_state(1.0, 0.0, 1.0, 0.5, 1e-6), FluidState::S2);
        assert_eq!(classify_state(1.0, 0.25, 1.0, 0.5, 1e-6), FluidState::S3);
        assert_eq!(classify_state(1.0, 0.5, 1.0, 0.5, 1e-6), FluidState::S4);
        assert_eq!(classify_state(1.0, 0.0, 1.0, 0.0, 1e-6), FluidState::S2);
    }

    #[test]
    fn empty_system() {
        let g = Grid::new(2.0, 200).unwrap();
        let tr = solve_finite_buffer(&mm(0.0, 1.0, 0.5, 0.0, 2.0), &g).unwrap();
        assert!(tr
            .rho
            .iter()
            .chain(&tr.eta)
            .chain(&tr.dcum)
            .all(|&v| v == 0.0));
        assert!(tr.z3.iter().all(|&z| z == 1.0));
        assert_eq!(tr.acceptance_at(0.7).unwrap(), 1.0);
    }

    #[test]
    fn draining_full_system() {
        let g = Grid::new(3.0, 3000).unwrap();
        let tr = solve_finite_buffer(&mm(0.0, 1.0, 0.5, 1.5, 3.0), &g).unwrap();
        for (i, t) in g.points().enumerate() {
            let eta = (0.5 - t).max(0.0);
            let rho = if t <= 0.5 { 1.0 } else { (-(t - 0.5)).exp() };
            assert!((tr.eta[i] - eta).abs() < 5e-3, "eta at {t}: {}", tr.eta[i]);
            assert!((tr.rho[i] - rho).abs() < 5e-3, "rho at {t}: {}", tr.rho[i]);
        }
        assert_eq!(tr.acceptance_at(0.25).unwrap(), 1.0);
        assert_eq!(tr.states[0], FluidState::S4);
    }

    #[test]
    fn overfull_start_is_config_error() {
        let g = Grid::new(1.0, 10).unwrap();
        assert!(matches!(
            solve_finite_buffer(&mm(1.0, 1.0, 0.5, 1.6, 1.0), &g),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn complementarity_holds_exactly() {
        let g = Grid::new(4.0, 4000).unwrap();
        let tr = solve_finite_buffer(&mm(2.0, 1.0, 0.5, 0.0, 4.0), &g).unwrap();
        for i in 0..g.len() {
            assert!(tr.eta[i] * (tr.capacity - tr.rho[i]) <= 1e-12);
        }
    }

    #[test]
    fn non_adjacent_jumps_are_flagged() {
        use FluidState::*;
        let states = [S1, S2, S3, S2, S1, S3, S4, S2];
        let zeros = [0.0; 8];
        let w = transition_warnings(&states, &[false; 8], &zeros, &zeros);
        let idx: Vec<usize> = w.iter().map(|w| w.index).collect();
        assert_eq!(idx, vec![5, 7]);
    }

    #[test]
    fn persistent_overdraw_in_full_buffer_is_flagged() {
        use FluidState::*;
        let states = [S3, S4, S4, S4];
        let w = transition_warnings(&states, &[false, true, true, true], &[1.0; 4], &[0.5; 4]);
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|w| w.message.contains("departure rate")));
    }
}
