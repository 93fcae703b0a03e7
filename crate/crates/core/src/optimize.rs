//! Capacity planning against a transient blocking target.
//!
//! Both problems use the fact that the worst-case acceptance over the
//! horizon is nondecreasing in the server level `c` and, for fixed `c`, in
//! the buffer ratio `β`. The constraint `inf_t w ≥ 1 − α` is therefore
//! met on an interval, and bisection finds its left end.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::boundary_tolerance;
use crate::model::{Grid, SystemConfig};
use crate::validate::ACTIVE_RATE;
use crate::vie_finite::{solve_finite_buffer, FiniteTrajectory};
use crate::vie_zero::{solve_zero_buffer, ZeroTrajectory};

/// Slack allowed when testing `inf w ≥ 1 − α`.
pub const ACCEPTANCE_TOL: f64 = 1e-9;

/// Trajectories that carry an acceptance function.
pub trait AcceptanceProfile {
    fn acceptance(&self) -> &[f64];
    fn lambda(&self) -> &[f64];
}

impl AcceptanceProfile for ZeroTrajectory {
    fn acceptance(&self) -> &[f64] {
        &self.w
    }
    fn lambda(&self) -> &[f64] {
        &self.lambda
    }
}

impl AcceptanceProfile for FiniteTrajectory {
    fn acceptance(&self) -> &[f64] {
        &self.z3
    }
    fn lambda(&self) -> &[f64] {
        &self.lambda
    }
}

impl AcceptanceProfile for crate::validate::FluidReference {
    fn acceptance(&self) -> &[f64] {
        crate::validate::FluidReference::acceptance(self)
    }
    fn lambda(&self) -> &[f64] {
        crate::validate::FluidReference::lambda(self)
    }
}

/// Minimum acceptance over grid points with `λ > 1e-6`; one if there are none.
pub fn min_acceptance<T: AcceptanceProfile + ?Sized>(traj: &T) -> f64 {
    traj.acceptance()
        .iter()
        .zip(traj.lambda())
        .filter(|(_, &l)| l > ACTIVE_RATE)
        .map(|(&a, _)| a)
        .fold(1.0, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub capacity: f64,
    pub buffer_ratio: f64,
    pub inf_acceptance: f64,
    pub feasible: bool,
}

/// Result of a grid-point search over `c` in the joint problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCandidate {
    pub capacity: f64,
    /// Smallest feasible buffer ratio, if any within the bracket.
    pub buffer_ratio: Option<f64>,
    pub objective: Option<f64>,
    /// Acceptance at the returned `β`, or at the top of the bracket when infeasible.
    pub inf_acceptance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub capacity: f64,
    pub buffer_ratio: f64,
    pub acceptance: f64,
    pub monotonicity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Revalidation {
    /// Re-solving at the plan reproduces the recorded acceptance exactly.
    pub reproduces: bool,
    /// The constraint holds at the plan.
    pub feasible: bool,
    /// Whether one tolerance step below the plan is infeasible; `None` at
    /// the lower end of the bracket.
    pub below_infeasible: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityPlan {
    pub alpha: f64,
    pub weight: f64,
    pub c_star: f64,
    pub beta_star: f64,
    pub achieved_inf_acceptance: f64,
    pub objective: f64,
    pub tolerances: Tolerances,
    pub trace: Vec<TraceEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<GridCandidate>,
    pub revalidation: Revalidation,
    pub warnings: Vec<String>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) && alpha != 1.0 {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Worst-case acceptance of the zero-buffer system with capacity `c`. A
/// start above capacity cannot be served and counts as acceptance zero.
fn zero_inf_acceptance(cfg: &SystemConfig, grid: &Grid, c: f64) -> Result<f64> {
    if cfg.initial_fraction > c {
        return Ok(0.0);
    }
    Ok(min_acceptance(&solve_zero_buffer(
        &cfg.with_thresholds(c, 0.0),
        grid,
    )?))
}

fn finite_inf_acceptance(cfg: &SystemConfig, grid: &Grid, c: f64, beta: f64) -> Result<f64> {
    if cfg.initial_fraction > c + beta {
        return Ok(0.0);
    }
    Ok(min_acceptance(&solve_finite_buffer(
        &cfg.with_thresholds(c, beta),
        grid,
    )?))
}

/// Flags decreases of acceptance along increasing `key` beyond `tol`.
fn audit<F: Fn(&TraceEntry) -> f64>(
    trace: &[TraceEntry],
    key: F,
    tol: f64,
    label: &str,
) -> Vec<String> {
    let mut sorted: Vec<&TraceEntry> = trace.iter().collect();
    sorted.sort_by(|a, b| key(a).total_cmp(&key(b)));
    sorted
        .windows(2)
        .filter(|p| p[1].inf_acceptance < p[0].inf_acceptance - tol)
        .map(|p| {
            let msg = format!(
                "acceptance decreases in {label}: {:.6} at {} vs {:.6} at {}",
                p[1].inf_acceptance,
                key(p[1]),
                p[0].inf_acceptance,
                key(p[0])
            );
            warn!("{msg}");
            msg
        })
        .collect()
}

/// Smallest point of `[lo, hi]` (to within `tol`) where `eval` meets
/// `target`, assuming `eval` nondecreasing. `hi` must be feasible.
fn bisect<F>(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    target: f64,
    trace: &mut Vec<(f64, f64)>,
    eval: F,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut hi_value = eval(hi)?;
    trace.push((hi, hi_value));
    let lo_value = eval(lo)?;
    trace.push((lo, lo_value));
    if lo_value >= target - ACCEPTANCE_TOL {
        return Ok((lo, lo_value));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let v = eval(mid)?;
        trace.push((mid, v));
        if v >= target - ACCEPTANCE_TOL {
            hi = mid;
            hi_value = v;
        } else {
            lo = mid;
        }
    }
    Ok((hi, hi_value))
}

/// Smallest server level in `bracket` whose zero-buffer fluid model keeps
/// acceptance at or above `1 − alpha` on the whole horizon.
pub fn optimize_staffing_zero(
    cfg: &SystemConfig,
    alpha: f64,
    bracket: (f64, f64),
    tol_c: f64,
    grid: &Grid,
) -> Result<CapacityPlan> {
    check_alpha(alpha)?;
    let (c_lo, c_hi) = bracket;
    if !(c_lo > 0.0 && c_lo < c_hi && c_hi.is_finite()) {
        return Err(Error::Bracket(format!(
            "need 0 < c_lo < c_hi, got ({c_lo}, {c_hi})"
        )));
    }
    if !(tol_c > 0.0) {
        return Err(Error::Config(format!(
            "tol_c must be positive, got {tol_c}"
        )));
    }
    let target = 1.0 - alpha;
    let eval = |c: f64| zero_inf_acceptance(cfg, grid, c);

    let top = eval(c_hi)?;
    if top < target - ACCEPTANCE_TOL {
        return Err(Error::Bracket(format!(
            "acceptance {top:.6} at c_hi = {c_hi} is below the target {target:.6}"
        )));
    }
    let mut raw = Vec::new();
    let (c_star, achieved) = bisect(c_lo, c_hi, tol_c, target, &mut raw, eval)?;
    let trace: Vec<TraceEntry> = raw
        .into_iter()
        .map(|(c, a)| TraceEntry {
            capacity: c,
            buffer_ratio: 0.0,
            inf_acceptance: a,
            feasible: a >= target - ACCEPTANCE_TOL,
        })
        .collect();

    let mono_tol = 2.0 * boundary_tolerance(grid, cfg.rate.rate_bound());
    let warnings = audit(&trace, |e| e.capacity, mono_tol, "c");
    let again = eval(c_star)?;
    let below_infeasible = if c_star - tol_c >= c_lo {
        Some(eval(c_star - tol_c)? < target - ACCEPTANCE_TOL)
    } else {
        None
    };
    Ok(CapacityPlan {
        alpha,
        weight: 1.0,
        c_star,
        beta_star: 0.0,
        achieved_inf_acceptance: achieved,
        objective: c_star,
        tolerances: Tolerances {
            capacity: tol_c,
            buffer_ratio: 0.0,
            acceptance: ACCEPTANCE_TOL,
            monotonicity: mono_tol,
        },
        trace,
        candidates: Vec::new(),
        revalidation: Revalidation {
            reproduces: again == achieved,
            feasible: again >= target - ACCEPTANCE_TOL,
            below_infeasible,
        },
        warnings,
    })
}

/// Options for the joint server and buffer problem.
#[derive(Clone, Debug)]
pub struct JointOptions {
    pub tol_beta: f64,
    /// Upper end of the `β` bracket as a multiple of `c`.
    pub beta_factor: f64,
}

impl Default for JointOptions {
    fn default() -> Self {
        JointOptions {
            tol_beta: 1e-3,
            beta_factor: 10.0,
        }
    }
}

/// Grid search over `c` with bisection over `β`, minimising
/// `v·c + (1 − v)·β_c` subject to `inf_t z³ ≥ 1 − alpha`.
pub fn optimize_joint(
    cfg: &SystemConfig,
    alpha: f64,
    weight: f64,
    c_grid: &[f64],
    opts: &JointOptions,
    grid: &Grid,
) -> Result<CapacityPlan> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::Config(format!(
            "weight must lie in [0, 1], got {weight}"
        )));
    }
    if c_grid.is_empty()
        || c_grid.iter().any(|&c| !(c > 0.0))
        || c_grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::Config(
            "capacity grid must be positive and strictly increasing".into(),
        ));
    }
    if !(opts.tol_beta > 0.0 && opts.beta_factor > 0.0) {
        return Err(Error::Config(
            "buffer tolerance and bracket factor must be positive".into(),
        ));
    }
    let target = 1.0 - alpha;

    let per_c: Vec<(GridCandidate, Vec<TraceEntry>)> = c_grid
        .par_iter()
        .map(|&c| -> Result<_> {
            let beta_hi = opts.beta_factor * c;
            let eval = |b: f64| finite_inf_acceptance(cfg, grid, c, b);
            let top = eval(beta_hi)?;
            if top < target - ACCEPTANCE_TOL {
                let entry = TraceEntry {
                    capacity: c,
                    buffer_ratio: beta_hi,
                    inf_acceptance: top,
                    feasible: false,
                };
                let cand = GridCandidate {
                    capacity: c,
                    buffer_ratio: None,
                    objective: None,
                    inf_acceptance: top,
                };
                return Ok((cand, vec![entry]));
            }
            let mut raw = Vec::new();
            let (beta, achieved) = bisect(0.0, beta_hi, opts.tol_beta, target, &mut raw, eval)?;
            let trace = raw
                .into_iter()
                .map(|(b, a)| TraceEntry {
                    capacity: c,
                    buffer_ratio: b,
                    inf_acceptance: a,
                    feasible: a >= target - ACCEPTANCE_TOL,
                })
                .collect();
            let cand = GridCandidate {
                capacity: c,
                buffer_ratio: Some(beta),
                objective: Some(weight * c + (1.0 - weight) * beta),
                inf_acceptance: achieved,
            };
            Ok((cand, trace))
        })
        .collect::<Result<_>>()?;

    let mono_tol = 2.0 * boundary_tolerance(grid, cfg.rate.rate_bound());
    let mut warnings = Vec::new();
    let mut trace = Vec::new();
    let mut candidates = Vec::with_capacity(per_c.len());
    for (cand, t) in per_c {
        warnings.extend(audit(
            &t,
            |e| e.buffer_ratio,
            mono_tol,
            &format!("beta at c = {}", cand.capacity),
        ));
        trace.extend(t);
        candidates.push(cand);
    }

    let best = candidates.iter().filter(|c| c.objective.is_some()).fold(
        None::<&GridCandidate>,
        |best, c| match best {
            Some(b) if b.objective <= c.objective => Some(b),
            _ => Some(c),
        },
    );
    let Some(best) = best.cloned() else {
        let max = candidates
            .iter()
            .map(|c| c.inf_acceptance)
            .fold(0.0, f64::max);
        return Err(Error::Infeasible(format!(
            "no grid capacity meets acceptance {target:.6}; best achieved {max:.6}"
        )));
    };
    let beta = best.buffer_ratio.expect("feasible candidate");
    let again = finite_inf_acceptance(cfg, grid, best.capacity, beta)?;
    let below_infeasible = if beta - opts.tol_beta >= 0.0 {
        Some(
            finite_inf_acceptance(cfg, grid, best.capacity, beta - opts.tol_beta)?
                < target - ACCEPTANCE_TOL,
        )
    } else {
        None
    };
    Ok(CapacityPlan {
        alpha,
        weight,
        c_star: best.capacity,
        beta_star: beta,
        achieved_inf_acceptance: best.inf_acceptance,
        objective: best.objective.expect("feasible candidate"),
        tolerances: Tolerances {
            capacity: 0.0,
            buffer_ratio: opts.tol_beta,
            acceptance: ACCEPTANCE_TOL,
            monotonicity: mono_tol,
        },
        trace,
        candidates,
        revalidation: Revalidation {
            reproduces: again == best.inf_acceptance,
            feasible: again >= target - ACCEPTANCE_TOL,
            below_infeasible,
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RateFunction, ServiceDistribution};

    fn mm(rate: f64, c: f64, horizon: f64) -> SystemConfig {
        SystemConfig {
            rate: RateFunction::constant(rate, horizon).unwrap(),
            service: ServiceDistribution::exponential(1.0),
            initial_fraction: 0.0,
            initial_dist: ServiceDistribution::exponential(1.0),
            capacity: c,
            buffer_ratio: 0.0,
        }
    }

    #[test]
    fn null_rate_has_unit_min_acceptance() {
        let cfg = mm(0.0, 1.0, 2.0);
        let grid = Grid::new(2.0, 200).unwrap();
        assert_eq!(
            min_acceptance(&solve_zero_buffer(&cfg, &grid).unwrap()),
            1.0
        );
    }

    #[test]
    fn saturated_benchmark_min_acceptance() {
        let cfg = mm(2.0, 1.0, 3.0);
        let grid = Grid::new(3.0, 3000).unwrap();
        let m = min_acceptance(&solve_zero_buffer(&cfg, &grid).unwrap());
        assert!((m - 0.5).abs() < 5e-3, "{m}");
    }

    #[test]
    fn unsaturated_benchmark_accepts_everything() {
        let cfg = mm(2.0, 2.0, 3.0);
        let grid = Grid::new(3.0, 3000).unwrap();
        assert_eq!(
            min_acceptance(&solve_zero_buffer(&cfg, &grid).unwrap()),
            1.0
        );
    }

    #[test]
    fn vacuous_constraint_returns_lower_end() {
        let cfg = mm(2.0, 1.0, 5.0);
        let grid = Grid::new(5.0, 500).unwrap();
        let plan = optimize_staffing_zero(&cfg, 1.0, (0.1, 3.0), 1e-3, &grid).unwrap();
        assert_eq!(plan.c_star, 0.1);
    }

    #[test]
    fn light_load_never_blocks() {
        let cfg = mm(0.05, 1.0, 5.0);
        let grid = Grid::new(5.0, 500).unwrap();
        let plan = optimize_staffing_zero(&cfg, 0.1, (0.5, 3.0), 1e-3, &grid).unwrap();
        assert_eq!(plan.c_star, 0.5);
        assert_eq!(plan.achieved_inf_acceptance, 1.0);
    }

    #[test]
    fn bad_bracket_is_reported() {
        let cfg = mm(2.0, 1.0, 10.0);
        let grid = Grid::new(10.0, 1000).unwrap();
        let err = optimize_staffing_zero(&cfg, 0.1, (0.1, 1.0), 1e-3, &grid).unwrap_err();
        assert!(matches!(err, Error::Bracket(_)));
        let err = optimize_staffing_zero(&cfg, 0.1, (2.0, 1.0), 1e-3, &grid).unwrap_err();
        assert!(matches!(err, Error::Bracket(_)));
    }

    #[test]
    fn joint_with_half_target_needs_no_buffer() {
        let cfg = mm(2.0, 1.0, 10.0);
        let grid = Grid::new(10.0, 2000).unwrap();
        let plan = optimize_joint(&cfg, 0.5, 0.5, &[1.0], &JointOptions::default(), &grid).unwrap();
        assert_eq!(plan.beta_star, 0.0);
        assert!((plan.objective - 0.5).abs() < 1e-12);
    }

    #[test]
    fn joint_infeasible_lists_best_acceptance() {
        let cfg = mm(2.0, 1.0, 10.0);
        let grid = Grid::new(10.0, 1000).unwrap();
        let opts = JointOptions {
            tol_beta: 1e-2,
            beta_factor: 0.5,
        };
        let err = optimize_joint(&cfg, 0.01, 1.0, &[0.5, 1.0], &opts, &grid).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "{err}");
    }

    #[test]
    fn joint_objective_is_minimal_over_candidates() {
        let cfg = mm(2.0, 1.0, 10.0);
        let grid = Grid::new(10.0, 1000).unwrap();
        let opts = JointOptions {
            tol_beta: 1e-2,
            beta_factor: 10.0,
        };
        let plan = optimize_joint(&cfg, 0.2, 0.5, &[1.0, 1.4, 1.8], &opts, &grid).unwrap();
        for c in &plan.candidates {
            if let Some(o) = c.objective {
                assert!(plan.objective <= o);
            }
        }
    }

    #[test]
    fn audit_flags_decrease() {
        let t = |c: f64, a: f64| TraceEntry {
            capacity: c,
            buffer_ratio: 0.0,
            inf_acceptance: a,
            feasible: true,
        };
        let trace = vec![t(1.0, 0.5), t(2.0, 0.4), t(1.5, 0.6)];
        assert_eq!(audit(&trace, |e| e.capacity, 1e-3, "c").len(), 1);
    }
}
