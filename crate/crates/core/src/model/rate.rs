//! Arrival-rate trajectories in fluid scale.
//!
//! The n-th stochastic system receives arrivals at rate `n * λ(t)`; the
//! functions here describe `λ` itself on a finite horizon `[0, T]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

/// Closed-form rate families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateKind {
    /// `λ(t) = value`.
    Constant { value: f64 },
    /// `λ(t) = scale * (base + sin(2πt / period + phase))`.
    PeriodicSinusoid {
        scale: f64,
        #[serde(default = "one")]
        base: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `λ(t) = coef * t * (span - t)`; `span` defaults to the horizon.
    EpisodicParabola {
        coef: f64,
        #[serde(default)]
        span: Option<f64>,
    },
    /// Linear interpolation between `(time, value)` knots, constant beyond
    /// the first and last knot.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
    /// Right-continuous step function: `values[k]` on `[times[k], times[k+1])`.
    Table { times: Vec<f64>, values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

/// The `[rate]` section of a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    #[serde(flatten)]
    pub kind: RateKind,
    /// Upper bound on `λ` over the horizon. Computed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_bound: Option<f64>,
}

/// Number of sample points used to estimate the rate bound.
const BOUND_SAMPLES: usize = 10_000;
/// Relative inflation applied to a sampled bound.
const BOUND_INFLATION: f64 = 1.01;

/// An arrival-rate function on `[0, horizon]` with a verified upper bound.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFunction {
    kind: RateKind,
    horizon: f64,
    rate_bound: f64,
}

impl RateFunction {
    pub fn new(spec: RateSpec, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return config(format!(
                "horizon must be positive and finite, got {horizon}"
            ));
        }
        let RateSpec { kind, rate_bound } = spec;
        validate_kind(&kind, horizon)?;
        let mut rate = RateFunction {
            kind,
            horizon,
            rate_bound: f64::INFINITY,
        };
        let sampled = rate.sampled_max();
        rate.rate_bound = match rate_bound {
            Some(b) => {
                if !(b.is_finite() && b >= 0.0) {
                    return config(format!(
                        "rate_bound must be finite and nonnegative, got {b}"
                    ));
                }
                if b < sampled {
                    return config(format!(
                        "rate_bound {b} is below the sampled maximum {sampled} of the rate"
                    ));
                }
                b
            }
            None => sampled * BOUND_INFLATION,
        };
        Ok(rate)
    }

    pub fn constant(value: f64, horizon: f64) -> Result<Self> {
        Self::new(
            RateSpec {
                kind: RateKind::Constant { value },
                rate_bound: None,
            },
            horizon,
        )
    }

    pub fn kind(&self) -> &RateKind {
        &self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn rate_bound(&self) -> f64 {
        self.rate_bound
    }

    pub fn spec(&self) -> RateSpec {
        RateSpec {
            kind: self.kind.clone(),
            rate_bound: Some(self.rate_bound),
        }
    }

    /// `λ(t)`, failing outside `[0, T]`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
            return domain(format!("time {t} outside [0, {}]", self.horizon));
        }
        Ok(self.at(t))
    }

    /// `λ(t)` without the horizon check.
    pub fn at(&self, t: f64) -> f64 {
        let v = match &self.kind {
            RateKind::Constant { value } => *value,
            RateKind::PeriodicSinusoid {
                scale,
                base,
                period,
                phase,
            } => scale * (base + (2.0 * PI * t / period + phase).sin()),
            RateKind::EpisodicParabola { coef, span } => {
                let span = span.unwrap_or(self.horizon);
                coef * t * (span - t)
            }
            RateKind::PiecewiseLinear { knots } => piecewise_linear(knots, t),
            RateKind::Table { times, values } => {
                let k = times.partition_point(|&s| s <= t).saturating_sub(1);
                values[k]
            }
        };
        v.max(0.0)
    }

    /// `Λ(t) = ∫₀ᵗ λ(u) du` in closed form.
    pub fn cumulative(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon);
        match &self.kind {
            RateKind::Constant { value } => value * t,
            RateKind::PeriodicSinusoid {
                scale,
                base,
                period,
                phase,
            } => {
                let w = 2.0 * PI / period;
                scale * (base * t + ((*phase).cos() - (w * t + phase).cos()) / w)
            }
            RateKind::EpisodicParabola { coef, span } => {
                let span = span.unwrap_or(self.horizon);
                coef * (span * t * t / 2.0 - t * t * t / 3.0)
            }
            RateKind::PiecewiseLinear { knots } => {
                let mut total = 0.0;
                let (t0, v0) = (knots[0][0], knots[0][1]);
                if t0 > 0.0 {
                    total += v0 * t0.min(t);
                }
                for w in knots.windows(2) {
                    let (a, b) = (w[0][0].max(0.0), w[1][0]);
                    if b <= 0.0 || a >= t {
                        continue;
                    }
                    let hi = b.min(t);
                    let fa = piecewise_linear(knots, a);
                    let fh = piecewise_linear(knots, hi);
                    total += 0.5 * (fa + fh) * (hi - a);
                }
                let last = knots[knots.len() - 1];
                if t > last[0] {
                    total += last[1] * (t - last[0].max(0.0));
                }
                total
            }
            RateKind::Table { times, values } => {
                let mut total = 0.0;
                for (k, &v) in values.iter().enumerate() {
                    let a = times[k];
                    let b = times.get(k + 1).copied().unwrap_or(f64::INFINITY);
                    if a >= t {
                        break;
                    }
                    total += v * (b.min(t) - a);
                }
                total
            }
        }
    }

    fn sampled_max(&self) -> f64 {
        let mut max = (0..=BOUND_SAMPLES)
            .map(|i| self.at(self.horizon * i as f64 / BOUND_SAMPLES as f64))
            .fold(0.0_f64, f64::max);
        // exact maxima that a uniform scan can straddle
        match &self.kind {
            RateKind::PiecewiseLinear { knots } => {
                for k in knots.iter().filter(|k| k[0] >= 0.0 && k[0] <= self.horizon) {
                    max = max.max(k[1]);
                }
            }
            RateKind::Table { values, .. } => {
                max = max.max(values.iter().copied().fold(0.0, f64::max));
            }
            _ => {}
        }
        max
    }
}

fn piecewise_linear(knots: &[[f64; 2]], t: f64) -> f64 {
    let k = knots.partition_point(|p| p[0] <= t);
    if k == 0 {
        return knots[0][1];
    }
    if k == knots.len() {
        return knots[k - 1][1];
    }
    let [t0, v0] = knots[k - 1];
    let [t1, v1] = knots[k];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

fn finite_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        config(format!("{name} must be finite and nonnegative, got {v}"))
    }
}

fn validate_kind(kind: &RateKind, horizon: f64) -> Result<()> {
    match kind {
        RateKind::Constant { value } => finite_nonneg("rate value", *value),
        RateKind::PeriodicSinusoid {
            scale,
            base,
            period,
            phase,
        } => {
            finite_nonneg("scale", *scale)?;
            if !(period.is_finite() && *period > 0.0) {
                return config(format!("period must be positive, got {period}"));
            }
            if !phase.is_finite() {
                return config("phase must be finite");
            }
            if !(base.is_finite() && *base >= 1.0) {
                return config(format!(
                    "base must be at least 1 for a nonnegative rate, got {base}"
                ));
            }
            Ok(())
        }
        RateKind::EpisodicParabola { coef, span } => {
            finite_nonneg("coef", *coef)?;
            if let Some(s) = span {
                if !(s.is_finite() && *s >= horizon) {
                    return config(format!("span {s} must cover the horizon {horizon}"));
                }
            }
            Ok(())
        }
        RateKind::PiecewiseLinear { knots } => {
            if knots.is_empty() {
                return config("piecewise-linear rate needs at least one knot");
            }
            for w in knots.windows(2) {
                if !(w[1][0] > w[0][0]) {
                    return config("piecewise-linear knot times must be strictly increasing");
                }
            }
            for k in knots {
                if !k[0].is_finite() {
                    return config("knot times must be finite");
                }
                finite_nonneg("knot value", k[1])?;
            }
            Ok(())
        }
        RateKind::Table { times, values } => {
            if times.is_empty() || times.len() != values.len() {
                return config("table rate needs matching, nonempty times and values");
            }
            if times[0] != 0.0 {
                return config("table rate must start at time 0");
            }
            if times.windows(2).any(|w| !(w[1] > w[0])) {
                return config("table times must be strictly increasing");
            }
            values
                .iter()
                .try_for_each(|&v| finite_nonneg("table value", v))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic(base: f64, horizon: f64) -> RateFunction {
        let spec = RateSpec {
            kind: RateKind::PeriodicSinusoid {
                scale: 2.0 / 3.0,
                base,
                period: 10.0,
                phase: 0.0,
            },
            rate_bound: None,
        };
        RateFunction::new(spec, horizon).unwrap()
    }

    #[test]
    fn periodic_quarter_period() {
        let r = periodic(1.0, 10.0);
        assert!((r.eval(2.5).unwrap() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn episodic_vanishes_at_origin() {
        let spec = RateSpec {
            kind: RateKind::EpisodicParabola {
                coef: 0.005,
                span: None,
            },
            rate_bound: None,
        };
        let r = RateFunction::new(spec, 10.0).unwrap();
        assert_eq!(r.eval(0.0).unwrap(), 0.0);
        assert!((r.eval(5.0).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn constant_is_identity() {
        let r = RateFunction::constant(2.0, 3.0).unwrap();
        for t in [0.0, 0.7, 3.0] {
            assert_eq!(r.eval(t).unwrap(), 2.0);
        }
    }

    #[test]
    fn out_of_horizon_is_domain_error() {
        let r = RateFunction::constant(2.0, 3.0).unwrap();
        assert!(r.eval(-0.1).is_err());
        assert!(r.eval(3.5).is_err());
    }

    #[test]
    fn bound_dominates_dense_scan() {
        for r in [periodic(1.0, 10.0), periodic(1.5, 10.0)] {
            let n = 100_000;
            for i in 0..=n {
                let t = 10.0 * i as f64 / n as f64;
                assert!(r.at(t) <= r.rate_bound());
            }
        }
    }

    #[test]
    fn cumulative_matches_midpoint_sum() {
        let rates = vec![
            periodic(1.5, 10.0),
            RateFunction::new(
                RateSpec {
                    kind: RateKind::EpisodicParabola {
                        coef: 0.005,
                        span: None,
                    },
                    rate_bound: None,
                },
                10.0,
            )
            .unwrap(),
            RateFunction::new(
                RateSpec {
                    kind: RateKind::PiecewiseLinear {
                        knots: vec![[1.0, 0.5], [3.0, 2.0], [4.0, 1.0]],
                    },
                    rate_bound: None,
                },
                6.0,
            )
            .unwrap(),
            RateFunction::new(
                RateSpec {
                    kind: RateKind::Table {
                        times: vec![0.0, 1.0, 2.5],
                        values: vec![1.0, 3.0, 0.5],
                    },
                    rate_bound: None,
                },
                4.0,
            )
            .unwrap(),
        ];
        for r in rates {
            let t_end = r.horizon() * 0.9;
            let m = 200_000;
            let h = t_end / m as f64;
            let sum: f64 = (0..m).map(|i| r.at((i as f64 + 0.5) * h) * h).sum();
            assert!((sum - r.cumulative(t_end)).abs() < 1e-4, "{:?}", r.kind());
        }
    }

    #[test]
    fn periodic_integrates_over_full_period() {
        let r = periodic(1.0, 10.0);
        assert!((r.cumulative(10.0) - 20.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_sinusoid() {
        let spec = RateSpec {
            kind: RateKind::PeriodicSinusoid {
                scale: 1.0,
                base: 0.5,
                period: 10.0,
                phase: 0.0,
            },
            rate_bound: None,
        };
        assert!(RateFunction::new(spec, 10.0).is_err());
    }

    #[test]
    fn rejects_supplied_bound_below_maximum() {
        let spec = RateSpec {
            kind: RateKind::Constant { value: 2.0 },
            rate_bound: Some(1.0),
        };
        assert!(RateFunction::new(spec, 1.0).is_err());
    }

    #[test]
    fn parses_from_toml() {
        let spec: RateSpec =
            toml::from_str("kind = \"periodic-sinusoid\"\nscale = 0.5\nperiod = 4.0\n").unwrap();
        assert_eq!(
            spec.kind,
            RateKind::PeriodicSinusoid {
                scale: 0.5,
                base: 1.0,
                period: 4.0,
                phase: 0.0
            }
        );
        let spec: RateSpec =
            toml::from_str("kind = \"constant\"\nvalue = 2.0\nrate_bound = 3.0\n").unwrap();
        assert_eq!(spec.rate_bound, Some(3.0));
    }
}
