use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Uniform time grid `t_i = i * step`, `i = 0..=count`, with
/// `count * step = horizon`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    step: f64,
    count: usize,
}

impl Grid {
    pub fn new(horizon: f64, count: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return config(format!("grid horizon must be positive, got {horizon}"));
        }
        if count == 0 {
            return config("grid needs at least one step");
        }
        Ok(Grid {
            step: horizon / count as f64,
            count,
        })
    }

    /// Grid whose step is the largest value not above `dt` that divides
    /// the horizon evenly.
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return config(format!("grid step must be positive, got {dt}"));
        }
        let raw = horizon / dt;
        let rounded = raw.round();
        let count = if (raw - rounded).abs() < 1e-9 * raw.max(1.0) {
            rounded
        } else {
            raw.ceil()
        };
        Self::new(horizon, count.max(1.0) as usize)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of steps `N`; there are `N + 1` points.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.count + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.count as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.count).map(move |i| self.point(i))
    }

    /// Index of the last grid point at or before `t`.
    pub fn index_at_or_before(&self, t: f64) -> Option<usize> {
        let slack = 1e-9 * self.step;
        if !(t >= -slack && t <= self.horizon() + slack) {
            return None;
        }
        let i = ((t + slack) / self.step).floor() as usize;
        Some(i.min(self.count))
    }

    pub fn same_horizon(&self, other: &Grid) -> bool {
        (self.horizon() - other.horizon()).abs() <= 1e-9 * self.horizon().max(other.horizon())
    }
}
