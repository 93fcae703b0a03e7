//! Service-time (and initial residual-time) distributions.
//!
//! Lognormal parameters are the mean and standard deviation of the
//! underlying normal, so `lognormal(-0.5, 2)` has median `e^{-0.5}`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma, gamma_lr};

use crate::error::{config, domain, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ServiceDistribution {
    Exponential {
        rate: f64,
    },
    Lognormal {
        location: f64,
        scale: f64,
    },
    /// Weibull with `shape >= 1` (bounded density).
    Weibull {
        shape: f64,
        scale: f64,
    },
    /// `shift + Exp(rate)`. An infinite rate is a point mass at `shift`;
    /// it can be sampled but has no bounded density, so the fluid solvers
    /// reject it.
    DeterministicShiftedExponential {
        shift: f64,
        rate: f64,
    },
}

/// `(cdf, pdf, survival, hazard)` at one time point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub cdf: f64,
    pub pdf: f64,
    pub survival: f64,
    pub hazard: f64,
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

impl ServiceDistribution {
    pub fn exponential(rate: f64) -> Self {
        ServiceDistribution::Exponential { rate }
    }

    pub fn lognormal(location: f64, scale: f64) -> Self {
        ServiceDistribution::Lognormal { location, scale }
    }

    pub fn validate(&self) -> Result<()> {
        use ServiceDistribution::*;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                config(format!("{name} must be positive and finite, got {v}"))
            }
        };
        match *self {
            Exponential { rate } => positive("exponential rate", rate),
            Lognormal { location, scale } => {
                if !location.is_finite() {
                    return config("lognormal location must be finite");
                }
                positive("lognormal scale", scale)
            }
            Weibull { shape, scale } => {
                positive("weibull scale", scale)?;
                if !(shape.is_finite() && shape >= 1.0) {
                    return config(format!(
                        "weibull shape must be >= 1 for a bounded density, got {shape}"
                    ));
                }
                Ok(())
            }
            DeterministicShiftedExponential { shift, rate } => {
                if !(shift.is_finite() && shift >= 0.0) {
                    return config(format!("shift must be finite and nonnegative, got {shift}"));
                }
                if rate.is_nan() || rate <= 0.0 {
                    return config(format!(
                        "shifted-exponential rate must be positive, got {rate}"
                    ));
                }
                Ok(())
            }
        }
    }

    /// Whether the density is bounded, as the fluid solvers require.
    pub fn has_bounded_density(&self) -> bool {
        match *self {
            ServiceDistribution::DeterministicShiftedExponential { rate, .. } => rate.is_finite(),
            _ => true,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    pub fn survival(&self, t: f64) -> f64 {
        use ServiceDistribution::*;
        if t <= 0.0 {
            return 1.0;
        }
        match *self {
            Exponential { rate } => (-rate * t).exp(),
            Lognormal { location, scale } => std_normal_sf((t.ln() - location) / scale),
            Weibull { shape, scale } => (-(t / scale).powf(shape)).exp(),
            DeterministicShiftedExponential { shift, rate } => {
                if t < shift {
                    1.0
                } else if rate.is_infinite() {
                    0.0
                } else {
                    (-rate * (t - shift)).exp()
                }
            }
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        use ServiceDistribution::*;
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Exponential { rate } => rate * (-rate * t).exp(),
            Lognormal { location, scale } => {
                if t == 0.0 {
                    0.0
                } else {
                    std_normal_pdf((t.ln() - location) / scale) / (t * scale)
                }
            }
            Weibull { shape, scale } => {
                let x = t / scale;
                if shape == 1.0 {
                    (-x).exp() / scale
                } else {
                    shape / scale * x.powf(shape - 1.0) * (-x.powf(shape)).exp()
                }
            }
            DeterministicShiftedExponential { shift, rate } => {
                if t < shift || rate.is_infinite() {
                    0.0
                } else {
                    rate * (-rate * (t - shift)).exp()
                }
            }
        }
    }

    /// `(cdf, pdf, survival, hazard)`; the hazard is undefined once the
    /// support is exhausted.
    pub fn eval(&self, t: f64) -> Result<Evaluation> {
        if !(t >= 0.0) || !t.is_finite() {
            return domain(format!("distribution evaluated at invalid time {t}"));
        }
        let (cdf, survival) = self.cdf_survival(t);
        if survival <= 0.0 {
            return domain(format!("hazard undefined at t = {t}: support exhausted"));
        }
        let pdf = self.pdf(t);
        Ok(Evaluation {
            cdf,
            pdf,
            survival,
            hazard: pdf / survival,
        })
    }

    pub fn hazard(&self, t: f64) -> Result<f64> {
        self.eval(t).map(|e| e.hazard)
    }

    /// `(cdf, survival)` computed without cancellation in either tail.
    pub fn cdf_survival(&self, t: f64) -> (f64, f64) {
        match *self {
            ServiceDistribution::Lognormal { location, scale } if t > 0.0 => {
                let z = (t.ln() - location) / scale;
                (std_normal_cdf(z), std_normal_sf(z))
            }
            _ => {
                let s = self.survival(t);
                (1.0 - s, s)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        use ServiceDistribution::*;
        match *self {
            Exponential { rate } => 1.0 / rate,
            Lognormal { location, scale } => (location + 0.5 * scale * scale).exp(),
            Weibull { shape, scale } => scale * gamma(1.0 + 1.0 / shape),
            DeterministicShiftedExponential { shift, rate } => shift + 1.0 / rate,
        }
    }

    /// `∫₀ˣ (1 − G(s)) ds = E[min(V, x)]`.
    pub fn limited_mean(&self, x: f64) -> f64 {
        use ServiceDistribution::*;
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Exponential { rate } => -(-rate * x).exp_m1() / rate,
            Lognormal { location, scale } => {
                let z = (x.ln() - location) / scale;
                self.mean() * std_normal_cdf(z - scale) + x * std_normal_sf(z)
            }
            Weibull { shape, scale } => {
                let a = 1.0 + 1.0 / shape;
                let u = (x / scale).powf(shape);
                scale * gamma(a) * gamma_lr(a, u) + x * (-u).exp()
            }
            DeterministicShiftedExponential { shift, rate } => {
                if x <= shift {
                    x
                } else if rate.is_infinite() {
                    shift
                } else {
                    shift - (-rate * (x - shift)).exp_m1() / rate
                }
            }
        }
    }

    /// Supremum of the density over `[0, ∞)`.
    pub fn density_bound(&self) -> f64 {
        use ServiceDistribution::*;
        match *self {
            Exponential { rate } => rate,
            Lognormal { location, scale } => {
                let mode = (location - scale * scale).exp();
                self.pdf(mode)
            }
            Weibull { shape, scale } => {
                if shape == 1.0 {
                    1.0 / scale
                } else {
                    let mode = scale * ((shape - 1.0) / shape).powf(1.0 / shape);
                    self.pdf(mode)
                }
            }
            DeterministicShiftedExponential { rate, .. } => rate,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use ServiceDistribution::*;
        match *self {
            Exponential { rate } => Exp::new(rate).expect("validated rate").sample(rng),
            Lognormal { location, scale } => LogNormal::new(location, scale)
                .expect("validated scale")
                .sample(rng),
            Weibull { shape, scale } => rand_distr::Weibull::new(scale, shape)
                .expect("validated parameters")
                .sample(rng),
            DeterministicShiftedExponential { shift, rate } => {
                if rate.is_infinite() {
                    shift
                } else {
                    shift + Exp::new(rate).expect("validated rate").sample(rng)
                }
            }
        }
    }
}
