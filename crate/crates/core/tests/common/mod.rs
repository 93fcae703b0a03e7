#![allow(dead_code)]

use fluidloss::model::{RateKind, RateSpec};
use fluidloss::{RateFunction, ServiceDistribution, SystemConfig};

pub fn config(
    rate: RateFunction,
    service: ServiceDistribution,
    c: f64,
    beta: f64,
    r0: f64,
) -> SystemConfig {
    SystemConfig {
        rate,
        initial_dist: service.clone(),
        service,
        initial_fraction: r0,
        capacity: c,
        buffer_ratio: beta,
    }
}

pub fn constant(value: f64, horizon: f64) -> RateFunction {
    RateFunction::constant(value, horizon).unwrap()
}

pub fn sinusoid(base: f64, horizon: f64) -> RateFunction {
    let kind = RateKind::PeriodicSinusoid {
        scale: 2.0 / 3.0,
        base,
        period: 10.0,
        phase: 0.0,
    };
    RateFunction::new(
        RateSpec {
            kind,
            rate_bound: None,
        },
        horizon,
    )
    .unwrap()
}

pub fn parabola(coef: f64, horizon: f64) -> RateFunction {
    let kind = RateKind::EpisodicParabola { coef, span: None };
    RateFunction::new(
        RateSpec {
            kind,
            rate_bound: None,
        },
        horizon,
    )
    .unwrap()
}

/// Constant-rate M/M benchmark.
pub fn mm(lambda: f64, c: f64, beta: f64, horizon: f64) -> SystemConfig {
    config(
        constant(lambda, horizon),
        ServiceDistribution::exponential(1.0),
        c,
        beta,
        0.0,
    )
}

pub fn periodic_zero() -> SystemConfig {
    config(
        sinusoid(1.0, 10.0),
        ServiceDistribution::lognormal(-0.5, 2.0),
        1.0,
        0.0,
        0.0,
    )
}

pub fn periodic_finite() -> SystemConfig {
    config(
        sinusoid(1.5, 10.0),
        ServiceDistribution::lognormal(-0.5, 1.2),
        1.0,
        0.5,
        0.0,
    )
}

/// Named configs exercising every rate and service kind, with and
/// without an initial population.
pub fn benchmark_suite() -> Vec<(&'static str, SystemConfig)> {
    let weibull = ServiceDistribution::Weibull {
        shape: 2.0,
        scale: 1.0,
    };
    let shifted = ServiceDistribution::DeterministicShiftedExponential {
        shift: 0.3,
        rate: 2.0,
    };
    let mut with_initial = mm(2.0, 1.0, 0.5, 3.0);
    with_initial.initial_fraction = 0.8;
    with_initial.initial_dist = ServiceDistribution::exponential(0.5);
    vec![
        ("mm-zero", mm(2.0, 1.0, 0.0, 3.0)),
        ("mm-finite", mm(2.0, 1.0, 0.5, 3.0)),
        ("mm-initial", with_initial),
        ("periodic-zero", periodic_zero()),
        ("periodic-finite", periodic_finite()),
        (
            "episodic",
            config(
                parabola(0.12, 10.0),
                ServiceDistribution::lognormal(-0.5, 1.2),
                1.0,
                0.3,
                0.2,
            ),
        ),
        (
            "weibull",
            config(constant(1.6, 5.0), weibull, 1.0, 0.4, 0.0),
        ),
        (
            "shifted",
            config(sinusoid(1.2, 10.0), shifted, 0.8, 0.2, 0.5),
        ),
    ]
}
