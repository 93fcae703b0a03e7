use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{config, Result};
use crate::model::RateFunction;

/// Arrival times on `[0, T]` of a Poisson process with intensity
/// `scale * λ(t)`, by thinning a homogeneous process at
/// `scale * rate_bound`.
pub fn generate_nhpp<R: Rng + ?Sized>(
    rate: &RateFunction,
    scale: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let bound = rate.rate_bound();
    if bound == 0.0 || scale == 0 {
        if rate.at(0.0) > 0.0 {
            return config("rate bound is zero but the rate is not");
        }
        return Ok(Vec::new());
    }
    let horizon = rate.horizon();
    let gaps = Exp::new(scale as f64 * bound).map_err(|e| crate::Error::Config(e.to_string()))?;
    let mut times =
        Vec::with_capacity((scale as f64 * rate.cumulative(horizon) * 1.1) as usize + 16);
    let mut t = 0.0;
    loop {
        t += gaps.sample(rng);
        if t > horizon {
            break;
        }
        let u: f64 = rng.random();
        if u * bound < rate.at(t) && times.last().is_none_or(|&last| t > last) {
            times.push(t);
        }
    }
    Ok(times)
}
