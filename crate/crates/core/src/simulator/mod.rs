//! Seeded discrete-event simulation of the n-th stochastic system.

mod nhpp;
mod path;
pub mod seeding;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

pub use nhpp::generate_nhpp;
pub use path::{
    simulate_finite_buffer, simulate_zero_buffer, EventKind, EventRecord, PathSample, ScaledState,
    SimPath,
};
pub use seeding::{split, stream, StreamRole};

use crate::error::{domain, Error, Result};
use crate::model::{Grid, SystemConfig};

/// Which system a replication set simulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discipline {
    ZeroBuffer,
    /// `None` uses `⌊nβ⌋` waiting places.
    FiniteBuffer(Option<u32>),
}

/// `R` seeded paths sampled on a common grid. Path `r` uses seed
/// `split(master_seed, r)`.
#[derive(Clone, Debug)]
pub struct ReplicationSet {
    pub master_seed: u64,
    pub scale: u64,
    pub discipline: Discipline,
    pub grid: Grid,
    pub seeds: Vec<u64>,
    pub samples: Vec<PathSample>,
    /// Full event logs, kept only when requested.
    pub paths: Option<Vec<SimPath>>,
}

#[derive(Clone, Debug)]
pub struct ReplicationOptions {
    pub reps: usize,
    pub master_seed: u64,
    pub keep_paths: bool,
    /// `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl ReplicationOptions {
    pub fn new(reps: usize, master_seed: u64) -> Self {
        ReplicationOptions {
            reps,
            master_seed,
            keep_paths: false,
            workers: None,
        }
    }
}

pub fn simulate_one(
    cfg: &SystemConfig,
    n: u64,
    discipline: Discipline,
    seed: u64,
) -> Result<SimPath> {
    match discipline {
        Discipline::ZeroBuffer => simulate_zero_buffer(cfg, n, seed),
        Discipline::FiniteBuffer(b) => simulate_finite_buffer(cfg, n, b, seed),
    }
}

pub fn replicate(
    cfg: &SystemConfig,
    n: u64,
    discipline: Discipline,
    grid: &Grid,
    opts: &ReplicationOptions,
) -> Result<ReplicationSet> {
    if !grid.same_horizon(&Grid::new(cfg.horizon(), 1)?) {
        return domain(format!(
            "grid horizon {} differs from config horizon {}",
            grid.horizon(),
            cfg.horizon()
        ));
    }
    let seeds: Vec<u64> = (0..opts.reps as u64)
        .map(|r| split(opts.master_seed, r))
        .collect();
    let run = || -> Result<Vec<(PathSample, Option<SimPath>)>> {
        seeds
            .par_iter()
            .map(|&seed| {
                let path = simulate_one(cfg, n, discipline, seed)?;
                let sample = path.sample(grid);
                Ok((sample, opts.keep_paths.then_some(path)))
            })
            .collect()
    };
    let results = match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let mut samples = Vec::with_capacity(results.len());
    let mut paths = opts.keep_paths.then(|| Vec::with_capacity(results.len()));
    for (s, p) in results {
        samples.push(s);
        if let (Some(all), Some(p)) = (paths.as_mut(), p) {
            all.push(p);
        }
    }
    Ok(ReplicationSet {
        master_seed: opts.master_seed,
        scale: n,
        discipline,
        grid: *grid,
        seeds,
        samples,
        paths,
    })
}

/// Fraction of replications admitting an arrival at `t_i⁻`, per grid point.
pub fn empirical_acceptance(reps: &ReplicationSet) -> Result<Vec<f64>> {
    if reps.samples.is_empty() {
        return domain("empirical acceptance of an empty replication set");
    }
    let r = reps.samples.len() as f64;
    Ok((0..reps.grid.len())
        .map(|i| reps.samples.iter().filter(|s| s.admits[i]).count() as f64 / r)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub q05: Vec<f64>,
    pub q50: Vec<f64>,
    pub q95: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub n: u64,
    pub reps: usize,
    pub master_seed: u64,
    pub discipline: Discipline,
    pub grid_step: f64,
    pub grid_count: usize,
    pub servers: Band,
    pub buffer: Band,
    pub departures: Band,
    pub acceptance: Vec<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn band(reps: &ReplicationSet, pick: impl Fn(&PathSample) -> &[f64]) -> Band {
    let len = reps.grid.len();
    let mut out = Band {
        mean: Vec::with_capacity(len),
        q05: Vec::with_capacity(len),
        q50: Vec::with_capacity(len),
        q95: Vec::with_capacity(len),
    };
    let mut column = Vec::with_capacity(reps.samples.len());
    for i in 0..len {
        column.clear();
        column.extend(reps.samples.iter().map(|s| pick(s)[i]));
        out.mean
            .push(column.iter().sum::<f64>() / column.len() as f64);
        column.sort_by(f64::total_cmp);
        out.q05.push(quantile(&column, 0.05));
        out.q50.push(quantile(&column, 0.5));
        out.q95.push(quantile(&column, 0.95));
    }
    out
}

impl ReplicationSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn summary(&self) -> Result<EnsembleSummary> {
        let acceptance = empirical_acceptance(self)?;
        Ok(EnsembleSummary {
            n: self.scale,
            reps: self.samples.len(),
            master_seed: self.master_seed,
            discipline: self.discipline,
            grid_step: self.grid.step(),
            grid_count: self.grid.count(),
            servers: band(self, |s| &s.servers),
            buffer: band(self, |s| &s.buffer),
            departures: band(self, |s| &s.departures),
            acceptance,
        })
    }
}

impl EnsembleSummary {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RateFunction, ServiceDistribution};

    fn mm(rate: f64, horizon: f64) -> SystemConfig {
        SystemConfig {
            rate: RateFunction::constant(rate, horizon).unwrap(),
            service: ServiceDistribution::exponential(1.0),
            initial_fraction: 0.0,
            initial_dist: ServiceDistribution::exponential(1.0),
            capacity: 1.0,
            buffer_ratio: 0.0,
        }
    }

    #[test]
    fn never_saturated_accepts_everywhere() {
        let cfg = mm(0.0, 2.0);
        let grid = Grid::new(2.0, 20).unwrap();
        let reps = replicate(
            &cfg,
            10,
            Discipline::ZeroBuffer,
            &grid,
            &ReplicationOptions::new(4, 1),
        )
        .unwrap();
        assert!(empirical_acceptance(&reps)
            .unwrap()
            .iter()
            .all(|&a| a == 1.0));
    }

    #[test]
    fn saturated_start_rejects_at_origin() {
        let mut cfg = mm(1.0, 2.0);
        cfg.initial_fraction = 1.0;
        let grid = Grid::new(2.0, 20).unwrap();
        let reps = replicate(
            &cfg,
            10,
            Discipline::ZeroBuffer,
            &grid,
            &ReplicationOptions::new(5, 3),
        )
        .unwrap();
        assert_eq!(empirical_acceptance(&reps).unwrap()[0], 0.0);
    }

    #[test]
    fn empty_set_is_an_error() {
        let cfg = mm(1.0, 1.0);
        let grid = Grid::new(1.0, 10).unwrap();
        let reps = replicate(
            &cfg,
            10,
            Discipline::ZeroBuffer,
            &grid,
            &ReplicationOptions::new(0, 3),
        )
        .unwrap();
        assert!(matches!(empirical_acceptance(&reps), Err(Error::Domain(_))));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = mm(2.0, 3.0);
        let grid = Grid::new(3.0, 30).unwrap();
        let mut opts = ReplicationOptions::new(8, 99);
        opts.workers = Some(1);
        let a = replicate(&cfg, 40, Discipline::ZeroBuffer, &grid, &opts).unwrap();
        opts.workers = Some(3);
        let b = replicate(&cfg, 40, Discipline::ZeroBuffer, &grid, &opts).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.summary().unwrap(), b.summary().unwrap());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.0);
        assert!((quantile(&v, 0.05) - 0.2).abs() < 1e-12);
    }
}
