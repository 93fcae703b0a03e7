//! Comparison of simulated ensembles with fluid trajectories.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{domain, Result};
use crate::export::write_columns;
use crate::model::{ConfigFile, Grid, SystemConfig};
use crate::simulator::{
    empirical_acceptance, replicate, Discipline, ReplicationOptions, ReplicationSet,
};
use crate::vie_finite::{solve_finite_buffer, FiniteTrajectory};
use crate::vie_zero::{solve_zero_buffer, ZeroTrajectory};

/// Rates at or below this are treated as zero when comparing acceptance.
pub const ACTIVE_RATE: f64 = 1e-6;

/// A sampled series on a grid.
#[derive(Clone, Copy, Debug)]
pub struct Series<'a> {
    pub grid: &'a Grid,
    pub values: &'a [f64],
}

impl<'a> Series<'a> {
    pub fn new(grid: &'a Grid, values: &'a [f64]) -> Self {
        Series { grid, values }
    }
}

/// `max_i |a(t_i) − b(t_i)|` over the points of `a`'s grid; `b` is read as
/// a step function when its grid differs.
pub fn sup_norm_gap(a: Series<'_>, b: Series<'_>) -> Result<f64> {
    if !a.grid.same_horizon(b.grid) {
        return domain(format!(
            "horizons differ: {} vs {}",
            a.grid.horizon(),
            b.grid.horizon()
        ));
    }
    for s in [a, b] {
        if s.values.len() != s.grid.len() {
            return domain(format!(
                "series of length {} on a grid of {} points",
                s.values.len(),
                s.grid.len()
            ));
        }
    }
    let same = a.grid == b.grid;
    let mut gap: f64 = 0.0;
    for (i, t) in a.grid.points().enumerate() {
        let j = if same {
            i
        } else {
            b.grid.index_at_or_before(t).unwrap_or(b.grid.count())
        };
        gap = gap.max((a.values[i] - b.values[j]).abs());
    }
    Ok(gap)
}

/// A solved fluid model of either kind.
#[derive(Clone, Debug)]
pub enum FluidReference {
    Zero(ZeroTrajectory),
    Finite(FiniteTrajectory),
}

impl FluidReference {
    /// Zero-buffer solution when `β = 0`, finite-buffer otherwise.
    pub fn solve(cfg: &SystemConfig, grid: &Grid) -> Result<Self> {
        if cfg.buffer_ratio == 0.0 {
            solve_zero_buffer(cfg, grid).map(FluidReference::Zero)
        } else {
            solve_finite_buffer(cfg, grid).map(FluidReference::Finite)
        }
    }

    pub fn discipline(&self) -> Discipline {
        match self {
            FluidReference::Zero(_) => Discipline::ZeroBuffer,
            FluidReference::Finite(_) => Discipline::FiniteBuffer(None),
        }
    }

    pub fn grid(&self) -> &Grid {
        match self {
            FluidReference::Zero(t) => &t.grid,
            FluidReference::Finite(t) => &t.grid,
        }
    }

    pub fn occupancy(&self) -> &[f64] {
        match self {
            FluidReference::Zero(t) => &t.rho,
            FluidReference::Finite(t) => &t.rho,
        }
    }

    pub fn buffer(&self) -> Option<&[f64]> {
        match self {
            FluidReference::Zero(_) => None,
            FluidReference::Finite(t) => Some(&t.eta),
        }
    }

    pub fn acceptance(&self) -> &[f64] {
        match self {
            FluidReference::Zero(t) => &t.w,
            FluidReference::Finite(t) => &t.z3,
        }
    }

    pub fn lambda(&self) -> &[f64] {
        match self {
            FluidReference::Zero(t) => &t.lambda,
            FluidReference::Finite(t) => &t.lambda,
        }
    }
}

/// Largest `|empirical − fluid|` acceptance gap over grid points where
/// `λ > ACTIVE_RATE`; zero when no point is active.
pub fn acceptance_discrepancy(empirical: &[f64], fluid: &FluidReference) -> f64 {
    empirical
        .iter()
        .zip(fluid.acceptance())
        .zip(fluid.lambda())
        .filter(|(_, &l)| l > ACTIVE_RATE)
        .map(|((e, f), _)| (e - f).abs())
        .fold(0.0, f64::max)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapEntry {
    pub n: u64,
    pub reps: usize,
    /// Per-replication sup-norm gap of the scaled busy-server count.
    pub occupancy_gaps: Vec<f64>,
    pub median_occupancy_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffer_gaps: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_buffer_gap: Option<f64>,
    pub acceptance_discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub config: ConfigFile,
    pub discipline: Discipline,
    pub grid_step: f64,
    pub grid_count: usize,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub entries: Vec<GapEntry>,
    /// Wall-clock seconds; not serialized so reports compare byte for byte.
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl ConvergenceReport {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn entry(&self, n: u64) -> Option<&GapEntry> {
        self.entries.iter().find(|e| e.n == n)
    }
}

/// Gap statistics of one replication set against the fluid solution.
pub fn gap_entry(reps: &ReplicationSet, fluid: &FluidReference) -> Result<GapEntry> {
    let grid = &reps.grid;
    let fgrid = fluid.grid();
    let occupancy_gaps = reps
        .samples
        .iter()
        .map(|s| {
            sup_norm_gap(
                Series::new(grid, &s.servers),
                Series::new(fgrid, fluid.occupancy()),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let buffer_gaps = match fluid.buffer() {
        Some(eta) => Some(
            reps.samples
                .iter()
                .map(|s| sup_norm_gap(Series::new(grid, &s.buffer), Series::new(fgrid, eta)))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let empirical = empirical_acceptance(reps)?;
    if grid != fgrid {
        return domain("ensemble and fluid grids differ");
    }
    Ok(GapEntry {
        n: reps.scale,
        reps: reps.len(),
        median_occupancy_gap: median(&occupancy_gaps),
        occupancy_gaps,
        median_buffer_gap: buffer_gaps.as_deref().map(median),
        buffer_gaps,
        acceptance_discrepancy: acceptance_discrepancy(&empirical, fluid),
    })
}

/// Runs `reps` replications for each `n` and compares them with the fluid
/// solution on `grid`.
pub fn convergence_report(
    cfg: &SystemConfig,
    n_list: &[u64],
    reps: usize,
    master_seed: u64,
    grid: &Grid,
    workers: Option<usize>,
) -> Result<ConvergenceReport> {
    convergence_study(cfg, n_list, reps, master_seed, grid, workers).map(|s| s.report)
}

/// A convergence report together with the data behind it.
#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub report: ConvergenceReport,
    pub fluid: FluidReference,
    pub sets: Vec<ReplicationSet>,
}

pub fn convergence_study(
    cfg: &SystemConfig,
    n_list: &[u64],
    reps: usize,
    master_seed: u64,
    grid: &Grid,
    workers: Option<usize>,
) -> Result<ConvergenceStudy> {
    let start = Instant::now();
    if n_list.is_empty() {
        return domain("empty list of system sizes");
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return domain("system sizes must be strictly increasing");
    }
    if reps == 0 {
        return domain("at least one replication is required");
    }
    let fluid = FluidReference::solve(cfg, grid)?;
    let mut opts = ReplicationOptions::new(reps, master_seed);
    opts.workers = workers;
    let mut entries = Vec::with_capacity(n_list.len());
    let mut sets = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let set = replicate(cfg, n, fluid.discipline(), grid, &opts)?;
        entries.push(gap_entry(&set, &fluid)?);
        sets.push(set);
    }
    let report = ConvergenceReport {
        config: cfg.to_file_model(),
        discipline: fluid.discipline(),
        grid_step: grid.step(),
        grid_count: grid.count(),
        master_seed,
        seeds: sets[0].seeds.clone(),
        entries,
        runtime_secs: start.elapsed().as_secs_f64(),
    };
    Ok(ConvergenceStudy {
        report,
        fluid,
        sets,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `fig_<name>_occupancy.csv` and `fig_<name>_acceptance.csv` into
/// `dir` and returns their paths. The occupancy file holds the fluid
/// solution, the ensemble mean and 5%/95% band, and the first path.
pub fn write_figure_bundle(
    dir: &Path,
    name: &str,
    fluid: &FluidReference,
    reps: &ReplicationSet,
) -> Result<Vec<PathBuf>> {
    let summary = reps.summary()?;
    let t: Vec<f64> = reps.grid.points().collect();
    let first = reps.samples.first().expect("summary rejects empty sets");

    let mut cols: Vec<(&str, &[f64])> = vec![
        ("t", &t),
        ("rho", fluid.occupancy()),
        ("sim_servers_mean", &summary.servers.mean),
        ("sim_servers_q05", &summary.servers.q05),
        ("sim_servers_q95", &summary.servers.q95),
        ("sim_servers_path", &first.servers),
    ];
    if let Some(eta) = fluid.buffer() {
        cols.extend([
            ("eta", eta),
            ("sim_buffer_mean", &summary.buffer.mean[..]),
            ("sim_buffer_q05", &summary.buffer.q05[..]),
            ("sim_buffer_q95", &summary.buffer.q95[..]),
            ("sim_buffer_path", &first.buffer[..]),
        ]);
    }
    let occupancy = dir.join(format!("fig_{name}_occupancy.csv"));
    let mut out = create(&occupancy)?;
    write_columns(&cols, &mut out)?;
    out.flush()?;

    let blocking_fluid: Vec<f64> = fluid.acceptance().iter().map(|a| 1.0 - a).collect();
    let blocking_sim: Vec<f64> = summary.acceptance.iter().map(|a| 1.0 - a).collect();
    let acceptance = dir.join(format!("fig_{name}_acceptance.csv"));
    let mut out = create(&acceptance)?;
    write_columns(
        &[
            ("t", &t),
            ("lambda", fluid.lambda()),
            ("fluid_acceptance", fluid.acceptance()),
            ("empirical_acceptance", &summary.acceptance),
            ("fluid_blocking", &blocking_fluid),
            ("empirical_blocking", &blocking_sim),
        ],
        &mut out,
    )?;
    out.flush()?;
    Ok(vec![occupancy, acceptance])
}
