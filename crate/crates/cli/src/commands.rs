use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use fluidloss::export::{write_columns, write_finite_csv, write_zero_csv};
use fluidloss::optimize::{optimize_joint, optimize_staffing_zero, CapacityPlan, JointOptions};
use fluidloss::simulator::{replicate, simulate_one, split, Discipline, ReplicationOptions};
use fluidloss::validate::{convergence_study, write_figure_bundle};
use fluidloss::{solve_finite_buffer, solve_zero_buffer, Error, Grid, Result, SystemConfig};
use log::{info, warn};
use serde::{Deserialize, Serialize};

/// Grid resolution; defaults to 10 000 steps over the horizon.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridArgs {
    /// Time step
    #[arg(long, conflicts_with = "steps")]
    pub dt: Option<f64>,
    /// Number of steps over the horizon
    #[arg(long)]
    pub steps: Option<usize>,
}

pub const DEFAULT_STEPS: usize = 10_000;

impl GridArgs {
    pub fn resolve(&self, horizon: f64) -> Result<Grid> {
        match (self.dt, self.steps) {
            (Some(dt), _) => Grid::with_step(horizon, dt),
            (None, steps) => Grid::new(horizon, steps.unwrap_or(DEFAULT_STEPS)),
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    #[serde(default)]
    pub grid: GridArgs,
    /// Trajectory CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path [default: <out>.manifest.json]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// System index; the system has ⌊n·c⌋ servers
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Waiting places [default: ⌊n·β⌋]
    #[arg(long)]
    pub buffer: Option<u32>,
    /// Event logs to write, for the first replications
    #[arg(long, default_value_t = 5)]
    pub event_logs: usize,
    #[command(flatten)]
    #[serde(default)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Manifest path [default: <out-dir>/manifest.json]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// System indices, ascending; repeat the flag
    #[arg(long = "n", required = true)]
    pub n: Vec<u64>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Figure name [default: config file stem]
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    #[serde(default)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaffingArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Largest tolerated blocking probability
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub c_lo: f64,
    #[arg(long)]
    pub c_hi: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol_c: f64,
    #[command(flatten)]
    #[serde(default)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    /// Weight on servers in v·c + (1 − v)·β
    #[arg(long)]
    pub weight: f64,
    /// Candidate server levels, comma separated and ascending
    #[arg(long, value_delimiter = ',', required = true)]
    pub c_grid: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub tol_beta: f64,
    /// Top of the buffer bracket as a multiple of c
    #[arg(long, default_value_t = 10.0)]
    pub beta_factor: f64,
    #[command(flatten)]
    #[serde(default)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs here instead of their recorded locations
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Solve the zero-buffer fluid model
    SolveZero(SolveArgs),
    /// Solve the finite-buffer fluid model
    SolveFinite(SolveArgs),
    /// Simulate replications of the stochastic system
    Simulate(SimulateArgs),
    /// Compare simulated ensembles with the fluid model
    Validate(ValidateArgs),
    /// Smallest server level meeting a blocking target
    OptimizeStaffing(StaffingArgs),
    /// Grid search over servers with the smallest buffer per level
    OptimizeJoint(JointArgs),
    /// Repeat a recorded run and check its output hashes
    Rerun(RerunArgs),
}

/// What a command wrote.
pub struct Outcome {
    pub grid: Grid,
    pub seeds: Vec<u64>,
    pub outputs: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn relocate(path: &mut PathBuf, dir: &Path) {
    if let Some(name) = path.file_name() {
        *path = dir.join(name);
    }
}

impl Command {
    pub fn config_path(&self) -> Option<&Path> {
        match self {
            Command::SolveZero(a) | Command::SolveFinite(a) => Some(&a.config),
            Command::Simulate(a) => Some(&a.config),
            Command::Validate(a) => Some(&a.config),
            Command::OptimizeStaffing(a) => Some(&a.config),
            Command::OptimizeJoint(a) => Some(&a.config),
            Command::Rerun(_) => None,
        }
    }

    /// Where the manifest goes unless overridden.
    pub fn manifest_path(&self) -> Option<PathBuf> {
        let (explicit, dir) = match self {
            Command::SolveZero(a) | Command::SolveFinite(a) => {
                let mut name = a.out.clone().into_os_string();
                name.push(".manifest.json");
                return Some(a.manifest.clone().unwrap_or_else(|| name.into()));
            }
            Command::Simulate(a) => (&a.manifest, &a.out_dir),
            Command::Validate(a) => (&a.manifest, &a.out_dir),
            Command::OptimizeStaffing(a) => (&a.manifest, &a.out_dir),
            Command::OptimizeJoint(a) => (&a.manifest, &a.out_dir),
            Command::Rerun(_) => return None,
        };
        Some(
            explicit
                .clone()
                .unwrap_or_else(|| dir.join("manifest.json")),
        )
    }

    /// Points every output, and the manifest, into `dir`.
    pub fn relocate(&mut self, dir: &Path) {
        match self {
            Command::SolveZero(a) | Command::SolveFinite(a) => {
                relocate(&mut a.out, dir);
                if let Some(m) = a.manifest.as_mut() {
                    relocate(m, dir);
                }
            }
            Command::Simulate(SimulateArgs {
                out_dir, manifest, ..
            })
            | Command::Validate(ValidateArgs {
                out_dir, manifest, ..
            })
            | Command::OptimizeStaffing(StaffingArgs {
                out_dir, manifest, ..
            })
            | Command::OptimizeJoint(JointArgs {
                out_dir, manifest, ..
            }) => {
                *out_dir = dir.to_path_buf();
                if let Some(m) = manifest.as_mut() {
                    relocate(m, dir);
                }
            }
            Command::Rerun(_) => {}
        }
    }

    pub fn grid_args(&self) -> &GridArgs {
        match self {
            Command::SolveZero(a) | Command::SolveFinite(a) => &a.grid,
            Command::Simulate(a) => &a.grid,
            Command::Validate(a) => &a.grid,
            Command::OptimizeStaffing(a) => &a.grid,
            Command::OptimizeJoint(a) => &a.grid,
            Command::Rerun(_) => unreachable!("rerun has no grid"),
        }
    }
}

/// Runs a data-producing command against an already loaded config.
pub fn execute(cmd: &Command, cfg: &SystemConfig) -> Result<Outcome> {
    let grid = cmd.grid_args().resolve(cfg.horizon())?;
    match cmd {
        Command::SolveZero(a) => {
            let traj = solve_zero_buffer(cfg, &grid)?;
            let mut out = create(&a.out)?;
            write_zero_csv(&traj, &mut out)?;
            out.flush()?;
            Ok(Outcome {
                grid,
                seeds: Vec::new(),
                outputs: vec![a.out.clone()],
            })
        }
        Command::SolveFinite(a) => {
            let traj = solve_finite_buffer(cfg, &grid)?;
            if let Some(first) = traj.warnings.first() {
                warn!(
                    "{} step warning(s); first at step {}: {}",
                    traj.warnings.len(),
                    first.index,
                    first.message
                );
            }
            let mut out = create(&a.out)?;
            write_finite_csv(&traj, &mut out)?;
            out.flush()?;
            Ok(Outcome {
                grid,
                seeds: Vec::new(),
                outputs: vec![a.out.clone()],
            })
        }
        Command::Simulate(a) => simulate(a, cfg, grid),
        Command::Validate(a) => validate(a, cfg, grid),
        Command::OptimizeStaffing(a) => {
            let plan = optimize_staffing_zero(cfg, a.alpha, (a.c_lo, a.c_hi), a.tol_c, &grid)?;
            info!(
                "c* = {}, inf acceptance {}",
                plan.c_star, plan.achieved_inf_acceptance
            );
            let traj = solve_zero_buffer(&cfg.with_thresholds(plan.c_star, 0.0), &grid)?;
            write_plan(&plan, &a.out_dir, |out| write_zero_csv(&traj, out)).map(|outputs| Outcome {
                grid,
                seeds: Vec::new(),
                outputs,
            })
        }
        Command::OptimizeJoint(a) => {
            let opts = JointOptions {
                tol_beta: a.tol_beta,
                beta_factor: a.beta_factor,
            };
            let plan = optimize_joint(cfg, a.alpha, a.weight, &a.c_grid, &opts, &grid)?;
            info!(
                "c* = {}, beta* = {}, objective {}",
                plan.c_star, plan.beta_star, plan.objective
            );
            let traj =
                solve_finite_buffer(&cfg.with_thresholds(plan.c_star, plan.beta_star), &grid)?;
            write_plan(&plan, &a.out_dir, |out| write_finite_csv(&traj, out)).map(|outputs| {
                Outcome {
                    grid,
                    seeds: Vec::new(),
                    outputs,
                }
            })
        }
        Command::Rerun(_) => Err(Error::Config("rerun is not a data command".into())),
    }
}

fn write_plan<F>(plan: &CapacityPlan, dir: &Path, trajectory: F) -> Result<Vec<PathBuf>>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    for w in &plan.warnings {
        warn!("{w}");
    }
    let plan_path = dir.join("plan.json");
    write_json(plan, &plan_path)?;
    let traj_path = dir.join("trajectory.csv");
    let mut out = create(&traj_path)?;
    trajectory(&mut out)?;
    out.flush()?;
    Ok(vec![plan_path, traj_path])
}

fn simulate(a: &SimulateArgs, cfg: &SystemConfig, grid: Grid) -> Result<Outcome> {
    let discipline = if cfg.buffer_ratio == 0.0 && a.buffer.is_none() {
        Discipline::ZeroBuffer
    } else {
        Discipline::FiniteBuffer(a.buffer)
    };
    let set = replicate(
        cfg,
        a.n,
        discipline,
        &grid,
        &ReplicationOptions::new(a.reps, a.seed),
    )?;
    let summary = set.summary()?;
    let mut outputs = Vec::new();

    let path = a.out_dir.join("summary.json");
    write_json(&summary, &path)?;
    outputs.push(path);

    let t: Vec<f64> = grid.points().collect();
    let path = a.out_dir.join("acceptance.csv");
    let mut out = create(&path)?;
    write_columns(
        &[
            ("t", &t),
            ("empirical_acceptance", &summary.acceptance),
            ("servers_mean", &summary.servers.mean),
            ("buffer_mean", &summary.buffer.mean),
            ("departures_mean", &summary.departures.mean),
        ],
        &mut out,
    )?;
    out.flush()?;
    outputs.push(path);

    // logs are regenerated from their seeds rather than kept for every path
    for r in 0..a.event_logs.min(a.reps) {
        let p = simulate_one(cfg, a.n, discipline, split(a.seed, r as u64))?;
        let path = a.out_dir.join(format!("events_{r:03}.csv"));
        let mut out = create(&path)?;
        p.write_events_csv(&mut out)?;
        out.flush()?;
        outputs.push(path);
    }
    Ok(Outcome {
        grid,
        seeds: set.seeds,
        outputs,
    })
}

fn validate(a: &ValidateArgs, cfg: &SystemConfig, grid: Grid) -> Result<Outcome> {
    let study = convergence_study(cfg, &a.n, a.reps, a.seed, &grid, None)?;
    info!("validation took {:.1} s", study.report.runtime_secs);
    for e in &study.report.entries {
        info!(
            "n = {}: median occupancy gap {:.4}, acceptance discrepancy {:.4}",
            e.n, e.median_occupancy_gap, e.acceptance_discrepancy
        );
    }
    fs::create_dir_all(&a.out_dir)?;
    let mut outputs = Vec::new();
    let path = a.out_dir.join("report.json");
    write_json(&study.report, &path)?;
    outputs.push(path);

    let name = match &a.name {
        Some(n) => n.clone(),
        None => a
            .config
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into()),
    };
    for set in &study.sets {
        let label = format!("{name}_n{}", set.scale);
        outputs.extend(write_figure_bundle(&a.out_dir, &label, &study.fluid, set)?);
    }
    Ok(Outcome {
        grid,
        seeds: study.report.seeds.clone(),
        outputs,
    })
}
