//! CSV writers for trajectories, event logs and figure bundles.
//!
//! Floats are written with 17 significant digits so that a value read
//! back is bit-identical to the one written.

use std::io::Write;

use crate::error::Result;
use crate::vie_finite::FiniteTrajectory;
use crate::vie_zero::ZeroTrajectory;

/// Lossless text form of an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_zero_csv<W: Write>(traj: &ZeroTrajectory, mut out: W) -> Result<()> {
    writeln!(out, "t,rho,w,d,at_boundary")?;
    for (i, t) in traj.grid.points().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(t),
            fmt_f64(traj.rho[i]),
            fmt_f64(traj.w[i]),
            fmt_f64(traj.d[i]),
            traj.at_boundary[i]
        )?;
    }
    Ok(())
}

pub fn write_finite_csv<W: Write>(traj: &FiniteTrajectory, mut out: W) -> Result<()> {
    writeln!(out, "t,rho,eta,Dcum,d,z1,z2,z3,state")?;
    for (i, t) in traj.grid.points().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(t),
            fmt_f64(traj.rho[i]),
            fmt_f64(traj.eta[i]),
            fmt_f64(traj.dcum[i]),
            fmt_f64(traj.d[i]),
            fmt_f64(traj.z1[i]),
            fmt_f64(traj.z2[i]),
            fmt_f64(traj.z3[i]),
            traj.states[i]
        )?;
    }
    Ok(())
}

/// Writes named columns of equal length under a shared header.
pub fn write_columns<W: Write>(columns: &[(&str, &[f64])], mut out: W) -> Result<()> {
    let header: Vec<&str> = columns.iter().map(|(name, _)| *name).collect();
    writeln!(out, "{}", header.join(","))?;
    let rows = columns.iter().map(|(_, c)| c.len()).min().unwrap_or(0);
    for r in 0..rows {
        let line: Vec<String> = columns.iter().map(|(_, c)| fmt_f64(c[r])).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
