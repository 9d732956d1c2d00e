//! Trajectory export: a CSV time series and a binary snapshot file
//! (magic, JSON header, little-endian `f64` samples).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EdieLedger, LedgerNode, SimulationConfig, Trajectory};
use crate::cell_energy::ModelMetadata;
use crate::error::{Error, Result};
use crate::fields::{norm_eps, LatticeField};
use crate::lattice::{Lattice, LatticeSpec};

const MAGIC: &[u8; 8] = b"LATDYNTR";
const VERSION: u32 = 1;

/// Time series at the sample times: norms, energy and ledger columns.
pub fn write_ledger_csv(path: &Path, lattice: &Lattice, traj: &Trajectory, ledger: &EdieLedger) -> Result<()> {
    if ledger.rows.len() != traj.len() {
        return Err(Error::Format("ledger rows do not match trajectory samples".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t",
        "u_norm",
        "v_norm",
        "energy",
        "kinetic",
        "dissipation_visc",
        "dissipation_force",
        "dissipation_force_fd",
        "rhs",
        "residual",
        "residual_fd",
    ])?;
    for (k, row) in ledger.rows.iter().enumerate() {
        let rec = [
            row.t,
            norm_eps(lattice, &traj.u[k])?,
            norm_eps(lattice, &traj.v[k])?,
            row.potential,
            row.kinetic,
            row.dissipation_visc,
            row.dissipation_force,
            row.dissipation_force_fd,
            ledger.rhs,
            row.residual,
            row.residual_fd,
        ];
        w.write_record(rec.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Everything in a trajectory file except the field values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub lattice: LatticeSpec,
    pub config: SimulationConfig,
    pub delta: f64,
    pub model: ModelMetadata,
    pub dt: f64,
    pub times: Vec<f64>,
    pub num_points: usize,
    pub dim: usize,
    pub nodes: Vec<LedgerNode>,
    pub aborted_at: Option<f64>,
}

impl TrajectoryHeader {
    /// Rebuilds the trajectory on `lattice` (which must match the header's
    /// spec) from the raw samples.
    pub fn into_trajectory(self, lattice: &Lattice, samples: Vec<Sample>) -> Result<Trajectory> {
        if lattice.spec() != &self.lattice {
            return Err(Error::LatticeMismatch);
        }
        let mut u = Vec::with_capacity(samples.len());
        let mut v = Vec::with_capacity(samples.len());
        for (a, b) in samples {
            u.push(LatticeField::from_values(lattice, a)?);
            v.push(LatticeField::from_values(lattice, b)?);
        }
        Ok(Trajectory {
            lattice: self.lattice,
            lattice_id: lattice.id(),
            config: self.config,
            delta: self.delta,
            model: self.model,
            dt: self.dt,
            times: self.times,
            u,
            v,
            nodes: self.nodes,
            aborted_at: self.aborted_at,
        })
    }
}

pub fn write_trajectory_binary(traj: &Trajectory, mut w: impl Write) -> Result<()> {
    let header = TrajectoryHeader {
        lattice: traj.lattice.clone(),
        config: traj.config.clone(),
        delta: traj.delta,
        model: traj.model.clone(),
        dt: traj.dt,
        times: traj.times.clone(),
        num_points: traj.u.first().map_or(0, |u| u.len() / u.dim().max(1)),
        dim: traj.lattice.dim(),
        nodes: traj.nodes.clone(),
        aborted_at: traj.aborted_at,
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (u, v) in traj.u.iter().zip(&traj.v) {
        for x in u.values().iter().chain(v.values()) {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `(u, v)` values of one sample.
pub type Sample = (Vec<f64>, Vec<f64>);

pub fn read_trajectory_binary(mut r: impl Read) -> Result<(TrajectoryHeader, Vec<Sample>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a trajectory file".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported trajectory version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let len = u64::from_le_bytes(b8) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: TrajectoryHeader = serde_json::from_slice(&json)?;
    let n = header.num_points * header.dim;
    let mut read_vec = |r: &mut dyn Read| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            out.push(f64::from_le_bytes(b8));
        }
        Ok(out)
    };
    let mut samples = Vec::with_capacity(header.times.len());
    for _ in 0..header.times.len() {
        let u = read_vec(&mut r)?;
        let v = read_vec(&mut r)?;
        samples.push((u, v));
    }
    Ok((header, samples))
}
