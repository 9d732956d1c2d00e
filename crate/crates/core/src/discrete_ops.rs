//! Discrete gradient, its conjugate, the scaled atomistic energy and its
//! Riesz gradient.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell_energy::CellEnergy;
use crate::error::{Error, Result};
use crate::fields::{CellField, LatticeField};
use crate::lattice::Lattice;

/// Below this many cells the fast mode stays sequential.
const PAR_THRESHOLD: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// Sequential, bitwise reproducible.
    #[default]
    Audit,
    /// Rayon over cells and points.
    Fast,
}

impl ExecMode {
    fn parallel(self, work: usize) -> bool {
        self == ExecMode::Fast && work >= PAR_THRESHOLD
    }
}

/// Linearization scale and cell model, tied to one lattice.
#[derive(Clone, Debug)]
pub struct EnergyParams {
    pub delta: f64,
    pub model: Arc<dyn CellEnergy>,
    pub mode: ExecMode,
    lattice_id: u64,
    z: Vec<f64>,
}

impl EnergyParams {
    pub fn new(lattice: &Lattice, delta: f64, model: Arc<dyn CellEnergy>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidSpec(format!("delta must be positive, got {delta}")));
        }
        if model.dim() != lattice.dim() {
            return Err(Error::InvalidSpec(format!(
                "model dimension {} does not match lattice dimension {}",
                model.dim(),
                lattice.dim()
            )));
        }
        let mismatch = (model.corner_labels() - lattice.corner_labels()).amax();
        if mismatch > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "model corner labels differ from the lattice's by {mismatch:e}"
            )));
        }
        Ok(Self {
            delta,
            model,
            mode: ExecMode::Audit,
            lattice_id: lattice.id(),
            z: lattice.corner_labels().as_slice().to_vec(),
        })
    }

    pub fn with_mode(mut self, mode: ExecMode) -> Self {
        self.mode = mode;
        self
    }

    fn check(&self, lattice: &Lattice) -> Result<()> {
        if self.lattice_id != lattice.id() {
            return Err(Error::LatticeMismatch);
        }
        Ok(())
    }
}

fn cell_gradient(lattice: &Lattice, u: &[f64], c: usize, out: &mut [f64]) {
    let d = lattice.dim();
    let corners = lattice.cell_corners(c);
    let inv_eps = 1.0 / lattice.epsilon();
    let inv_nc = 1.0 / corners.len() as f64;
    for r in 0..d {
        let mean = corners.iter().map(|&p| u[p as usize * d + r]).sum::<f64>() * inv_nc;
        for (i, &p) in corners.iter().enumerate() {
            out[r + d * i] = (u[p as usize * d + r] - mean) * inv_eps;
        }
    }
}

/// `grad u` on every stored cell: `(u_i - mean(u)) / eps` per corner.
pub fn discrete_gradient(lattice: &Lattice, u: &LatticeField) -> Result<CellField> {
    u.check(lattice)?;
    let mut g = CellField::zeros(lattice);
    let b = g.block_len();
    let uv = u.values();
    for (c, block) in g.values_mut().chunks_mut(b).enumerate() {
        cell_gradient(lattice, uv, c, block);
    }
    Ok(g)
}

/// Conjugate operator by gathering over the `2^d` cells sharing a point;
/// absent cells contribute zero and the result vanishes off `Omega`.
pub fn discrete_divergence(lattice: &Lattice, g: &CellField) -> Result<LatticeField> {
    g.check(lattice)?;
    let mut out = LatticeField::zeros(lattice);
    divergence_into(lattice, g.values(), out.values_mut(), ExecMode::Audit);
    Ok(out)
}

fn divergence_into(lattice: &Lattice, g: &[f64], out: &mut [f64], mode: ExecMode) {
    let d = lattice.dim();
    let nc = lattice.num_corners();
    let b = d * nc;
    let inv_eps = 1.0 / lattice.epsilon();
    let inv_nc = 1.0 / nc as f64;
    // Column sums per cell.
    let colsum: Vec<f64> = g
        .chunks(b)
        .flat_map(|blk| (0..d).map(move |r| (0..nc).map(|i| blk[r + d * i]).sum::<f64>()))
        .collect();
    let point = |p: usize, o: &mut [f64]| {
        o.fill(0.0);
        if !lattice.in_omega(p) {
            return;
        }
        for j in 0..nc {
            if let Some(c) = lattice.cell_with_corner(p, j) {
                for r in 0..d {
                    o[r] += -g[c * b + r + d * j] + inv_nc * colsum[c * d + r];
                }
            }
        }
        o.iter_mut().for_each(|v| *v *= inv_eps);
    };
    if mode.parallel(lattice.num_cells()) {
        out.par_chunks_mut(d).enumerate().for_each(|(p, o)| point(p, o));
    } else {
        out.chunks_mut(d).enumerate().for_each(|(p, o)| point(p, o));
    }
}

/// Per-cell stress `(1/delta) DW(Z + delta grad u)`.
fn cell_stress(
    lattice: &Lattice,
    u: &[f64],
    p: &EnergyParams,
    c: usize,
    f: &mut [f64],
    out: &mut [f64],
) {
    cell_gradient(lattice, u, c, f);
    for (fi, zi) in f.iter_mut().zip(&p.z) {
        *fi = zi + p.delta * *fi;
    }
    p.model.gradient(f, out);
    let inv = 1.0 / p.delta;
    out.iter_mut().for_each(|v| *v *= inv);
}

fn stress_field(lattice: &Lattice, u: &LatticeField, p: &EnergyParams) -> Vec<f64> {
    let b = lattice.dim() * lattice.num_corners();
    let mut g = vec![0.0; lattice.num_cells() * b];
    let uv = u.values();
    if p.mode.parallel(lattice.num_cells()) {
        g.par_chunks_mut(b).enumerate().for_each_init(
            || vec![0.0; b],
            |f, (c, out)| cell_stress(lattice, uv, p, c, f, out),
        );
    } else {
        let mut f = vec![0.0; b];
        for (c, out) in g.chunks_mut(b).enumerate() {
            cell_stress(lattice, uv, p, c, &mut f, out);
        }
    }
    g
}

/// `(1/delta) DW(Z + delta grad u)` as a cell field.
pub fn cell_stresses(lattice: &Lattice, u: &LatticeField, p: &EnergyParams) -> Result<CellField> {
    p.check(lattice)?;
    u.check(lattice)?;
    CellField::from_values(lattice, stress_field(lattice, u, p))
}

/// `I(u) = (eps^d det A / delta^2) sum_cells W(Z + delta grad u)`.
pub fn atomistic_energy(lattice: &Lattice, u: &LatticeField, p: &EnergyParams) -> Result<f64> {
    p.check(lattice)?;
    u.check(lattice)?;
    let b = lattice.dim() * lattice.num_corners();
    let uv = u.values();
    let cell_w = |c: usize, f: &mut Vec<f64>| -> Result<f64> {
        cell_gradient(lattice, uv, c, f);
        for (fi, zi) in f.iter_mut().zip(&p.z) {
            *fi = zi + p.delta * *fi;
        }
        let w = p.model.energy(f);
        if w.is_finite() {
            Ok(w)
        } else {
            Err(Error::NonFiniteEnergy { cell: c })
        }
    };
    let n = lattice.num_cells();
    let sum: f64 = if p.mode.parallel(n) {
        (0..n)
            .into_par_iter()
            .map_init(|| vec![0.0; b], |f, c| cell_w(c, f))
            .collect::<Result<Vec<f64>>>()?
            .iter()
            .sum()
    } else {
        let mut f = vec![0.0; b];
        let mut s = 0.0;
        for c in 0..n {
            s += cell_w(c, &mut f)?;
        }
        s
    };
    Ok(lattice.cell_volume() / (p.delta * p.delta) * sum)
}

/// Riesz representative of the first variation: `-div* g` with
/// `g = (1/delta) DW(Z + delta grad u)`.
pub fn atomistic_force(lattice: &Lattice, u: &LatticeField, p: &EnergyParams) -> Result<LatticeField> {
    let mut out = LatticeField::zeros(lattice);
    atomistic_force_into(lattice, u, p, &mut out)?;
    Ok(out)
}

/// As [`atomistic_force`], reusing `out`.
pub fn atomistic_force_into(
    lattice: &Lattice,
    u: &LatticeField,
    p: &EnergyParams,
    out: &mut LatticeField,
) -> Result<()> {
    p.check(lattice)?;
    u.check(lattice)?;
    out.check(lattice)?;
    let g = stress_field(lattice, u, p);
    if g.iter().any(|v| !v.is_finite()) {
        let b = lattice.dim() * lattice.num_corners();
        let cell = g.iter().position(|v| !v.is_finite()).unwrap() / b;
        return Err(Error::NonFiniteEnergy { cell });
    }
    divergence_into(lattice, &g, out.values_mut(), p.mode);
    out.values_mut().iter_mut().for_each(|v| *v = -*v);
    Ok(())
}

/// Per-cell scatter of `(g_i - mean g) / eps` onto corner points, restricted
/// to `Omega`. Equals `-div* g`; kept as an independent oracle.
pub fn scatter_force(lattice: &Lattice, g: &CellField) -> Result<LatticeField> {
    g.check(lattice)?;
    let d = lattice.dim();
    let nc = lattice.num_corners();
    let inv_eps = 1.0 / lattice.epsilon();
    let mut out = vec![0.0; lattice.num_points() * d];
    for c in 0..lattice.num_cells() {
        let blk = g.cell(c);
        for r in 0..d {
            let mean = (0..nc).map(|i| blk[r + d * i]).sum::<f64>() / nc as f64;
            for (i, &pt) in lattice.cell_corners(c).iter().enumerate() {
                out[pt as usize * d + r] += (blk[r + d * i] - mean) * inv_eps;
            }
        }
    }
    for p in 0..lattice.num_points() {
        if !lattice.in_omega(p) {
            out[p * d..(p + 1) * d].fill(0.0);
        }
    }
    LatticeField::from_values(lattice, out)
}

/// `<dI(u), v> = eps^d det A sum_cells g : grad v`, the weak form.
pub fn energy_variation(
    lattice: &Lattice,
    u: &LatticeField,
    v: &LatticeField,
    p: &EnergyParams,
) -> Result<f64> {
    let g = cell_stresses(lattice, u, p)?;
    let gv = discrete_gradient(lattice, v)?;
    Ok(lattice.cell_volume() * g.dot(&gv)?)
}
