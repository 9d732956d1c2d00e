//! Energy–dissipation–inertia balance and the a priori bounds it implies.

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::discrete_ops::{atomistic_energy, atomistic_force, EnergyParams};
use crate::error::{Error, Result};
use crate::fields::{inner_product_eps, LatticeField};
use crate::lattice::Lattice;

/// One ledger row at a sample time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    /// `rho/2 |u'|^2`.
    pub kinetic: f64,
    /// `I(u(t))`.
    pub potential: f64,
    /// `nu/2 int |u'|^2`.
    pub dissipation_visc: f64,
    /// `1/(2 nu) int |rho u'' + dI(u)|^2` with `rho u'' + dI = -nu u'`.
    pub dissipation_force: f64,
    /// Same integral with `u''` from differences of the computed velocity.
    pub dissipation_force_fd: f64,
    pub residual: f64,
    pub residual_fd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdieLedger {
    pub rho: f64,
    pub nu: f64,
    /// `rho/2 |u1|^2 + I(u0)`.
    pub rhs: f64,
    /// True when integrals use every time step (end-corrected trapezoid)
    /// rather than only the samples (plain trapezoid).
    pub dense: bool,
    pub rows: Vec<LedgerRow>,
}

impl EdieLedger {
    pub fn final_residual(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.residual)
    }

    /// Largest `|residual| / rhs` over the rows (0 for zero data).
    pub fn max_relative_residual(&self) -> f64 {
        let m = self.rows.iter().fold(0.0f64, |m, r| m.max(r.residual.abs()));
        if self.rhs > 0.0 {
            m / self.rhs
        } else {
            m
        }
    }

    pub fn max_relative_residual_fd(&self) -> f64 {
        let m = self.rows.iter().fold(0.0f64, |m, r| m.max(r.residual_fd.abs()));
        if self.rhs > 0.0 {
            m / self.rhs
        } else {
            m
        }
    }
}

/// Cumulative trapezoid of `f` over `t`.
fn cumulative_trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..t.len() {
        acc += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
        out.push(acc);
    }
    out
}

/// Cumulative trapezoid on a uniform grid with the Euler–Maclaurin end
/// correction `-h^2/12 (f'(t_k) - f'(t_0))`, derivatives from second-order
/// differences. Falls back to the plain rule below three nodes.
fn cumulative_trapezoid_corrected(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = cumulative_trapezoid(t, f);
    let n = t.len();
    if n < 3 {
        return out;
    }
    let h = (t[n - 1] - t[0]) / (n - 1) as f64;
    let deriv = |k: usize| {
        if k == 0 {
            (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
        } else if k == n - 1 {
            (3.0 * f[k] - 4.0 * f[k - 1] + f[k - 2]) / (2.0 * h)
        } else {
            (f[k + 1] - f[k - 1]) / (2.0 * h)
        }
    };
    let d0 = deriv(0);
    for (k, o) in out.iter_mut().enumerate().skip(1) {
        *o -= h * h / 12.0 * (deriv(k) - d0);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    rho: f64,
    nu: f64,
    dense: bool,
    t: &[f64],
    vel_sq: &[f64],
    energy: &[f64],
    res_fd_sq: &[f64],
    pick: impl Iterator<Item = usize>,
) -> EdieLedger {
    let integrate = if dense { cumulative_trapezoid_corrected } else { cumulative_trapezoid };
    let iv = integrate(t, vel_sq);
    let ir = integrate(t, res_fd_sq);
    let rhs = 0.5 * rho * vel_sq[0] + energy[0];
    let rows = pick
        .map(|k| {
            let kinetic = 0.5 * rho * vel_sq[k];
            let dissipation_visc = 0.5 * nu * iv[k];
            let dissipation_force = 0.5 * nu * iv[k];
            let dissipation_force_fd = 0.5 / nu * ir[k];
            let base = kinetic + energy[k] + dissipation_visc;
            LedgerRow {
                t: t[k],
                kinetic,
                potential: energy[k],
                dissipation_visc,
                dissipation_force,
                dissipation_force_fd,
                residual: base + dissipation_force - rhs,
                residual_fd: base + dissipation_force_fd - rhs,
            }
        })
        .collect();
    EdieLedger {
        rho,
        nu,
        rhs,
        dense,
        rows,
    }
}

/// Ledger at the sample times, with integrals over every time step.
pub fn edie_audit(traj: &Trajectory) -> Result<EdieLedger> {
    if traj.nodes.is_empty() {
        return Err(Error::Format("trajectory has no per-step ledger nodes".into()));
    }
    let t: Vec<f64> = traj.nodes.iter().map(|n| n.t).collect();
    let vel: Vec<f64> = traj.nodes.iter().map(|n| n.velocity_sq).collect();
    let en: Vec<f64> = traj.nodes.iter().map(|n| n.energy).collect();
    let res: Vec<f64> = traj.nodes.iter().map(|n| n.residual_fd_sq).collect();
    let dt = traj.dt;
    let last = t.len() - 1;
    let pick = traj
        .times
        .iter()
        .map(move |&s| ((s / dt).round() as usize).min(last))
        .collect::<Vec<_>>();
    let cfg = &traj.config;
    Ok(assemble(cfg.rho, cfg.nu, true, &t, &vel, &en, &res, pick.into_iter()))
}

/// Ledger from the stored samples alone: energies and forces recomputed at
/// each sample, accelerations from differences of sampled velocities.
pub fn edie_audit_sampled(lattice: &Lattice, params: &EnergyParams, traj: &Trajectory) -> Result<EdieLedger> {
    let n = traj.len();
    if n == 0 {
        return Err(Error::Format("empty trajectory".into()));
    }
    let cfg = &traj.config;
    let t = &traj.times;
    let mut vel = Vec::with_capacity(n);
    let mut en = Vec::with_capacity(n);
    let mut res = Vec::with_capacity(n);
    for k in 0..n {
        let (u, v) = (&traj.u[k], &traj.v[k]);
        vel.push(inner_product_eps(lattice, v, v)?);
        en.push(atomistic_energy(lattice, u, params)?);
        let mut r = atomistic_force(lattice, u, params)?;
        if cfg.rho != 0.0 && n > 1 {
            r.axpy(cfg.rho, &sample_acceleration(t, &traj.v, k));
        }
        res.push(inner_product_eps(lattice, &r, &r)?);
    }
    Ok(assemble(cfg.rho, cfg.nu, false, t, &vel, &en, &res, 0..n))
}

/// Second-order differences on a possibly non-uniform grid.
fn sample_acceleration(t: &[f64], v: &[LatticeField], k: usize) -> LatticeField {
    let n = t.len();
    let weights: Vec<(usize, f64)> = if n == 2 {
        let h = t[1] - t[0];
        vec![(0, -1.0 / h), (1, 1.0 / h)]
    } else {
        let (a, b, c) = if k == 0 {
            (0, 1, 2)
        } else if k == n - 1 {
            (n - 3, n - 2, n - 1)
        } else {
            (k - 1, k, k + 1)
        };
        // Derivative at t[k] of the quadratic through the three samples.
        let x = t[k];
        let l = |i: usize, j: usize, m: usize| ((x - t[j]) + (x - t[m])) / ((t[i] - t[j]) * (t[i] - t[m]));
        vec![(a, l(a, b, c)), (b, l(b, a, c)), (c, l(c, a, b))]
    };
    let mut out = v[weights[0].0].clone();
    out.scale(weights[0].1);
    for &(i, w) in &weights[1..] {
        out.axpy(w, &v[i]);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    /// `c = rho/2 |u1|^2 + I(u0)`.
    pub c: f64,
    pub checks: Vec<BoundCheck>,
    pub all_hold: bool,
}

/// The four a priori bounds implied by the balance with constant `c`.
pub fn apriori_bounds(ledger: &EdieLedger) -> AprioriReport {
    let c = ledger.rhs;
    let nu = ledger.nu;
    let max_of = |f: &dyn Fn(&LedgerRow) -> f64| ledger.rows.iter().map(f).fold(0.0f64, f64::max);
    let last = ledger.rows.last();
    let items = [
        (
            "sqrt_rho_max_velocity",
            max_of(&|r| (2.0 * r.kinetic).max(0.0).sqrt()),
            (2.0 * c).sqrt(),
        ),
        ("max_energy", max_of(&|r| r.potential), c),
        (
            "velocity_integral",
            last.map_or(0.0, |r| 2.0 * r.dissipation_visc / nu),
            2.0 * c / nu,
        ),
        (
            "force_integral",
            last.map_or(0.0, |r| 2.0 * nu * r.dissipation_force_fd),
            2.0 * nu * c,
        ),
    ];
    let checks: Vec<BoundCheck> = items
        .into_iter()
        .map(|(name, value, bound)| BoundCheck {
            name: name.into(),
            value,
            bound,
            holds: value.is_finite() && value <= bound * (1.0 + 1e-8) + 1e-14,
        })
        .collect();
    let all_hold = checks.iter().all(|b| b.holds);
    AprioriReport { c, checks, all_hold }
}
