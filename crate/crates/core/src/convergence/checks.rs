//! Recovery-sequence and first-variation consistency tables.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cell_energy::{elasticity_tensor, hessian_at_z, ModelSpec};
use crate::discrete_ops::{atomistic_energy, atomistic_force, discrete_gradient, energy_variation, EnergyParams};
use crate::error::{Error, Result};
use crate::fields::{inner_product_eps, project_fn};
use crate::lattice::{BoxDomain, Lattice, LatticeSpec};
use crate::smooth::SmoothField;

use super::{grad_error, DeltaRule, FieldSnapshot, Snapshot, SweepOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub epsilon: f64,
    pub delta: f64,
    pub energy_lattice: f64,
    pub energy_continuum: f64,
    pub energy_gap: f64,
    pub grad_error: f64,
    /// `max_cells |grad P_eps w|`, Frobenius norm per cell.
    pub grad_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTable {
    pub rows: Vec<RecoveryRow>,
    /// `max |grad w|` (Frobenius) sampled on `Omega`.
    pub field_grad_sup: f64,
    /// Fitted `max_k grad_sup / field_grad_sup`.
    pub fitted_constant: f64,
    /// `2^{d/2} diam(A [-3/2, 3/2]^d)`, a k-independent ceiling for the
    /// fitted constant.
    pub constant_bound: f64,
}

impl RecoveryTable {
    pub fn energy_gap_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].energy_gap < w[0].energy_gap)
    }

    pub fn grad_error_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].grad_error < w[0].grad_error)
    }

    pub fn sup_bounded(&self) -> bool {
        self.fitted_constant <= self.constant_bound
    }
}

fn grad_sup(field: &dyn SmoothField, omega: &BoxDomain) -> f64 {
    let d = field.dim();
    let m: usize = if d == 1 { 4001 } else { 201 };
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; d * d];
    let mut best: f64 = 0.0;
    for k in 0..m.pow(d as u32) {
        let mut rest = k;
        for r in 0..d {
            let j = rest % m;
            rest /= m;
            x[r] = omega.lo[r] + (omega.hi[r] - omega.lo[r]) * j as f64 / (m - 1) as f64;
        }
        field.jacobian(&x, &mut g);
        best = best.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    best
}

/// `I_k(P_eps w)` against `I(w)` and the gradient recovery error along
/// `eps_seq`, on the cubic lattice in the unit cube.
pub fn recovery_check(w: &dyn SmoothField, eps_seq: &[f64], model: &ModelSpec, delta_rule: DeltaRule) -> Result<RecoveryTable> {
    let d = w.dim();
    let basis = DMatrix::identity(d, d);
    let cell_model = model.build(&basis)?;
    if cell_model.dim() != d {
        return Err(Error::InvalidSpec("model and field dimensions differ".into()));
    }
    let h = hessian_at_z(cell_model.as_ref())?;
    let z = cell_model.corner_labels().clone();
    let c = elasticity_tensor(&h, &z)?;
    let omega = BoxDomain::unit(d);
    let snap = FieldSnapshot::new(w, omega.clone(), &c);
    let energy_continuum = snap.energy();
    let mut rows = Vec::with_capacity(eps_seq.len());
    for &eps in eps_seq {
        let lattice = Lattice::new(LatticeSpec::cubic_unit(d, eps, 2.0))?;
        let delta = delta_rule.delta(eps);
        let params = EnergyParams::new(&lattice, delta, cell_model.clone())?;
        let v = project_fn(&lattice, w, 8);
        let energy_lattice = atomistic_energy(&lattice, &v, &params)?;
        let g = discrete_gradient(&lattice, &v)?;
        let sup = g.max_cell_norm();
        rows.push(RecoveryRow {
            epsilon: eps,
            delta,
            energy_lattice,
            energy_continuum,
            energy_gap: (energy_lattice - energy_continuum).abs(),
            grad_error: grad_error(&lattice, &v, &snap as &dyn Snapshot, &z)?,
            grad_sup: sup,
        });
    }
    let field_grad_sup = grad_sup(w, &omega);
    let fitted_constant = if field_grad_sup > 0.0 {
        rows.iter().fold(0.0f64, |m, r| m.max(r.grad_sup)) / field_grad_sup
    } else {
        0.0
    };
    let diam = 3.0 * (d as f64).sqrt();
    Ok(RecoveryTable {
        rows,
        field_grad_sup,
        fitted_constant,
        constant_bound: 2f64.powf(d as f64 / 2.0) * diam,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateauxRow {
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// `<dI_k(u_k(t)), P_eps v>`.
    pub lattice_value: f64,
    /// `int (grad w Z) : H : (grad v Z)`.
    pub continuum_value: f64,
    pub gap: f64,
    /// `|<dI_k(u), v_k> - (dI_k(u), v_k)_eps|`.
    pub riesz_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateauxTable {
    pub t: f64,
    pub rows: Vec<GateauxRow>,
}

impl GateauxTable {
    pub fn gap_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].gap < w[0].gap)
    }

    pub fn max_riesz_defect(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.riesz_defect / (1.0 + r.lattice_value.abs())))
    }
}

/// First variations of the lattice energies at the sweep states against the
/// continuum weak form at time `t`.
pub fn gateaux_consistency_check(outcome: &SweepOutcome, v: &dyn SmoothField, t: f64) -> Result<GateauxTable> {
    let snap = outcome.reference.snapshot(t)?;
    let continuum_value = snap.weak_form(&outcome.tensor, v);
    let mut rows = Vec::with_capacity(outcome.states.len());
    for (k, s) in outcome.states.iter().enumerate() {
        let j = s.traj.sample_at(t);
        if (s.traj.times[j] - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::InvalidConfig(format!("no lattice sample at t = {t}")));
        }
        let u = &s.traj.u[j];
        let vk = project_fn(&s.lattice, v, 8);
        let lattice_value = energy_variation(&s.lattice, u, &vk, &s.params)?;
        let force = atomistic_force(&s.lattice, u, &s.params)?;
        let riesz = inner_product_eps(&s.lattice, &force, &vk)?;
        rows.push(GateauxRow {
            k,
            epsilon: s.lattice.epsilon(),
            delta: s.params.delta,
            lattice_value,
            continuum_value,
            gap: (lattice_value - continuum_value).abs(),
            riesz_defect: (lattice_value - riesz).abs(),
        });
    }
    Ok(GateauxTable { t, rows })
}
