//! Refinement sweeps comparing lattice dynamics against the continuum limit.

mod checks;
mod report;

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell_energy::{elasticity_tensor, hessian_at_z, ElasticityTensor, ModelSpec};
use crate::continuum::{node_grid, solve_1d_spectral, solve_fd, ContinuumProblem, FdOptions, ReferenceSolution, Snapshot};
use crate::discrete_ops::{atomistic_energy, discrete_gradient, EnergyParams, ExecMode};
use crate::dynamics::{apriori_bounds, edie_audit, simulate, Integrator, SimulationConfig, Trajectory};
use crate::error::{Error, Result};
use crate::fields::{norm_eps, project_fn, LatticeField};
use crate::lattice::{BoxDomain, Lattice, LatticeSpec};
use crate::quadrature::{CubeRule, UnitRule};
use crate::smooth::{FieldSpec, SmoothField};

pub use checks::{gateaux_consistency_check, recovery_check, GateauxRow, GateauxTable, RecoveryRow, RecoveryTable};
pub use report::{read_rows_csv, read_summary, report_emit, CriterionOutcome, Environment, ReportSummary, ROWS_FILE, SUMMARY_FILE};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaRule {
    #[default]
    Equal,
    Power {
        p: f64,
    },
    Fixed {
        delta: f64,
    },
}

impl DeltaRule {
    pub fn delta(&self, eps: f64) -> f64 {
        match *self {
            DeltaRule::Equal => eps,
            DeltaRule::Power { p } => eps.powf(p),
            DeltaRule::Fixed { delta } => delta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub w0: FieldSpec,
    pub w1: FieldSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub rho: f64,
    pub nu: f64,
    pub t_end: f64,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    /// Lattice time step is `dt_factor * eps` for `rho > 0` and
    /// `dt_factor * eps^2` for `rho = 0` (diffusive scaling).
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
}

fn default_integrator() -> Integrator {
    Integrator::Rk4
}

fn default_dt_factor() -> f64 {
    0.02
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Sine modes of the 1D reference.
    #[serde(default = "default_modes")]
    pub spectral_modes: usize,
    /// Grid reference spacing is `min eps / grid_refine`.
    #[serde(default = "default_refine")]
    pub grid_refine: usize,
    /// Force the grid reference even when the exact 1D solver applies.
    #[serde(default)]
    pub force_grid: bool,
}

fn default_modes() -> usize {
    256
}

fn default_refine() -> usize {
    8
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            spectral_modes: default_modes(),
            grid_refine: default_refine(),
            force_grid: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Ceiling on the final `sup_t ac_error` relative to `|P_eps w0|_eps`.
    #[serde(default = "default_final_fraction")]
    pub final_ac_fraction: f64,
    /// Ceiling on the per-run energy ledger residual relative to its
    /// right-hand side.
    #[serde(default = "default_edie")]
    pub edie_relative: f64,
}

fn default_final_fraction() -> f64 {
    0.1
}

fn default_edie() -> f64 {
    1e-6
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            final_ac_fraction: default_final_fraction(),
            edie_relative: default_edie(),
        }
    }
}

/// Sweep over `eps_k` on the unit cube with the cubic lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub eps_seq: Vec<f64>,
    #[serde(default)]
    pub delta_rule: DeltaRule,
    pub initial_data: InitialData,
    pub model: ModelSpec,
    pub physics: Physics,
    pub sample_times: Vec<f64>,
    #[serde(default = "default_margin")]
    pub margin_cells: f64,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Upper bound on `points x steps` per run.
    #[serde(default = "default_max_work")]
    pub max_work: f64,
}

fn default_margin() -> f64 {
    2.0
}

fn default_max_work() -> f64 {
    1e10
}

impl SweepSpec {
    pub fn dim(&self) -> usize {
        self.initial_data.w0.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.eps_seq.is_empty() {
            return bad("eps_seq is empty");
        }
        if self.eps_seq.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("eps_seq entries must be positive");
        }
        if self.eps_seq.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps_seq must be strictly decreasing");
        }
        if self.eps_seq.iter().any(|e| !(self.delta_rule.delta(*e) > 0.0)) {
            return bad("delta rule yields a nonpositive delta");
        }
        if self.initial_data.w1.dim() != self.dim() {
            return bad("w0 and w1 differ in dimension");
        }
        if !self.initial_data.w0.compactly_supported_in_unit_cube() || !self.initial_data.w1.compactly_supported_in_unit_cube() {
            return bad("initial data must vanish on the boundary of the unit cube");
        }
        if !(self.physics.dt_factor > 0.0) {
            return bad("dt_factor must be positive");
        }
        let t_end = self.physics.t_end;
        if self.sample_times.iter().any(|t| !(*t >= 0.0 && *t <= t_end * (1.0 + 1e-12))) {
            return bad("sample times must lie in [0, t_end]");
        }
        Ok(())
    }

    /// Sample times with `0` added, sorted and deduplicated.
    pub fn times(&self) -> Vec<f64> {
        let mut t = self.sample_times.clone();
        t.push(0.0);
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * self.physics.t_end);
        t
    }

    fn lattice_spec(&self, eps: f64) -> LatticeSpec {
        LatticeSpec::cubic_unit(self.dim(), eps, self.margin_cells)
    }
}

/// Errors at one `(k, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub t: f64,
    pub ac_error: f64,
    pub energy_lattice: f64,
    pub energy_continuum: f64,
    pub energy_error: f64,
    pub grad_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub dt: f64,
    pub num_points: usize,
    pub rows: Vec<SampleRow>,
    pub sup_ac_error: f64,
    /// `|P_eps w0|_eps`.
    pub data_norm: f64,
    pub edie_residual: f64,
    pub apriori_hold: bool,
    /// Lattice energy nonincreasing over the run (relevant for `rho = 0`).
    pub energy_nonincreasing: bool,
    pub aborted_at: Option<f64>,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceInfo {
    /// `spectral` or `grid`.
    pub kind: String,
    /// Mode count or grid spacing.
    pub resolution: f64,
    pub dt: Option<f64>,
    pub edie_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub spec: SweepSpec,
    pub reference: ReferenceInfo,
    pub entries: Vec<SweepEntry>,
}

impl ConvergenceReport {
    pub fn rows(&self) -> impl Iterator<Item = &SampleRow> {
        self.entries.iter().flat_map(|e| e.rows.iter())
    }

    pub fn sup_ac_strictly_decreasing(&self) -> bool {
        strictly_decreasing(self.entries.iter().map(|e| e.sup_ac_error))
    }

    /// Final `sup_t ac_error` relative to the final data norm.
    pub fn final_ac_fraction(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| if e.data_norm > 0.0 { e.sup_ac_error / e.data_norm } else { e.sup_ac_error })
    }

    fn per_time_decreasing(&self, f: impl Fn(&SampleRow) -> f64) -> bool {
        let n = self.entries.first().map_or(0, |e| e.rows.len());
        (0..n).all(|j| strictly_decreasing(self.entries.iter().map(|e| f(&e.rows[j]))))
    }

    pub fn energy_strictly_decreasing(&self) -> bool {
        self.per_time_decreasing(|r| r.energy_error)
    }

    pub fn grad_strictly_decreasing(&self) -> bool {
        self.per_time_decreasing(|r| r.grad_error)
    }

    pub fn max_edie_residual(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.edie_residual))
    }

    pub fn apriori_hold(&self) -> bool {
        self.entries.iter().all(|e| e.apriori_hold)
    }

    pub fn energy_nonincreasing(&self) -> bool {
        self.entries.iter().all(|e| e.energy_nonincreasing)
    }

    /// Named pass/fail outcomes of the sweep assertions.
    pub fn assertions(&self) -> Vec<CriterionOutcome> {
        let tol = &self.spec.tolerances;
        let mut out = vec![
            CriterionOutcome::new("sup_ac_error_decreasing", self.sup_ac_strictly_decreasing(), self.entries.iter().map(|e| e.sup_ac_error).collect()),
            CriterionOutcome::new("final_ac_below_ceiling", self.final_ac_fraction() < tol.final_ac_fraction, vec![self.final_ac_fraction(), tol.final_ac_fraction]),
            CriterionOutcome::new("energy_error_decreasing", self.energy_strictly_decreasing(), self.rows().map(|r| r.energy_error).collect()),
            CriterionOutcome::new("grad_error_decreasing", self.grad_strictly_decreasing(), self.rows().map(|r| r.grad_error).collect()),
            CriterionOutcome::new("edie_residual", self.max_edie_residual() <= tol.edie_relative, vec![self.max_edie_residual(), tol.edie_relative]),
            CriterionOutcome::new("apriori_bounds", self.apriori_hold(), vec![]),
        ];
        if self.spec.physics.rho == 0.0 {
            out.push(CriterionOutcome::new("energy_nonincreasing", self.energy_nonincreasing(), vec![]));
        }
        out
    }
}

fn strictly_decreasing(it: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = it.collect();
    v.windows(2).all(|w| w[1] < w[0])
}

/// Lattice state of one sweep entry, kept for follow-up checks.
pub struct SweepState {
    pub lattice: Lattice,
    pub params: EnergyParams,
    pub traj: Trajectory,
}

/// Sweep report together with the states and the continuum reference.
pub struct SweepOutcome {
    pub report: ConvergenceReport,
    pub states: Vec<SweepState>,
    pub reference: Box<dyn ReferenceSolution>,
    pub tensor: ElasticityTensor,
    pub hessian: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<ConvergenceReport> {
    Ok(run_sweep_with_states(spec)?.report)
}

pub fn run_sweep_with_states(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let d = spec.dim();
    let identity = DMatrix::identity(d, d);
    let model = spec.model.build(&identity)?;
    let hessian = hessian_at_z(model.as_ref())?;
    let z = model.corner_labels().clone();
    let tensor = elasticity_tensor(&hessian, &z)?;
    let times = spec.times();
    let w0: Arc<dyn SmoothField> = spec.initial_data.w0.build().into();
    let w1: Arc<dyn SmoothField> = spec.initial_data.w1.build().into();
    let problem = ContinuumProblem {
        c: tensor.clone(),
        rho: spec.physics.rho,
        nu: spec.physics.nu,
        omega: BoxDomain::unit(d),
        w0: w0.clone(),
        w1: w1.clone(),
        t_end: spec.physics.t_end,
    };

    let eps_min = *spec.eps_seq.last().unwrap();
    let (reference, info): (Box<dyn ReferenceSolution>, ReferenceInfo) = if d == 1 && !spec.reference.force_grid {
        let sol = solve_1d_spectral(&problem, spec.reference.spectral_modes)?;
        let info = ReferenceInfo {
            kind: "spectral".into(),
            resolution: spec.reference.spectral_modes as f64,
            dt: None,
            edie_residual: None,
        };
        (Box::new(sol), info)
    } else {
        let h = eps_min / spec.reference.grid_refine as f64;
        let nodes = node_grid(&problem.omega, h)?.len();
        if nodes as f64 > 2e7 {
            return Err(Error::BudgetExceeded(format!("reference grid with {nodes} nodes")));
        }
        let integrator = if spec.physics.rho == 0.0 { Integrator::Rk4 } else { spec.physics.integrator };
        let mut opts = FdOptions::new(h);
        opts.integrator = if integrator == Integrator::ViscousImplicit { Integrator::Rk4 } else { integrator };
        opts.sample_times = times.clone();
        let sol = solve_fd(&problem, &opts)?;
        let info = ReferenceInfo {
            kind: "grid".into(),
            resolution: h,
            dt: Some(sol.dt),
            edie_residual: Some(sol.edie_residual()),
        };
        (Box::new(sol), info)
    };

    let runs: Vec<Result<(SweepEntry, SweepState)>> = spec
        .eps_seq
        .par_iter()
        .enumerate()
        .map(|(k, &eps)| run_entry(spec, k, eps, &model, &times, w0.as_ref(), w1.as_ref(), reference.as_ref(), &z))
        .collect();
    let mut entries = Vec::with_capacity(runs.len());
    let mut states = Vec::with_capacity(runs.len());
    for r in runs {
        let (e, s) = r?;
        entries.push(e);
        states.push(s);
    }
    Ok(SweepOutcome {
        report: ConvergenceReport {
            spec: spec.clone(),
            reference: info,
            entries,
        },
        states,
        reference,
        tensor,
        hessian,
        z,
    })
}

/// Smallest `m` such that every sample time is a multiple of `t_end / m`.
fn time_grid(times: &[f64], t_end: f64) -> Result<usize> {
    (1..=100_000)
        .find(|&m| {
            times.iter().all(|t| {
                let s = t / t_end * m as f64;
                (s - s.round()).abs() <= 1e-9 * s.max(1.0)
            })
        })
        .ok_or_else(|| Error::InvalidSpec("sample times are not commensurate with t_end".into()))
}

#[allow(clippy::too_many_arguments)]
fn run_entry(
    spec: &SweepSpec,
    k: usize,
    eps: f64,
    model: &Arc<dyn crate::cell_energy::CellEnergy>,
    times: &[f64],
    w0: &dyn SmoothField,
    w1: &dyn SmoothField,
    reference: &dyn ReferenceSolution,
    z: &DMatrix<f64>,
) -> Result<(SweepEntry, SweepState)> {
    let start = Instant::now();
    let lattice = Lattice::new(spec.lattice_spec(eps))?;
    let delta = spec.delta_rule.delta(eps);
    let params = EnergyParams::new(&lattice, delta, model.clone())?.with_mode(ExecMode::Fast);
    let ph = &spec.physics;
    let m = time_grid(times, ph.t_end)?;
    let dt = if ph.rho == 0.0 { ph.dt_factor * eps * eps } else { ph.dt_factor * eps };
    let raw = (ph.t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let steps = raw.div_ceil(m) * m;
    let work = (lattice.num_points() * steps) as f64;
    if work > spec.max_work {
        return Err(Error::BudgetExceeded(format!("{work:e} point-steps at eps = {eps}")));
    }
    let mut cfg = SimulationConfig::new(ph.rho, ph.nu, ph.t_end / steps as f64, ph.t_end, ph.integrator);
    cfg.sample_every = steps / m;
    let u0 = project_fn(&lattice, w0, 8);
    let u1 = if ph.rho == 0.0 { LatticeField::zeros(&lattice) } else { project_fn(&lattice, w1, 8) };
    let traj = simulate(&lattice, &params, &cfg, &u0, &u1)?;
    let ledger = edie_audit(&traj)?;
    let apriori = apriori_bounds(&ledger);

    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let j = traj.sample_at(t);
        if (traj.times[j] - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::InvalidConfig(format!("no lattice sample at t = {t}")));
        }
        let snap = reference.snapshot(t)?;
        let u = &traj.u[j];
        let proj = project_snapshot(&lattice, snap.as_ref())?;
        let ac_error = norm_eps(&lattice, &u.sub(&proj)?)?;
        let energy_lattice = atomistic_energy(&lattice, u, &params)?;
        let energy_continuum = snap.energy();
        let grad_error = grad_error(&lattice, u, snap.as_ref(), z)?;
        rows.push(SampleRow {
            k,
            epsilon: eps,
            delta,
            t,
            ac_error,
            energy_lattice,
            energy_continuum,
            energy_error: (energy_lattice - energy_continuum).abs(),
            grad_error,
        });
    }
    let e0 = traj.nodes.first().map_or(0.0, |n| n.energy);
    let energy_nonincreasing = traj.nodes.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-13 * e0.abs().max(1e-300));
    let entry = SweepEntry {
        k,
        epsilon: eps,
        delta,
        dt: traj.dt,
        num_points: lattice.num_points(),
        sup_ac_error: rows.iter().fold(0.0, |m, r| m.max(r.ac_error)),
        rows,
        data_norm: norm_eps(&lattice, &u0)?,
        edie_residual: ledger.max_relative_residual(),
        apriori_hold: apriori.all_hold,
        energy_nonincreasing,
        aborted_at: traj.aborted_at,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    Ok((entry, SweepState { lattice, params, traj }))
}

/// Axis-aligned box `Q_eps(x) = x + eps [0, 1)^d` of the cell with lower
/// corner `x`.
fn cell_box(lattice: &Lattice, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if !lattice.is_axis_aligned() {
        return Err(Error::QuadratureMisalignment("lattice cells are not axis-aligned".into()));
    }
    let eps = lattice.epsilon();
    let a = lattice.basis();
    let hi = x.iter().enumerate().map(|(r, xr)| xr + eps * a[(r, r)]).collect();
    Ok((x.to_vec(), hi))
}

/// `P_eps w` for a frozen continuum solution, zero outside `Omega`.
pub fn project_snapshot(lattice: &Lattice, snap: &dyn Snapshot) -> Result<LatticeField> {
    let d = lattice.dim();
    let mut out = LatticeField::zeros(lattice);
    for p in 0..lattice.num_points() {
        if !lattice.in_omega(p) {
            continue;
        }
        let (lo, hi) = cell_box(lattice, lattice.point(p))?;
        let m = snap.cell_mean(&lo, &hi)?;
        out.at_mut(p)[..d].copy_from_slice(&m);
    }
    Ok(out)
}

/// `|grad u - mean(grad w) Z|_{L2}` with both sides constant per cell.
pub fn grad_error(lattice: &Lattice, u: &LatticeField, snap: &dyn Snapshot, z: &DMatrix<f64>) -> Result<f64> {
    let d = lattice.dim();
    let nc = lattice.num_corners();
    let g = discrete_gradient(lattice, u)?;
    let mut sum = 0.0;
    for c in 0..lattice.num_cells() {
        let corner = lattice.cell_corners(c)[0] as usize;
        let (lo, hi) = cell_box(lattice, lattice.point(corner))?;
        let gw = snap.grad_cell_mean(&lo, &hi)?;
        let gu = g.cell(c);
        for j in 0..nc {
            for r in 0..d {
                let wz: f64 = (0..d).map(|q| gw[r * d + q] * z[(q, j)]).sum();
                let diff = gu[r + d * j] - wz;
                sum += diff * diff;
            }
        }
    }
    Ok((lattice.cell_volume() * sum).sqrt())
}

/// A closed-form field seen as a time-independent continuum snapshot on
/// `Omega`, with cell means by tensor Gauss quadrature.
pub struct FieldSnapshot<'a> {
    pub field: &'a dyn SmoothField,
    pub omega: BoxDomain,
    pub c: &'a ElasticityTensor,
    rule: CubeRule,
}

impl<'a> FieldSnapshot<'a> {
    pub fn new(field: &'a dyn SmoothField, omega: BoxDomain, c: &'a ElasticityTensor) -> Self {
        let rule = CubeRule::gauss(field.dim(), 8);
        Self { field, omega, c, rule }
    }

    fn mean(&self, lo: &[f64], hi: &[f64], comps: usize, f: impl Fn(&[f64], &mut [f64])) -> Vec<f64> {
        let d = lo.len();
        let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
        let mut acc = vec![0.0; comps];
        let Some((l, u)) = crate::continuum::clip_box(&self.omega, lo, hi) else {
            return acc;
        };
        let sub: f64 = l.iter().zip(&u).map(|(a, b)| b - a).product();
        let mut x = vec![0.0; d];
        let mut val = vec![0.0; comps];
        for (s, w) in self.rule.points.iter().zip(&self.rule.weights) {
            for r in 0..d {
                x[r] = l[r] + (u[r] - l[r]) * s[r];
            }
            f(&x, &mut val);
            acc.iter_mut().zip(&val).for_each(|(a, v)| *a += w * v);
        }
        acc.iter_mut().for_each(|a| *a *= sub / vol);
        acc
    }
}

impl Snapshot for FieldSnapshot<'_> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn cell_mean(&self, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mean(lo, hi, self.dim(), |x, o| self.field.eval(x, o)))
    }

    fn grad_cell_mean(&self, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        Ok(self.mean(lo, hi, d * d, |x, o| self.field.jacobian(x, o)))
    }

    fn energy(&self) -> f64 {
        let d = self.dim();
        let rule = CubeRule::new(d, &UnitRule::composite(6, if d == 1 { 128 } else { 32 }));
        let mut x = vec![0.0; d];
        let mut g = vec![0.0; d * d];
        let mut sum = 0.0;
        for (s, w) in rule.points.iter().zip(&rule.weights) {
            for r in 0..d {
                x[r] = self.omega.lo[r] + (self.omega.hi[r] - self.omega.lo[r]) * s[r];
            }
            self.field.jacobian(&x, &mut g);
            sum += w * self.c.contract(&g, &g);
        }
        0.5 * sum * self.omega.volume()
    }

    fn weak_form(&self, c: &ElasticityTensor, v: &dyn SmoothField) -> f64 {
        let d = self.dim();
        let rule = CubeRule::new(d, &UnitRule::composite(6, if d == 1 { 128 } else { 32 }));
        let mut x = vec![0.0; d];
        let mut g = vec![0.0; d * d];
        let mut gv = vec![0.0; d * d];
        let mut sum = 0.0;
        for (s, w) in rule.points.iter().zip(&rule.weights) {
            for r in 0..d {
                x[r] = self.omega.lo[r] + (self.omega.hi[r] - self.omega.lo[r]) * s[r];
            }
            self.field.jacobian(&x, &mut g);
            v.jacobian(&x, &mut gv);
            sum += w * c.contract(&g, &gv);
        }
        sum * self.omega.volume()
    }
}

/// Default 1D sweep: harmonic chain, `delta = eps` in `{1/16, 1/32, 1/64}`.
pub fn default_sweep_1d(rho: f64) -> SweepSpec {
    SweepSpec {
        eps_seq: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
        delta_rule: DeltaRule::Equal,
        initial_data: InitialData {
            w0: FieldSpec::Bump {
                amplitude: vec![1.0],
                center: vec![0.5],
                radius: 0.4,
                power: 6,
                sine_mode: Some(1),
            },
            w1: FieldSpec::Bump {
                amplitude: vec![0.5],
                center: vec![0.5],
                radius: 0.3,
                power: 6,
                sine_mode: None,
            },
        },
        model: ModelSpec::HarmonicChain { k: 1.0 },
        physics: Physics {
            rho,
            nu: 1.0,
            t_end: 0.5,
            integrator: Integrator::Rk4,
            dt_factor: 0.02,
        },
        sample_times: vec![0.125, 0.25, 0.375, 0.5],
        margin_cells: 2.0,
        reference: ReferenceSpec::default(),
        tolerances: Tolerances::default(),
        max_work: default_max_work(),
    }
}

/// Two-point 2D sweep with the Cauchy-Born split model.
pub fn default_sweep_2d() -> SweepSpec {
    SweepSpec {
        eps_seq: vec![1.0 / 8.0, 1.0 / 16.0],
        delta_rule: DeltaRule::Equal,
        initial_data: InitialData {
            w0: FieldSpec::Bump {
                amplitude: vec![0.3, -0.2],
                center: vec![0.5, 0.5],
                radius: 0.4,
                power: 6,
                sine_mode: None,
            },
            w1: FieldSpec::Zero { dim: 2 },
        },
        model: ModelSpec::CauchyBornSplit { mu: 0.5, k: 1.0 },
        physics: Physics {
            rho: 1.0,
            nu: 1.0,
            t_end: 0.25,
            integrator: Integrator::Rk4,
            dt_factor: 0.05,
        },
        sample_times: vec![0.125, 0.25],
        margin_cells: 2.0,
        reference: ReferenceSpec { grid_refine: 16, ..ReferenceSpec::default() },
        tolerances: Tolerances {
            final_ac_fraction: 0.25,
            edie_relative: 1e-6,
        },
        max_work: default_max_work(),
    }
}
