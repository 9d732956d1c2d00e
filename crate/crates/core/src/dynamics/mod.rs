//! Time integration of `rho u'' + nu u' + dI(u) = 0` and of the viscous
//! flow `nu u' = -dI(u)`, with a per-step energy ledger.

mod io;
mod ledger;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell_energy::ModelMetadata;
use crate::discrete_ops::{atomistic_energy, atomistic_force_into, EnergyParams};
use crate::error::{Error, Result};
use crate::fields::{norm_eps, LatticeField};
use crate::lattice::{Lattice, LatticeSpec};

pub use io::{read_trajectory_binary, write_ledger_csv, write_trajectory_binary, Sample, TrajectoryHeader};
pub use ledger::{apriori_bounds, edie_audit, edie_audit_sampled, AprioriReport, BoundCheck, EdieLedger, LedgerRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    SemiImplicitEuler,
    ViscousExplicit,
    ViscousImplicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub rho: f64,
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Reject `dt` above the estimated stability bound before stepping.
    #[serde(default = "default_true")]
    pub enforce_stability: bool,
    #[serde(default = "default_implicit_iters")]
    pub max_implicit_iters: usize,
    /// Return an error on blow-up; otherwise stop and keep the partial run.
    #[serde(default = "default_true")]
    pub abort_on_instability: bool,
}

fn default_integrator() -> Integrator {
    Integrator::Rk4
}
fn default_sample_every() -> usize {
    10
}
fn default_true() -> bool {
    true
}
fn default_implicit_iters() -> usize {
    50
}

impl SimulationConfig {
    pub fn new(rho: f64, nu: f64, dt: f64, t_end: f64, integrator: Integrator) -> Self {
        Self {
            rho,
            nu,
            dt,
            t_end,
            integrator,
            sample_every: default_sample_every(),
            enforce_stability: true,
            max_implicit_iters: default_implicit_iters(),
            abort_on_instability: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be nonnegative, got {}", self.rho));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("dt and t_end must be positive".into());
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        match self.integrator {
            Integrator::SemiImplicitEuler if self.rho == 0.0 => {
                bad("semi_implicit_euler needs rho > 0".into())
            }
            Integrator::ViscousExplicit | Integrator::ViscousImplicit if self.rho != 0.0 => {
                bad("viscous integrators need rho = 0".into())
            }
            _ => Ok(()),
        }
    }

    /// Number of steps and the step actually used (`t_end / steps`).
    pub fn steps(&self) -> (usize, f64) {
        let n = ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

/// Sampled solution with its per-step energy ledger.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub lattice: LatticeSpec,
    pub lattice_id: u64,
    pub config: SimulationConfig,
    pub delta: f64,
    pub model: ModelMetadata,
    /// Step actually taken.
    pub dt: f64,
    pub times: Vec<f64>,
    pub u: Vec<LatticeField>,
    pub v: Vec<LatticeField>,
    /// Per-step quantities for the energy ledger (empty if not recorded).
    pub nodes: Vec<LedgerNode>,
    /// Time of a detected blow-up when the run was kept instead of aborted.
    pub aborted_at: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the sample closest to `t`.
    pub fn sample_at(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map_or(0, |(k, _)| k)
    }
}

/// Quantities recorded at every step `t_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerNode {
    pub t: f64,
    /// `|u'|_eps^2`.
    pub velocity_sq: f64,
    pub energy: f64,
    /// `|rho a + dI(u)|_eps^2` with `a` from differences of `v`.
    pub residual_fd_sq: f64,
}

/// Force evaluator with reusable storage.
struct Rhs<'a> {
    lattice: &'a Lattice,
    params: &'a EnergyParams,
    buf: LatticeField,
}

impl<'a> Rhs<'a> {
    fn new(lattice: &'a Lattice, params: &'a EnergyParams) -> Self {
        Self {
            lattice,
            params,
            buf: LatticeField::zeros(lattice),
        }
    }

    fn force(&mut self, u: &LatticeField) -> Result<LatticeField> {
        atomistic_force_into(self.lattice, u, self.params, &mut self.buf)?;
        Ok(self.buf.clone())
    }
}

fn lincomb(base: &LatticeField, terms: &[(f64, &LatticeField)]) -> LatticeField {
    let mut out = base.clone();
    for (a, f) in terms {
        out.axpy(*a, f);
    }
    out
}

/// Time derivative of the first-order system at `(u, v)`, given `f = dI(u)`.
fn accel(cfg: &SimulationConfig, v: &LatticeField, f: &LatticeField) -> LatticeField {
    let mut a = f.clone();
    a.axpy(cfg.nu, v);
    a.scale(-1.0 / cfg.rho);
    a
}

/// Gradient-flow velocity `-dI(u) / nu`.
fn flow(cfg: &SimulationConfig, f: &LatticeField) -> LatticeField {
    let mut v = f.clone();
    v.scale(-1.0 / cfg.nu);
    v
}

fn l2(u: &LatticeField) -> f64 {
    u.values().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One advance of `(u, v)` by `dt`, given `f0 = dI(u)`. Viscous schemes
/// return no velocity; the caller derives it from the new force.
fn advance(
    rhs: &mut Rhs,
    cfg: &SimulationConfig,
    dt: f64,
    u: &LatticeField,
    v: &LatticeField,
    f0: &LatticeField,
) -> Result<(LatticeField, Option<LatticeField>)> {
    let viscous = cfg.rho == 0.0;
    match cfg.integrator {
        Integrator::Rk4 if viscous => {
            let k1 = flow(cfg, f0);
            let k2 = flow(cfg, &rhs.force(&lincomb(u, &[(0.5 * dt, &k1)]))?);
            let k3 = flow(cfg, &rhs.force(&lincomb(u, &[(0.5 * dt, &k2)]))?);
            let k4 = flow(cfg, &rhs.force(&lincomb(u, &[(dt, &k3)]))?);
            let un = lincomb(u, &[(dt / 6.0, &k1), (dt / 3.0, &k2), (dt / 3.0, &k3), (dt / 6.0, &k4)]);
            Ok((un, None))
        }
        Integrator::Rk4 => {
            let a1 = accel(cfg, v, f0);
            let u2 = lincomb(u, &[(0.5 * dt, v)]);
            let v2 = lincomb(v, &[(0.5 * dt, &a1)]);
            let a2 = accel(cfg, &v2, &rhs.force(&u2)?);
            let u3 = lincomb(u, &[(0.5 * dt, &v2)]);
            let v3 = lincomb(v, &[(0.5 * dt, &a2)]);
            let a3 = accel(cfg, &v3, &rhs.force(&u3)?);
            let u4 = lincomb(u, &[(dt, &v3)]);
            let v4 = lincomb(v, &[(dt, &a3)]);
            let a4 = accel(cfg, &v4, &rhs.force(&u4)?);
            let un = lincomb(u, &[(dt / 6.0, v), (dt / 3.0, &v2), (dt / 3.0, &v3), (dt / 6.0, &v4)]);
            let vn = lincomb(v, &[(dt / 6.0, &a1), (dt / 3.0, &a2), (dt / 3.0, &a3), (dt / 6.0, &a4)]);
            Ok((un, Some(vn)))
        }
        Integrator::SemiImplicitEuler => {
            let mut vn = lincomb(v, &[(-dt / cfg.rho, f0)]);
            vn.scale(1.0 / (1.0 + dt * cfg.nu / cfg.rho));
            let un = lincomb(u, &[(dt, &vn)]);
            Ok((un, Some(vn)))
        }
        Integrator::ViscousExplicit => {
            Ok((lincomb(u, &[(-dt / cfg.nu, f0)]), None))
        }
        Integrator::ViscousImplicit => {
            Ok((implicit_euler(rhs, cfg, dt, u, f0)?, None))
        }
    }
}

/// Solves `nu (x - u) / dt + dI(x) = 0` by Newton's method with conjugate
/// gradients on difference-quotient Jacobian products.
fn implicit_euler(
    rhs: &mut Rhs,
    cfg: &SimulationConfig,
    dt: f64,
    u: &LatticeField,
    f0: &LatticeField,
) -> Result<LatticeField> {
    let shift = cfg.nu / dt;
    let residual = |x: &LatticeField, fx: &LatticeField| {
        let mut r = x.sub(u).expect("same lattice");
        r.scale(shift);
        r.axpy(1.0, fx);
        r
    };
    let scale = shift * l2(u) + l2(f0);
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let lattice = rhs.lattice;
    let mut x = u.clone();
    let mut fx = f0.clone();
    let mut r = residual(&x, &fx);
    let mut rn = l2(&r);
    for _ in 0..cfg.max_implicit_iters {
        if rn <= tol {
            return Ok(x);
        }
        // J w = shift w + (dI(x + h w) - dI(x - h w)) / 2h.
        let xn = l2(&x);
        let mut jv = |w: &LatticeField| -> Result<LatticeField> {
            let wn = l2(w);
            if wn == 0.0 {
                return Ok(w.clone());
            }
            let h = 1e-6 * (1.0 + xn) / wn;
            let fp = rhs.force(&lincomb(&x, &[(h, w)]))?;
            let fm = rhs.force(&lincomb(&x, &[(-h, w)]))?;
            let mut out = fp.sub(&fm)?;
            out.scale(0.5 / h);
            out.axpy(shift, w);
            Ok(out)
        };
        // CG on J s = -r.
        let mut s = LatticeField::zeros(lattice);
        let mut res = r.clone();
        res.scale(-1.0);
        let mut p = res.clone();
        let mut rr: f64 = res.values().iter().map(|a| a * a).sum();
        let cg_tol = (1e-3 * tol).powi(2).max(rr * 1e-26);
        for _ in 0..(4 * lattice.num_points()).max(50) {
            if rr <= cg_tol {
                break;
            }
            let jp = jv(&p)?;
            let pjp: f64 = p.values().iter().zip(jp.values()).map(|(a, b)| a * b).sum();
            if pjp <= 0.0 {
                break;
            }
            let alpha = rr / pjp;
            s.axpy(alpha, &p);
            res.axpy(-alpha, &jp);
            let rr_new: f64 = res.values().iter().map(|a| a * a).sum();
            let beta = rr_new / rr;
            rr = rr_new;
            p = lincomb(&res, &[(beta, &p)]);
        }
        x.axpy(1.0, &s);
        fx = rhs.force(&x)?;
        r = residual(&x, &fx);
        rn = l2(&r);
    }
    if rn <= tol {
        Ok(x)
    } else {
        Err(Error::ImplicitSolveFailed {
            iterations: cfg.max_implicit_iters,
            residual: rn / scale.max(f64::MIN_POSITIVE),
        })
    }
}

/// Largest eigenvalue of the force linearized at `u0`, by power iteration
/// with a Rayleigh-quotient readout.
pub fn estimate_lambda_max(lattice: &Lattice, u0: &LatticeField, params: &EnergyParams, iters: usize) -> Result<f64> {
    let mut rhs = Rhs::new(lattice, params);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut w = LatticeField::from_fn(lattice, |_| (0..lattice.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let un = l2(u0);
    let mut lambda: f64 = 0.0;
    for _ in 0..iters {
        let wn = l2(&w);
        if wn == 0.0 {
            return Ok(0.0);
        }
        w.scale(1.0 / wn);
        let h = 1e-6 * (1.0 + un);
        let fp = rhs.force(&lincomb(u0, &[(h, &w)]))?;
        let fm = rhs.force(&lincomb(u0, &[(-h, &w)]))?;
        let mut kw = fp.sub(&fm)?;
        kw.scale(0.5 / h);
        let rq: f64 = w.values().iter().zip(kw.values()).map(|(a, b)| a * b).sum();
        lambda = lambda.max(rq);
        w = kw;
    }
    Ok(lambda)
}

/// Largest stable step for the configured integrator, given `lambda_max`.
pub fn stability_bound(cfg: &SimulationConfig, lambda_max: f64) -> f64 {
    let lam = lambda_max.max(f64::MIN_POSITIVE);
    match (cfg.integrator, cfg.rho == 0.0) {
        (Integrator::ViscousImplicit, _) => f64::INFINITY,
        (Integrator::ViscousExplicit, _) => 1.8 * cfg.nu / lam,
        (Integrator::Rk4, true) => 2.5 * cfg.nu / lam,
        (_, false) => {
            let omega = (lam / cfg.rho).sqrt();
            (0.5 / omega).min(2.5 * cfg.rho / cfg.nu)
        }
        (Integrator::SemiImplicitEuler, true) => unreachable!("rejected by validate"),
    }
}

/// Advances one step; for `rho = 0`, `v` is ignored on input.
pub fn step(
    lattice: &Lattice,
    params: &EnergyParams,
    cfg: &SimulationConfig,
    u: &LatticeField,
    v: &LatticeField,
) -> Result<(LatticeField, LatticeField)> {
    cfg.validate()?;
    let mut rhs = Rhs::new(lattice, params);
    let f0 = rhs.force(u)?;
    let (un, vn) = advance(&mut rhs, cfg, cfg.dt, u, v, &f0)?;
    let vn = match vn {
        Some(vn) => vn,
        None => flow(cfg, &rhs.force(&un)?),
    };
    Ok((un, vn))
}

/// One step of the viscous flow (`rho = 0`).
pub fn step_viscous(
    lattice: &Lattice,
    params: &EnergyParams,
    cfg: &SimulationConfig,
    u: &LatticeField,
) -> Result<LatticeField> {
    if cfg.rho != 0.0 {
        return Err(Error::InvalidConfig("step_viscous needs rho = 0".into()));
    }
    let zero = LatticeField::zeros(lattice);
    Ok(step(lattice, params, cfg, u, &zero)?.0)
}

/// Integrates from `(u0, u1)` to `t_end`, sampling every `sample_every`
/// steps plus the final time.
pub fn simulate(
    lattice: &Lattice,
    params: &EnergyParams,
    cfg: &SimulationConfig,
    u0: &LatticeField,
    u1: &LatticeField,
) -> Result<Trajectory> {
    cfg.validate()?;
    u0.check(lattice)?;
    u1.check(lattice)?;
    if !u0.is_admissible(lattice) || !u1.is_admissible(lattice) {
        return Err(Error::InvalidConfig("initial data must vanish outside Omega".into()));
    }
    let (steps, dt) = cfg.steps();
    if cfg.enforce_stability && cfg.integrator != Integrator::ViscousImplicit {
        let lam = estimate_lambda_max(lattice, u0, params, 200)?;
        let bound = stability_bound(cfg, lam * 1.05);
        if dt > bound {
            return Err(Error::CflViolation { dt, bound });
        }
    }
    let viscous = cfg.rho == 0.0;
    let mut rhs = Rhs::new(lattice, params);
    let mut u = u0.clone();
    let mut f = rhs.force(&u)?;
    let mut v = if viscous { flow(cfg, &f) } else { u1.clone() };

    let scale = l2(u0).max(l2(u1)).max(l2(&v) * cfg.t_end).max(1e-300);
    let limit = 1e6 * scale;
    let vlimit = 1e6 * l2(u0).max(l2(u1)).max(l2(&v)).max(1e-300);

    let mut traj = Trajectory {
        lattice: lattice.spec().clone(),
        lattice_id: lattice.id(),
        config: cfg.clone(),
        delta: params.delta,
        model: params.model.metadata(),
        dt,
        times: vec![0.0],
        u: vec![u.clone()],
        v: vec![v.clone()],
        nodes: Vec::with_capacity(steps + 1),
        aborted_at: None,
    };
    let mut window = Window::new(lattice.cell_volume(), cfg.rho, dt);
    window.push(0, v.clone(), f.clone(), atomistic_energy(lattice, &u, params)?);
    for n in 1..=steps {
        let (un, vn) = advance(&mut rhs, cfg, dt, &u, &v, &f)?;
        let t = n as f64 * dt;
        let fn_ = rhs.force(&un)?;
        let vn = vn.unwrap_or_else(|| flow(cfg, &fn_));
        let (nu_, nv_) = (l2(&un), l2(&vn));
        let blown = if !nu_.is_finite() || nu_ > limit {
            Some((nu_, limit))
        } else if !nv_.is_finite() || nv_ > vlimit {
            Some((nv_, vlimit))
        } else {
            None
        };
        if let Some((norm, limit)) = blown {
            if cfg.abort_on_instability {
                return Err(Error::Instability { time: t, norm, limit });
            }
            // Keep what was computed up to the previous step.
            traj.aborted_at = Some(t);
            let last = n - 1;
            if traj.times.last() != Some(&((last as f64) * dt)) {
                traj.times.push(last as f64 * dt);
                traj.u.push(u.clone());
                traj.v.push(v.clone());
            }
            if last == 1 {
                traj.nodes.push(window.node(0, Stencil::Forward));
            }
            traj.nodes.push(window.node(last, Stencil::Backward));
            return Ok(traj);
        }
        u = un;
        v = vn;
        f = fn_;
        window.push(n, v.clone(), f.clone(), atomistic_energy(lattice, &u, params)?);
        if n == 2 || (n == 1 && steps == 1) {
            traj.nodes.push(window.node(0, Stencil::Forward));
        }
        if n >= 2 {
            traj.nodes.push(window.node(n - 1, Stencil::Central));
        }
        if n % cfg.sample_every == 0 || n == steps {
            traj.times.push(t);
            traj.u.push(u.clone());
            traj.v.push(v.clone());
        }
    }
    traj.nodes.push(window.node(steps, Stencil::Backward));
    Ok(traj)
}

#[derive(Clone, Copy)]
enum Stencil {
    Forward,
    Central,
    Backward,
}

/// The last three `(v, dI(u), I(u))` step values, for second-order
/// differences of `v`.
struct Window {
    weight: f64,
    rho: f64,
    dt: f64,
    entries: std::collections::VecDeque<(usize, LatticeField, LatticeField, f64)>,
}

impl Window {
    fn new(weight: f64, rho: f64, dt: f64) -> Self {
        Self {
            weight,
            rho,
            dt,
            entries: Default::default(),
        }
    }

    fn push(&mut self, n: usize, v: LatticeField, f: LatticeField, e: f64) {
        self.entries.push_back((n, v, f, e));
        if self.entries.len() > 3 {
            self.entries.pop_front();
        }
    }

    fn get(&self, n: usize) -> Option<&(usize, LatticeField, LatticeField, f64)> {
        self.entries.iter().find(|e| e.0 == n)
    }

    fn node(&self, n: usize, stencil: Stencil) -> LedgerNode {
        let (_, v, f, e) = self.get(n).expect("node in window");
        let at = |m: usize| &self.get(m).expect("neighbour in window").1;
        let terms: Vec<(f64, &LatticeField)> = match stencil {
            Stencil::Central => vec![(0.5, at(n + 1)), (-0.5, at(n - 1))],
            Stencil::Forward if self.get(n + 2).is_some() => vec![(-1.5, v), (2.0, at(n + 1)), (-0.5, at(n + 2))],
            Stencil::Forward => vec![(-1.0, v), (1.0, at(n + 1))],
            Stencil::Backward if n >= 2 => vec![(1.5, v), (-2.0, at(n - 1)), (0.5, at(n - 2))],
            Stencil::Backward if n == 1 => vec![(1.0, v), (-1.0, at(0))],
            Stencil::Backward => vec![],
        };
        let mut res = f.clone();
        for (c, x) in terms {
            res.axpy(self.rho * c / self.dt, x);
        }
        LedgerNode {
            t: n as f64 * self.dt,
            velocity_sq: self.weight * v.values().iter().map(|x| x * x).sum::<f64>(),
            energy: *e,
            residual_fd_sq: self.weight * res.values().iter().map(|x| x * x).sum::<f64>(),
        }
    }
}

/// `|u|_eps` convenience used by reports.
pub fn eps_norm(lattice: &Lattice, u: &LatticeField) -> f64 {
    norm_eps(lattice, u).unwrap_or(f64::NAN)
}
