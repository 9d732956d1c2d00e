//! Method-of-lines solver on a structured node grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell_energy::ElasticityTensor;
use crate::dynamics::Integrator;
use crate::error::{Error, Result};
use crate::fields::{Grid, GridField};
use crate::lattice::BoxDomain;
use crate::smooth::SmoothField;

use super::{clip_box, node_grid, ContinuumProblem, ReferenceSolution, Snapshot, Stiffness, Q1};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdOptions {
    pub h: f64,
    /// Time step; half the stable bound when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    /// Times at which the solution is stored; `0` and `t_end` are always
    /// included.
    #[serde(default)]
    pub sample_times: Vec<f64>,
    #[serde(default = "yes")]
    pub enforce_stability: bool,
}

fn default_integrator() -> Integrator {
    Integrator::Rk4
}

fn yes() -> bool {
    true
}

impl FdOptions {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            dt: None,
            integrator: Integrator::Rk4,
            sample_times: Vec::new(),
            enforce_stability: true,
        }
    }
}

/// Energy balance of the semi-discrete system at one stored time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdLedgerRow {
    pub t: f64,
    pub potential: f64,
    pub kinetic: f64,
    pub dissipation: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct FdSolution {
    pub grid: Grid,
    pub c: ElasticityTensor,
    pub omega: BoxDomain,
    pub rho: f64,
    pub nu: f64,
    pub dt: f64,
    pub dt_bound: f64,
    pub times: Vec<f64>,
    pub w: Vec<GridField>,
    pub wdot: Vec<GridField>,
    pub ledger: Vec<FdLedgerRow>,
    q1: std::sync::Arc<Q1>,
}

struct System<'a> {
    q1: &'a Q1,
    k: Stiffness,
    c: &'a ElasticityTensor,
    rho: f64,
    nu: f64,
}

impl System<'_> {
    fn force(&self, w: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; w.len()];
        self.k.apply(w, &mut f);
        f
    }

    /// `(w', w'')` for `rho > 0`, `(w', _)` for gradient flow.
    fn rate(&self, w: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let f = self.force(w);
        if self.rho == 0.0 {
            (f.iter().map(|x| -x / self.nu).collect(), vec![0.0; w.len()])
        } else {
            let a = f.iter().zip(v).map(|(fi, vi)| -(fi + self.nu * vi) / self.rho).collect();
            (v.to_vec(), a)
        }
    }

    fn velocity(&self, w: &[f64], v: &[f64]) -> Vec<f64> {
        if self.rho == 0.0 {
            self.rate(w, v).0
        } else {
            v.to_vec()
        }
    }

    /// `d/dt |w'|^2` along the exact flow.
    fn velocity_sq_rate(&self, w: &[f64], v: &[f64]) -> f64 {
        let vel = self.velocity(w, v);
        let acc = if self.rho == 0.0 {
            self.force(&vel).iter().map(|x| -x / self.nu).collect()
        } else {
            self.rate(w, v).1
        };
        2.0 * dot(&vel, &acc)
    }

    fn step(&self, integ: Integrator, dt: f64, w: &mut [f64], v: &mut [f64]) {
        match integ {
            Integrator::Rk4 => {
                let (k1w, k1v) = self.rate(w, v);
                let (w2, v2) = (axpy(w, 0.5 * dt, &k1w), axpy(v, 0.5 * dt, &k1v));
                let (k2w, k2v) = self.rate(&w2, &v2);
                let (w3, v3) = (axpy(w, 0.5 * dt, &k2w), axpy(v, 0.5 * dt, &k2v));
                let (k3w, k3v) = self.rate(&w3, &v3);
                let (w4, v4) = (axpy(w, dt, &k3w), axpy(v, dt, &k3v));
                let (k4w, k4v) = self.rate(&w4, &v4);
                for j in 0..w.len() {
                    w[j] += dt / 6.0 * (k1w[j] + 2.0 * k2w[j] + 2.0 * k3w[j] + k4w[j]);
                    v[j] += dt / 6.0 * (k1v[j] + 2.0 * k2v[j] + 2.0 * k3v[j] + k4v[j]);
                }
            }
            Integrator::SemiImplicitEuler => {
                let f = self.force(w);
                for j in 0..w.len() {
                    v[j] += dt * (-f[j] - self.nu * v[j]) / self.rho;
                    w[j] += dt * v[j];
                }
            }
            Integrator::ViscousExplicit => {
                let f = self.force(w);
                for j in 0..w.len() {
                    w[j] -= dt * f[j] / self.nu;
                }
            }
            Integrator::ViscousImplicit => unreachable!("rejected before stepping"),
        }
    }

    /// Largest eigenvalue of the (linear) force operator by power iteration.
    fn lambda_max(&self, n: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x: Vec<f64> = (0..n)
            .map(|j| if self.q1.interior[j / self.q1.d] { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let mut lam: f64 = 0.0;
        for _ in 0..200 {
            let nx = dot(&x, &x).sqrt();
            if nx == 0.0 {
                return 0.0;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            let kx = self.force(&x);
            lam = lam.max(dot(&x, &kx));
            x = kx;
        }
        1.05 * lam
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}

/// Largest stable step for `integ` on the grid.
fn stable_dt(sys: &System<'_>, integ: Integrator, h: f64, n: usize) -> f64 {
    let lam = sys.lambda_max(n).max(f64::MIN_POSITIVE);
    let d = sys.q1.d as f64;
    match integ {
        Integrator::ViscousExplicit => 1.8 * sys.nu / lam,
        Integrator::Rk4 if sys.rho == 0.0 => 2.5 * sys.nu / lam,
        _ => {
            let c_max = (sys.c.max_acoustic_eigenvalue() / sys.rho).sqrt();
            let omega = (lam / sys.rho).sqrt();
            (h / (d.sqrt() * c_max)).min(2.5 / omega).min(2.5 * sys.rho / sys.nu)
        }
    }
}

pub fn solve_fd(problem: &ContinuumProblem, opts: &FdOptions) -> Result<FdSolution> {
    problem.validate()?;
    match (opts.integrator, problem.rho == 0.0) {
        (Integrator::ViscousImplicit, _) => {
            return Err(Error::InvalidConfig("the grid solver has no implicit scheme".into()))
        }
        (Integrator::SemiImplicitEuler, true) => {
            return Err(Error::InvalidConfig("semi-implicit Euler needs rho > 0".into()))
        }
        (Integrator::ViscousExplicit, false) => {
            return Err(Error::InvalidConfig("viscous explicit Euler needs rho = 0".into()))
        }
        _ => {}
    }
    let grid = node_grid(&problem.omega, opts.h)?;
    let q1 = std::sync::Arc::new(Q1::new(&grid)?);
    let d = grid.dim();
    let sys = System { q1: &q1, k: q1.stiffness(&problem.c), c: &problem.c, rho: problem.rho, nu: problem.nu };
    let n = grid.len() * d;
    let bound = stable_dt(&sys, opts.integrator, opts.h, n);
    let dt = opts.dt.unwrap_or(0.5 * bound);
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    if opts.enforce_stability && dt > bound {
        return Err(Error::CflViolation { dt, bound });
    }

    let sample = |f: &dyn SmoothField| {
        let mut g = GridField::from_fn(grid.clone(), d, |x| f.value(x));
        for (k, inside) in q1.interior.iter().enumerate() {
            if !inside {
                g.values[k * d..(k + 1) * d].fill(0.0);
            }
        }
        g.values
    };
    let mut w = sample(problem.w0.as_ref());
    let mut v = if problem.rho == 0.0 { vec![0.0; n] } else { sample(problem.w1.as_ref()) };

    let mut times: Vec<f64> = opts.sample_times.iter().copied().filter(|t| *t > 0.0 && *t < problem.t_end).collect();
    times.push(0.0);
    times.push(problem.t_end);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * problem.t_end);

    let vol = opts.h.powi(d as i32);
    let vel_sq = |w: &[f64], v: &[f64]| vol * { let u = sys.velocity(w, v); dot(&u, &u) };
    let kinetic = |w: &[f64], v: &[f64]| 0.5 * problem.rho * vel_sq(w, v);
    let potential = |w: &[f64]| q1.energy(&problem.c, w);
    let e0 = potential(&w) + kinetic(&w, &v);

    let mut out_w = Vec::with_capacity(times.len());
    let mut out_v = Vec::with_capacity(times.len());
    let mut ledger = Vec::with_capacity(times.len());
    let mut diss = 0.0;
    let mut record = |t: f64, w: &[f64], v: &[f64], diss: f64| {
        let p = potential(w);
        let k = kinetic(w, v);
        out_w.push(GridField { grid: grid.clone(), components: d, values: w.to_vec() });
        out_v.push(GridField { grid: grid.clone(), components: d, values: sys.velocity(w, v) });
        ledger.push(FdLedgerRow { t, potential: p, kinetic: k, dissipation: diss, residual: p + k + diss - e0 });
    };
    record(0.0, &w, &v, 0.0);
    let scale = 1e6 * (1.0 + dot(&w, &w).sqrt() + dot(&v, &v).sqrt());
    for pair in times.windows(2) {
        let span = pair[1] - pair[0];
        let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let mut f_prev = vel_sq(&w, &v);
        let fp_start = vol * sys.velocity_sq_rate(&w, &v);
        let mut trap = 0.0;
        for s in 0..steps {
            sys.step(opts.integrator, h, &mut w, &mut v);
            let f_next = vel_sq(&w, &v);
            trap += 0.5 * h * (f_prev + f_next);
            f_prev = f_next;
            let size = dot(&w, &w).sqrt() + dot(&v, &v).sqrt();
            if !size.is_finite() || size > scale {
                return Err(Error::Instability { time: pair[0] + (s + 1) as f64 * h, norm: size, limit: scale });
            }
        }
        let fp_end = vol * sys.velocity_sq_rate(&w, &v);
        diss += problem.nu * (trap - h * h / 12.0 * (fp_end - fp_start));
        record(pair[1], &w, &v, diss);
    }

    Ok(FdSolution {
        grid,
        c: problem.c.clone(),
        omega: problem.omega.clone(),
        rho: problem.rho,
        nu: problem.nu,
        dt,
        dt_bound: bound,
        times,
        w: out_w,
        wdot: out_v,
        ledger,
        q1,
    })
}

impl FdSolution {
    /// Largest `|residual| / E(0)` over the stored times.
    pub fn edie_residual(&self) -> f64 {
        let e0 = self.ledger[0].potential + self.ledger[0].kinetic;
        let worst = self.ledger.iter().fold(0.0f64, |m, r| m.max(r.residual.abs()));
        if e0 > 0.0 { worst / e0 } else { worst }
    }

    pub fn sample_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| Error::InvalidConfig(format!("time {t} is not a stored sample")))
    }

    pub fn at(&self, t: f64) -> Result<FdSnapshot<'_>> {
        let k = self.sample_index(t)?;
        Ok(FdSnapshot { sol: self, w: &self.w[k] })
    }
}

pub struct FdSnapshot<'a> {
    sol: &'a FdSolution,
    w: &'a GridField,
}

impl FdSnapshot<'_> {
    /// Grid cell index range covered by the box, which must be aligned.
    fn cell_range(&self, lo: &[f64], hi: &[f64]) -> Result<Option<(Vec<usize>, Vec<usize>)>> {
        let Some((l, u)) = clip_box(&self.sol.omega, lo, hi) else {
            return Ok(None);
        };
        let g = &self.sol.grid;
        let index = |x: f64, r: usize| -> Result<usize> {
            let s = (x - g.origin[r]) / g.spacing;
            let k = s.round();
            if (s - k).abs() > 1e-6 {
                return Err(Error::GridMismatch(format!("box face {x} is not on a grid line")));
            }
            Ok(k as usize)
        };
        let d = g.dim();
        let mut a = Vec::with_capacity(d);
        let mut b = Vec::with_capacity(d);
        for r in 0..d {
            a.push(index(l[r], r)?);
            b.push(index(u[r], r)?);
        }
        Ok(Some((a, b)))
    }

    /// Sum of `f(cell)` over grid cells with multi-index in `[a, b)`.
    fn sum_cells(&self, a: &[usize], b: &[usize], mut f: impl FnMut(usize, &[usize])) {
        let q1 = &self.sol.q1;
        let d = q1.d;
        let mut idx = a.to_vec();
        loop {
            let mut c = 0;
            for r in 0..d {
                c = c * (q1.shape[r] - 1) + idx[r];
            }
            f(c, &idx);
            let mut r = d;
            loop {
                if r == 0 {
                    return;
                }
                r -= 1;
                idx[r] += 1;
                if idx[r] < b[r] {
                    break;
                }
                idx[r] = a[r];
            }
        }
    }

    fn box_volume(lo: &[f64], hi: &[f64]) -> f64 {
        lo.iter().zip(hi).map(|(a, b)| b - a).product()
    }
}

impl Snapshot for FdSnapshot<'_> {
    fn dim(&self) -> usize {
        self.sol.grid.dim()
    }

    fn cell_mean(&self, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut acc = vec![0.0; d];
        if let Some((a, b)) = self.cell_range(lo, hi)? {
            let q1 = &self.sol.q1;
            let wgt = q1.h.powi(d as i32) / q1.corner_off.len() as f64;
            self.sum_cells(&a, &b, |c, _| {
                for off in &q1.corner_off {
                    let node = q1.cell_base[c] + off;
                    for i in 0..d {
                        acc[i] += wgt * self.w.values[node * d + i];
                    }
                }
            });
        }
        let vol = Self::box_volume(lo, hi);
        Ok(acc.into_iter().map(|x| x / vol).collect())
    }

    fn grad_cell_mean(&self, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut acc = vec![0.0; d * d];
        if let Some((a, b)) = self.cell_range(lo, hi)? {
            let q1 = &self.sol.q1;
            let wgt = q1.h.powi(d as i32) / q1.gauss.len() as f64;
            let mut g = vec![0.0; d * d];
            self.sum_cells(&a, &b, |c, _| {
                for gi in 0..q1.gauss.len() {
                    q1.grad(&self.w.values, c, gi, &mut g);
                    acc.iter_mut().zip(&g).for_each(|(s, x)| *s += wgt * x);
                }
            });
        }
        let vol = Self::box_volume(lo, hi);
        Ok(acc.into_iter().map(|x| x / vol).collect())
    }

    fn energy(&self) -> f64 {
        self.sol.q1.energy(&self.sol.c, &self.w.values)
    }

    fn weak_form(&self, c: &ElasticityTensor, v: &dyn SmoothField) -> f64 {
        let q1 = &self.sol.q1;
        let d = q1.d;
        let a = vec![0; d];
        let b: Vec<usize> = q1.shape.iter().map(|n| n - 1).collect();
        let wgt = q1.h.powi(d as i32) / q1.gauss.len() as f64;
        let mut g = vec![0.0; d * d];
        let mut jv = vec![0.0; d * d];
        let mut x = vec![0.0; d];
        let mut sum = 0.0;
        self.sum_cells(&a, &b, |cell, idx| {
            for (gi, xi) in q1.gauss.iter().enumerate() {
                for r in 0..d {
                    x[r] = self.sol.grid.origin[r] + q1.h * (idx[r] as f64 + xi[r]);
                }
                q1.grad(&self.w.values, cell, gi, &mut g);
                v.jacobian(&x, &mut jv);
                sum += wgt * c.contract(&g, &jv);
            }
        });
        sum
    }
}

impl ReferenceSolution for FdSolution {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn snapshot(&self, t: f64) -> Result<Box<dyn Snapshot + '_>> {
        Ok(Box::new(self.at(t)?))
    }
}
