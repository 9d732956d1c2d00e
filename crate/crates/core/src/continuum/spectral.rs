//! Exact modal solution in one dimension.

use std::f64::consts::PI;

use crate::cell_energy::ElasticityTensor;
use crate::error::{Error, Result};
use crate::quadrature::UnitRule;
use crate::smooth::SmoothField;

use super::{clip_box, ContinuumProblem, ReferenceSolution, Snapshot};

/// Solution of `rho a'' + nu a' + kappa a = 0` with `a(0) = a0`,
/// `a'(0) = b0`, returned as `(a(t), a'(t))`. For `rho = 0` the equation
/// is first order and `b0` is ignored.
pub fn modal_amplitude(rho: f64, nu: f64, kappa: f64, a0: f64, b0: f64, t: f64) -> (f64, f64) {
    if rho == 0.0 {
        let a = a0 * (-kappa * t / nu).exp();
        return (a, -kappa / nu * a);
    }
    let alpha = nu / (2.0 * rho);
    let omega2 = kappa / rho;
    let gamma2 = alpha * alpha - omega2;
    // (e^{-alpha t} cosh(gamma t), e^{-alpha t} sinh(gamma t) / gamma) and
    // their trigonometric and critical counterparts.
    let (ch, s) = if gamma2 > 0.0 {
        let gamma = gamma2.sqrt();
        // Slow root computed without cancellation.
        let r1 = -omega2 / (alpha + gamma);
        let e = (r1 * t).exp();
        let m = (-2.0 * gamma * t).exp();
        (0.5 * e * (1.0 + m), e * -(-2.0 * gamma * t).exp_m1() / (2.0 * gamma))
    } else if gamma2 < 0.0 {
        let beta = (-gamma2).sqrt();
        let e = (-alpha * t).exp();
        (e * (beta * t).cos(), e * (beta * t).sin() / beta)
    } else {
        let e = (-alpha * t).exp();
        (e, e * t)
    };
    let a = a0 * ch + (b0 + alpha * a0) * s;
    let da = b0 * ch - (alpha * b0 + omega2 * a0) * s;
    (a, da)
}

/// Sine-series solution on `[lo, lo + L]` with Dirichlet ends.
#[derive(Clone, Debug)]
pub struct SpectralSolution {
    pub lo: f64,
    pub len: f64,
    pub stiffness: f64,
    pub rho: f64,
    pub nu: f64,
    /// Initial sine coefficients of `w0` and `w1`, mode `n = 1..=N`.
    pub a0: Vec<f64>,
    pub b0: Vec<f64>,
}

pub fn solve_1d_spectral(problem: &ContinuumProblem, modes: usize) -> Result<SpectralSolution> {
    if problem.dim() != 1 {
        return Err(Error::UnsupportedDimension(problem.dim()));
    }
    problem.validate()?;
    let lo = problem.omega.lo[0];
    let len = problem.omega.hi[0] - lo;
    let rule = UnitRule::composite(8, modes.max(64));
    let coeffs = |w: &dyn SmoothField| -> Vec<f64> {
        let mut out = [0.0];
        let samples: Vec<(f64, f64)> = rule
            .nodes
            .iter()
            .map(|&s| {
                w.eval(&[lo + s * len], &mut out);
                (s, out[0])
            })
            .collect();
        (1..=modes)
            .map(|n| {
                let k = n as f64 * PI;
                2.0 * samples.iter().zip(&rule.weights).map(|((s, v), wt)| wt * v * (k * s).sin()).sum::<f64>()
            })
            .collect()
    };
    Ok(SpectralSolution {
        lo,
        len,
        stiffness: problem.c.entries[0],
        rho: problem.rho,
        nu: problem.nu,
        a0: coeffs(problem.w0.as_ref()),
        b0: coeffs(problem.w1.as_ref()),
    })
}

impl SpectralSolution {
    pub fn wavenumber(&self, n: usize) -> f64 {
        n as f64 * PI / self.len
    }

    /// Mode amplitudes and rates at time `t`.
    pub fn amplitudes(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        (0..self.a0.len())
            .map(|j| {
                let q = self.wavenumber(j + 1);
                modal_amplitude(self.rho, self.nu, self.stiffness * q * q, self.a0[j], self.b0[j], t)
            })
            .unzip()
    }

    pub fn at(&self, t: f64) -> SpectralSnapshot<'_> {
        let (a, da) = self.amplitudes(t);
        SpectralSnapshot { sol: self, a, da }
    }

    pub fn energy(&self, t: f64) -> f64 {
        self.at(t).energy()
    }

    pub fn kinetic(&self, t: f64) -> f64 {
        let (_, da) = self.amplitudes(t);
        0.5 * self.rho * 0.5 * self.len * da.iter().map(|b| b * b).sum::<f64>()
    }

    /// `nu int_0^t |w'|^2`, by composite Gauss in time.
    pub fn dissipation(&self, t: f64) -> f64 {
        let rule = UnitRule::composite(8, 64);
        self.nu
            * rule.integrate(0.0, t, |s| {
                let (_, da) = self.amplitudes(s);
                0.5 * self.len * da.iter().map(|b| b * b).sum::<f64>()
            })
    }
}

pub struct SpectralSnapshot<'a> {
    sol: &'a SpectralSolution,
    a: Vec<f64>,
    da: Vec<f64>,
}

impl SpectralSnapshot<'_> {
    fn series(&self, coef: &[f64], x: f64, f: impl Fn(f64) -> f64, weight: impl Fn(f64) -> f64) -> f64 {
        coef.iter()
            .enumerate()
            .map(|(j, c)| {
                let q = self.sol.wavenumber(j + 1);
                c * weight(q) * f(q * (x - self.sol.lo))
            })
            .sum()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.series(&self.a, x, f64::sin, |_| 1.0)
    }

    pub fn gradient(&self, x: f64) -> f64 {
        self.series(&self.a, x, f64::cos, |q| q)
    }

    pub fn velocity(&self, x: f64) -> f64 {
        self.series(&self.da, x, f64::sin, |_| 1.0)
    }
}

impl Snapshot for SpectralSnapshot<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn cell_mean(&self, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
        let vol = hi[0] - lo[0];
        let omega = crate::lattice::BoxDomain::new(vec![self.sol.lo], vec![self.sol.lo + self.sol.len]);
        let Some((l, u)) = clip_box(&omega, lo, hi) else {
            return Ok(vec![0.0]);
        };
        // int sin(q (x - lo)) = (cos(q (l - lo)) - cos(q (u - lo))) / q
        let integral = self.series(&self.a, l[0], f64::cos, |q| 1.0 / q) - self.series(&self.a, u[0], f64::cos, |q| 1.0 / q);
        Ok(vec![integral / vol])
    }

    fn grad_cell_mean(&self, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
        let vol = hi[0] - lo[0];
        let omega = crate::lattice::BoxDomain::new(vec![self.sol.lo], vec![self.sol.lo + self.sol.len]);
        let Some((l, u)) = clip_box(&omega, lo, hi) else {
            return Ok(vec![0.0]);
        };
        Ok(vec![(self.value(u[0]) - self.value(l[0])) / vol])
    }

    fn energy(&self) -> f64 {
        let s = &self.sol;
        self.a
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let q = s.wavenumber(j + 1);
                0.5 * s.stiffness * q * q * 0.5 * s.len * a * a
            })
            .sum()
    }

    fn weak_form(&self, c: &ElasticityTensor, v: &dyn SmoothField) -> f64 {
        let rule = UnitRule::composite(8, 256);
        let mut jac = [0.0];
        rule.integrate(self.sol.lo, self.sol.lo + self.sol.len, |x| {
            v.jacobian(&[x], &mut jac);
            c.entries[0] * self.gradient(x) * jac[0]
        })
    }
}

impl ReferenceSolution for SpectralSolution {
    fn dim(&self) -> usize {
        1
    }

    fn snapshot(&self, t: f64) -> Result<Box<dyn Snapshot + '_>> {
        Ok(Box::new(self.at(t)))
    }
}
