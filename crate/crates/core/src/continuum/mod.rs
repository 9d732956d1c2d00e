//! Linear elastodynamics `rho w'' + nu w' - div(C : sym grad w) = 0` on a
//! box with homogeneous Dirichlet data: grid operators, an exact 1D modal
//! solver and a structured-grid solver in any dimension.

mod fd;
mod spectral;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::cell_energy::ElasticityTensor;
use crate::error::{Error, Result};
use crate::fields::{Grid, GridField, GridLayout};
use crate::lattice::BoxDomain;
use crate::smooth::SmoothField;

pub use fd::{solve_fd, FdOptions, FdSolution};
pub use spectral::{solve_1d_spectral, modal_amplitude, SpectralSolution};

#[derive(Clone)]
pub struct ContinuumProblem {
    pub c: ElasticityTensor,
    pub rho: f64,
    pub nu: f64,
    pub omega: BoxDomain,
    pub w0: Arc<dyn SmoothField>,
    pub w1: Arc<dyn SmoothField>,
    pub t_end: f64,
}

impl std::fmt::Debug for ContinuumProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContinuumProblem")
            .field("c", &self.c)
            .field("rho", &self.rho)
            .field("nu", &self.nu)
            .field("omega", &self.omega)
            .field("t_end", &self.t_end)
            .finish_non_exhaustive()
    }
}

impl ContinuumProblem {
    pub fn dim(&self) -> usize {
        self.c.dim
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.omega.dim() != d || self.w0.dim() != d || self.w1.dim() != d {
            return Err(Error::InvalidSpec("dimension mismatch in continuum problem".into()));
        }
        if !(self.nu > 0.0) || !(self.rho >= 0.0) || !(self.t_end > 0.0) {
            return Err(Error::InvalidConfig("need nu > 0, rho >= 0, t_end > 0".into()));
        }
        let scale = self.c.entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let (minor, major) = self.c.symmetry_defects();
        if minor > 1e-10 * scale {
            return Err(Error::SymmetryViolation { kind: "minor", defect: minor });
        }
        if major > 1e-10 * scale {
            return Err(Error::SymmetryViolation { kind: "major", defect: major });
        }
        for (name, w) in [("w0", &self.w0), ("w1", &self.w1)] {
            let m = boundary_max(w.as_ref(), &self.omega);
            if m > 1e-12 {
                return Err(Error::InvalidSpec(format!("{name} does not vanish on the boundary (|w| = {m:e})")));
            }
        }
        Ok(())
    }
}

/// Largest `|w|` over a sample of boundary points.
fn boundary_max(w: &dyn SmoothField, omega: &BoxDomain) -> f64 {
    let d = omega.dim();
    let m = 17usize;
    let mut worst: f64 = 0.0;
    let mut out = vec![0.0; d];
    for face in 0..d {
        for side in [omega.lo[face], omega.hi[face]] {
            for k in 0..m.pow((d - 1) as u32) {
                let mut x = vec![0.0; d];
                let mut rest = k;
                for r in 0..d {
                    if r == face {
                        x[r] = side;
                    } else {
                        let j = rest % m;
                        rest /= m;
                        x[r] = omega.lo[r] + (omega.hi[r] - omega.lo[r]) * j as f64 / (m - 1) as f64;
                    }
                }
                w.eval(&x, &mut out);
                worst = worst.max(out.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            }
        }
    }
    worst
}

/// Node grid of spacing `h` on the closed box, boundary nodes included.
pub fn node_grid(omega: &BoxDomain, h: f64) -> Result<Grid> {
    let d = omega.dim();
    let mut shape = Vec::with_capacity(d);
    for r in 0..d {
        let len = omega.hi[r] - omega.lo[r];
        let n = (len / h).round();
        if (n * h - len).abs() > 1e-9 * len {
            return Err(Error::GridMismatch(format!("box side {len} is not a multiple of h = {h}")));
        }
        if n < 2.0 {
            return Err(Error::GridTooCoarse { axis: r, nodes: n as usize + 1 });
        }
        shape.push(n as usize + 1);
    }
    Ok(Grid {
        origin: omega.lo.clone(),
        spacing: h,
        shape,
        layout: GridLayout::Nodes,
    })
}

/// Assembled `h^{-d}`-scaled stiffness in compressed rows; boundary rows
/// are empty.
#[derive(Debug)]
pub(crate) struct Stiffness {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Stiffness {
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            *o = self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(c, v)| v * w[*c]).sum();
        }
    }
}

/// Index tables for the multilinear (Q1) discretization on a node grid.
#[derive(Debug)]
pub(crate) struct Q1 {
    pub d: usize,
    pub h: f64,
    pub shape: Vec<usize>,
    /// Flat offsets of the `2^d` corners of a grid cell.
    pub corner_off: Vec<usize>,
    /// Flat index of the lower corner of every grid cell.
    pub cell_base: Vec<usize>,
    /// `dN[g][b][q]`: derivative along `q` of shape function `b` at Gauss
    /// point `g`, on the unit cell.
    pub dn: Vec<Vec<Vec<f64>>>,
    /// Gauss points on the unit cell.
    pub gauss: Vec<Vec<f64>>,
    pub interior: Vec<bool>,
}

impl Q1 {
    pub fn new(grid: &Grid) -> Result<Self> {
        if grid.layout != GridLayout::Nodes {
            return Err(Error::GridMismatch("continuum operators need a node grid".into()));
        }
        let d = grid.dim();
        for (r, &n) in grid.shape.iter().enumerate() {
            if n < 3 {
                return Err(Error::GridTooCoarse { axis: r, nodes: n });
            }
        }
        let mut strides = vec![1usize; d];
        for r in (0..d.saturating_sub(1)).rev() {
            strides[r] = strides[r + 1] * grid.shape[r + 1];
        }
        let nc = 1usize << d;
        let bits = |b: usize, r: usize| (b >> (d - 1 - r)) & 1;
        let corner_off: Vec<usize> = (0..nc).map(|b| (0..d).map(|r| bits(b, r) * strides[r]).sum()).collect();
        let cell_shape: Vec<usize> = grid.shape.iter().map(|n| n - 1).collect();
        let ncell: usize = cell_shape.iter().product();
        let cell_base = (0..ncell)
            .map(|k| {
                let mut rest = k;
                let mut flat = 0;
                for r in (0..d).rev() {
                    flat += (rest % cell_shape[r]) * strides[r];
                    rest /= cell_shape[r];
                }
                flat
            })
            .collect();
        let g1 = 0.5 - 0.5 / 3f64.sqrt();
        let gauss: Vec<Vec<f64>> = (0..nc).map(|g| (0..d).map(|r| if bits(g, r) == 0 { g1 } else { 1.0 - g1 }).collect()).collect();
        let shape1 = |b: usize, x: f64| if b == 1 { x } else { 1.0 - x };
        let dn = gauss
            .iter()
            .map(|xi| {
                (0..nc)
                    .map(|b| {
                        (0..d)
                            .map(|q| {
                                (0..d)
                                    .map(|r| {
                                        if r == q {
                                            if bits(b, r) == 1 { 1.0 } else { -1.0 }
                                        } else {
                                            shape1(bits(b, r), xi[r])
                                        }
                                    })
                                    .product()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let interior = (0..grid.len())
            .map(|k| grid.unflat(k).iter().zip(&grid.shape).all(|(&i, &n)| i > 0 && i + 1 < n))
            .collect();
        Ok(Self {
            d,
            h: grid.spacing,
            shape: grid.shape.clone(),
            corner_off,
            cell_base,
            dn,
            gauss,
            interior,
        })
    }

    /// Row-major `d x d` gradient of the interpolant at Gauss point `g` of
    /// cell `c`.
    pub fn grad(&self, w: &[f64], c: usize, g: usize, out: &mut [f64]) {
        let d = self.d;
        out.fill(0.0);
        let base = self.cell_base[c];
        for (b, off) in self.corner_off.iter().enumerate() {
            let node = base + off;
            for i in 0..d {
                let wi = w[node * d + i];
                for q in 0..d {
                    out[i * d + q] += wi * self.dn[g][b][q] / self.h;
                }
            }
        }
    }

    pub fn energy(&self, c_t: &ElasticityTensor, w: &[f64]) -> f64 {
        let d = self.d;
        let wq = self.h.powi(d as i32) / self.gauss.len() as f64;
        let mut g = vec![0.0; d * d];
        let mut sum = 0.0;
        for c in 0..self.cell_base.len() {
            for gi in 0..self.gauss.len() {
                self.grad(w, c, gi, &mut g);
                sum += c_t.contract(&g, &g);
            }
        }
        0.5 * wq * sum
    }

    /// The linear map of [`Q1::force_into`] as a sparse matrix.
    pub fn stiffness(&self, c_t: &ElasticityTensor) -> Stiffness {
        let d = self.d;
        let nc = self.corner_off.len();
        let ng = self.gauss.len() as f64;
        let m = nc * d;
        let mut ke = vec![0.0; m * m];
        for b in 0..nc {
            for i in 0..d {
                for b2 in 0..nc {
                    for k in 0..d {
                        let mut s = 0.0;
                        for g in 0..self.gauss.len() {
                            for p in 0..d {
                                for q in 0..d {
                                    s += c_t.get(i, p, k, q) * self.dn[g][b][p] * self.dn[g][b2][q];
                                }
                            }
                        }
                        ke[(b * d + i) * m + b2 * d + k] = s / (ng * self.h * self.h);
                    }
                }
            }
        }
        let n = self.interior.len() * d;
        let mut rows: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); n];
        for &base in &self.cell_base {
            for b in 0..nc {
                let node = base + self.corner_off[b];
                if !self.interior[node] {
                    continue;
                }
                for i in 0..d {
                    let row = &mut rows[node * d + i];
                    for b2 in 0..nc {
                        let node2 = base + self.corner_off[b2];
                        for k in 0..d {
                            *row.entry(node2 * d + k).or_insert(0.0) += ke[(b * d + i) * m + b2 * d + k];
                        }
                    }
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Stiffness { row_ptr, cols, vals }
    }

    /// Energy gradient divided by the nodal weight `h^d`; zero at boundary
    /// nodes.
    pub fn force_into(&self, c_t: &ElasticityTensor, w: &[f64], out: &mut [f64]) {
        let d = self.d;
        out.fill(0.0);
        let wq = 1.0 / self.gauss.len() as f64;
        let mut g = vec![0.0; d * d];
        for c in 0..self.cell_base.len() {
            let base = self.cell_base[c];
            for gi in 0..self.gauss.len() {
                self.grad(w, c, gi, &mut g);
                let s = c_t.apply(&g);
                for (b, off) in self.corner_off.iter().enumerate() {
                    let node = base + off;
                    for i in 0..d {
                        let mut acc = 0.0;
                        for q in 0..d {
                            acc += s[i * d + q] * self.dn[gi][b][q];
                        }
                        out[node * d + i] += wq * acc / self.h;
                    }
                }
            }
        }
        for (k, inside) in self.interior.iter().enumerate() {
            if !inside {
                out[k * d..(k + 1) * d].fill(0.0);
            }
        }
    }
}

fn check_field(w: &GridField) -> Result<()> {
    if w.components != w.grid.dim() {
        return Err(Error::GridMismatch("displacement needs d components".into()));
    }
    Ok(())
}

/// Central differences of `sym grad w` at every node, second-order
/// one-sided at the boundary. `d x d` row-major per node.
pub fn symmetrized_gradient(w: &GridField) -> Result<GridField> {
    check_field(w)?;
    let grid = &w.grid;
    let d = grid.dim();
    for (r, &n) in grid.shape.iter().enumerate() {
        if n < 3 {
            return Err(Error::GridTooCoarse { axis: r, nodes: n });
        }
    }
    let h = grid.spacing;
    let mut out = GridField::zeros(grid.clone(), d * d);
    let mut jac = vec![0.0; d * d];
    for k in 0..grid.len() {
        let idx = grid.unflat(k);
        for q in 0..d {
            let at = |j: isize| {
                let mut m = idx.clone();
                m[q] = (idx[q] as isize + j) as usize;
                grid.flat(&m)
            };
            let n = grid.shape[q];
            let terms = if idx[q] == 0 {
                vec![(at(0), -1.5), (at(1), 2.0), (at(2), -0.5)]
            } else if idx[q] + 1 == n {
                vec![(at(0), 1.5), (at(-1), -2.0), (at(-2), 0.5)]
            } else {
                vec![(at(1), 0.5), (at(-1), -0.5)]
            };
            for i in 0..d {
                jac[i * d + q] = terms.iter().map(|&(f, c)| c * w.values[f * d + i]).sum::<f64>() / h;
            }
        }
        let o = &mut out.values[k * d * d..(k + 1) * d * d];
        for i in 0..d {
            for j in 0..d {
                o[i * d + j] = 0.5 * (jac[i * d + j] + jac[j * d + i]);
            }
        }
    }
    Ok(out)
}

/// `1/2 int sym grad w : C : sym grad w` for the multilinear interpolant of
/// the nodal values, integrated exactly by tensor Gauss rules per grid cell.
pub fn continuum_energy(w: &GridField, c: &ElasticityTensor) -> Result<f64> {
    check_field(w)?;
    Ok(Q1::new(&w.grid)?.energy(c, &w.values))
}

/// Same integral written through the cell Hessian:
/// `1/2 int (grad w Z) : H : (grad w Z)`.
pub fn continuum_energy_hessian_form(w: &GridField, hess: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<f64> {
    check_field(w)?;
    let q1 = Q1::new(&w.grid)?;
    let d = q1.d;
    let nc = z.ncols();
    let wq = q1.h.powi(d as i32) / q1.gauss.len() as f64;
    let mut g = vec![0.0; d * d];
    let mut gz = DMatrix::zeros(d * nc, 1);
    let mut sum = 0.0;
    for c in 0..q1.cell_base.len() {
        for gi in 0..q1.gauss.len() {
            q1.grad(&w.values, c, gi, &mut g);
            for j in 0..nc {
                for i in 0..d {
                    gz[j * d + i] = (0..d).map(|q| g[i * d + q] * z[(q, j)]).sum();
                }
            }
            sum += (gz.transpose() * hess * &gz)[(0, 0)];
        }
    }
    Ok(0.5 * wq * sum)
}

/// `-div(C : sym grad w)` at interior nodes as the nodal gradient of
/// [`continuum_energy`] (the 3-point Laplacian in 1D); zero on the boundary.
pub fn continuum_force(w: &GridField, c: &ElasticityTensor) -> Result<GridField> {
    check_field(w)?;
    let q1 = Q1::new(&w.grid)?;
    let mut out = GridField::zeros(w.grid.clone(), w.components);
    q1.force_into(c, &w.values, &mut out.values);
    Ok(out)
}

/// Continuum solution frozen at one time, queried by the convergence
/// harness through box averages.
pub trait Snapshot {
    fn dim(&self) -> usize;

    /// Mean of `w` over the box `[lo, hi]`, with `w = 0` outside `Omega`.
    fn cell_mean(&self, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>>;

    /// Mean of `grad w` (row-major) over the box.
    fn grad_cell_mean(&self, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>>;

    /// `I(w(t))`.
    fn energy(&self) -> f64;

    /// `int grad w : C : grad v`.
    fn weak_form(&self, c: &ElasticityTensor, v: &dyn SmoothField) -> f64;
}

/// A continuum reference that can be frozen at any of its available times.
pub trait ReferenceSolution: Send + Sync {
    fn dim(&self) -> usize;

    fn snapshot(&self, t: f64) -> Result<Box<dyn Snapshot + '_>>;
}

/// Intersection of `[lo, hi]` with the closed box, or `None` if empty.
pub fn clip_box(omega: &BoxDomain, lo: &[f64], hi: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let l: Vec<f64> = lo.iter().zip(&omega.lo).map(|(a, b)| a.max(*b)).collect();
    let u: Vec<f64> = hi.iter().zip(&omega.hi).map(|(a, b)| a.min(*b)).collect();
    if l.iter().zip(&u).any(|(a, b)| a >= b) {
        None
    } else {
        Some((l, u))
    }
}
