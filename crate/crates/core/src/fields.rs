//! Displacement fields on lattice points, per-cell matrix fields, and
//! auxiliary uniform grids; the atomistic inner product, local cell means
//! and piecewise-constant interpolation.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::quadrature::CubeRule;
use crate::smooth::SmoothField;

/// One `R^d` vector per lattice point. Admissible fields vanish at every
/// point outside `omega`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    lattice_id: u64,
    dim: usize,
    values: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(lattice: &Lattice) -> Self {
        Self {
            lattice_id: lattice.id(),
            dim: lattice.dim(),
            values: vec![0.0; lattice.num_points() * lattice.dim()],
        }
    }

    /// Samples `f` at points inside `omega`, zero elsewhere.
    pub fn from_fn(lattice: &Lattice, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let mut out = Self::zeros(lattice);
        let d = lattice.dim();
        for p in 0..lattice.num_points() {
            if lattice.in_omega(p) {
                let v = f(lattice.point(p));
                out.values[p * d..(p + 1) * d].copy_from_slice(&v[..d]);
            }
        }
        out
    }

    pub fn from_values(lattice: &Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.num_points() * lattice.dim() {
            return Err(Error::LatticeMismatch);
        }
        Ok(Self {
            lattice_id: lattice.id(),
            dim: lattice.dim(),
            values,
        })
    }

    pub fn lattice_id(&self) -> u64 {
        self.lattice_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.values[p * self.dim..(p + 1) * self.dim]
    }

    pub fn at_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.values[p * self.dim..(p + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check(&self, lattice: &Lattice) -> Result<()> {
        if self.lattice_id != lattice.id() || self.values.len() != lattice.num_points() * lattice.dim() {
            return Err(Error::LatticeMismatch);
        }
        Ok(())
    }

    pub fn same_lattice(&self, other: &Self) -> Result<()> {
        if self.lattice_id != other.lattice_id || self.values.len() != other.values.len() {
            return Err(Error::LatticeMismatch);
        }
        Ok(())
    }

    /// Zeroes every point outside `omega`.
    pub fn enforce_admissible(&mut self, lattice: &Lattice) {
        let d = self.dim;
        for p in 0..lattice.num_points() {
            if !lattice.in_omega(p) {
                self.values[p * d..(p + 1) * d].fill(0.0);
            }
        }
    }

    pub fn is_admissible(&self, lattice: &Lattice) -> bool {
        (0..lattice.num_points())
            .filter(|&p| !lattice.in_omega(p))
            .all(|p| self.at(p).iter().all(|v| *v == 0.0))
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(s, o)| *s += a * o);
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_lattice(other)?;
        let mut out = self.clone();
        out.axpy(-1.0, other);
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One `d x 2^d` matrix per stored cell; column `i` (contiguous) belongs to
/// corner label `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField {
    lattice_id: u64,
    dim: usize,
    corners: usize,
    values: Vec<f64>,
}

impl CellField {
    pub fn zeros(lattice: &Lattice) -> Self {
        let block = lattice.dim() * lattice.num_corners();
        Self {
            lattice_id: lattice.id(),
            dim: lattice.dim(),
            corners: lattice.num_corners(),
            values: vec![0.0; lattice.num_cells() * block],
        }
    }

    pub fn from_values(lattice: &Lattice, values: Vec<f64>) -> Result<Self> {
        let block = lattice.dim() * lattice.num_corners();
        if values.len() != lattice.num_cells() * block {
            return Err(Error::LatticeMismatch);
        }
        Ok(Self {
            lattice_id: lattice.id(),
            dim: lattice.dim(),
            corners: lattice.num_corners(),
            values,
        })
    }

    pub fn check(&self, lattice: &Lattice) -> Result<()> {
        if self.lattice_id != lattice.id()
            || self.values.len() != lattice.num_cells() * lattice.dim() * lattice.num_corners()
        {
            return Err(Error::LatticeMismatch);
        }
        Ok(())
    }

    pub fn lattice_id(&self) -> u64 {
        self.lattice_id
    }

    pub fn block_len(&self) -> usize {
        self.dim * self.corners
    }

    pub fn num_cells(&self) -> usize {
        self.values.len() / self.block_len()
    }

    /// Column-major `d x 2^d` block of cell `c`.
    pub fn cell(&self, c: usize) -> &[f64] {
        let b = self.block_len();
        &self.values[c * b..(c + 1) * b]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        let b = self.block_len();
        &mut self.values[c * b..(c + 1) * b]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Frobenius inner product summed over cells (no volume weight).
    pub fn dot(&self, other: &Self) -> Result<f64> {
        if self.lattice_id != other.lattice_id || self.values.len() != other.values.len() {
            return Err(Error::LatticeMismatch);
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn max_cell_norm(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.cell(c).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// `(u, v)_eps = eps^d det A sum_x u(x) . v(x)`.
pub fn inner_product_eps(lattice: &Lattice, u: &LatticeField, v: &LatticeField) -> Result<f64> {
    u.check(lattice)?;
    v.check(lattice)?;
    Ok(lattice.cell_volume() * u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum::<f64>())
}

pub fn norm_eps(lattice: &Lattice, u: &LatticeField) -> Result<f64> {
    Ok(inner_product_eps(lattice, u, u)?.sqrt())
}

/// Sample placement of a uniform grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridLayout {
    /// Samples at `origin + h j`.
    Nodes,
    /// Samples at the midpoints `origin + h (j + 1/2)` of the subcells.
    Cells,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
    pub layout: GridLayout,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn offset(&self) -> f64 {
        match self.layout {
            GridLayout::Nodes => 0.0,
            GridLayout::Cells => 0.5,
        }
    }

    /// Multi-index of flat sample `k` (row-major, last axis fastest).
    pub fn unflat(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for r in (0..self.dim()).rev() {
            idx[r] = k % self.shape[r];
            k /= self.shape[r];
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn position(&self, idx: &[usize]) -> Vec<f64> {
        let off = self.offset();
        idx.iter()
            .zip(&self.origin)
            .map(|(&j, o)| o + self.spacing * (j as f64 + off))
            .collect()
    }

    /// Cell-layout grid with spacing `eps / refine` covering every stored
    /// cell of an axis-aligned lattice, aligned with the cell faces.
    pub fn aligned_to(lattice: &Lattice, refine: usize) -> Result<Self> {
        if !lattice.is_axis_aligned() {
            return Err(Error::QuadratureMisalignment("lattice cells are not axis-aligned".into()));
        }
        let d = lattice.dim();
        let a = lattice.basis();
        let bounds = lattice.cell_union_bounds();
        let h = lattice.epsilon() * a[(0, 0)] / refine as f64;
        for r in 1..d {
            if (a[(r, r)] - a[(0, 0)]).abs() > 1e-14 * a[(0, 0)] {
                return Err(Error::QuadratureMisalignment("anisotropic cell widths".into()));
            }
        }
        let shape = (0..d)
            .map(|r| ((bounds.hi[r] - bounds.lo[r]) / h).round() as usize)
            .collect();
        Ok(Self {
            origin: bounds.lo,
            spacing: h,
            shape,
            layout: GridLayout::Cells,
        })
    }
}

/// A continuum field sampled on a uniform grid; `components` values per
/// sample, stored contiguously, samples in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub components: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid, components: usize) -> Self {
        let n = grid.len() * components;
        Self {
            grid,
            components,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Grid, components: usize, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let mut out = Self::zeros(grid, components);
        for k in 0..out.grid.len() {
            let x = out.grid.position(&out.grid.unflat(k));
            let v = f(&x);
            out.values[k * components..(k + 1) * components].copy_from_slice(&v[..components]);
        }
        out
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.components..(k + 1) * self.components]
    }

    /// `sum h^d |w|^2`, the exact L2 norm of a cell-layout piecewise-constant
    /// field (a midpoint rule otherwise).
    pub fn l2_norm(&self) -> f64 {
        let vol = self.grid.spacing.powi(self.grid.dim() as i32);
        (vol * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn l2_inner(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid || self.components != other.components {
            return Err(Error::GridMismatch("inner product of fields on different grids".into()));
        }
        let vol = self.grid.spacing.powi(self.grid.dim() as i32);
        Ok(vol * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let d = self.grid.dim();
        let header: Vec<String> = (0..d)
            .map(|r| format!("x{r}"))
            .chain((0..self.components).map(|c| format!("w{c}")))
            .collect();
        w.write_record(&header)?;
        for k in 0..self.grid.len() {
            let x = self.grid.position(&self.grid.unflat(k));
            let rec: Vec<String> = x
                .iter()
                .chain(self.at(k))
                .map(|v| format!("{v:.17e}"))
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads values back from a CSV written by [`GridField::write_csv`];
    /// the grid must be supplied and must match the row count.
    pub fn read_csv(path: &Path, grid: Grid, components: usize) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let d = grid.dim();
        let mut values = Vec::with_capacity(grid.len() * components);
        for rec in r.records() {
            let rec = rec?;
            for c in 0..components {
                let v: f64 = rec
                    .get(d + c)
                    .ok_or_else(|| Error::Format("missing column".into()))?
                    .parse()
                    .map_err(|e| Error::Format(format!("{e}")))?;
                values.push(v);
            }
        }
        if values.len() != grid.len() * components {
            return Err(Error::GridMismatch("row count does not match grid".into()));
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    /// Raw row-major little-endian `f64` values.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary(mut r: impl Read, grid: Grid, components: usize) -> Result<Self> {
        let n = grid.len() * components;
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Self {
            grid,
            components,
            values,
        })
    }
}

/// Counts the data rows of a CSV file.
pub fn csv_row_count(path: &Path) -> Result<usize> {
    let f = std::fs::File::open(path)?;
    Ok(BufReader::new(f).lines().count().saturating_sub(1))
}

/// Mean of the trivially extended `w` over every cell `Q_eps(x) = x + eps A [0,1)^d`,
/// by a tensor Gauss rule of `order` points per axis; points outside `omega`
/// are then zeroed.
pub fn project_fn(lattice: &Lattice, w: &dyn SmoothField, order: usize) -> LatticeField {
    let rule = CubeRule::gauss(lattice.dim(), order);
    project_fn_with(lattice, w, &rule)
}

pub fn project_fn_with(lattice: &Lattice, w: &dyn SmoothField, rule: &CubeRule) -> LatticeField {
    let d = lattice.dim();
    let eps = lattice.epsilon();
    let a = lattice.basis();
    let omega = &lattice.spec().omega;
    let mut out = LatticeField::zeros(lattice);
    let mut xi = vec![0.0; d];
    let mut val = vec![0.0; d];
    for p in 0..lattice.num_points() {
        if !lattice.in_omega(p) {
            continue;
        }
        let x = lattice.point(p);
        let mut acc = vec![0.0; d];
        for (s, wq) in rule.points.iter().zip(&rule.weights) {
            for r in 0..d {
                xi[r] = x[r] + eps * (0..d).map(|c| a[(r, c)] * s[c]).sum::<f64>();
            }
            if !omega.contains_closed(&xi) {
                continue;
            }
            w.eval(&xi, &mut val);
            acc.iter_mut().zip(&val).for_each(|(o, v)| *o += wq * v);
        }
        out.at_mut(p).copy_from_slice(&acc);
    }
    out
}

/// Cell means computed from grid samples aligned with the cells: midpoint
/// sums for cell-layout grids, tensor trapezoid sums for node-layout grids.
/// Samples outside the grid count as zero.
pub fn project_grid(lattice: &Lattice, g: &GridField) -> Result<LatticeField> {
    let d = lattice.dim();
    if g.grid.dim() != d || g.components != d {
        return Err(Error::GridMismatch("grid dimension does not match lattice".into()));
    }
    if !lattice.is_axis_aligned() {
        return Err(Error::QuadratureMisalignment("lattice cells are not axis-aligned".into()));
    }
    let h = g.grid.spacing;
    let a = lattice.basis();
    let eps = lattice.epsilon();
    let mut ratio = vec![0usize; d];
    for r in 0..d {
        let q = eps * a[(r, r)] / h;
        if (q - q.round()).abs() > 1e-9 * q.max(1.0) || q.round() < 1.0 {
            return Err(Error::QuadratureMisalignment(format!("cell width / h = {q} is not an integer")));
        }
        ratio[r] = q.round() as usize;
    }
    let mut out = LatticeField::zeros(lattice);
    for p in 0..lattice.num_points() {
        if !lattice.in_omega(p) {
            continue;
        }
        let x = lattice.point(p);
        let mut base = vec![0i64; d];
        for r in 0..d {
            let s = (x[r] - g.grid.origin[r]) / h;
            if (s - s.round()).abs() > 1e-8 {
                return Err(Error::QuadratureMisalignment("grid origin is not on a cell face".into()));
            }
            base[r] = s.round() as i64;
        }
        let (count, offset): (Vec<usize>, Vec<usize>) = match g.grid.layout {
            GridLayout::Cells => (ratio.clone(), vec![0; d]),
            GridLayout::Nodes => (ratio.iter().map(|m| m + 1).collect(), vec![0; d]),
        };
        let total: usize = count.iter().product();
        let mut acc = vec![0.0; d];
        let mut wsum = 0.0;
        for k in 0..total {
            let mut rem = k;
            let mut idx = vec![0i64; d];
            let mut weight = 1.0;
            for r in (0..d).rev() {
                let j = rem % count[r];
                rem /= count[r];
                idx[r] = base[r] + (j + offset[r]) as i64;
                if g.grid.layout == GridLayout::Nodes && (j == 0 || j == ratio[r]) {
                    weight *= 0.5;
                }
            }
            wsum += weight;
            let inside = idx
                .iter()
                .zip(&g.grid.shape)
                .all(|(i, n)| *i >= 0 && (*i as usize) < *n);
            if inside {
                let uidx: Vec<usize> = idx.iter().map(|i| *i as usize).collect();
                let v = g.at(g.grid.flat(&uidx));
                acc.iter_mut().zip(v).for_each(|(o, v)| *o += weight * v);
            }
        }
        for (o, a) in out.at_mut(p).iter_mut().zip(&acc) {
            *o = a / wsum;
        }
    }
    Ok(out)
}

/// Piecewise-constant interpolation: sample `xi` of the cell-layout `grid`
/// receives `u(x)` where `xi` lies in `Q_eps(x)` and that cell meets
/// `omega`; zero elsewhere, including outside the stored cells.
pub fn pw_const_interp(lattice: &Lattice, u: &LatticeField, grid: &Grid) -> Result<GridField> {
    u.check(lattice)?;
    if grid.layout != GridLayout::Cells || grid.dim() != lattice.dim() {
        return Err(Error::GridMismatch("piecewise-constant interpolation needs a cell-layout grid".into()));
    }
    let d = lattice.dim();
    let mut out = GridField::zeros(grid.clone(), d);
    for k in 0..grid.len() {
        let xi = grid.position(&grid.unflat(k));
        let Ok(c) = lattice.cell_of(&xi) else { continue };
        if !lattice.cell_meets_omega(c) {
            continue;
        }
        let p = lattice.cell_corners(c)[0] as usize;
        out.values[k * d..(k + 1) * d].copy_from_slice(u.at(p));
    }
    Ok(out)
}

/// Atomistic-to-continuum distance `|| u - P_eps w ||_eps`.
pub fn ac_distance(lattice: &Lattice, u: &LatticeField, w: &dyn SmoothField, order: usize) -> Result<f64> {
    u.check(lattice)?;
    let pw = project_fn(lattice, w, order);
    norm_eps(lattice, &u.sub(&pw)?)
}
