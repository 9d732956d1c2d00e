//! Scaled Bravais lattices `eps * A * Z^d` clipped to a box, their cells and
//! the corner labelling of the reference cell.
//!
//! Points and cells are keyed by integer multi-indices `lambda`: the point
//! with index `lambda` sits at `eps * A * lambda`, and the cell with index
//! `lambda` is `eps * A * (lambda + [0, 1)^d)` with barycenter
//! `eps * A * (lambda + 1/2)`. Corner `i` of that cell is the point
//! `lambda + b_i`, where `b_i` is the i-th binary vector in lexicographic
//! order (last coordinate fastest).

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

static NEXT_LATTICE_ID: AtomicU64 = AtomicU64::new(1);

/// Axis-aligned open box `(lo_0, hi_0) x ... x (lo_{d-1}, hi_{d-1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    /// The unit cube `(0, 1)^d`.
    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    /// Grows the box by `margin` on every side.
    pub fn inflate(&self, margin: f64) -> Self {
        Self::new(
            self.lo.iter().map(|v| v - margin).collect(),
            self.hi.iter().map(|v| v + margin).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Strict membership with an absolute slack `tol` pulled inwards, so that
    /// points sitting on the boundary up to rounding count as outside.
    pub fn contains_strict(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *v > lo + tol && *v < hi - tol)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(lo, hi)| hi - lo).product()
    }
}

/// Input description of a scaled lattice inside `omega`, itself compactly
/// contained in `omega_tilde`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Rows of the basis matrix `A`; the lattice vectors are its columns.
    pub basis: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub omega: BoxDomain,
    pub omega_tilde: BoxDomain,
}

impl LatticeSpec {
    /// Cubic lattice `eps * Z^d` in the unit cube, with an enlarged box whose
    /// margin is `margin_cells * eps` on each side.
    pub fn cubic_unit(dim: usize, epsilon: f64, margin_cells: f64) -> Self {
        let basis = (0..dim)
            .map(|r| (0..dim).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
            .collect();
        let omega = BoxDomain::unit(dim);
        let omega_tilde = omega.inflate(margin_cells * epsilon);
        Self {
            basis,
            epsilon,
            omega,
            omega_tilde,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.basis[r][c])
    }

    fn validate(&self) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if self.basis.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidSpec("basis must be a square matrix".into()));
        }
        if self.omega.dim() != d || self.omega_tilde.dim() != d {
            return Err(Error::InvalidSpec("domain dimension does not match basis".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidSpec(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        for b in [&self.omega, &self.omega_tilde] {
            if b.lo.iter().zip(&b.hi).any(|(lo, hi)| !(lo < hi)) {
                return Err(Error::InvalidSpec("box with empty extent".into()));
            }
        }
        let a = self.basis_matrix();
        if a.determinant() <= 0.0 {
            return Err(Error::InvalidSpec("basis must have positive determinant".into()));
        }
        Ok(a)
    }
}

/// Spectral norm of a small dense matrix.
pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Binary corner offsets `b_i` in lexicographic order, last coordinate fastest.
pub fn corner_offsets(dim: usize) -> Vec<Vec<i64>> {
    (0..1usize << dim)
        .map(|i| (0..dim).map(|r| ((i >> (dim - 1 - r)) & 1) as i64).collect())
        .collect()
}

/// Corner labels of the reference cell `A * {-1/2, 1/2}^d` as a `d x 2^d`
/// matrix; column `i` is `A * (b_i - 1/2)`.
pub fn corner_labels(dim: usize, basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    if basis.nrows() != dim || basis.ncols() != dim {
        return Err(Error::InvalidSpec("basis must be d x d".into()));
    }
    if basis.determinant() <= 0.0 {
        return Err(Error::InvalidSpec("basis must have positive determinant".into()));
    }
    let offsets = corner_offsets(dim);
    let signs = DMatrix::from_fn(dim, offsets.len(), |r, i| offsets[i][r] as f64 - 0.5);
    Ok(basis * signs)
}

/// Dense integer box used to index multi-indices without hashing.
#[derive(Clone, Debug)]
struct IndexBox {
    lo: Vec<i64>,
    shape: Vec<usize>,
}

impl IndexBox {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }

    fn flat(&self, lambda: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for ((l, lo), n) in lambda.iter().zip(&self.lo).zip(&self.shape) {
            let off = l - lo;
            if off < 0 || off as usize >= *n {
                return None;
            }
            idx = idx * n + off as usize;
        }
        Some(idx)
    }

    fn unflat(&self, mut idx: usize) -> Vec<i64> {
        let mut out = vec![0i64; self.shape.len()];
        for r in (0..self.shape.len()).rev() {
            out[r] = self.lo[r] + (idx % self.shape[r]) as i64;
            idx /= self.shape[r];
        }
        out
    }
}

/// The scaled lattice restricted to the enlarged box, with its fully
/// contained cells. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Lattice {
    spec: LatticeSpec,
    id: u64,
    dim: usize,
    basis: DMatrix<f64>,
    basis_inv: DMatrix<f64>,
    z: DMatrix<f64>,
    offsets: Vec<Vec<i64>>,
    index_box: IndexBox,
    point_slot: Vec<u32>,
    cell_slot: Vec<u32>,
    point_lambda: Vec<i64>,
    point_coords: Vec<f64>,
    in_omega: Vec<bool>,
    cell_lambda: Vec<i64>,
    barycenters: Vec<f64>,
    cell_corners: Vec<u32>,
    point_cells: Vec<u32>,
    cell_volume: f64,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        let basis = spec.validate()?;
        let d = spec.dim();
        let eps = spec.epsilon;
        let basis_inv = basis
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidSpec("singular basis".into()))?;
        let z = corner_labels(d, &basis)?;
        let offsets = corner_offsets(d);
        let nc = offsets.len();
        let tol = 1e-9 * eps;

        // Bounding box of lambda over the corners of omega_tilde.
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        for corner in corner_offsets(d) {
            let x: Vec<f64> = (0..d)
                .map(|r| {
                    if corner[r] == 0 {
                        spec.omega_tilde.lo[r]
                    } else {
                        spec.omega_tilde.hi[r]
                    }
                })
                .collect();
            let s = &basis_inv * nalgebra::DVector::from_vec(x) / eps;
            for r in 0..d {
                lo[r] = lo[r].min(s[r].floor() as i64 - 1);
                hi[r] = hi[r].max(s[r].ceil() as i64 + 1);
            }
        }
        let shape: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        let index_box = IndexBox { lo, shape };
        let total = index_box.len();
        if total > 200_000_000 {
            return Err(Error::InvalidSpec(format!("lattice index box too large ({total})")));
        }

        let mut point_slot = vec![NONE; total];
        let mut point_lambda = Vec::new();
        let mut point_coords = Vec::new();
        let mut in_omega = Vec::new();
        let mut n_points = 0u32;
        for flat in 0..total {
            let lambda = index_box.unflat(flat);
            let x = Self::position_of(&basis, eps, &lambda);
            if spec.omega_tilde.contains_strict(&x, tol) {
                point_slot[flat] = n_points;
                n_points += 1;
                in_omega.push(spec.omega.contains_strict(&x, tol));
                point_lambda.extend_from_slice(&lambda);
                point_coords.extend_from_slice(&x);
            }
        }

        let mut cell_slot = vec![NONE; total];
        let mut cell_lambda = Vec::new();
        let mut barycenters = Vec::new();
        let mut cell_corners = Vec::new();
        let mut n_cells = 0u32;
        for flat in 0..total {
            let lambda = index_box.unflat(flat);
            let corners: Option<Vec<u32>> = offsets
                .iter()
                .map(|b| {
                    let c: Vec<i64> = lambda.iter().zip(b).map(|(l, o)| l + o).collect();
                    index_box
                        .flat(&c)
                        .map(|f| point_slot[f])
                        .filter(|&p| p != NONE)
                })
                .collect();
            if let Some(corners) = corners {
                cell_slot[flat] = n_cells;
                n_cells += 1;
                let center: Vec<f64> = lambda.iter().map(|&l| l as f64 + 0.5).collect();
                let xb = &basis * nalgebra::DVector::from_vec(center) * eps;
                barycenters.extend(xb.iter());
                cell_lambda.extend_from_slice(&lambda);
                cell_corners.extend(corners);
            }
        }
        if n_cells == 0 {
            return Err(Error::EmptyLattice { epsilon: eps });
        }

        let required = 2.0 * eps * spectral_norm(&basis);
        for r in 0..d {
            let margin = (spec.omega.lo[r] - spec.omega_tilde.lo[r])
                .min(spec.omega_tilde.hi[r] - spec.omega.hi[r]);
            if margin < required * (1.0 - 1e-12) {
                return Err(Error::MarginViolation {
                    axis: r,
                    margin,
                    required,
                });
            }
        }

        let n_points = n_points as usize;
        let mut point_cells = vec![NONE; n_points * nc];
        for p in 0..n_points {
            let lam = &point_lambda[p * d..(p + 1) * d];
            for (j, b) in offsets.iter().enumerate() {
                let c: Vec<i64> = lam.iter().zip(b).map(|(l, o)| l - o).collect();
                if let Some(f) = index_box.flat(&c) {
                    point_cells[p * nc + j] = cell_slot[f];
                }
            }
        }

        let cell_volume = eps.powi(d as i32) * basis.determinant();
        Ok(Self {
            spec,
            id: NEXT_LATTICE_ID.fetch_add(1, Ordering::Relaxed),
            dim: d,
            basis,
            basis_inv,
            z,
            offsets,
            index_box,
            point_slot,
            cell_slot,
            point_lambda,
            point_coords,
            in_omega,
            cell_lambda,
            barycenters,
            cell_corners,
            point_cells,
            cell_volume,
        })
    }

    fn position_of(basis: &DMatrix<f64>, eps: f64, lambda: &[i64]) -> Vec<f64> {
        let d = lambda.len();
        (0..d)
            .map(|r| eps * (0..d).map(|c| basis[(r, c)] * lambda[c] as f64).sum::<f64>())
            .collect()
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    /// Identity token; fields built on this lattice carry it.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Corner labels `Z` (`d x 2^d`).
    pub fn corner_labels(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn corner_offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn num_corners(&self) -> usize {
        self.offsets.len()
    }

    pub fn num_points(&self) -> usize {
        self.in_omega.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_volume_count()
    }

    fn cell_volume_count(&self) -> usize {
        self.cell_lambda.len() / self.dim
    }

    /// `eps^d det A`.
    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn point(&self, p: usize) -> &[f64] {
        &self.point_coords[p * self.dim..(p + 1) * self.dim]
    }

    pub fn point_lambda(&self, p: usize) -> &[i64] {
        &self.point_lambda[p * self.dim..(p + 1) * self.dim]
    }

    pub fn in_omega(&self, p: usize) -> bool {
        self.in_omega[p]
    }

    pub fn in_omega_flags(&self) -> &[bool] {
        &self.in_omega
    }

    pub fn barycenter(&self, c: usize) -> &[f64] {
        &self.barycenters[c * self.dim..(c + 1) * self.dim]
    }

    pub fn cell_lambda(&self, c: usize) -> &[i64] {
        &self.cell_lambda[c * self.dim..(c + 1) * self.dim]
    }

    /// Point indices of the `2^d` corners of cell `c`, in label order.
    pub fn cell_corners(&self, c: usize) -> &[u32] {
        let nc = self.num_corners();
        &self.cell_corners[c * nc..(c + 1) * nc]
    }

    /// For point `p` and label `j`, the cell having `p` as its corner `j`
    /// (barycenter `x_p - eps z_j`), if stored.
    pub fn cell_with_corner(&self, p: usize, j: usize) -> Option<usize> {
        let s = self.point_cells[p * self.num_corners() + j];
        (s != NONE).then_some(s as usize)
    }

    pub fn point_by_lambda(&self, lambda: &[i64]) -> Option<usize> {
        self.index_box
            .flat(lambda)
            .map(|f| self.point_slot[f])
            .filter(|&s| s != NONE)
            .map(|s| s as usize)
    }

    pub fn cell_by_lambda(&self, lambda: &[i64]) -> Option<usize> {
        self.index_box
            .flat(lambda)
            .map(|f| self.cell_slot[f])
            .filter(|&s| s != NONE)
            .map(|s| s as usize)
    }

    /// The cell `Q_eps(p)` whose lower corner is the lattice point `p`.
    pub fn cell_below_point(&self, p: usize) -> Option<usize> {
        self.cell_with_corner(p, 0)
    }

    /// Reduced coordinates `A^{-1} x / eps`, snapped to integers within a
    /// relative 1e-9 so that cell faces follow the half-open convention
    /// despite rounding.
    pub fn reduced_coords(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.basis_inv * nalgebra::DVector::from_column_slice(x) / self.spec.epsilon;
        v.iter()
            .map(|&s| {
                let r = s.round();
                if (s - r).abs() <= 1e-9 * r.abs().max(1.0) {
                    r
                } else {
                    s
                }
            })
            .collect()
    }

    /// Index of the stored cell whose half-open parallelepiped
    /// `xbar + A [-eps/2, eps/2)^d` contains `x`.
    pub fn cell_of(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::InvalidSpec("point dimension mismatch".into()));
        }
        let lambda: Vec<i64> = self.reduced_coords(x).iter().map(|s| s.floor() as i64).collect();
        self.cell_by_lambda(&lambda)
            .ok_or_else(|| Error::FringePoint(x.to_vec()))
    }

    /// Componentwise bounding box of all stored cells.
    pub fn cell_union_bounds(&self) -> BoxDomain {
        let d = self.dim;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for c in 0..self.num_cells() {
            for &p in self.cell_corners(c) {
                let x = self.point(p as usize);
                for r in 0..d {
                    lo[r] = lo[r].min(x[r]);
                    hi[r] = hi[r].max(x[r]);
                }
            }
        }
        BoxDomain::new(lo, hi)
    }

    /// True when `A` is diagonal, i.e. cells are axis-aligned boxes.
    pub fn is_axis_aligned(&self) -> bool {
        let d = self.dim;
        (0..d).all(|r| (0..d).all(|c| r == c || self.basis[(r, c)] == 0.0))
    }

    /// Whether the cell `c` meets `omega` (closure test on its corners'
    /// bounding box, exact for axis-aligned cells).
    pub fn cell_meets_omega(&self, c: usize) -> bool {
        let d = self.dim;
        let om = &self.spec.omega;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &p in self.cell_corners(c) {
            let x = self.point(p as usize);
            for r in 0..d {
                lo[r] = lo[r].min(x[r]);
                hi[r] = hi[r].max(x[r]);
            }
        }
        (0..d).all(|r| lo[r] < om.hi[r] && hi[r] > om.lo[r])
    }
}
