use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::rotation::nearest_rotation;
use super::{hessian_by_differences, CellEnergy, ModelMetadata};
use crate::error::{Error, Result};

/// Affine part penalized by distance to rotations, non-affine part by a
/// quadratic:
///
/// `W(F) = k/2 dist^2(F P, SO(d)) + mu/2 |F Q|^2`
///
/// with `P = Zh^T (Zh Zh^T)^{-1}`, `Q = Pi - P Zh`, `Zh = Z Pi` and `Pi` the
/// projection removing corner means.
#[derive(Clone, Debug)]
pub struct CauchyBornSplit {
    mu: f64,
    k: f64,
    d: usize,
    nc: usize,
    z: DMatrix<f64>,
    /// `nc x d`, row-major.
    p: Vec<f64>,
    /// `nc x nc`, row-major, symmetric.
    q: Vec<f64>,
}

impl CauchyBornSplit {
    pub fn new(mu: f64, k: f64, z: DMatrix<f64>) -> Result<Self> {
        let d = z.nrows();
        let nc = z.ncols();
        if !(1..=3).contains(&d) || nc != 1 << d {
            return Err(Error::UnsupportedDimension(d));
        }
        if !(mu > 0.0 && k > 0.0 && mu.is_finite() && k.is_finite()) {
            return Err(Error::InvalidSpec(format!("mu and k must be positive, got mu={mu}, k={k}")));
        }
        let pi = DMatrix::identity(nc, nc) - DMatrix::from_element(nc, nc, 1.0 / nc as f64);
        let zh = &z * &pi;
        let gram = &zh * zh.transpose();
        let gram_inv = gram.try_inverse().ok_or(Error::SingularCornerMatrix)?;
        let p = zh.transpose() * gram_inv;
        let q = &pi - &p * &zh;
        let q = (&q + q.transpose()) * 0.5;
        Ok(Self {
            mu,
            k,
            d,
            nc,
            z,
            p: (0..nc * d).map(|a| p[(a / d, a % d)]).collect(),
            q: (0..nc * nc).map(|a| q[(a / nc, a % nc)]).collect(),
        })
    }

    /// `M = F P`, row-major `d x d`.
    fn affine(&self, f: &[f64]) -> [f64; 9] {
        let (d, nc) = (self.d, self.nc);
        let mut m = [0.0; 9];
        for r in 0..d {
            for s in 0..d {
                let mut acc = 0.0;
                for i in 0..nc {
                    acc += f[r + d * i] * self.p[i * d + s];
                }
                m[r * d + s] = acc;
            }
        }
        m
    }

    /// `F Q`, column-major like `F`.
    fn nonaffine(&self, f: &[f64]) -> [f64; 24] {
        let (d, nc) = (self.d, self.nc);
        let mut e = [0.0; 24];
        for r in 0..d {
            for j in 0..nc {
                let mut acc = 0.0;
                for i in 0..nc {
                    acc += f[r + d * i] * self.q[i * nc + j];
                }
                e[r + d * j] = acc;
            }
        }
        e
    }

    /// Hessian of `dist^2` in `M` (row-major flattening), where closed form.
    fn dist2_hessian(&self, m: &[f64]) -> Option<DMatrix<f64>> {
        let d = self.d;
        match d {
            1 => Some(DMatrix::from_element(1, 1, 2.0)),
            2 => {
                // dist^2 = |M|^2 - 2|L M| + 2 with L M = (m00 + m11, m10 - m01).
                let w = [m[0] + m[3], m[2] - m[1]];
                let r = w[0].hypot(w[1]);
                if r < 1e-8 {
                    return None;
                }
                let l = [[1.0, 0.0, 0.0, 1.0], [0.0, -1.0, 1.0, 0.0]];
                let wh = [w[0] / r, w[1] / r];
                let proj = [
                    [1.0 - wh[0] * wh[0], -wh[0] * wh[1]],
                    [-wh[1] * wh[0], 1.0 - wh[1] * wh[1]],
                ];
                Some(DMatrix::from_fn(4, 4, |a, b| {
                    let mut s = 0.0;
                    for u in 0..2 {
                        for v in 0..2 {
                            s += l[u][a] * proj[u][v] * l[v][b];
                        }
                    }
                    2.0 * (a == b) as u8 as f64 - 2.0 * s / r
                }))
            }
            _ => {
                // Closed form only on SO(3): D^2 dist^2(R)[G, G'] = 2 sym(R^T G) : sym(R^T G').
                let (rot, dist2) = nearest_rotation(m, 3);
                if dist2 > 1e-24 {
                    return None;
                }
                let sym_rt = |a: usize| -> [f64; 9] {
                    let (r0, s0) = (a / 3, a % 3);
                    let mut g = [0.0; 9];
                    for i in 0..3 {
                        g[i * 3 + s0] = rot[r0 * 3 + i];
                    }
                    let mut out = [0.0; 9];
                    for i in 0..3 {
                        for j in 0..3 {
                            out[i * 3 + j] = 0.5 * (g[i * 3 + j] + g[j * 3 + i]);
                        }
                    }
                    out
                };
                let basis: Vec<[f64; 9]> = (0..9).map(sym_rt).collect();
                Some(DMatrix::from_fn(9, 9, |a, b| {
                    2.0 * basis[a].iter().zip(&basis[b]).map(|(x, y)| x * y).sum::<f64>()
                }))
            }
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

impl CellEnergy for CauchyBornSplit {
    fn dim(&self) -> usize {
        self.d
    }

    fn corner_labels(&self) -> &DMatrix<f64> {
        &self.z
    }

    fn energy(&self, f: &[f64]) -> f64 {
        let m = self.affine(f);
        let (_, dist2) = nearest_rotation(&m[..self.d * self.d], self.d);
        let e = self.nonaffine(f);
        let e2: f64 = e[..self.d * self.nc].iter().map(|v| v * v).sum();
        0.5 * self.k * dist2 + 0.5 * self.mu * e2
    }

    fn gradient(&self, f: &[f64], out: &mut [f64]) {
        let (d, nc) = (self.d, self.nc);
        let m = self.affine(f);
        let (rot, _) = nearest_rotation(&m[..d * d], d);
        let e = self.nonaffine(f);
        for r in 0..d {
            for i in 0..nc {
                let mut acc = 0.0;
                for s in 0..d {
                    acc += (m[r * d + s] - rot[r * d + s]) * self.p[i * d + s];
                }
                out[r + d * i] = self.k * acc + self.mu * e[r + d * i];
            }
        }
    }

    fn hessian(&self, f: &[f64]) -> DMatrix<f64> {
        let (d, nc) = (self.d, self.nc);
        let n = d * nc;
        let m = self.affine(f);
        let Some(dd) = self.dist2_hessian(&m[..d * d]) else {
            return hessian_by_differences(self, f);
        };
        DMatrix::from_fn(n, n, |a, b| {
            let (r, i) = (a % d, a / d);
            let (t, l) = (b % d, b / d);
            let mut s = 0.0;
            for s0 in 0..d {
                for u in 0..d {
                    s += dd[(r * d + s0, t * d + u)] * self.p[i * d + s0] * self.p[l * d + u];
                }
            }
            let nonaffine = if r == t { self.mu * self.q[i * nc + l] } else { 0.0 };
            0.5 * self.k * s + nonaffine
        })
    }

    fn metadata(&self) -> ModelMetadata {
        let hessian = match self.d {
            3 => "analytic on the rotation orbit, central differences of the analytic gradient elsewhere",
            _ => "analytic",
        };
        ModelMetadata {
            name: "cauchy_born_split".into(),
            dim: self.d,
            params: BTreeMap::from([("k".into(), self.k), ("mu".into(), self.mu)]),
            gradient: "analytic".into(),
            hessian: hessian.into(),
        }
    }
}
