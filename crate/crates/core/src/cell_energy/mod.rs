//! Cell energies `W: R^{d x 2^d} -> [0, inf)`, their derivatives, the
//! Hessian at the reference cell and the resulting elasticity tensor.
//!
//! A cell configuration `F` is passed as a column-major `d x 2^d` slice:
//! `F[r + d * i]` is component `r` of corner `i`. Hessians are square
//! matrices over that same flattened index.

mod assumptions;
mod cauchy_born;
mod harmonic;
pub mod rotation;

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::corner_labels;

pub use assumptions::{check_assumptions, AssumptionReport, CheckOutcome};
pub use cauchy_born::CauchyBornSplit;
pub use harmonic::HarmonicChain;

/// Records how each derivative of a model is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub name: String,
    pub dim: usize,
    pub params: BTreeMap<String, f64>,
    pub gradient: String,
    pub hessian: String,
}

pub trait CellEnergy: Send + Sync + Debug {
    fn dim(&self) -> usize;

    /// Reference corner labels `Z` on which `W` vanishes.
    fn corner_labels(&self) -> &DMatrix<f64>;

    fn energy(&self, f: &[f64]) -> f64;

    /// `DW(F)`, written into `out` (same layout as `f`).
    fn gradient(&self, f: &[f64], out: &mut [f64]);

    /// `D^2 W(F)` as an `n x n` matrix, `n = d 2^d`.
    fn hessian(&self, f: &[f64]) -> DMatrix<f64>;

    fn metadata(&self) -> ModelMetadata;

    fn num_entries(&self) -> usize {
        self.corner_labels().len()
    }

    /// `Z` flattened column-major.
    fn reference(&self) -> Vec<f64> {
        self.corner_labels().as_slice().to_vec()
    }
}

/// Step used by the finite-difference fallbacks.
pub(crate) fn fd_step(f: &[f64]) -> f64 {
    1e-5 * (1.0 + f.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Central differences of the gradient, symmetrized.
pub fn hessian_by_differences(model: &dyn CellEnergy, f: &[f64]) -> DMatrix<f64> {
    let n = f.len();
    let h = fd_step(f);
    let mut hess = DMatrix::zeros(n, n);
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    let mut x = f.to_vec();
    for a in 0..n {
        x[a] = f[a] + h;
        model.gradient(&x, &mut gp);
        x[a] = f[a] - h;
        model.gradient(&x, &mut gm);
        x[a] = f[a];
        for b in 0..n {
            hess[(b, a)] = (gp[b] - gm[b]) / (2.0 * h);
        }
    }
    (&hess + hess.transpose()) * 0.5
}

/// Central differences of the energy.
pub fn gradient_by_differences(model: &dyn CellEnergy, f: &[f64]) -> Vec<f64> {
    let h = fd_step(f);
    let mut x = f.to_vec();
    (0..f.len())
        .map(|a| {
            x[a] = f[a] + h;
            let ep = model.energy(&x);
            x[a] = f[a] - h;
            let em = model.energy(&x);
            x[a] = f[a];
            (ep - em) / (2.0 * h)
        })
        .collect()
}

/// `H = D^2 W(Z)`, checked for major symmetry and returned exactly
/// symmetrized.
pub fn hessian_at_z(model: &dyn CellEnergy) -> Result<DMatrix<f64>> {
    let h = model.hessian(&model.reference());
    let scale = h.amax().max(1.0);
    let defect = (&h - h.transpose()).amax();
    if defect > 1e-8 * scale {
        return Err(Error::ModelDefect(format!(
            "Hessian at Z is not major symmetric (defect {defect:e})"
        )));
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Fourth-order tensor `C_{ipkq}` with `i, p, k, q < d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticityTensor {
    pub dim: usize,
    /// Entries in row-major order of `(i, p, k, q)`.
    pub entries: Vec<f64>,
}

impl ElasticityTensor {
    #[inline]
    pub fn idx(&self, i: usize, p: usize, k: usize, q: usize) -> usize {
        let d = self.dim;
        ((i * d + p) * d + k) * d + q
    }

    #[inline]
    pub fn get(&self, i: usize, p: usize, k: usize, q: usize) -> f64 {
        self.entries[self.idx(i, p, k, q)]
    }

    /// Scalar stiffness for `d = 1`.
    pub fn scalar(&self) -> Option<f64> {
        (self.dim == 1).then(|| self.entries[0])
    }

    /// `C : G` for a row-major `d x d` matrix `G`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for p in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    for q in 0..d {
                        s += self.get(i, p, k, q) * g[k * d + q];
                    }
                }
                out[i * d + p] = s;
            }
        }
        out
    }

    /// `A : C : B`.
    pub fn contract(&self, a: &[f64], b: &[f64]) -> f64 {
        self.apply(b).iter().zip(a).map(|(x, y)| x * y).sum()
    }

    /// Largest minor (`C_ipkq - C_pikq`) and major (`C_ipkq - C_kqip`)
    /// asymmetries.
    pub fn symmetry_defects(&self) -> (f64, f64) {
        let d = self.dim;
        let mut minor: f64 = 0.0;
        let mut major: f64 = 0.0;
        for i in 0..d {
            for p in 0..d {
                for k in 0..d {
                    for q in 0..d {
                        let c = self.get(i, p, k, q);
                        minor = minor.max((c - self.get(p, i, k, q)).abs());
                        minor = minor.max((c - self.get(i, p, q, k)).abs());
                        major = major.max((c - self.get(k, q, i, p)).abs());
                    }
                }
            }
        }
        (minor, major)
    }

    /// Acoustic tensor `A(n)_{ik} = C_{ipkq} n_p n_q`.
    pub fn acoustic(&self, n: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |i, k| {
            let mut s = 0.0;
            for p in 0..d {
                for q in 0..d {
                    s += self.get(i, p, k, q) * n[p] * n[q];
                }
            }
            s
        })
    }

    /// Largest eigenvalue of the acoustic tensor over a sampled set of unit
    /// directions (exact for `d = 1`).
    pub fn max_acoustic_eigenvalue(&self) -> f64 {
        let d = self.dim;
        let dirs: Vec<Vec<f64>> = match d {
            1 => vec![vec![1.0]],
            2 => (0..360)
                .map(|k| {
                    let t = k as f64 * std::f64::consts::PI / 360.0;
                    vec![t.cos(), t.sin()]
                })
                .collect(),
            _ => {
                let mut v = Vec::new();
                for a in 0..36 {
                    for b in 0..72 {
                        let th = a as f64 * std::f64::consts::PI / 36.0;
                        let ph = b as f64 * std::f64::consts::PI / 36.0;
                        v.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
                    }
                }
                v
            }
        };
        dirs.iter()
            .map(|n| {
                self.acoustic(n)
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Largest eigenvalue of `C` acting on symmetric matrices.
    pub fn max_eigenvalue(&self) -> f64 {
        let d = self.dim;
        let m = DMatrix::from_fn(d * d, d * d, |a, b| {
            let (i, p, k, q) = (a / d, a % d, b / d, b % d);
            self.get(i, p, k, q)
        });
        m.symmetric_eigen().eigenvalues.iter().cloned().fold(0.0, f64::max)
    }

    /// Nested `C[i][p][k][q]` for reports.
    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|p| (0..d).map(|k| (0..d).map(|q| self.get(i, p, k, q)).collect()).collect())
                    .collect()
            })
            .collect()
    }
}

/// `C_{ipkq} = sum_{j,l} Z_{pj} H_{(i,j),(k,l)} Z_{ql}`, rejected when minor
/// or major symmetry fails beyond `1e-10` relative to the largest entry.
pub fn elasticity_tensor(hess: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<ElasticityTensor> {
    let d = z.nrows();
    let nc = z.ncols();
    let n = d * nc;
    if hess.nrows() != n || hess.ncols() != n {
        return Err(Error::ModelDefect(format!("Hessian must be {n} x {n}")));
    }
    let scale_h = hess.amax().max(1.0);
    let h_defect = (hess - hess.transpose()).amax();
    if h_defect > 1e-10 * scale_h {
        return Err(Error::SymmetryViolation {
            kind: "Hessian major",
            defect: h_defect,
        });
    }
    let mut entries = vec![0.0; d * d * d * d];
    for i in 0..d {
        for p in 0..d {
            for k in 0..d {
                for q in 0..d {
                    let mut s = 0.0;
                    for j in 0..nc {
                        for l in 0..nc {
                            s += z[(p, j)] * hess[(j * d + i, l * d + k)] * z[(q, l)];
                        }
                    }
                    entries[((i * d + p) * d + k) * d + q] = s;
                }
            }
        }
    }
    let c = ElasticityTensor { dim: d, entries };
    let scale = c.entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let (minor, major) = c.symmetry_defects();
    if minor > 1e-10 * scale {
        return Err(Error::SymmetryViolation {
            kind: "minor",
            defect: minor,
        });
    }
    if major > 1e-10 * scale {
        return Err(Error::SymmetryViolation {
            kind: "major",
            defect: major,
        });
    }
    Ok(c)
}

/// Serializable model selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelSpec {
    HarmonicChain { k: f64 },
    CauchyBornSplit { mu: f64, k: f64 },
}

impl ModelSpec {
    /// Builds the model for the lattice basis `basis` (its corner labels).
    pub fn build(&self, basis: &DMatrix<f64>) -> Result<Arc<dyn CellEnergy>> {
        let z = corner_labels(basis.nrows(), basis)?;
        Ok(match self {
            ModelSpec::HarmonicChain { k } => Arc::new(HarmonicChain::with_labels(*k, z)?),
            ModelSpec::CauchyBornSplit { mu, k } => Arc::new(CauchyBornSplit::new(*mu, *k, z)?),
        })
    }

    /// Inverse of [`CellEnergy::metadata`] for the shipped models.
    pub fn from_metadata(meta: &ModelMetadata) -> Result<Self> {
        let param = |k: &str| {
            meta.params
                .get(k)
                .copied()
                .ok_or_else(|| Error::Format(format!("model metadata lacks parameter '{k}'")))
        };
        match meta.name.as_str() {
            "harmonic_chain" => Ok(ModelSpec::HarmonicChain { k: param("k")? }),
            "cauchy_born_split" => Ok(ModelSpec::CauchyBornSplit {
                mu: param("mu")?,
                k: param("k")?,
            }),
            other => Err(Error::Unknown {
                kind: "model",
                name: other.into(),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::HarmonicChain { .. } => "harmonic_chain",
            ModelSpec::CauchyBornSplit { .. } => "cauchy_born_split",
        }
    }
}
