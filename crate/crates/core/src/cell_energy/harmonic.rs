use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{CellEnergy, ModelMetadata};
use crate::error::{Error, Result};
use crate::lattice::corner_labels;

/// Nearest-neighbour spring `W(F) = k/2 (F_2 - F_1 - l)^2` in one dimension,
/// with rest length `l = Z_2 - Z_1`.
#[derive(Clone, Debug)]
pub struct HarmonicChain {
    k: f64,
    rest: f64,
    z: DMatrix<f64>,
}

impl HarmonicChain {
    /// Unit spacing, `Z = (-1/2, 1/2)`.
    pub fn new(k: f64) -> Self {
        let z = corner_labels(1, &DMatrix::identity(1, 1)).expect("1d labels");
        Self::with_labels(k, z).expect("valid stiffness")
    }

    pub fn with_labels(k: f64, z: DMatrix<f64>) -> Result<Self> {
        if z.nrows() != 1 || z.ncols() != 2 {
            return Err(Error::UnsupportedDimension(z.nrows()));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidSpec(format!("spring stiffness must be positive, got {k}")));
        }
        Ok(Self {
            k,
            rest: z[(0, 1)] - z[(0, 0)],
            z,
        })
    }

    pub fn stiffness(&self) -> f64 {
        self.k
    }
}

impl CellEnergy for HarmonicChain {
    fn dim(&self) -> usize {
        1
    }

    fn corner_labels(&self) -> &DMatrix<f64> {
        &self.z
    }

    fn energy(&self, f: &[f64]) -> f64 {
        0.5 * self.k * (f[1] - f[0] - self.rest).powi(2)
    }

    fn gradient(&self, f: &[f64], out: &mut [f64]) {
        let s = self.k * (f[1] - f[0] - self.rest);
        out[0] = -s;
        out[1] = s;
    }

    fn hessian(&self, _f: &[f64]) -> DMatrix<f64> {
        let k = self.k;
        DMatrix::from_row_slice(2, 2, &[k, -k, -k, k])
    }

    fn metadata(&self) -> ModelMetadata {
        ModelMetadata {
            name: "harmonic_chain".into(),
            dim: 1,
            params: BTreeMap::from([("k".into(), self.k), ("rest_length".into(), self.rest)]),
            gradient: "analytic".into(),
            hessian: "analytic".into(),
        }
    }
}
