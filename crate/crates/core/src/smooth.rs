//! Closed-form continuum fields with analytic gradients, used as initial
//! data, test directions and recovery targets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// A vector field `R^d -> R^d` with its Jacobian.
pub trait SmoothField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], out: &mut [f64]);

    /// Row-major Jacobian, `out[i * d + j] = d w_i / d x_j`.
    fn jacobian(&self, x: &[f64], out: &mut [f64]);

    fn value(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.eval(x, &mut v);
        v
    }
}

/// Serializable description of the shipped closed-form fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Zero {
        dim: usize,
    },
    /// `amplitude * sin(pi m x_0)^? * prod_r (1 - ((x_r - c_r)/radius)^2)_+^power`.
    Bump {
        amplitude: Vec<f64>,
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_power")]
        power: i32,
        #[serde(default)]
        sine_mode: Option<u32>,
    },
    /// `amplitude * prod_r sin(m_r pi x_r)` on the unit cube.
    SineMode {
        amplitude: Vec<f64>,
        modes: Vec<u32>,
    },
    Sum {
        terms: Vec<FieldSpec>,
    },
}

fn default_power() -> i32 {
    6
}

impl FieldSpec {
    pub fn dim(&self) -> usize {
        match self {
            FieldSpec::Zero { dim } => *dim,
            FieldSpec::Bump { center, .. } => center.len(),
            FieldSpec::SineMode { modes, .. } => modes.len(),
            FieldSpec::Sum { terms } => terms.first().map_or(0, |t| t.dim()),
        }
    }

    pub fn build(&self) -> Box<dyn SmoothField> {
        match self {
            FieldSpec::Zero { dim } => Box::new(ZeroField(*dim)),
            FieldSpec::Bump {
                amplitude,
                center,
                radius,
                power,
                sine_mode,
            } => Box::new(BumpField {
                amplitude: amplitude.clone(),
                center: center.clone(),
                radius: *radius,
                power: *power,
                sine_mode: *sine_mode,
            }),
            FieldSpec::SineMode { amplitude, modes } => Box::new(SineModeField {
                amplitude: amplitude.clone(),
                modes: modes.clone(),
            }),
            FieldSpec::Sum { terms } => Box::new(SumField(terms.iter().map(|t| t.build()).collect())),
        }
    }

    /// True when the field is supported strictly inside the unit cube.
    pub fn compactly_supported_in_unit_cube(&self) -> bool {
        match self {
            FieldSpec::Zero { .. } => true,
            FieldSpec::Bump { center, radius, .. } => {
                center.iter().all(|c| c - radius > 0.0 && c + radius < 1.0)
            }
            FieldSpec::SineMode { .. } => false,
            FieldSpec::Sum { terms } => terms.iter().all(|t| t.compactly_supported_in_unit_cube()),
        }
    }
}

pub struct ZeroField(pub usize);

impl SmoothField for ZeroField {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Polynomial bump, optionally modulated by a sine along the first axis.
#[derive(Clone, Debug)]
pub struct BumpField {
    pub amplitude: Vec<f64>,
    pub center: Vec<f64>,
    pub radius: f64,
    pub power: i32,
    pub sine_mode: Option<u32>,
}

impl BumpField {
    fn factor(&self, r: usize, s: f64) -> (f64, f64) {
        let t = (s - self.center[r]) / self.radius;
        if t.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let base = 1.0 - t * t;
        let p = self.power;
        let v = base.powi(p);
        let dv = p as f64 * base.powi(p - 1) * (-2.0 * t / self.radius);
        (v, dv)
    }

    fn profile(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = x.len();
        let factors: Vec<(f64, f64)> = (0..d).map(|r| self.factor(r, x[r])).collect();
        let (s, ds) = match self.sine_mode {
            Some(m) => {
                let k = m as f64 * PI;
                ((k * x[0]).sin(), k * (k * x[0]).cos())
            }
            None => (1.0, 0.0),
        };
        let prod: f64 = factors.iter().map(|f| f.0).product();
        for j in 0..d {
            let others: f64 = factors
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != j)
                .map(|(_, f)| f.0)
                .product();
            grad[j] = s * factors[j].1 * others + if j == 0 { ds * prod } else { 0.0 };
        }
        s * prod
    }
}

impl SmoothField for BumpField {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let mut g = vec![0.0; x.len()];
        let phi = self.profile(x, &mut g);
        for (o, a) in out.iter_mut().zip(&self.amplitude) {
            *o = a * phi;
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let mut g = vec![0.0; d];
        self.profile(x, &mut g);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = self.amplitude[i] * g[j];
            }
        }
    }
}

/// Product of sines vanishing on the boundary of the unit cube.
#[derive(Clone, Debug)]
pub struct SineModeField {
    pub amplitude: Vec<f64>,
    pub modes: Vec<u32>,
}

impl SmoothField for SineModeField {
    fn dim(&self) -> usize {
        self.modes.len()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let phi: f64 = self
            .modes
            .iter()
            .zip(x)
            .map(|(&m, &s)| (m as f64 * PI * s).sin())
            .product();
        for (o, a) in out.iter_mut().zip(&self.amplitude) {
            *o = a * phi;
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        for j in 0..d {
            let mut g = 1.0;
            for (r, (&m, &s)) in self.modes.iter().zip(x).enumerate() {
                let k = m as f64 * PI;
                g *= if r == j { k * (k * s).cos() } else { (k * s).sin() };
            }
            for i in 0..d {
                out[i * d + j] = self.amplitude[i] * g;
            }
        }
    }
}

pub struct SumField(pub Vec<Box<dyn SmoothField>>);

impl SmoothField for SumField {
    fn dim(&self) -> usize {
        self.0.first().map_or(0, |f| f.dim())
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut tmp = vec![0.0; out.len()];
        for f in &self.0 {
            f.eval(x, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut tmp = vec![0.0; out.len()];
        for f in &self.0 {
            f.jacobian(x, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
        }
    }
}

/// Field given by a pair of closures.
pub struct FnField<F, G> {
    dim: usize,
    value: F,
    jacobian: G,
}

impl<F, G> FnField<F, G>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, value: F, jacobian: G) -> Self {
        Self { dim, value, jacobian }
    }
}

impl<F, G> SmoothField for FnField<F, G>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.value)(x, out)
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        (self.jacobian)(x, out)
    }
}
