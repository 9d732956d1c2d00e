//! Randomized checks of the structural hypotheses on a cell energy:
//! (i) frame indifference, (ii) zero set equal to the rigid orbit of `Z`,
//! (iii) positivity of `D^2 W(Z)` off rigid motions, (iv) quadratic growth
//! on corner-mean-free configurations, (v) at most linear growth of the
//! gradient relative to `1 + |F|^2`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::rotation::random_rotation;
use super::CellEnergy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
    pub witness: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub model: String,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<CheckOutcome>,
    pub all_passed: bool,
}

impl AssumptionReport {
    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `R F + c`: rotate every corner and translate.
fn rigid(f: &[f64], rot: &[f64], c: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for (col, o) in f.chunks(d).zip(out.chunks_mut(d)) {
        for r in 0..d {
            o[r] = c[r] + (0..d).map(|s| rot[r * d + s] * col[s]).sum::<f64>();
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Removes the corner mean of each component.
fn mean_free(f: &mut [f64], d: usize) {
    let nc = f.len() / d;
    for r in 0..d {
        let m = (0..nc).map(|i| f[r + d * i]).sum::<f64>() / nc as f64;
        for i in 0..nc {
            f[r + d * i] -= m;
        }
    }
}

/// Orthonormal basis of infinitesimal rigid motions at `Z` (columns).
fn rigid_tangent(z: &DMatrix<f64>) -> DMatrix<f64> {
    let d = z.nrows();
    let nc = z.ncols();
    let n = d * nc;
    let mut cols: Vec<DMatrix<f64>> = Vec::new();
    for r in 0..d {
        cols.push(DMatrix::from_fn(n, 1, |a, _| (a % d == r) as u8 as f64));
    }
    for a in 0..d {
        for b in (a + 1)..d {
            let mut s = DMatrix::zeros(d, d);
            s[(a, b)] = 1.0;
            s[(b, a)] = -1.0;
            let sz = s * z;
            cols.push(DMatrix::from_column_slice(n, 1, sz.as_slice()));
        }
    }
    let m = DMatrix::from_columns(&cols.iter().map(|c| c.column(0).into_owned()).collect::<Vec<_>>());
    m.qr().q()
}

pub fn check_assumptions(model: &dyn CellEnergy, samples: usize, seed: u64) -> AssumptionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.dim();
    let z = model.reference();
    let n = z.len();
    let mut checks = Vec::new();

    // (i) W(R F + c) == W(F).
    {
        let mut worst: f64 = 0.0;
        let mut witness = None;
        for _ in 0..samples {
            let f: Vec<f64> = z.iter().zip(random_vec(n, &mut rng)).map(|(a, b)| a + 0.5 * b).collect();
            let rot = random_rotation(d, &mut rng);
            let c = random_vec(d, &mut rng);
            let w0 = model.energy(&f);
            let w1 = model.energy(&rigid(&f, &rot, &c, d));
            let rel = (w1 - w0).abs() / (1.0 + w0.abs());
            if rel > worst {
                worst = rel;
                witness = Some(f);
            }
        }
        let passed = worst <= 1e-10;
        checks.push(CheckOutcome {
            name: "frame_indifference".into(),
            passed,
            value: worst,
            detail: format!("max |W(RF+c) - W(F)| / (1 + |W(F)|) = {worst:.3e}"),
            witness: if passed { None } else { witness },
        });
    }

    // (ii) W vanishes on the orbit and is positive away from it.
    {
        let tangent = rigid_tangent(model.corner_labels());
        let mut orbit_max: f64 = 0.0;
        let mut off_min = f64::INFINITY;
        let mut witness = None;
        for _ in 0..samples {
            let rot = random_rotation(d, &mut rng);
            let c = random_vec(d, &mut rng);
            orbit_max = orbit_max.max(model.energy(&rigid(&z, &rot, &c, d)));
            let mut eta = DMatrix::from_column_slice(n, 1, &random_vec(n, &mut rng));
            eta -= &tangent * (tangent.transpose() * &eta);
            let scale = rng.gen_range(0.05..2.0) / eta.norm().max(1e-300);
            let f: Vec<f64> = z.iter().zip(eta.iter()).map(|(a, b)| a + scale * b).collect();
            let w = model.energy(&rigid(&f, &rot, &c, d));
            if w < off_min {
                off_min = w;
                witness = Some(f);
            }
        }
        let passed = orbit_max <= 1e-12 && off_min > 0.0;
        checks.push(CheckOutcome {
            name: "zero_set".into(),
            passed,
            value: off_min,
            detail: format!("max W on orbit = {orbit_max:.3e}, min W off orbit = {off_min:.3e}"),
            witness: if passed { None } else { witness },
        });
    }

    // (iii) D^2 W(Z) kills rigid directions and is positive on the rest.
    {
        let h = model.hessian(&z);
        let h = (&h + h.transpose()) * 0.5;
        let tangent = rigid_tangent(model.corner_labels());
        let kernel = (&h * &tangent).amax();
        let proj = DMatrix::identity(n, n) - &tangent * tangent.transpose();
        let eig = proj.symmetric_eigen();
        let comp: Vec<_> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0.5)
            .map(|(k, _)| eig.eigenvectors.column(k).into_owned())
            .collect();
        let (min_eig, max_eig) = if comp.is_empty() {
            (f64::INFINITY, 0.0)
        } else {
            let b = DMatrix::from_columns(&comp);
            let ev = (b.transpose() * &h * &b).symmetric_eigen().eigenvalues;
            (ev.min(), ev.max())
        };
        let passed = kernel <= 1e-8 * max_eig.max(1.0) && min_eig > 1e-8 * max_eig.max(1.0);
        checks.push(CheckOutcome {
            name: "hessian_coercivity".into(),
            passed,
            value: min_eig,
            detail: format!(
                "smallest eigenvalue off rigid motions = {min_eig:.3e}, largest = {max_eig:.3e}, |H t| = {kernel:.3e}"
            ),
            witness: None,
        });
    }

    // (iv) liminf W(F)/|F|^2 > 0 on mean-free F.
    {
        let mut min_ratio = f64::INFINITY;
        let mut worst_trend = f64::INFINITY;
        let mut witness = None;
        for _ in 0..samples {
            let mut dir = random_vec(n, &mut rng);
            mean_free(&mut dir, d);
            let nd = norm(&dir);
            dir.iter_mut().for_each(|v| *v /= nd);
            let ratio = |t: f64| model.energy(&dir.iter().map(|v| t * v).collect::<Vec<_>>()) / (t * t);
            let (r100, r1000) = (ratio(100.0), ratio(1000.0));
            let trend = r1000 / r100.max(1e-300);
            if r1000 < min_ratio || trend < worst_trend {
                witness = Some(dir.clone());
            }
            min_ratio = min_ratio.min(r1000);
            worst_trend = worst_trend.min(trend);
        }
        let passed = min_ratio > 1e-6 && worst_trend >= 0.5;
        checks.push(CheckOutcome {
            name: "quadratic_growth".into(),
            passed,
            value: min_ratio,
            detail: format!("min W/|F|^2 at |F| = 1000 is {min_ratio:.3e}, worst ratio(1000)/ratio(100) = {worst_trend:.3}"),
            witness: if passed { None } else { witness },
        });
    }

    // (v) |DW(F)| <= c (1 + |F|^2)^(1/2)... measured as |DW| / (1 + |F|^2) along rays.
    {
        let mut c_fit: f64 = 0.0;
        let mut worst_growth: f64 = 0.0;
        let mut witness = None;
        let mut g = vec![0.0; n];
        for _ in 0..samples {
            let mut dir = random_vec(n, &mut rng);
            let nd = norm(&dir);
            dir.iter_mut().for_each(|v| *v /= nd);
            let mut ratios = Vec::with_capacity(4);
            for t in [1.0, 10.0, 100.0, 1000.0] {
                let f: Vec<f64> = dir.iter().map(|v| t * v).collect();
                model.gradient(&f, &mut g);
                ratios.push(norm(&g) / (1.0 + t * t));
            }
            c_fit = ratios.iter().cloned().fold(c_fit, f64::max);
            let growth = ratios[3] / ratios[2].max(1e-300);
            if growth > worst_growth {
                worst_growth = growth;
                witness = Some(dir);
            }
        }
        let passed = worst_growth <= 2.0;
        checks.push(CheckOutcome {
            name: "gradient_growth".into(),
            passed,
            value: c_fit,
            detail: format!(
                "fitted c = {c_fit:.3e} in |DW| <= c (1 + |F|^2); worst ratio growth from |F| = 100 to 1000 is {worst_growth:.3}"
            ),
            witness: if passed { None } else { witness },
        });
    }

    let all_passed = checks.iter().all(|c| c.passed);
    AssumptionReport {
        model: model.metadata().name,
        seed,
        samples,
        checks,
        all_passed,
    }
}
