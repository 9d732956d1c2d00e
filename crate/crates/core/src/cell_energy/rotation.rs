//! Nearest rotations and random elements of `SO(d)`.

use nalgebra::{DMatrix, Matrix3};
use rand::Rng;
use rand_distr::StandardNormal;

/// Nearest rotation to a `d x d` matrix (row-major) and the squared
/// distance `dist^2(M, SO(d))`.
pub fn nearest_rotation(m: &[f64], d: usize) -> (Vec<f64>, f64) {
    match d {
        1 => (vec![1.0], (m[0] - 1.0).powi(2)),
        2 => {
            let (a, b, c, e) = (m[0], m[1], m[2], m[3]);
            let w0 = a + e;
            let w1 = c - b;
            let r = w0.hypot(w1);
            let (cs, sn) = if r > 0.0 { (w0 / r, w1 / r) } else { (1.0, 0.0) };
            let norm2 = a * a + b * b + c * c + e * e;
            (vec![cs, -sn, sn, cs], (norm2 - 2.0 * r + 2.0).max(0.0))
        }
        3 => {
            let mm = Matrix3::from_row_slice(m);
            let svd = mm.svd(true, true);
            let u = svd.u.unwrap();
            let vt = svd.v_t.unwrap();
            let s = svd.singular_values;
            let kmin = (0..3).min_by(|&i, &j| s[i].total_cmp(&s[j])).unwrap();
            let sign = if (u * vt).determinant() < 0.0 { -1.0 } else { 1.0 };
            let mut diag = Matrix3::identity();
            diag[(kmin, kmin)] = sign;
            let r = u * diag * vt;
            let mut dist2 = 0.0;
            for i in 0..3 {
                let si = if i == kmin { sign * s[i] } else { s[i] };
                dist2 += (si - 1.0).powi(2);
            }
            let out = (0..9).map(|k| r[(k / 3, k % 3)]).collect();
            (out, dist2)
        }
        _ => unreachable!("dimension checked at construction"),
    }
}

/// Haar-distributed rotation, row-major.
pub fn random_rotation(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    match d {
        1 => vec![1.0],
        2 => {
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            vec![t.cos(), -t.sin(), t.sin(), t.cos()]
        }
        _ => {
            let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let qr = g.qr();
            let mut q = qr.q();
            let r = qr.r();
            for j in 0..d {
                if r[(j, j)] < 0.0 {
                    for i in 0..d {
                        q[(i, j)] = -q[(i, j)];
                    }
                }
            }
            if q.determinant() < 0.0 {
                for i in 0..d {
                    q[(i, 0)] = -q[(i, 0)];
                }
            }
            (0..d * d).map(|k| q[(k / d, k % d)]).collect()
        }
    }
}

/// Rotation about the first axis pair by angle `t`, row-major.
pub fn plane_rotation(d: usize, t: f64) -> Vec<f64> {
    let mut r = vec![0.0; d * d];
    for i in 0..d {
        r[i * d + i] = 1.0;
    }
    if d >= 2 {
        r[0] = t.cos();
        r[1] = -t.sin();
        r[d] = t.sin();
        r[d + 1] = t.cos();
    }
    r
}
