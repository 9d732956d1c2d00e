//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use latdyn::cell_energy::{elasticity_tensor, hessian_at_z, ModelSpec};
use latdyn::convergence::{
    default_sweep_1d, default_sweep_2d, gateaux_consistency_check, recovery_check, run_sweep_with_states,
    ConvergenceReport, DeltaRule, SweepOutcome,
};
use latdyn::discrete_ops::{atomistic_energy, atomistic_force, discrete_divergence, discrete_gradient, EnergyParams};
use latdyn::dynamics::{apriori_bounds, edie_audit, simulate, Integrator, SimulationConfig, Trajectory};
use latdyn::fields::inner_product_eps;
use latdyn::smooth::FieldSpec;
use latdyn::{CellField, Lattice, LatticeField, LatticeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

/// Writes to the process stdout directly, past the harness capture, so the
/// verdicts show in ordinary `cargo test` runs.
fn report_line(line: &str) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn lattice(dim: usize, eps: f64) -> Lattice {
    Lattice::new(LatticeSpec::cubic_unit(dim, eps, 3.0)).unwrap()
}

fn params(lat: &Lattice, model: &ModelSpec, delta: f64) -> EnergyParams {
    EnergyParams::new(lat, delta, model.build(lat.basis()).unwrap()).unwrap()
}

fn random_field(lat: &Lattice, rng: &mut ChaCha8Rng, scale: f64) -> LatticeField {
    LatticeField::from_fn(lat, |_| (0..lat.dim()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect())
}

fn bump(amplitude: Vec<f64>, center: Vec<f64>, radius: f64, sine_mode: Option<u32>) -> FieldSpec {
    FieldSpec::Bump { amplitude, center, radius, power: 6, sine_mode }
}

fn cb() -> ModelSpec {
    ModelSpec::CauchyBornSplit { mu: 0.5, k: 1.0 }
}

fn sbp(dims: &[usize], pairs: usize, seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &dim in dims {
        for eps in [1.0 / 8.0, 1.0 / 16.0] {
            let lat = lattice(dim, eps);
            let n = lat.num_cells() * dim * lat.num_corners();
            for _ in 0..pairs / (2 * dims.len()) {
                let g = CellField::from_values(&lat, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
                let v = random_field(&lat, &mut rng, 1.0);
                let gv = discrete_gradient(&lat, &v).unwrap();
                let div = discrete_divergence(&lat, &g).unwrap();
                let lhs = g.dot(&gv).unwrap();
                let rhs: f64 = div.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
                let scale = g.dot(&g).unwrap().sqrt() * gv.dot(&gv).unwrap().sqrt();
                worst = worst.max((lhs + rhs).abs() / scale);
                count += 1;
            }
        }
    }
    verdict(worst <= 1e-12, format!("{count} pairs, max relative defect {worst:.2e}"))
}

fn skew_response(c: &latdyn::cell_energy::ElasticityTensor, rng: &mut ChaCha8Rng) -> f64 {
    let d = c.dim;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..d * d).map(|k| a[k] - a[(k % d) * d + k / d]).collect();
        worst = worst.max(c.apply(&s).iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    worst
}

fn tensor_symmetries(cases: &[(usize, ModelSpec)]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ok = true;
    let mut parts = Vec::new();
    for (dim, spec) in cases {
        let model = spec.build(&nalgebra::DMatrix::identity(*dim, *dim)).unwrap();
        let h = hessian_at_z(model.as_ref()).unwrap();
        let c = elasticity_tensor(&h, model.corner_labels()).unwrap();
        let (minor, major) = c.symmetry_defects();
        let skew = skew_response(&c, &mut rng);
        ok &= minor <= 1e-10 && major <= 1e-10 && skew <= 1e-10;
        if let ModelSpec::HarmonicChain { k } = spec {
            let err = (c.scalar().unwrap() - k).abs();
            ok &= err <= 1e-10;
            parts.push(format!("harmonic d={dim} |C-k|={err:.1e}"));
        }
        parts.push(format!("{} d={dim} minor {minor:.1e} major {major:.1e} skew {skew:.1e}", spec.name()));
    }
    verdict(ok, parts.join("; "))
}

fn force_matches_differences(cases: &[(usize, ModelSpec)]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for (dim, spec) in cases {
        let lat = lattice(*dim, 0.125);
        let p = params(&lat, spec, 0.125);
        let u = random_field(&lat, &mut rng, 0.5);
        let f = atomistic_force(&lat, &u, &p).unwrap();
        for _ in 0..50 {
            let v = random_field(&lat, &mut rng, 1.0);
            let exact = inner_product_eps(&lat, &f, &v).unwrap();
            let h = 1e-5;
            let mut up = u.clone();
            up.axpy(h, &v);
            let mut um = u.clone();
            um.axpy(-h, &v);
            let fd = (atomistic_energy(&lat, &up, &p).unwrap() - atomistic_energy(&lat, &um, &p).unwrap()) / (2.0 * h);
            worst = worst.max((fd - exact).abs() / exact.abs().max(1e-300));
        }
    }
    verdict(worst <= 1e-6, format!("{} directions, max relative error {worst:.2e}", 50 * cases.len()))
}

/// `rho a'' + nu a' + lam a = 0`, `a(0) = 1`, `a'(0) = 0`, from the
/// characteristic roots.
fn scalar_ode(rho: f64, nu: f64, lam: f64, t: f64) -> f64 {
    if rho == 0.0 {
        return (-lam * t / nu).exp();
    }
    let disc = nu * nu - 4.0 * rho * lam;
    if disc > 0.0 {
        let s = disc.sqrt();
        let (r1, r2) = ((-nu + s) / (2.0 * rho), (-nu - s) / (2.0 * rho));
        let c1 = -r2 / (r1 - r2);
        c1 * (r1 * t).exp() + (1.0 - c1) * (r2 * t).exp()
    } else {
        let alpha = -nu / (2.0 * rho);
        let omega = (-disc).sqrt() / (2.0 * rho);
        (alpha * t).exp() * ((omega * t).cos() - alpha / omega * (omega * t).sin())
    }
}

struct ModalRun {
    rho: f64,
    sup_error: f64,
    traj: Trajectory,
}

fn modal_runs() -> Vec<ModalRun> {
    let eps = 1.0 / 16.0;
    let lat = lattice(1, eps);
    let p = params(&lat, &ModelSpec::HarmonicChain { k: 1.0 }, eps);
    let phi = LatticeField::from_fn(&lat, |x| vec![(PI * x[0]).sin()]);
    let zero = LatticeField::zeros(&lat);
    // Dirichlet eigenvalue of the chain for sin(pi x).
    let lam = 4.0 * (PI * eps / 2.0).sin().powi(2) / (eps * eps);
    [1.0, 0.0]
        .into_iter()
        .map(|rho| {
            let mut cfg = SimulationConfig::new(rho, 1.0, eps / 200.0, 1.0, Integrator::Rk4);
            cfg.sample_every = 1;
            let traj = simulate(&lat, &p, &cfg, &phi, &zero).unwrap();
            let mut sup_error: f64 = 0.0;
            for (k, &t) in traj.times.iter().enumerate() {
                let a = scalar_ode(rho, 1.0, lam, t);
                for (x, y) in traj.u[k].values().iter().zip(phi.values()) {
                    sup_error = sup_error.max((x - a * y).abs());
                }
            }
            ModalRun { rho, sup_error, traj }
        })
        .collect()
}

fn modal_oracle(runs: &[ModalRun]) -> Verdict {
    let ok = runs.iter().all(|r| r.sup_error <= 1e-6);
    let detail = runs.iter().map(|r| format!("rho={} sup error {:.2e}", r.rho, r.sup_error)).collect::<Vec<_>>().join("; ");
    verdict(ok, detail)
}

/// Final balance residuals at `dt`, `dt/2`, `dt/4` and whether each halving
/// shrinks the residual at least 3.5 times.
fn residual_ratios(lat: &Lattice, p: &EnergyParams, u0: &LatticeField, cfg: &SimulationConfig) -> (Vec<f64>, bool) {
    let zero = LatticeField::zeros(lat);
    let res: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|div| {
            let mut c = cfg.clone();
            c.dt = cfg.dt / div;
            edie_audit(&simulate(lat, p, &c, u0, &zero).unwrap()).unwrap().final_residual().abs()
        })
        .collect();
    let ok = res.windows(2).all(|w| w[0] / w[1] >= 3.5);
    (res, ok)
}

fn edie(runs: &[ModalRun], sweeps: &[&ConvergenceReport]) -> Verdict {
    let eps = 1.0 / 16.0;
    let lat = lattice(1, eps);
    let p = params(&lat, &ModelSpec::HarmonicChain { k: 1.0 }, eps);
    let phi = LatticeField::from_fn(&lat, |x| vec![(PI * x[0]).sin()]);
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let ledger = edie_audit(&r.traj).unwrap();
        let rel = ledger.max_relative_residual();
        let bounds = apriori_bounds(&ledger).all_hold;
        let (res, halving) = residual_ratios(&lat, &p, &phi, &SimulationConfig::new(r.rho, 1.0, eps / 50.0, 1.0, Integrator::Rk4));
        ok &= rel <= 1e-6 && bounds && halving;
        parts.push(format!(
            "rho={} residual/rhs {rel:.2e}, halving ratios {:.2} {:.2}, a priori {bounds}",
            r.rho,
            res[0] / res[1],
            res[1] / res[2]
        ));
    }
    for s in sweeps {
        ok &= s.apriori_hold();
    }
    parts.push(format!("a priori on {} sweeps {}", sweeps.len(), sweeps.iter().all(|s| s.apriori_hold())));
    verdict(ok, parts.join("; "))
}

fn named(report: &ConvergenceReport, names: &[&str]) -> Verdict {
    let all = report.assertions();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in names {
        let c = all.iter().find(|c| c.name == *n).unwrap();
        ok &= c.passed;
        parts.push(format!("{} {}", c.name, c.passed));
    }
    verdict(ok, parts.join("; "))
}

fn solution_convergence(report: &ConvergenceReport) -> Verdict {
    let v = named(report, &["sup_ac_error_decreasing", "final_ac_below_ceiling"]);
    let sups: Vec<String> = report.entries.iter().map(|e| format!("{:.3e}", e.sup_ac_error)).collect();
    verdict(v.passed, format!("sup ac [{}], final/norm {:.3}; {}", sups.join(", "), report.final_ac_fraction(), v.detail))
}

fn recovery() -> Verdict {
    let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let fields = [
        bump(vec![1.0], vec![0.5], 0.4, None),
        bump(vec![0.5], vec![0.4], 0.3, Some(3)),
        FieldSpec::Sum { terms: vec![bump(vec![1.0], vec![0.35], 0.3, None), bump(vec![-0.5], vec![0.65], 0.3, None)] },
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for f in &fields {
        let t = recovery_check(f.build().as_ref(), &eps, &ModelSpec::HarmonicChain { k: 1.0 }, DeltaRule::Equal).unwrap();
        ok &= t.energy_gap_decreasing() && t.grad_error_decreasing() && t.sup_bounded();
        parts.push(format!(
            "gap {:.1e}->{:.1e} grad {:.1e}->{:.1e} sup ratio {:.2}<={:.2}",
            t.rows[0].energy_gap,
            t.rows[3].energy_gap,
            t.rows[0].grad_error,
            t.rows[3].grad_error,
            t.fitted_constant,
            t.constant_bound
        ));
    }
    verdict(ok, parts.join("; "))
}

fn gateaux(outcome: &SweepOutcome) -> Verdict {
    let vs = [bump(vec![1.0], vec![0.5], 0.3, None), bump(vec![1.0], vec![0.4], 0.35, Some(2))];
    let mut ok = true;
    let mut worst_riesz: f64 = 0.0;
    let mut checked = 0;
    for v in &vs {
        for &t in &outcome.report.spec.times() {
            let table = gateaux_consistency_check(outcome, v.build().as_ref(), t).unwrap();
            ok &= table.gap_decreasing();
            worst_riesz = worst_riesz.max(table.max_riesz_defect());
            checked += 1;
        }
    }
    verdict(ok, format!("{checked} (v, t) tables decreasing {ok}, max Riesz defect {worst_riesz:.1e}"))
}

fn viscous(runs: &[ModalRun], report: &ConvergenceReport) -> Verdict {
    let viscous_runs: Vec<&ModalRun> = runs.iter().filter(|r| r.rho == 0.0).collect();
    let modal_ok = viscous_runs.iter().all(|r| r.sup_error <= 1e-6);
    let ledger = edie_audit(&viscous_runs[0].traj).unwrap();
    let ledger_ok = ledger.max_relative_residual() <= 1e-6 && apriori_bounds(&ledger).all_hold;
    let energies = ledger.rows.windows(2).all(|w| w[1].potential <= w[0].potential);
    let sweep = report.assertions();
    let sweep_ok = sweep.iter().all(|c| c.passed);
    let failed: Vec<&str> = sweep.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    verdict(
        modal_ok && ledger_ok && energies && sweep_ok,
        format!(
            "modal {:.2e}, residual/rhs {:.2e}, modal energy nonincreasing {energies}, sweep assertions {} ({} failed: {failed:?})",
            viscous_runs[0].sup_error,
            ledger.max_relative_residual(),
            sweep.len(),
            failed.len()
        ),
    )
}

fn two_dimensional(report: &ConvergenceReport) -> Verdict {
    let cases = [(2, cb())];
    let identities = [sbp(&[2], 100, 11), tensor_symmetries(&cases), force_matches_differences(&cases)];
    let lat = lattice(2, 0.125);
    let p = params(&lat, &cb(), 0.125);
    let u0 = LatticeField::from_fn(&lat, |x| {
        let b = (PI * x[0]).sin() * (PI * x[1]).sin();
        vec![0.3 * b, -0.2 * b]
    });
    let cfg = SimulationConfig::new(1.0, 1.0, 0.125 / 50.0, 0.5, Integrator::Rk4);
    let (res, halving) = residual_ratios(&lat, &p, &u0, &cfg);
    let mut fine = cfg.clone();
    fine.dt /= 4.0;
    let ledger = edie_audit(&simulate(&lat, &p, &fine, &u0, &LatticeField::zeros(&lat)).unwrap()).unwrap();
    let rel = ledger.max_relative_residual();
    let ledger_ok = rel <= 1e-6 && apriori_bounds(&ledger).all_hold && halving;
    let sweep = named(report, &["sup_ac_error_decreasing", "edie_residual", "apriori_bounds"]);
    let ok = identities.iter().all(|v| v.passed) && ledger_ok && sweep.passed;
    let sups: Vec<String> = report.entries.iter().map(|e| format!("{:.3e}", e.sup_ac_error)).collect();
    verdict(
        ok,
        format!(
            "identities {:?}; residual/rhs {rel:.2e}, halving {:.2} {:.2}; sup ac [{}]; {}",
            identities.iter().map(|v| v.passed).collect::<Vec<_>>(),
            res[0] / res[1],
            res[1] / res[2],
            sups.join(", "),
            sweep.detail
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(usize, &str, Verdict, f64)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        report_line(&format!("{} {id:>2} {name} ({secs:.1}s): {}", if v.passed { "PASS" } else { "FAIL" }, v.detail));
        results.push((id, name, v, secs));
    };
    let models = [
        (1, ModelSpec::HarmonicChain { k: 1.7 }),
        (1, ModelSpec::CauchyBornSplit { mu: 0.8, k: 1.3 }),
        (2, cb()),
    ];

    run(1, "summation_by_parts", &mut || sbp(&[1, 2], 200, 1));
    run(2, "tensor_symmetries", &mut || tensor_symmetries(&models));
    run(3, "force_matches_energy_differences", &mut || force_matches_differences(&models));

    let modal = modal_runs();
    let inertial = run_sweep_with_states(&default_sweep_1d(1.0)).unwrap();
    let flow = run_sweep_with_states(&default_sweep_1d(0.0)).unwrap();
    let start = Instant::now();
    let planar = run_sweep_with_states(&default_sweep_2d()).unwrap();
    let planar_secs = start.elapsed().as_secs_f64();

    run(4, "modal_oracle", &mut || modal_oracle(&modal));
    run(5, "energy_balance_audit", &mut || edie(&modal, &[&inertial.report, &flow.report, &planar.report]));
    run(6, "solution_convergence", &mut || solution_convergence(&inertial.report));
    run(7, "energy_and_gradient_convergence", &mut || named(&inertial.report, &["energy_error_decreasing", "grad_error_decreasing"]));
    run(8, "recovery_sequences", &mut recovery);
    run(9, "first_variation_consistency", &mut || gateaux(&inertial));
    run(10, "purely_viscous_regime", &mut || viscous(&modal, &flow.report));
    run(11, "two_dimensional_smoke", &mut || {
        let mut v = two_dimensional(&planar.report);
        v.detail.push_str(&format!("; sweep {planar_secs:.1}s"));
        v
    });

    let failed: Vec<_> = results.iter().filter(|r| !r.2.passed).map(|r| (r.0, r.1)).collect();
    report_line(&format!("{} of {} criteria passed", results.len() - failed.len(), results.len()));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
