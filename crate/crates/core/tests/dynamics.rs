use std::f64::consts::PI;

use latdyn::cell_energy::ModelSpec;
use latdyn::discrete_ops::{atomistic_energy, atomistic_force, EnergyParams};
use latdyn::dynamics::{
    apriori_bounds, edie_audit, edie_audit_sampled, estimate_lambda_max, read_trajectory_binary, simulate, step,
    step_viscous, write_ledger_csv, write_trajectory_binary, Integrator, SimulationConfig,
};
use latdyn::fields::csv_row_count;
use latdyn::{Error, Lattice, LatticeField, LatticeSpec};

fn chain(eps: f64) -> (Lattice, EnergyParams) {
    let lat = Lattice::new(LatticeSpec::cubic_unit(1, eps, 3.0)).unwrap();
    let model = ModelSpec::HarmonicChain { k: 1.0 }.build(lat.basis()).unwrap();
    let p = EnergyParams::new(&lat, eps, model).unwrap();
    (lat, p)
}

fn sine(lat: &Lattice) -> LatticeField {
    LatticeField::from_fn(lat, |x| vec![(PI * x[0]).sin()])
}

/// `rho a'' + nu a' + lam a = 0`, `a(0) = a0`, `a'(0) = b0`, via the
/// characteristic roots in complex arithmetic.
fn modal(rho: f64, nu: f64, lam: f64, a0: f64, b0: f64, t: f64) -> f64 {
    if rho == 0.0 {
        return a0 * (-lam * t / nu).exp();
    }
    let disc = nu * nu - 4.0 * rho * lam;
    if disc > 0.0 {
        let s = disc.sqrt();
        let (r1, r2) = ((-nu + s) / (2.0 * rho), (-nu - s) / (2.0 * rho));
        let c1 = (b0 - r2 * a0) / (r1 - r2);
        let c2 = a0 - c1;
        c1 * (r1 * t).exp() + c2 * (r2 * t).exp()
    } else {
        let alpha = -nu / (2.0 * rho);
        let omega = (-disc).sqrt() / (2.0 * rho);
        (alpha * t).exp() * (a0 * (omega * t).cos() + (b0 - alpha * a0) / omega * (omega * t).sin())
    }
}

fn lambda_eps(eps: f64) -> f64 {
    4.0 * (PI * eps / 2.0).sin().powi(2) / (eps * eps)
}

fn sup_mode_error(lat: &Lattice, traj: &latdyn::dynamics::Trajectory, rho: f64, nu: f64) -> f64 {
    let lam = lambda_eps(lat.epsilon());
    let phi = sine(lat);
    let mut worst: f64 = 0.0;
    for (k, &t) in traj.times.iter().enumerate() {
        let a = modal(rho, nu, lam, 1.0, 0.0, t);
        for (x, y) in traj.u[k].values().iter().zip(phi.values()) {
            worst = worst.max((x - a * y).abs());
        }
    }
    worst
}

#[test]
fn zero_data_stays_zero() {
    let (lat, p) = chain(1.0 / 16.0);
    let z = LatticeField::zeros(&lat);
    let cfg = SimulationConfig::new(1.0, 1.0, 0.01, 0.5, Integrator::Rk4);
    let traj = simulate(&lat, &p, &cfg, &z, &z).unwrap();
    assert!(traj.u.iter().chain(&traj.v).all(|f| f.max_abs() == 0.0));
    let ledger = edie_audit(&traj).unwrap();
    assert!(ledger.rows.iter().all(|r| r.residual == 0.0 && r.kinetic == 0.0 && r.potential == 0.0));
    let ap = apriori_bounds(&ledger);
    assert!(ap.all_hold);
}

#[test]
fn equilibrium_is_fixed_point() {
    let (lat, p) = chain(1.0 / 16.0);
    let z = LatticeField::zeros(&lat);
    for (rho, integ) in [
        (1.0, Integrator::Rk4),
        (1.0, Integrator::SemiImplicitEuler),
        (0.0, Integrator::ViscousExplicit),
        (0.0, Integrator::ViscousImplicit),
    ] {
        let cfg = SimulationConfig::new(rho, 1.0, 1e-3, 1.0, integ);
        let (u, v) = step(&lat, &p, &cfg, &z, &z).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(v.max_abs(), 0.0);
    }
}

#[test]
fn rk4_matches_modal_solution() {
    let eps = 1.0 / 16.0;
    let (lat, p) = chain(eps);
    let u0 = sine(&lat);
    let z = LatticeField::zeros(&lat);
    for rho in [1.0, 0.0] {
        let mut cfg = SimulationConfig::new(rho, 1.0, eps / 200.0, 1.0, Integrator::Rk4);
        cfg.sample_every = 10;
        let traj = simulate(&lat, &p, &cfg, &u0, &z).unwrap();
        let err = sup_mode_error(&lat, &traj, rho, 1.0);
        assert!(err <= 1e-6, "rho={rho}: {err:e}");
    }
}

#[test]
fn underdamped_and_overdamped_branches() {
    let eps = 1.0 / 16.0;
    let (lat, p) = chain(eps);
    let u0 = sine(&lat);
    let z = LatticeField::zeros(&lat);
    for nu in [0.1, 20.0] {
        let cfg = SimulationConfig::new(1.0, nu, eps / 200.0, 1.0, Integrator::Rk4);
        let traj = simulate(&lat, &p, &cfg, &u0, &z).unwrap();
        assert!(sup_mode_error(&lat, &traj, 1.0, nu) <= 1e-6);
    }
}

#[test]
fn viscous_one_step_maps() {
    let eps = 1.0 / 16.0;
    let (lat, p) = chain(eps);
    let lam = lambda_eps(eps);
    let u0 = sine(&lat);
    let nu = 1.0;
    let dt = 1e-3;
    for (integ, factor) in [
        (Integrator::ViscousExplicit, 1.0 - dt * lam / nu),
        (Integrator::ViscousImplicit, 1.0 / (1.0 + dt * lam / nu)),
    ] {
        let cfg = SimulationConfig::new(0.0, nu, dt, 1.0, integ);
        let u1 = step_viscous(&lat, &p, &cfg, &u0).unwrap();
        for (a, b) in u1.values().iter().zip(u0.values()) {
            assert!((a - factor * b).abs() <= 1e-10, "{integ:?}");
        }
    }
}

#[test]
fn implicit_flow_converges_to_decay_rate() {
    let eps = 1.0 / 16.0;
    let (lat, p) = chain(eps);
    let lam = lambda_eps(eps);
    let u0 = sine(&lat);
    let z = LatticeField::zeros(&lat);
    let mut errs = Vec::new();
    for dt in [1e-2, 5e-3] {
        let cfg = SimulationConfig::new(0.0, 1.0, dt, 0.5, Integrator::ViscousImplicit);
        let traj = simulate(&lat, &p, &cfg, &u0, &z).unwrap();
        let last = traj.len() - 1;
        let a = traj.u[last].values().iter().zip(u0.values()).map(|(x, y)| x * y).sum::<f64>()
            / u0.values().iter().map(|y| y * y).sum::<f64>();
        errs.push((a - (-lam * 0.5f64).exp()).abs());
    }
    // First order in dt.
    assert!(errs[0] / errs[1] > 1.8 && errs[0] / errs[1] < 2.2, "{errs:?}");
}

#[test]
fn cauchy_born_implicit_step_solves_nonlinear_system() {
    let lat = Lattice::new(LatticeSpec::cubic_unit(2, 0.125, 3.0)).unwrap();
    let model = ModelSpec::CauchyBornSplit { mu: 1.0, k: 1.0 }.build(lat.basis()).unwrap();
    let p = EnergyParams::new(&lat, 0.5, model).unwrap();
    let u0 = LatticeField::from_fn(&lat, |x| {
        let b = (PI * x[0]).sin() * (PI * x[1]).sin();
        vec![0.3 * b, -0.2 * b]
    });
    let dt = 0.01;
    let cfg = SimulationConfig::new(0.0, 1.0, dt, 1.0, Integrator::ViscousImplicit);
    let u1 = step_viscous(&lat, &p, &cfg, &u0).unwrap();
    let mut r = u1.sub(&u0).unwrap();
    r.scale(1.0 / dt);
    r.axpy(1.0, &atomistic_force(&lat, &u1, &p).unwrap());
    let scale = u0.values().iter().map(|x| x * x).sum::<f64>().sqrt() / dt;
    assert!(r.values().iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-9 * scale);
}

#[test]
fn stability_bound_and_instability_abort() {
    let eps = 1.0 / 16.0;
    let (lat, p) = chain(eps);
    let u0 = sine(&lat);
    let z = LatticeField::zeros(&lat);
    let lam = estimate_lambda_max(&lat, &u0, &p, 300).unwrap();
    let exact = 4.0 * (PI * (1.0 - eps) / 2.0).sin().powi(2) / (eps * eps);
    assert!((lam - exact).abs() <= 1e-3 * exact, "{lam} vs {exact}");
    let dt = 2.5 / lam;
    let mut cfg = SimulationConfig::new(0.0, 1.0, dt, 1.0, Integrator::ViscousExplicit);
    assert!(matches!(simulate(&lat, &p, &cfg, &u0, &z), Err(Error::CflViolation { .. })));
    cfg.enforce_stability = false;
    assert!(matches!(simulate(&lat, &p, &cfg, &u0, &z), Err(Error::Instability { .. })));
    // Kept partial run: the a priori bounds flag the failure.
    cfg.abort_on_instability = false;
    let traj = simulate(&lat, &p, &cfg, &u0, &z).unwrap();
    assert!(traj.aborted_at.is_some());
    let ap = apriori_bounds(&edie_audit(&traj).unwrap());
    assert!(!ap.all_hold);
}

#[test]
fn ledger_residual_small_and_second_order() {
    let eps = 1.0 / 16.0;
    let (lat, p) = chain(eps);
    let u0 = sine(&lat);
    let z = LatticeField::zeros(&lat);
    for rho in [1.0, 0.0] {
        let cfg = SimulationConfig::new(rho, 1.0, eps / 200.0, 1.0, Integrator::Rk4);
        let traj = simulate(&lat, &p, &cfg, &u0, &z).unwrap();
        let ledger = edie_audit(&traj).unwrap();
        assert!(ledger.max_relative_residual() <= 1e-6, "{}", ledger.max_relative_residual());
        for w in ledger.rows.windows(2) {
            assert!(w[1].dissipation_visc >= w[0].dissipation_visc);
            assert!(w[1].dissipation_force_fd >= w[0].dissipation_force_fd);
        }
        assert!(apriori_bounds(&ledger).all_hold);

        let mut res = Vec::new();
        for div in [50.0, 100.0, 200.0] {
            let cfg = SimulationConfig::new(rho, 1.0, eps / div, 1.0, Integrator::Rk4);
            let traj = simulate(&lat, &p, &cfg, &u0, &z).unwrap();
            res.push(edie_audit(&traj).unwrap().final_residual().abs());
        }
        assert!(res[0] / res[1] >= 3.5 && res[1] / res[2] >= 3.5, "rho={rho}: {res:?}");
    }
}

#[test]
fn viscous_energy_is_nonincreasing() {
    let eps = 1.0 / 16.0;
    let (lat, p) = chain(eps);
    let u0 = LatticeField::from_fn(&lat, |x| vec![(PI * x[0]).sin() + 0.3 * (5.0 * PI * x[0]).sin()]);
    let z = LatticeField::zeros(&lat);
    for integ in [Integrator::Rk4, Integrator::ViscousExplicit, Integrator::ViscousImplicit] {
        let cfg = SimulationConfig::new(0.0, 1.0, 1e-4, 0.3, integ);
        let traj = simulate(&lat, &p, &cfg, &u0, &z).unwrap();
        let e: Vec<f64> = traj.u.iter().map(|u| atomistic_energy(&lat, u, &p).unwrap()).collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0]), "{integ:?}");
    }
}

#[test]
fn overdamped_inertial_energy_is_nonincreasing() {
    let eps = 1.0 / 16.0;
    let (lat, p) = chain(eps);
    let u0 = sine(&lat);
    let z = LatticeField::zeros(&lat);
    let cfg = SimulationConfig::new(1.0, 30.0, 1e-3, 1.0, Integrator::Rk4);
    let traj = simulate(&lat, &p, &cfg, &u0, &z).unwrap();
    let e: Vec<f64> = traj.u.iter().map(|u| atomistic_energy(&lat, u, &p).unwrap()).collect();
    assert!(e.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn sampled_ledger_routes_agree_with_dense() {
    let eps = 1.0 / 16.0;
    let (lat, p) = chain(eps);
    let u0 = sine(&lat);
    let u1 = LatticeField::from_fn(&lat, |x| vec![0.5 * (2.0 * PI * x[0]).sin()]);
    let mut cfg = SimulationConfig::new(1.0, 1.0, eps / 100.0, 1.0, Integrator::Rk4);
    cfg.sample_every = 1;
    let traj = simulate(&lat, &p, &cfg, &u0, &u1).unwrap();
    let dense = edie_audit(&traj).unwrap();
    let sampled = edie_audit_sampled(&lat, &p, &traj).unwrap();
    assert!(!sampled.dense && dense.dense);
    assert!((dense.rhs - sampled.rhs).abs() <= 1e-12 * dense.rhs);
    let (a, b) = (dense.rows.last().unwrap(), sampled.rows.last().unwrap());
    // Plain versus end-corrected trapezoid on the same step grid.
    assert!((a.residual - b.residual).abs() <= 1e-5 * dense.rhs);
    assert!(a.residual.abs() <= 1e-7 * dense.rhs);
    // The difference route sees the same balance up to discretization error.
    assert!(a.residual_fd.abs() <= 1e-4 * dense.rhs);
    assert!(b.residual_fd.abs() <= 1e-4 * dense.rhs);
}

#[test]
fn semi_implicit_euler_runs_and_conserves_roughly() {
    let eps = 1.0 / 16.0;
    let (lat, p) = chain(eps);
    let u0 = sine(&lat);
    let z = LatticeField::zeros(&lat);
    let cfg = SimulationConfig::new(1.0, 1.0, eps / 200.0, 1.0, Integrator::SemiImplicitEuler);
    let traj = simulate(&lat, &p, &cfg, &u0, &z).unwrap();
    assert!(sup_mode_error(&lat, &traj, 1.0, 1.0) < 1e-3);
    assert!(edie_audit(&traj).unwrap().max_relative_residual() < 1e-2);
}

#[test]
fn config_validation() {
    let ok = SimulationConfig::new(0.0, 1.0, 0.1, 1.0, Integrator::Rk4);
    assert!(ok.validate().is_ok());
    for bad in [
        SimulationConfig::new(0.0, 1.0, 0.1, 1.0, Integrator::SemiImplicitEuler),
        SimulationConfig::new(1.0, 1.0, 0.1, 1.0, Integrator::ViscousExplicit),
        SimulationConfig::new(1.0, 0.0, 0.1, 1.0, Integrator::Rk4),
        SimulationConfig::new(-1.0, 1.0, 0.1, 1.0, Integrator::Rk4),
    ] {
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
    }
    let json = r#"{"rho": 1.0, "nu": 0.5, "dt": 0.001, "t_end": 1.0}"#;
    let cfg: SimulationConfig = serde_json::from_str(json).unwrap();
    assert_eq!(cfg.integrator, Integrator::Rk4);
    assert_eq!(cfg.sample_every, 10);
}

#[test]
fn trajectory_files_round_trip() {
    let eps = 1.0 / 16.0;
    let (lat, p) = chain(eps);
    let u0 = sine(&lat);
    let z = LatticeField::zeros(&lat);
    let cfg = SimulationConfig::new(1.0, 1.0, eps / 20.0, 0.5, Integrator::Rk4);
    let traj = simulate(&lat, &p, &cfg, &u0, &z).unwrap();
    let mut buf = Vec::new();
    write_trajectory_binary(&traj, &mut buf).unwrap();
    let (header, samples) = read_trajectory_binary(buf.as_slice()).unwrap();
    let lat2 = Lattice::new(header.lattice.clone()).unwrap();
    let back = header.into_trajectory(&lat2, samples).unwrap();
    assert_eq!(back.times, traj.times);
    assert_eq!(back.nodes, traj.nodes);
    for (a, b) in back.u.iter().zip(&traj.u) {
        assert_eq!(a.values(), b.values());
    }
    assert!(read_trajectory_binary(&b"NOTATRAJ0000"[..]).is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.csv");
    let ledger = edie_audit(&traj).unwrap();
    write_ledger_csv(&path, &lat, &traj, &ledger).unwrap();
    assert_eq!(csv_row_count(&path).unwrap(), traj.len());
}

#[test]
fn cauchy_born_2d_ledger_balances() {
    let eps = 0.125;
    let lat = Lattice::new(LatticeSpec::cubic_unit(2, eps, 3.0)).unwrap();
    let model = ModelSpec::CauchyBornSplit { mu: 1.0, k: 1.0 }.build(lat.basis()).unwrap();
    let p = EnergyParams::new(&lat, eps, model).unwrap();
    let u0 = LatticeField::from_fn(&lat, |x| {
        let b = (PI * x[0]).sin() * (PI * x[1]).sin();
        vec![0.2 * b, 0.1 * b]
    });
    let z = LatticeField::zeros(&lat);
    let cfg = SimulationConfig::new(1.0, 0.5, eps / 100.0, 0.5, Integrator::Rk4);
    let traj = simulate(&lat, &p, &cfg, &u0, &z).unwrap();
    let ledger = edie_audit(&traj).unwrap();
    assert!(ledger.max_relative_residual() <= 1e-5, "{}", ledger.max_relative_residual());
    assert!(apriori_bounds(&ledger).all_hold);
}
