use latdyn::cell_energy::ModelSpec;
use latdyn::convergence::{
    default_sweep_1d, default_sweep_2d, gateaux_consistency_check, read_rows_csv, read_summary, recovery_check, report_emit,
    run_sweep, run_sweep_with_states, ConvergenceReport, DeltaRule, ReportSummary, ROWS_FILE, SUMMARY_FILE,
};
use latdyn::smooth::FieldSpec;

fn bump(amplitude: Vec<f64>, center: Vec<f64>, radius: f64, sine_mode: Option<u32>) -> FieldSpec {
    FieldSpec::Bump { amplitude, center, radius, power: 6, sine_mode }
}

fn print_report(r: &ConvergenceReport) {
    for e in &r.entries {
        println!(
            "eps {:.5} sup_ac {:.3e} norm {:.3e} edie {:.2e} apriori {} mono {} t {:.2}s",
            e.epsilon, e.sup_ac_error, e.data_norm, e.edie_residual, e.apriori_hold, e.energy_nonincreasing, e.runtime_s
        );
        for row in &e.rows {
            println!("   t {:.3} ac {:.3e} en {:.3e} grad {:.3e}", row.t, row.ac_error, row.energy_error, row.grad_error);
        }
    }
}

#[test]
fn zero_data_give_zero_errors() {
    let mut spec = default_sweep_1d(1.0);
    spec.initial_data.w0 = FieldSpec::Zero { dim: 1 };
    spec.initial_data.w1 = FieldSpec::Zero { dim: 1 };
    spec.eps_seq = vec![1.0 / 8.0, 1.0 / 16.0];
    let r = run_sweep(&spec).unwrap();
    assert!(r.rows().all(|row| row.ac_error == 0.0 && row.energy_error == 0.0 && row.grad_error == 0.0));
}

#[test]
fn inertial_sweep_converges() {
    let r = run_sweep(&default_sweep_1d(1.0)).unwrap();
    print_report(&r);
    for a in r.assertions() {
        assert!(a.passed, "{} {:?}", a.name, a.values);
    }
}

#[test]
fn viscous_sweep_converges() {
    let r = run_sweep(&default_sweep_1d(0.0)).unwrap();
    print_report(&r);
    for a in r.assertions() {
        assert!(a.passed, "{} {:?}", a.name, a.values);
    }
}

#[test]
fn grid_reference_matches_modal_reference_in_1d() {
    let mut spec = default_sweep_1d(1.0);
    spec.eps_seq = vec![1.0 / 16.0, 1.0 / 32.0];
    let modal = run_sweep(&spec).unwrap();
    spec.reference.force_grid = true;
    spec.reference.grid_refine = 16;
    let grid = run_sweep(&spec).unwrap();
    // Reference changes stay below 1% of the smallest reported sup gap.
    let smallest = modal.entries.iter().fold(f64::INFINITY, |m, e| m.min(e.sup_ac_error));
    for (a, b) in modal.entries.iter().zip(&grid.entries) {
        assert!((a.sup_ac_error - b.sup_ac_error).abs() < 0.01 * smallest);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert!((ra.ac_error - rb.ac_error).abs() < 0.01 * smallest);
        }
    }
}

#[test]
fn two_dimensional_sweep() {
    let r = run_sweep(&default_sweep_2d()).unwrap();
    print_report(&r);
    println!("{:?}", r.reference);
    assert!(r.sup_ac_strictly_decreasing());
}

#[test]
fn planar_reference_is_refined_enough() {
    // The shipped reference against one twice as coarse; for a second-order
    // grid solver the shipped reference error is about a third of the change.
    let spec = default_sweep_2d();
    let fine = run_sweep(&spec).unwrap();
    let mut coarser = spec.clone();
    coarser.reference.grid_refine /= 2;
    let coarse = run_sweep(&coarser).unwrap();
    let smallest = fine.entries.iter().fold(f64::INFINITY, |m, e| m.min(e.sup_ac_error));
    for (a, b) in fine.rows().zip(coarse.rows()) {
        assert!((a.ac_error - b.ac_error).abs() / 3.0 < 0.01 * smallest, "{} vs {}", a.ac_error, b.ac_error);
    }
}

#[test]
fn recovery_sequences() {
    let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let fields = [
        bump(vec![1.0], vec![0.5], 0.4, None),
        bump(vec![0.5], vec![0.4], 0.3, Some(3)),
        FieldSpec::Sum { terms: vec![bump(vec![1.0], vec![0.35], 0.3, None), bump(vec![-0.5], vec![0.65], 0.3, None)] },
    ];
    for f in &fields {
        let t = recovery_check(f.build().as_ref(), &eps, &ModelSpec::HarmonicChain { k: 1.0 }, DeltaRule::Equal).unwrap();
        for r in &t.rows {
            println!("eps {} gap {:.3e} grad {:.3e} sup {:.3}", r.epsilon, r.energy_gap, r.grad_error, r.grad_sup);
        }
        println!("fitted {} bound {}", t.fitted_constant, t.constant_bound);
        assert!(t.energy_gap_decreasing() && t.grad_error_decreasing() && t.sup_bounded());
    }
    let f2 = bump(vec![0.2, -0.1], vec![0.5, 0.5], 0.35, None);
    let t = recovery_check(f2.build().as_ref(), &eps[..3], &ModelSpec::CauchyBornSplit { mu: 0.5, k: 1.0 }, DeltaRule::Equal).unwrap();
    for r in &t.rows {
        println!("2d eps {} gap {:.3e} grad {:.3e} sup {:.3}", r.epsilon, r.energy_gap, r.grad_error, r.grad_sup);
    }
    assert!(t.energy_gap_decreasing() && t.grad_error_decreasing() && t.sup_bounded());
}

#[test]
fn recovery_of_zero_is_exact() {
    let t = recovery_check(FieldSpec::Zero { dim: 1 }.build().as_ref(), &[0.125, 0.0625], &ModelSpec::HarmonicChain { k: 2.0 }, DeltaRule::Equal).unwrap();
    assert!(t.rows.iter().all(|r| r.energy_lattice == 0.0 && r.energy_gap == 0.0 && r.grad_error == 0.0));
}

#[test]
fn gateaux_derivatives_converge() {
    let out = run_sweep_with_states(&default_sweep_1d(1.0)).unwrap();
    for v in [bump(vec![1.0], vec![0.5], 0.3, None), bump(vec![1.0], vec![0.4], 0.35, Some(2))] {
        for t in [0.0, 0.25, 0.5] {
            let table = gateaux_consistency_check(&out, v.build().as_ref(), t).unwrap();
            for r in &table.rows {
                println!("t {t} eps {} lat {:.6e} cont {:.6e} gap {:.3e} riesz {:.1e}", r.epsilon, r.lattice_value, r.continuum_value, r.gap, r.riesz_defect);
            }
            assert!(table.gap_decreasing());
            assert!(table.max_riesz_defect() < 1e-12);
        }
    }
}

#[test]
fn report_round_trip() {
    let mut spec = default_sweep_1d(1.0);
    spec.eps_seq = vec![1.0 / 8.0, 1.0 / 16.0];
    let r = run_sweep(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = report_emit(&r, &[], dir.path()).unwrap();
    let rows = read_rows_csv(&dir.path().join(ROWS_FILE)).unwrap();
    assert_eq!(rows, r.rows().cloned().collect::<Vec<_>>());
    let back = read_summary(&dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(back, summary);
    assert_eq!(back.criteria.len(), r.assertions().len());

    let text = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["unexpected"] = serde_json::json!(1);
    assert!(serde_json::from_value::<ReportSummary>(value).is_err());
    let again = report_emit(&r, &[], dir.path()).unwrap();
    let text2 = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    let strip = |s: &str| s.lines().filter(|l| !l.contains("runtime_s")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&text), strip(&text2));
    assert_eq!(again.criteria, summary.criteria);
}

#[test]
fn empty_report_writes_header_only() {
    let mut r = run_sweep(&{
        let mut s = default_sweep_1d(1.0);
        s.eps_seq = vec![0.125];
        s
    })
    .unwrap();
    r.entries.clear();
    let dir = tempfile::tempdir().unwrap();
    report_emit(&r, &[], dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join(ROWS_FILE)).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("k,epsilon,delta,t,ac_error"));
    assert!(read_rows_csv(&dir.path().join(ROWS_FILE)).unwrap().is_empty());
}

#[test]
fn invalid_sweeps_are_rejected() {
    let mut s = default_sweep_1d(1.0);
    s.eps_seq = vec![1.0 / 16.0, 1.0 / 8.0];
    assert!(run_sweep(&s).is_err());
    let mut s = default_sweep_1d(1.0);
    s.sample_times = vec![2.0];
    assert!(run_sweep(&s).is_err());
    let mut s = default_sweep_1d(1.0);
    s.initial_data.w0 = FieldSpec::SineMode { amplitude: vec![1.0], modes: vec![1] };
    assert!(run_sweep(&s).is_err());
    let mut s = default_sweep_1d(1.0);
    s.max_work = 10.0;
    assert!(matches!(run_sweep(&s), Err(latdyn::error::Error::BudgetExceeded(_))));
    let json = serde_json::to_string(&default_sweep_1d(1.0)).unwrap().replace("\"eps_seq\"", "\"eps_sequence\"");
    assert!(serde_json::from_str::<latdyn::convergence::SweepSpec>(&json).is_err());
}
