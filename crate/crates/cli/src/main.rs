//! `latdyn` command-line driver.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use latdyn::cell_energy::{check_assumptions, elasticity_tensor, hessian_at_z, ModelSpec};
use latdyn::convergence::{recovery_check, report_emit, run_sweep, DeltaRule, RecoveryTable, SweepSpec};
use latdyn::discrete_ops::EnergyParams;
use latdyn::dynamics::{
    apriori_bounds, edie_audit, read_trajectory_binary, simulate, write_ledger_csv, write_trajectory_binary,
    SimulationConfig,
};
use latdyn::fields::{project_fn, LatticeField};
use latdyn::lattice::{Lattice, LatticeSpec};
use latdyn::smooth::FieldSpec;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Parser)]
#[command(name = "latdyn", version, about = "Damped lattice dynamics and their continuum limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one lattice simulation and audit its energy balance.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the trajectory, ledger and summary.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a convergence sweep and write its CSV and JSON report.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the elasticity tensor of a model and its symmetry report.
    Tensor(ModelArgs),
    /// Recompute the energy ledger of a stored trajectory.
    Audit {
        #[arg(long)]
        traj: PathBuf,
        /// Ceiling on the relative balance residual.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Recovery-sequence tables for a set of smooth fields.
    Recover {
        #[arg(long)]
        config: PathBuf,
    },
    /// Randomized checks of the cell-energy hypotheses.
    CheckModel {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelName {
    HarmonicChain,
    CauchyBornSplit,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: ModelName,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        match self.model {
            ModelName::HarmonicChain => ModelSpec::HarmonicChain { k: self.k },
            ModelName::CauchyBornSplit => ModelSpec::CauchyBornSplit { mu: self.mu, k: self.k },
        }
    }
}

/// Input of `simulate`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    lattice: LatticeSpec,
    model: ModelSpec,
    delta: f64,
    physics: SimulationConfig,
    w0: FieldSpec,
    w1: FieldSpec,
    #[serde(default = "default_edie_tol")]
    edie_relative: f64,
}

fn default_edie_tol() -> f64 {
    1e-6
}

/// Input of `recover`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecoverConfig {
    fields: Vec<FieldSpec>,
    eps_seq: Vec<f64>,
    model: ModelSpec,
    #[serde(default)]
    delta_rule: DeltaRule,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn print_json(v: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run_simulate(config: &Path, out: &Path) -> Result<bool> {
    let cfg: SimulateConfig = read_json(config)?;
    let lattice = Lattice::new(cfg.lattice.clone())?;
    let model = cfg.model.build(&lattice.spec().basis_matrix())?;
    let params = EnergyParams::new(&lattice, cfg.delta, model)?;
    if cfg.w0.dim() != lattice.dim() || cfg.w1.dim() != lattice.dim() {
        bail!("initial data dimension does not match the lattice");
    }
    let u0 = project_fn(&lattice, cfg.w0.build().as_ref(), 8);
    let u1 = if cfg.physics.rho == 0.0 {
        LatticeField::zeros(&lattice)
    } else {
        project_fn(&lattice, cfg.w1.build().as_ref(), 8)
    };
    let traj = simulate(&lattice, &params, &cfg.physics, &u0, &u1)?;
    let ledger = edie_audit(&traj)?;
    let bounds = apriori_bounds(&ledger);
    std::fs::create_dir_all(out)?;
    write_trajectory_binary(&traj, BufWriter::new(File::create(out.join("trajectory.bin"))?))?;
    write_ledger_csv(&out.join("ledger.csv"), &lattice, &traj, &ledger)?;
    let residual = ledger.max_relative_residual();
    let edie_ok = residual <= cfg.edie_relative;
    let passed = edie_ok && bounds.all_hold && traj.aborted_at.is_none();
    let summary = json!({
        "config": cfg,
        "dt": traj.dt,
        "samples": traj.len(),
        "aborted_at": traj.aborted_at,
        "edie_relative_residual": residual,
        "edie_passed": edie_ok,
        "apriori": bounds,
        "all_passed": passed,
    });
    serde_json::to_writer_pretty(BufWriter::new(File::create(out.join("summary.json"))?), &summary)?;
    print_json(&summary)?;
    Ok(passed)
}

fn run_converge(config: &Path, out: &Path) -> Result<bool> {
    let spec: SweepSpec = read_json(config)?;
    let report = run_sweep(&spec)?;
    let summary = report_emit(&report, &[], out)?;
    for c in &summary.criteria {
        println!("{} {} {:?}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.values);
    }
    Ok(summary.all_passed)
}

fn run_tensor(m: &ModelArgs) -> Result<bool> {
    let model = m.spec().build(&DMatrix::identity(m.dim, m.dim))?;
    let h = hessian_at_z(model.as_ref())?;
    let c = elasticity_tensor(&h, model.corner_labels())?;
    let (minor, major) = c.symmetry_defects();
    let d = m.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut skew: f64 = 0.0;
    for _ in 0..100 {
        let a: Vec<f64> = (0..d * d).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let s: Vec<f64> = (0..d * d).map(|k| a[k] - a[(k % d) * d + k / d]).collect();
        skew = skew.max(c.apply(&s).iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let scale = c.entries.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let passed = minor.max(major).max(skew) <= 1e-10 * scale;
    print_json(&json!({
        "model": m.spec(),
        "dim": d,
        "tensor": c.to_nested(),
        "minor_defect": minor,
        "major_defect": major,
        "max_skew_response": skew,
        "symmetric": passed,
    }))?;
    Ok(passed)
}

fn run_audit(traj_path: &Path, tol: f64) -> Result<bool> {
    let f = File::open(traj_path).with_context(|| format!("opening {}", traj_path.display()))?;
    let (header, samples) = read_trajectory_binary(BufReader::new(f))?;
    let lattice = Lattice::new(header.lattice.clone())?;
    let traj = header.into_trajectory(&lattice, samples)?;
    let ledger = edie_audit(&traj)?;
    let bounds = apriori_bounds(&ledger);
    let residual = ledger.max_relative_residual();
    let passed = residual <= tol && bounds.all_hold;
    print_json(&json!({
        "samples": traj.len(),
        "dt": traj.dt,
        "edie_relative_residual": residual,
        "tolerance": tol,
        "ledger": ledger,
        "apriori": bounds,
        "all_passed": passed,
    }))?;
    Ok(passed)
}

fn run_recover(config: &Path) -> Result<bool> {
    let cfg: RecoverConfig = read_json(config)?;
    let tables = cfg
        .fields
        .iter()
        .map(|f| recovery_check(f.build().as_ref(), &cfg.eps_seq, &cfg.model, cfg.delta_rule))
        .collect::<latdyn::error::Result<Vec<RecoveryTable>>>()?;
    let passed = tables.iter().all(|t| t.energy_gap_decreasing() && t.grad_error_decreasing() && t.sup_bounded());
    print_json(&json!({ "tables": tables, "all_passed": passed }))?;
    Ok(passed)
}

fn run_check_model(m: &ModelArgs, samples: usize, seed: u64) -> Result<bool> {
    let model = m.spec().build(&DMatrix::identity(m.dim, m.dim))?;
    let report = check_assumptions(model.as_ref(), samples, seed);
    println!("{}", report.to_json());
    Ok(report.all_passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out } => run_simulate(config, out),
        Command::Converge { config, out } => run_converge(config, out),
        Command::Tensor(m) => run_tensor(m),
        Command::Audit { traj, tol } => run_audit(traj, *tol),
        Command::Recover { config } => run_recover(config),
        Command::CheckModel { model, samples, seed } => run_check_model(model, *samples, *seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
