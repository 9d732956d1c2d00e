//! CSV and JSON artifacts of a sweep.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::{ConvergenceReport, ReferenceInfo, SampleRow, SweepSpec, Tolerances};

pub const ROWS_FILE: &str = "sweep_rows.csv";
pub const SUMMARY_FILE: &str = "sweep_summary.json";

const ROW_HEADER: [&str; 9] = [
    "k",
    "epsilon",
    "delta",
    "t",
    "ac_error",
    "energy_lattice",
    "energy_continuum",
    "energy_error",
    "grad_error",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionOutcome {
    pub name: String,
    pub passed: bool,
    /// Measured quantities behind the verdict.
    pub values: Vec<f64>,
}

impl CriterionOutcome {
    pub fn new(name: &str, passed: bool, values: Vec<f64>) -> Self {
        Self { name: name.to_string(), passed, values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub crate_version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySummary {
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub dt: f64,
    pub num_points: usize,
    pub sup_ac_error: f64,
    pub data_norm: f64,
    pub edie_residual: f64,
    pub apriori_hold: bool,
    pub energy_nonincreasing: bool,
    pub aborted_at: Option<f64>,
    pub runtime_s: f64,
}

/// Schema of the JSON summary; unknown fields are rejected on read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSummary {
    pub spec: SweepSpec,
    pub environment: Environment,
    pub tolerances: Tolerances,
    pub reference: ReferenceInfo,
    pub entries: Vec<EntrySummary>,
    pub criteria: Vec<CriterionOutcome>,
    pub all_passed: bool,
}

impl ReportSummary {
    pub fn new(report: &ConvergenceReport, extra: &[CriterionOutcome]) -> Self {
        let mut criteria = report.assertions();
        criteria.extend_from_slice(extra);
        let entries = report
            .entries
            .iter()
            .map(|e| EntrySummary {
                k: e.k,
                epsilon: e.epsilon,
                delta: e.delta,
                dt: e.dt,
                num_points: e.num_points,
                sup_ac_error: e.sup_ac_error,
                data_norm: e.data_norm,
                edie_residual: e.edie_residual,
                apriori_hold: e.apriori_hold,
                energy_nonincreasing: e.energy_nonincreasing,
                aborted_at: e.aborted_at,
                runtime_s: e.runtime_s,
            })
            .collect();
        Self {
            spec: report.spec.clone(),
            environment: Environment::current(),
            tolerances: report.spec.tolerances.clone(),
            reference: report.reference.clone(),
            entries,
            all_passed: criteria.iter().all(|c| c.passed),
            criteria,
        }
    }
}

/// Writes `sweep_rows.csv` (one row per `(k, t)`) and `sweep_summary.json`
/// into `dir`, returning the summary.
pub fn report_emit(report: &ConvergenceReport, extra: &[CriterionOutcome], dir: &Path) -> Result<ReportSummary> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(dir.join(ROWS_FILE))?;
    w.write_record(ROW_HEADER)?;
    for row in report.rows() {
        w.serialize(row)?;
    }
    w.flush()?;
    let summary = ReportSummary::new(report, extra);
    let f = BufWriter::new(File::create(dir.join(SUMMARY_FILE))?);
    serde_json::to_writer_pretty(f, &summary)?;
    Ok(summary)
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<SampleRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<SampleRow>, _>>()?;
    Ok(rows)
}

pub fn read_summary(path: &Path) -> Result<ReportSummary> {
    let f = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}
