use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use super::config::Config;
use crate::error::{Error, Result};
use crate::limit::{
    DecompositionRow, ExplicitResiduals, GapReport, LimitMinimum, LinearMinimum, NonuniquenessCheck, RotatedCheck,
};
use crate::loads::{KernelReport, ProfileConstraints};
use crate::math3::Mat3;
use crate::nonlinear::{ConvergenceRow, ConvergenceStudy};
use crate::poly::Poly;

pub const TOOL: &str = "traction-gap";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the config file bytes.
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_bytes: &[u8], seed: u64) -> Self {
        let digest = Sha256::digest(config_bytes);
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
        }
    }
}

/// One certification check; `passed` is `value < threshold` unless `lower_bound` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "crate::nullable")]
    pub value: f64,
    pub threshold: f64,
    pub lower_bound: bool,
    pub passed: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, lower_bound: false, passed: value < threshold }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, lower_bound: true, passed: value > threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadCheck {
    /// Present for profile-defined loads.
    pub profile: Option<ProfileConstraints>,
    pub kernel: KernelReport,
    /// A rotation doing positive work on the reference configuration.
    pub reversed_witness: Option<Mat3>,
    /// `L((R − I)x)` at the witness.
    pub witness_work: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitCheck {
    pub profile: ProfileConstraints,
    /// Optimal radial profile, ascending powers of `r`.
    pub eta: Poly,
    pub psi_potential: Poly,
    pub residuals: ExplicitResiduals,
}

/// Subcommand result, tagged by subcommand name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportBody {
    CheckLoads(LoadCheck),
    Kernel(KernelReport),
    SolveLinear(LinearMinimum),
    SolveLimit(LimitMinimum),
    GapReport(Box<GapReport>),
    VerifyExplicit(ExplicitCheck),
    NonlinearStudy(ConvergenceStudy),
    RotatedCheck(RotatedCheck),
    Nonuniqueness(NonuniquenessCheck),
}

/// Contents of `report.json`. Wall time goes to `timing.json` so that this file
/// is a deterministic function of the config and the version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    /// Resolved configuration, tolerances included.
    pub config: Config,
    pub result: ReportBody,
    pub checks: Vec<Check>,
    pub certified: bool,
}

impl Report {
    pub fn new(provenance: Provenance, config: Config, result: ReportBody, checks: Vec<Check>) -> Self {
        let certified = checks.iter().all(|c| c.passed);
        Self { provenance, config, result, checks, certified }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map(|s| s + "\n").map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(e.to_string()))
    }

    /// Rows for `report.csv`, if the result is tabular.
    pub fn table(&self) -> Option<Table> {
        match &self.result {
            ReportBody::CheckLoads(LoadCheck { kernel, .. }) | ReportBody::Kernel(kernel) => Some(w2_table(kernel)),
            ReportBody::GapReport(g) => Some(decomposition_table(&g.decomposition_table)),
            ReportBody::NonlinearStudy(s) => Some(study_table(&s.rows)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<f64>>,
}

pub const W2_COLUMNS: &[&str] = &["a", "b", "c", "w2_work"];
pub const DECOMPOSITION_COLUMNS: &[&str] = &["theta", "value", "predicted", "residual"];
pub const STUDY_COLUMNS: &[&str] = &["h", "value_Gh", "gap_to_limit", "rot_dist", "strain_rescaled"];

fn w2_table(kernel: &KernelReport) -> Table {
    let rows = kernel.w2_values.iter().map(|s| vec![s.params.a, s.params.b, s.params.c, s.value]).collect();
    Table { header: W2_COLUMNS, rows }
}

fn decomposition_table(rows: &[DecompositionRow]) -> Table {
    Table { header: DECOMPOSITION_COLUMNS, rows: rows.iter().map(|r| vec![r.theta, r.value, r.predicted, r.residual]).collect() }
}

fn study_table(rows: &[ConvergenceRow]) -> Table {
    let rows =
        rows.iter().map(|r| vec![r.h, r.value_gh, r.gap_to_limit, r.rotation_distance, r.rescaled_strain]).collect();
    Table { header: STUDY_COLUMNS, rows }
}

impl Table {
    /// Writes the table; failed entries are written as `NaN`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::invalid(format!("writing {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(io)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("writing {}: {e}", path.display())))
    }
}
