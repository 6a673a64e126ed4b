//! On-disk run report: everything `verify` needs to rebuild the system
//! and re-evaluate both the algebraic residual and the pointwise check.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

use nperiodic::solver::{IterationRecord, SolveStatus};
use nperiodic::UnknownVector64;

use crate::config::{EquationSection, SolverSection};

pub const REPORT_SCHEMA: &str = "nperiodic/report/v1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GivenSpec {
    pub n: usize,
    /// Resolved absolute wave numbers.
    pub k: Vec<f64>,
    /// Resolved absolute tau diagonal.
    pub tau_diag: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub m_max: usize,
    pub tail_tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedSpec {
    pub mode: String,
    pub c1_0: f64,
    pub c2_0: f64,
    pub root_index: usize,
    pub rng_seed: u64,
    pub fallback: Vec<bool>,
    pub x0: UnknownVector64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveSpec {
    pub status: SolveStatus,
    pub iterations: usize,
    pub h_norm: f64,
    pub degenerate_l_zero: bool,
    pub x: UnknownVector64,
    pub trace: Vec<IterationRecord<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleSpec {
    pub points: usize,
    pub tol: f64,
    pub max_normalized_residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub equation: EquationSection,
    pub given: GivenSpec,
    pub truncation: TruncationSpec,
    pub solver: SolverSection,
    pub seed: SeedSpec,
    pub solve: SolveSpec,
    pub oracle: Option<OracleSpec>,
}

impl RunReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading report {}", path.display()))?;
        let report: RunReport = serde_json::from_str(&text)
            .with_context(|| format!("parsing report {}", path.display()))?;
        if report.schema != REPORT_SCHEMA {
            bail!(
                "{}: unsupported schema `{}` (expected `{REPORT_SCHEMA}`)",
                path.display(),
                report.schema
            );
        }
        Ok(report)
    }
}
