//! Report envelope and CSV profile export.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;
use crate::run::{Outcome, PipelineReport, Verdict};
use crate::scenario::Scenario;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct ReportEnvelope<'a> {
    pub scenario: &'a Scenario,
    pub toolkit_version: &'static str,
    pub verdict: Verdict,
    pub reason: Option<&'a str>,
    pub report: &'a PipelineReport,
    /// Excluded from determinism comparisons.
    pub wall_time_ms: u64,
}

impl<'a> ReportEnvelope<'a> {
    pub fn new(scenario: &'a Scenario, outcome: &'a Outcome, wall_time_ms: u64) -> Self {
        ReportEnvelope {
            scenario,
            toolkit_version: TOOLKIT_VERSION,
            verdict: outcome.verdict,
            reason: outcome.reason.as_deref(),
            report: &outcome.report,
            wall_time_ms,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
}

/// Writes one CSV per profile in `report`, named `<scenario>.<profile>.csv`.
/// Returns the written paths in a fixed order.
pub fn emit_profiles(name: &str, report: &PipelineReport, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?;
    let path = |profile: &str| dir.join(format!("{name}.{profile}.csv"));
    let mut written = Vec::new();
    let mut emit = |profile: &str, f: &dyn Fn(BufWriter<File>) -> lipdiff_core::Result<()>| {
        let p = path(profile);
        f(create(&p)?)?;
        written.push(p);
        Ok::<_, CliError>(())
    };
    match report {
        PipelineReport::Certify(c) => {
            emit("jacobian-residual", &|w| c.jacobian.write_residual_csv(w))?;
            emit("lipschitz", &|w| c.lipschitz.write_csv(w))?;
            emit("directions", &|w| c.identity_check.write_csv(w))?;
        }
        PipelineReport::KarcherRegularity(r) => {
            let c = &r.certificate;
            emit("jacobian-residual", &|w| c.jacobian.write_residual_csv(w))?;
            emit("lipschitz", &|w| c.lipschitz.write_csv(w))?;
            emit("directions", &|w| c.identity_check.write_csv(w))?;
        }
        PipelineReport::ChainRule(r) => {
            emit("epsilon-trace", &|w| r.write_trace_csv(w))?;
            emit("lhs-quotients", &|w| r.lhs.write_csv(w))?;
            emit("rhs-quotients", &|w| r.rhs.write_csv(w))?;
        }
        PipelineReport::DerivedSet(s) => emit("quotients", &|w| s.write_csv(w))?,
        PipelineReport::DensityProbe(d) => emit("density", &|w| d.write_csv(w))?,
        PipelineReport::Lipschitz(l) => emit("lipschitz", &|w| l.write_csv(w))?,
        PipelineReport::KarcherMean(k) => {
            emit("karcher-trace", &|w| lipdiff_core::karcher::io::write_trace_csv(&k.trace, w))?
        }
        PipelineReport::Hypothesis(_) => {}
    }
    Ok(written)
}
