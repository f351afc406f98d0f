//! Declarative scenario files.
//!
//! ```json
//! {
//!   "schema": "lipdiff-scenario/1",
//!   "name": "cube-at-zero",
//!   "pipeline": "certify",
//!   "seed": 7,
//!   "map": { "name": "cube" },
//!   "x": [0.0]
//! }
//! ```
//!
//! Matrices appear either inline as rows or as paths to matrix files,
//! resolved relative to the scenario file.

use std::path::{Path, PathBuf};

use lipdiff_core::derived::StepSchedule;
use lipdiff_core::func::{catalog_get_with, CatalogEntry, CatalogParams, Norm, Side};
use lipdiff_core::karcher::{io, SpdMatrix};
use lipdiff_core::par::Exec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA: &str = "lipdiff-scenario/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Certify,
    ChainRule,
    DerivedSet,
    DensityProbe,
    Lipschitz,
    KarcherMean,
    KarcherRegularity,
}

/// A matrix given inline (rows) or as a path to a matrix file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    File(String),
    Inline(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSelection {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    /// A of the affine pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSource>,
    /// b of the affine pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
    /// Fixed operands of the Karcher pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<Vec<MatrixSource>>,
    /// Variable operand of the Karcher pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<MatrixSource>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub t0: f64,
    pub ratio: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<f64>,
    /// Chain rule: bound on the gap between both sides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Karcher mean residual.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub name: String,
    pub pipeline: Pipeline,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSelection>,
    /// Base point x (or y for single-map pipelines).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    /// Density probe target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs_per_radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<Norm>,
    /// Karcher mean operands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operands: Option<Vec<MatrixSource>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec: Option<Exec>,
}

/// A parsed scenario with its file references resolved.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation { field: field.to_string(), message: message.into() }
}

fn positive(field: &str, x: Option<f64>) -> Result<(), CliError> {
    match x {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(invalid(field, format!("must be positive, got {t}"))),
        _ => Ok(()),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
    let scenario = parse_scenario(&text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = LoadedScenario { scenario, base_dir };
    loaded.validate()?;
    Ok(loaded)
}

impl LoadedScenario {
    pub fn from_scenario(scenario: Scenario, base_dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let loaded = LoadedScenario { scenario, base_dir: base_dir.into() };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> Result<(), CliError> {
        let s = &self.scenario;
        if s.schema != SCHEMA {
            return Err(invalid("schema", format!("expected `{SCHEMA}`, found `{}`", s.schema)));
        }
        if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(invalid("name", "must be non-empty and use only letters, digits, `-` and `_`"));
        }
        if let Some(t) = &s.tolerances {
            positive("tolerances.cluster", t.cluster)?;
            positive("tolerances.inverse", t.inverse)?;
            positive("tolerances.consistency", t.consistency)?;
            positive("tolerances.identity", t.identity)?;
            positive("tolerances.gap", t.gap)?;
            positive("tolerances.mean", t.mean)?;
        }
        if let Some(sch) = &s.schedule {
            StepSchedule::new(sch.t0, sch.ratio, sch.count).map_err(|e| invalid("schedule", e.to_string()))?;
        }
        if let Some(radii) = &s.radii {
            if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                return Err(invalid("radii", "must be a non-empty list of positive numbers"));
            }
            if radii.windows(2).any(|w| w[1] >= w[0]) {
                return Err(invalid("radii", "must be strictly decreasing"));
            }
        }
        if s.pairs_per_radius == Some(0) {
            return Err(invalid("pairs_per_radius", "must be at least 1"));
        }
        if s.inverse_samples == Some(0) {
            return Err(invalid("inverse_samples", "must be at least 1"));
        }
        if s.max_iter == Some(0) {
            return Err(invalid("max_iter", "must be at least 1"));
        }

        let needs = |field: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(invalid(field, format!("required by pipeline `{}`", pipeline_name(s.pipeline))))
            }
        };
        match s.pipeline {
            Pipeline::Certify => {
                needs("map", s.map.is_some())?;
                needs("x", s.x.is_some())?;
            }
            Pipeline::ChainRule | Pipeline::DerivedSet => {
                needs("map", s.map.is_some())?;
                needs("x", s.x.is_some())?;
                needs("direction", s.direction.is_some())?;
            }
            Pipeline::DensityProbe => {
                needs("map", s.map.is_some())?;
                needs("x", s.x.is_some())?;
                needs("w", s.w.is_some())?;
            }
            Pipeline::Lipschitz => {
                needs("map", s.map.is_some())?;
                needs("x", s.x.is_some())?;
                needs("radii", s.radii.is_some())?;
            }
            Pipeline::KarcherMean => {
                needs("operands", s.operands.as_ref().is_some_and(|o| !o.is_empty()))?;
            }
            Pipeline::KarcherRegularity => {
                let map = s.map.as_ref();
                needs("map.fixed", map.and_then(|m| m.fixed.as_ref()).is_some_and(|f| !f.is_empty()))?;
                needs("map.y0", map.and_then(|m| m.y0.as_ref()).is_some())?;
            }
        }

        // referenced files must exist at load
        let mut files: Vec<(String, &MatrixSource)> = Vec::new();
        if let Some(ops) = &s.operands {
            files.extend(ops.iter().enumerate().map(|(i, m)| (format!("operands[{i}]"), m)));
        }
        if let Some(m) = &s.map {
            if let Some(a) = &m.matrix {
                files.push(("map.matrix".into(), a));
            }
            if let Some(f) = &m.fixed {
                files.extend(f.iter().enumerate().map(|(i, m)| (format!("map.fixed[{i}]"), m)));
            }
            if let Some(y) = &m.y0 {
                files.push(("map.y0".into(), y));
            }
        }
        for (field, src) in files {
            if let MatrixSource::File(p) = src {
                let path = self.base_dir.join(p);
                if !path.is_file() {
                    return Err(invalid(&field, format!("file `{}` does not exist", path.display())));
                }
            }
        }
        Ok(())
    }

    pub fn matrix(&self, field: &str, src: &MatrixSource) -> Result<DMatrix<f64>, CliError> {
        match src {
            MatrixSource::File(p) => {
                let path = self.base_dir.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
                io::parse_matrix(&text).map_err(|e| invalid(field, format!("{}: {e}", path.display())))
            }
            MatrixSource::Inline(rows) => {
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
                    return Err(invalid(field, "rows must be non-empty and of equal length"));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Ok(DMatrix::from_row_slice(n, rows[0].len(), &flat))
            }
        }
    }

    pub fn spd(&self, field: &str, src: &MatrixSource) -> Result<SpdMatrix, CliError> {
        SpdMatrix::new(self.matrix(field, src)?).map_err(|e| invalid(field, e.to_string()))
    }

    pub fn spd_list(&self, field: &str, srcs: &[MatrixSource]) -> Result<Vec<SpdMatrix>, CliError> {
        srcs.iter().enumerate().map(|(i, m)| self.spd(&format!("{field}[{i}]"), m)).collect()
    }

    pub fn catalog_entry(&self) -> Result<CatalogEntry, CliError> {
        let m = self.scenario.map.as_ref().ok_or_else(|| invalid("map", "missing"))?;
        let params = CatalogParams {
            matrix: m.matrix.as_ref().map(|a| self.matrix("map.matrix", a)).transpose()?,
            offset: m.offset.as_ref().map(|b| DVector::from_column_slice(b)),
            fixed: m.fixed.as_ref().map(|f| self.spd_list("map.fixed", f)).transpose()?,
            y0: m.y0.as_ref().map(|y| self.spd("map.y0", y)).transpose()?,
        };
        Ok(catalog_get_with(&m.name, &params)?)
    }

    pub fn side(&self) -> Side {
        self.scenario.map.as_ref().and_then(|m| m.side).unwrap_or_default()
    }

    pub fn vector(&self, field: &str, v: &Option<Vec<f64>>) -> Result<DVector<f64>, CliError> {
        v.as_ref().map(|v| DVector::from_column_slice(v)).ok_or_else(|| invalid(field, "missing"))
    }

    pub fn schedule(&self, default: StepSchedule) -> StepSchedule {
        self.scenario
            .schedule
            .map(|s| StepSchedule::new(s.t0, s.ratio, s.count).expect("validated"))
            .unwrap_or(default)
    }

    pub fn tolerances(&self) -> Tolerances {
        self.scenario.tolerances.clone().unwrap_or_default()
    }

    pub fn exec(&self) -> Exec {
        self.scenario.exec.unwrap_or_default()
    }
}

pub fn pipeline_name(p: Pipeline) -> &'static str {
    match p {
        Pipeline::Certify => "certify",
        Pipeline::ChainRule => "chain-rule",
        Pipeline::DerivedSet => "derived-set",
        Pipeline::DensityProbe => "density-probe",
        Pipeline::Lipschitz => "lipschitz",
        Pipeline::KarcherMean => "karcher-mean",
        Pipeline::KarcherRegularity => "karcher-regularity",
    }
}
