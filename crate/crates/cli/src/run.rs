//! Pipeline dispatch: scenario in, typed report and verdict out.

use lipdiff_core::derived::{default_cluster_tol, derived_set_estimate, DerivedSetSample, StepSchedule, Verdict as SetVerdict};
use lipdiff_core::karcher::{
    karcher_mean, karcher_regularity_pipeline, KarcherSolveTrace, RegularityConfig, RegularityRun,
};
use lipdiff_core::regularity::{lipschitz_estimate, LipschitzEstimate, LipschitzOptions, LipschitzVerdict};
use lipdiff_core::theorem::{
    chain_rule_check, converse_ift_certify, density_probe, CertificateStatus, ChainRuleReport,
    ConverseIftCertificate, DensityProbeReport, LabConfig,
};
use lipdiff_core::{Error, Hypothesis};
use serde::Serialize;

use crate::error::CliError;
use crate::scenario::{LoadedScenario, Pipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Certified,
    Pass,
    Refuted,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::Certified | Verdict::Pass => 0,
            Verdict::Refuted => 2,
            Verdict::Inconclusive => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KarcherMeanReport {
    pub operands: usize,
    pub dimension: usize,
    pub trace: KarcherSolveTrace,
    pub final_residual: f64,
    pub condition_number: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub hypothesis: &'static str,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum PipelineReport {
    Certify(Box<ConverseIftCertificate>),
    ChainRule(Box<ChainRuleReport>),
    DerivedSet(Box<DerivedSetSample>),
    DensityProbe(Box<DensityProbeReport>),
    Lipschitz(Box<LipschitzEstimate>),
    KarcherMean(Box<KarcherMeanReport>),
    KarcherRegularity(Box<RegularityRun>),
    Hypothesis(HypothesisReport),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdict: Verdict,
    pub reason: Option<String>,
    pub report: PipelineReport,
}

fn lab_config(s: &LoadedScenario, base: LabConfig) -> LabConfig {
    let sc = &s.scenario;
    let tol = s.tolerances();
    LabConfig {
        seed: sc.seed,
        inverse_samples: sc.inverse_samples.unwrap_or(base.inverse_samples),
        inverse_tol: tol.inverse.unwrap_or(base.inverse_tol),
        consistency_tol: tol.consistency.unwrap_or(base.consistency_tol),
        identity_tol: tol.identity.unwrap_or(base.identity_tol),
        lipschitz_radii: sc.radii.clone().or(base.lipschitz_radii),
        pairs_per_radius: sc.pairs_per_radius.unwrap_or(base.pairs_per_radius),
        schedule: s.schedule(base.schedule),
        norm: sc.norm.unwrap_or(base.norm),
        exec: s.exec(),
        ..base
    }
}

fn certificate_outcome(c: &ConverseIftCertificate) -> (Verdict, Option<String>) {
    let verdict = match c.status {
        CertificateStatus::Certified => Verdict::Certified,
        CertificateStatus::Refuted => Verdict::Refuted,
        CertificateStatus::Inconclusive => Verdict::Inconclusive,
    };
    (verdict, c.reason.map(|r| r.as_str().to_string()))
}

pub fn run(s: &LoadedScenario) -> Result<Outcome, CliError> {
    let sc = &s.scenario;
    match sc.pipeline {
        Pipeline::Certify => {
            let pair = s.catalog_entry()?.into_pair()?;
            let x = s.vector("x", &sc.x)?;
            let cert = converse_ift_certify(&pair, &x, &lab_config(s, LabConfig::default()))?;
            let (verdict, reason) = certificate_outcome(&cert);
            Ok(Outcome { verdict, reason, report: PipelineReport::Certify(Box::new(cert)) })
        }
        Pipeline::ChainRule => {
            let pair = s.catalog_entry()?.into_pair()?;
            let x = s.vector("x", &sc.x)?;
            let v = s.vector("direction", &sc.direction)?;
            let cfg = lab_config(s, LabConfig::default());
            let tol = s.tolerances();
            let cluster = tol.cluster.unwrap_or_else(|| default_cluster_tol(&v));
            let report = match chain_rule_check(&pair, &x, &v, &cfg.schedule, cluster, &cfg) {
                Ok(r) => r,
                Err(Error::HypothesisFailure(h)) => return Ok(hypothesis_outcome(h)),
                Err(e) => return Err(e.into()),
            };
            let (gap, default_tol) = match report.lhs.verdict {
                SetVerdict::Singleton => (report.hausdorff_gap, 1e-6),
                _ => (report.hull_gap.unwrap_or(f64::INFINITY), 0.05),
            };
            let gap_tol = tol.gap.unwrap_or(default_tol);
            let (verdict, reason) = if report.lhs.verdict != report.rhs.verdict {
                (Verdict::Refuted, Some("verdict-mismatch"))
            } else if !(gap <= gap_tol) {
                (Verdict::Refuted, Some("gap-exceeded"))
            } else if !report.bound_holds {
                (Verdict::Refuted, Some("bound-violated"))
            } else {
                (Verdict::Pass, None)
            };
            Ok(Outcome {
                verdict,
                reason: reason.map(str::to_string),
                report: PipelineReport::ChainRule(Box::new(report)),
            })
        }
        Pipeline::DerivedSet => {
            let map = s.catalog_entry()?.into_map(s.side());
            let y = s.vector("x", &sc.x)?;
            let v = s.vector("direction", &sc.direction)?;
            let cluster = s.tolerances().cluster.unwrap_or_else(|| default_cluster_tol(&v));
            let sample = derived_set_estimate(&map, &y, &v, &s.schedule(StepSchedule::default()), cluster)?;
            Ok(Outcome { verdict: Verdict::Pass, reason: None, report: PipelineReport::DerivedSet(Box::new(sample)) })
        }
        Pipeline::DensityProbe => {
            let pair = s.catalog_entry()?.into_pair()?;
            let x = s.vector("x", &sc.x)?;
            let w = s.vector("w", &sc.w)?;
            let cfg = lab_config(s, LabConfig::default());
            let report = density_probe(&pair, &x, &w, &cfg.schedule, &cfg)?;
            let (verdict, reason) = if !report.bound_check_passed {
                (Verdict::Refuted, Some("bound-check-failed"))
            } else if report.max_step1_residual > 10.0 * cfg.inverse_tol {
                (Verdict::Refuted, Some("step1-residual-exceeded"))
            } else {
                (Verdict::Pass, None)
            };
            Ok(Outcome {
                verdict,
                reason: reason.map(str::to_string),
                report: PipelineReport::DensityProbe(Box::new(report)),
            })
        }
        Pipeline::Lipschitz => {
            let map = s.catalog_entry()?.into_map(s.side());
            let y = s.vector("x", &sc.x)?;
            let opts = LipschitzOptions {
                radii: sc.radii.clone().unwrap_or_default(),
                pairs_per_radius: sc.pairs_per_radius.unwrap_or(200),
                seed: lipdiff_core::rng::sub_seed(sc.seed, "lipschitz"),
                norm: sc.norm.unwrap_or_default(),
                exec: s.exec(),
            };
            let est = lipschitz_estimate(&map, &y, &opts)?;
            let (verdict, reason) = match est.verdict {
                LipschitzVerdict::Lipschitz => (Verdict::Pass, None),
                LipschitzVerdict::Blowup => (Verdict::Refuted, Some("blowup")),
                LipschitzVerdict::Inconclusive => (Verdict::Inconclusive, Some("inconclusive")),
            };
            Ok(Outcome {
                verdict,
                reason: reason.map(str::to_string),
                report: PipelineReport::Lipschitz(Box::new(est)),
            })
        }
        Pipeline::KarcherMean => {
            let ops = s.spd_list("operands", sc.operands.as_deref().unwrap_or_default())?;
            let tol = s.tolerances().mean.unwrap_or(1e-10);
            let trace = karcher_mean(&ops, tol, sc.max_iter.unwrap_or(500))?;
            let final_residual = trace.final_residual();
            let condition_number = trace.last_iterate().condition_number();
            let (verdict, reason) = if trace.converged && final_residual <= tol {
                (Verdict::Pass, None)
            } else {
                (Verdict::Inconclusive, Some("no-convergence".to_string()))
            };
            let report = KarcherMeanReport {
                operands: ops.len(),
                dimension: ops[0].size(),
                trace,
                final_residual,
                condition_number,
            };
            Ok(Outcome { verdict, reason, report: PipelineReport::KarcherMean(Box::new(report)) })
        }
        Pipeline::KarcherRegularity => {
            let map = sc.map.as_ref().expect("validated");
            let fixed = s.spd_list("map.fixed", map.fixed.as_deref().unwrap_or_default())?;
            let y0 = s.spd("map.y0", map.y0.as_ref().expect("validated"))?;
            let base = RegularityConfig::default();
            let mut cfg = RegularityConfig { lab: lab_config(s, base.lab.clone()), ..base };
            if let Some(t) = s.tolerances().mean {
                cfg.pair.mean_tol = t;
            }
            if let Some(n) = sc.max_iter {
                cfg.pair.max_iter = n;
            }
            let run = karcher_regularity_pipeline(&fixed, &y0, &cfg)?;
            let (verdict, reason) = certificate_outcome(&run.certificate);
            Ok(Outcome { verdict, reason, report: PipelineReport::KarcherRegularity(Box::new(run)) })
        }
    }
}

fn hypothesis_outcome(h: Hypothesis) -> Outcome {
    Outcome {
        verdict: Verdict::Refuted,
        reason: Some(h.as_str().to_string()),
        report: PipelineReport::Hypothesis(HypothesisReport { hypothesis: h.as_str() }),
    }
}
