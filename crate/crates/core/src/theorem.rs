//! Executable checks for inverse pairs (g, f) with f Lipschitz:
//!
//! * the chain rule 𝒟(f∘g)(x, v) = 𝒟f(g(x), g′₊(x, v)) with a
//!   quotient-by-quotient trace of the bound κ·‖Δg/t − g′₊‖,
//! * the identity 𝒟(f∘g)(x, ·) = id that forces injectivity of dg_x,
//! * the density construction z_t = (f(y + t w) − f(y)) / t with its
//!   algebraic identity (g(x + t z_t) − g(x)) / t = w and the bound
//!   ‖z_t‖ ≤ M_f ‖w‖,
//! * the full certificate: dg_x invertible and df_y = (dg_x)⁻¹.
//!
//! Lipschitz constants are measured on a ball around g(x), so a certificate
//! speaks about the local form of the hypothesis.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::derived::{default_cluster_tol, derived_set_estimate, DerivedSetSample, StepSchedule, Verdict};
use crate::error::{Error, Hypothesis, Result};
use crate::func::{check_inverse_pair, EvaluableMap, InverseCheckOptions, InverseCheckReport, MapPair, Norm, OpenDomain};
use crate::par::Exec;
use crate::regularity::{
    default_fd_step, fd_jacobian, frechet_residual, lipschitz_estimate, FdScheme, JacobianReport, LipschitzEstimate,
    LipschitzOptions, LipschitzVerdict,
};
use crate::rng;
use crate::serde_util;

/// Settings shared by the checks in this module.
#[derive(Debug, Clone)]
pub struct LabConfig {
    pub seed: u64,
    pub inverse_samples: usize,
    pub inverse_tol: f64,
    pub fd_step: f64,
    pub scheme: FdScheme,
    /// Upper bound on probe-ball radii; each ball also stays within half
    /// the distance to the domain boundary.
    pub max_probe_radius: f64,
    /// Explicit Fréchet residual radii (default r₀·{1, 1e−1, 1e−2, 1e−3}).
    pub residual_radii: Option<Vec<f64>>,
    pub sphere_samples: usize,
    /// Explicit Lipschitz radii (default r₀·{1, 1e−2, 1e−4}).
    pub lipschitz_radii: Option<Vec<f64>>,
    pub pairs_per_radius: usize,
    /// Relative tolerance on ‖df_y − (dg_x)⁻¹‖ / ‖(dg_x)⁻¹‖.
    pub consistency_tol: f64,
    /// Tolerance on ‖𝒟(f∘g)(x, v) − v‖.
    pub identity_tol: f64,
    /// Random unit directions added to the standard basis for identity checks.
    pub random_directions: usize,
    /// Step schedule for derived-set based checks.
    pub schedule: StepSchedule,
    pub norm: Norm,
    pub exec: Exec,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            seed: 0,
            inverse_samples: 200,
            inverse_tol: 1e-9,
            fd_step: default_fd_step(),
            scheme: FdScheme::Central,
            max_probe_radius: 1e-2,
            residual_radii: None,
            sphere_samples: 16,
            lipschitz_radii: None,
            pairs_per_radius: 200,
            consistency_tol: 1e-5,
            identity_tol: 1e-7,
            random_directions: 8,
            schedule: lab_schedule(),
            norm: Norm::Euclidean,
            exec: Exec::default(),
        }
    }
}

/// t from 1e−2 down to about 2.7e−6: small enough for O(t²) extrapolation
/// error, large enough that roundoff stays near 1e−10.
pub fn lab_schedule() -> StepSchedule {
    StepSchedule::new(1e-2, 0.7, 24).expect("valid constants")
}

impl LabConfig {
    fn probe_radius(&self, domain: &OpenDomain, p: &DVector<f64>) -> f64 {
        self.max_probe_radius.min(0.5 * domain.boundary_distance(p))
    }

    fn lipschitz_options(&self, f: &EvaluableMap, y: &DVector<f64>, label: &str) -> LipschitzOptions {
        let radii = self.lipschitz_radii.clone().unwrap_or_else(|| {
            let r0 = self.probe_radius(f.domain(), y);
            vec![r0, r0 * 1e-2, r0 * 1e-4]
        });
        LipschitzOptions {
            radii,
            pairs_per_radius: self.pairs_per_radius,
            seed: rng::sub_seed(self.seed, label),
            norm: self.norm,
            exec: self.exec,
        }
    }

    fn residual_radii(&self, g: &EvaluableMap, x: &DVector<f64>) -> Vec<f64> {
        self.residual_radii.clone().unwrap_or_else(|| {
            let r0 = self.probe_radius(g.domain(), x);
            vec![r0, r0 * 1e-1, r0 * 1e-2, r0 * 1e-3]
        })
    }
}

fn hausdorff(a: &[&DVector<f64>], b: &[&DVector<f64>]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let directed = |p: &[&DVector<f64>], q: &[&DVector<f64>]| {
        p.iter()
            .map(|x| q.iter().map(|y| (*x - *y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

fn hull_gap(a: &DerivedSetSample, b: &DerivedSetSample) -> Option<f64> {
    let ((alo, ahi), (blo, bhi)) = (a.hull()?, b.hull()?);
    Some((alo - blo).amax().max((ahi - bhi).amax()))
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonEntry {
    pub t: f64,
    /// ‖lhs quotient − rhs quotient‖ at this t.
    pub quotient_gap: f64,
    /// κ·‖(g(x + t v) − g(x))/t − g′₊(x, v)‖.
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainRuleReport {
    #[serde(with = "serde_util::dvec")]
    pub x: DVector<f64>,
    #[serde(with = "serde_util::dvec")]
    pub v: DVector<f64>,
    /// g′₊(x, v).
    #[serde(with = "serde_util::dvec")]
    pub g_derivative: DVector<f64>,
    pub kappa: f64,
    /// 𝒟(f∘g)(x, v).
    pub lhs: DerivedSetSample,
    /// 𝒟f(g(x), g′₊(x, v)).
    pub rhs: DerivedSetSample,
    /// Hausdorff distance between the two sets of cluster representatives.
    #[serde(with = "serde_util::finite")]
    pub hausdorff_gap: f64,
    /// Largest componentwise difference between the two cluster hulls.
    pub hull_gap: Option<f64>,
    pub epsilon_trace: Vec<EpsilonEntry>,
    pub bound_holds: bool,
}

impl ChainRuleReport {
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "quotient_gap", "bound", "satisfied"])?;
        for e in &self.epsilon_trace {
            wtr.write_record([
                format!("{:e}", e.t),
                format!("{:e}", e.quotient_gap),
                format!("{:e}", e.bound),
                e.satisfied.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Margin on κ: sampled Lipschitz constants approach the supremum from below.
const KAPPA_MARGIN: f64 = 1.05;

/// Compares both sides of the chain rule for f∘g at x along v.
pub fn chain_rule_check(
    pair: &MapPair,
    x: &DVector<f64>,
    v: &DVector<f64>,
    schedule: &StepSchedule,
    tol: f64,
    cfg: &LabConfig,
) -> Result<ChainRuleReport> {
    let (g, f) = (pair.g(), pair.f());
    let g_sample = derived_set_estimate(g, x, v, schedule, tol)?;
    let w = g_sample
        .limit()
        .cloned()
        .ok_or(Error::HypothesisFailure(Hypothesis::GNotDirectionallyDifferentiable))?;

    let y = g.evaluate(x)?;
    let lip = lipschitz_estimate(f, &y, &cfg.lipschitz_options(f, &y, "chain-rule/lipschitz"))?;
    if lip.verdict != LipschitzVerdict::Lipschitz {
        return Err(Error::HypothesisFailure(Hypothesis::FNotLipschitz));
    }
    let kappa = lip.constant();

    let fg = g.then(f)?;
    let lhs = derived_set_estimate(&fg, x, v, schedule, tol)?;
    let rhs = derived_set_estimate(f, &y, &w, schedule, tol)?;

    let fy = f.evaluate(&y)?;
    let scale = 1.0 + fy.norm() + kappa * y.norm();
    let epsilon_trace: Vec<EpsilonEntry> = lhs
        .quotients
        .iter()
        .zip(&rhs.quotients)
        .zip(&g_sample.quotients)
        .map(|((l, r), gq)| {
            let quotient_gap = (&l.q - &r.q).norm();
            let bound = kappa * (&gq.q - &w).norm();
            let slack = 16.0 * f64::EPSILON * scale / l.t;
            EpsilonEntry { t: l.t, quotient_gap, bound, satisfied: quotient_gap <= KAPPA_MARGIN * bound + slack }
        })
        .collect();
    let bound_holds = epsilon_trace.iter().all(|e| e.satisfied);
    let hausdorff_gap = hausdorff(&lhs.representatives(), &rhs.representatives());
    let hull_gap = hull_gap(&lhs, &rhs);

    Ok(ChainRuleReport {
        x: x.clone(),
        v: v.clone(),
        g_derivative: w,
        kappa,
        lhs,
        rhs,
        hausdorff_gap,
        hull_gap,
        epsilon_trace,
        bound_holds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionResidual {
    #[serde(with = "serde_util::dvec")]
    pub direction: DVector<f64>,
    pub verdict: Verdict,
    /// ‖𝒟(f∘g)(x, v) − v‖; infinite (null) when the derived set is not a
    /// singleton.
    #[serde(with = "serde_util::finite")]
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheckReport {
    pub directions: Vec<DirectionResidual>,
    #[serde(with = "serde_util::finite")]
    pub max_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

impl IdentityCheckReport {
    /// CSV with columns `index, residual, verdict, v0, v1, …`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let dim = self.directions.first().map_or(0, |d| d.direction.len());
        let mut header = vec!["index".to_string(), "residual".into(), "verdict".into()];
        header.extend((0..dim).map(|i| format!("v{i}")));
        wtr.write_record(&header)?;
        for (i, d) in self.directions.iter().enumerate() {
            let mut rec = vec![i.to_string(), format!("{:e}", d.residual), d.verdict.to_string()];
            rec.extend(d.direction.iter().map(|x| format!("{x:e}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Standard basis plus `extra` seeded random unit vectors.
pub fn direction_sample(n: usize, extra: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut dirs: Vec<DVector<f64>> =
        (0..n).map(|i| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })).collect();
    let mut r = rng::rng_for(seed, "identity-directions");
    dirs.extend((0..extra).map(|_| rng::unit_vector(&mut r, n)));
    dirs
}

/// For each direction v, the derived set of f∘g at x along v should be the
/// singleton {v}.
pub fn identity_derived_check(
    pair: &MapPair,
    x: &DVector<f64>,
    directions: &[DVector<f64>],
    schedule: &StepSchedule,
    tol: f64,
) -> Result<IdentityCheckReport> {
    let fg = pair.g().then(pair.f())?;
    let results = Exec::default().try_map(directions, |v| {
        let sample = derived_set_estimate(&fg, x, v, schedule, default_cluster_tol(v))?;
        let residual = sample.limit().map_or(f64::INFINITY, |l| (l - v).norm());
        Ok::<_, Error>(DirectionResidual { direction: v.clone(), verdict: sample.verdict, residual })
    })?;
    let max_residual = results.iter().map(|d| d.residual).fold(0.0, f64::max);
    Ok(IdentityCheckReport { directions: results, max_residual, tol, passed: max_residual <= tol })
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityEntry {
    pub t: f64,
    #[serde(with = "serde_util::dvec")]
    pub z: DVector<f64>,
    pub z_norm: f64,
    /// ‖(g(x + t z_t) − g(x))/t − w‖.
    pub step1_residual: f64,
    /// ‖w − J z_t‖.
    pub step2_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityProbeReport {
    #[serde(with = "serde_util::dvec")]
    pub w: DVector<f64>,
    #[serde(with = "serde_util::dmat")]
    pub jacobian: DMatrix<f64>,
    pub trace: Vec<DensityEntry>,
    pub lipschitz: LipschitzEstimate,
    /// M_f‖w‖, with M_f the largest Lipschitz estimate near y.
    pub zt_bound: f64,
    pub max_zt: f64,
    pub max_step1_residual: f64,
    /// f is locally Lipschitz and every ‖z_t‖ ≤ M_f‖w‖ (up to 5%).
    pub bound_check_passed: bool,
    /// ‖w − J z_t‖ never increases as t shrinks.
    pub gap_decreasing: bool,
    /// ‖z_t‖ grows strictly over the schedule tail by at least 10×.
    pub zt_unbounded: bool,
}

impl DensityProbeReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "z_norm", "step1_residual", "step2_gap"])?;
        for e in &self.trace {
            wtr.write_record([
                format!("{:e}", e.t),
                format!("{:e}", e.z_norm),
                format!("{:e}", e.step1_residual),
                format!("{:e}", e.step2_gap),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs the z_t construction at x = f(y) toward target w.
pub fn density_probe(
    pair: &MapPair,
    x: &DVector<f64>,
    w: &DVector<f64>,
    schedule: &StepSchedule,
    cfg: &LabConfig,
) -> Result<DensityProbeReport> {
    let (g, f) = (pair.g(), pair.f());
    let y = g.evaluate(x)?;
    if w.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), actual: w.len() });
    }
    let jacobian = fd_jacobian(g, x, cfg.fd_step, cfg.scheme)?.matrix;
    let lipschitz = lipschitz_estimate(f, &y, &cfg.lipschitz_options(f, &y, "density/lipschitz"))?;
    let fy = f.evaluate(&y)?;
    let gx = g.evaluate(x)?;

    let steps = schedule.steps();
    let trace = Exec::default().try_map(&steps, |&t| {
        let z = (f.evaluate(&(&y + w * t)).map_err(|e| e.at_step(t))? - &fy) / t;
        let moved = g.evaluate(&(x + &z * t)).map_err(|e| e.at_step(t))?;
        let step1_residual = ((moved - &gx) / t - w).norm();
        let step2_gap = (w - &jacobian * &z).norm();
        Ok::<_, Error>(DensityEntry { t, z_norm: z.norm(), z, step1_residual, step2_gap })
    })?;

    let zt_bound = lipschitz.constant() * w.norm();
    let max_zt = trace.iter().map(|e| e.z_norm).fold(0.0, f64::max);
    let max_step1_residual = trace.iter().map(|e| e.step1_residual).fold(0.0, f64::max);
    let bound_check_passed =
        lipschitz.verdict == LipschitzVerdict::Lipschitz && max_zt <= 1.05 * zt_bound;
    let gap_decreasing = trace.windows(2).all(|p| p[1].step2_gap <= p[0].step2_gap);
    let tail = &trace[schedule.tail_start()..];
    let min_zt = trace.iter().map(|e| e.z_norm).fold(f64::INFINITY, f64::min);
    let zt_unbounded = tail.windows(2).all(|p| p[1].z_norm > p[0].z_norm) && max_zt >= 10.0 * min_zt;

    Ok(DensityProbeReport {
        w: w.clone(),
        jacobian,
        trace,
        lipschitz,
        zt_bound,
        max_zt,
        max_step1_residual,
        bound_check_passed,
        gap_decreasing,
        zt_unbounded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateStatus {
    Certified,
    Refuted,
    Inconclusive,
}

/// Why a certificate is not `certified`, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateReason {
    InverseCheckFailed,
    JacobianSingular,
    FNotLipschitz,
    LipschitzInconclusive,
    InverseInconsistent,
    IdentityCheckFailed,
}

impl CertificateReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertificateReason::InverseCheckFailed => "inverse-check-failed",
            CertificateReason::JacobianSingular => "jacobian-singular",
            CertificateReason::FNotLipschitz => "f-not-lipschitz",
            CertificateReason::LipschitzInconclusive => "lipschitz-inconclusive",
            CertificateReason::InverseInconsistent => "inverse-inconsistent",
            CertificateReason::IdentityCheckFailed => "identity-check-failed",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConverseIftCertificate {
    #[serde(with = "serde_util::dvec")]
    pub base: DVector<f64>,
    #[serde(with = "serde_util::dvec")]
    pub image: DVector<f64>,
    pub inverse_check: InverseCheckReport,
    /// dg_x with its Fréchet residual curve.
    pub jacobian: JacobianReport,
    /// Lipschitz profile of f around g(x).
    pub lipschitz: LipschitzEstimate,
    /// df at g(x).
    pub inverse_jacobian: JacobianReport,
    /// ‖df_y − (dg_x)⁻¹‖_F / ‖(dg_x)⁻¹‖_F; absent when dg_x is singular.
    pub inverse_consistency: Option<f64>,
    pub identity_check: IdentityCheckReport,
    pub status: CertificateStatus,
    pub reason: Option<CertificateReason>,
    /// What was verified: Lipschitz continuity is checked on a ball around
    /// g(x), so the certificate covers the local form of the hypothesis.
    pub scope: &'static str,
}

impl ConverseIftCertificate {
    pub fn is_certified(&self) -> bool {
        self.status == CertificateStatus::Certified
    }
}

const SCOPE: &str = "local: f measured Lipschitz on a ball around g(x); C^1 consistency at p = 1";

/// Runs the full pipeline: inverse check, dg_x with Fréchet residuals,
/// Lipschitz profile of f near y = g(x), SVD invertibility, df_y against
/// (dg_x)⁻¹, and the identity check along basis and random directions.
/// Every stage runs; the first failed clause becomes the reason.
pub fn converse_ift_certify(pair: &MapPair, x: &DVector<f64>, cfg: &LabConfig) -> Result<ConverseIftCertificate> {
    let (g, f) = (pair.g(), pair.f());
    let inverse_check = check_inverse_pair(
        pair,
        &InverseCheckOptions {
            samples: cfg.inverse_samples,
            tol: cfg.inverse_tol,
            seed: rng::sub_seed(cfg.seed, "certify/inverse"),
            norm: cfg.norm,
            exec: cfg.exec,
        },
    )?;

    let y = g.evaluate(x)?;
    let mut jacobian = fd_jacobian(g, x, cfg.fd_step, cfg.scheme)?;
    let curve = frechet_residual(
        g,
        x,
        &jacobian.matrix,
        &cfg.residual_radii(g, x),
        cfg.sphere_samples,
        rng::sub_seed(cfg.seed, "certify/frechet"),
    )?;
    jacobian.attach_residual(curve);

    let lipschitz = lipschitz_estimate(f, &y, &cfg.lipschitz_options(f, &y, "certify/lipschitz"))?;
    let inverse_jacobian = fd_jacobian(f, &y, cfg.fd_step, cfg.scheme)?;

    let inverse_consistency = if jacobian.invertibility.invertible {
        jacobian.matrix.clone().try_inverse().map(|inv| (&inverse_jacobian.matrix - &inv).norm() / inv.norm())
    } else {
        None
    };

    let directions = direction_sample(x.len(), cfg.random_directions, rng::sub_seed(cfg.seed, "certify/identity"));
    let identity_check = identity_derived_check(pair, x, &directions, &cfg.schedule, cfg.identity_tol)?;

    use CertificateReason::*;
    let (status, reason) = if !inverse_check.passed {
        (CertificateStatus::Refuted, Some(InverseCheckFailed))
    } else if !jacobian.invertibility.invertible || inverse_consistency.is_none() {
        (CertificateStatus::Refuted, Some(JacobianSingular))
    } else if lipschitz.verdict == LipschitzVerdict::Blowup {
        (CertificateStatus::Refuted, Some(FNotLipschitz))
    } else if lipschitz.verdict == LipschitzVerdict::Inconclusive {
        (CertificateStatus::Inconclusive, Some(LipschitzInconclusive))
    } else if inverse_consistency.is_some_and(|c| !(c <= cfg.consistency_tol)) {
        (CertificateStatus::Refuted, Some(InverseInconsistent))
    } else if !identity_check.passed {
        (CertificateStatus::Refuted, Some(IdentityCheckFailed))
    } else {
        (CertificateStatus::Certified, None)
    };

    Ok(ConverseIftCertificate {
        base: x.clone(),
        image: y,
        inverse_check,
        jacobian,
        lipschitz,
        inverse_jacobian,
        inverse_consistency,
        identity_check,
        status,
        reason,
        scope: SCOPE,
    })
}
