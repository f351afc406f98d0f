//! Feeds the Karcher pair into the converse inverse function theorem checks.

use serde::Serialize;

use super::{karcher_pair, KarcherPairConfig, SpdMatrix};
use crate::error::{Error, Result};
use crate::theorem::{converse_ift_certify, ConverseIftCertificate, LabConfig};

#[derive(Debug, Clone)]
pub struct RegularityConfig {
    pub lab: LabConfig,
    pub pair: KarcherPairConfig,
    /// Times the probe radius is halved after a probe leaves the cone.
    pub max_retries: usize,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        RegularityConfig {
            // inner solves stop at residual 1e−13, which shows up as ~1e−8
            // noise in difference quotients at the smallest schedule steps
            lab: LabConfig { identity_tol: 1e-6, ..LabConfig::default() },
            pair: KarcherPairConfig::default(),
            max_retries: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityRun {
    pub certificate: ConverseIftCertificate,
    /// X₀ = Λ(fixed…, Y₀).
    #[serde(with = "crate::serde_util::dmat")]
    pub x0: nalgebra::DMatrix<f64>,
    pub condition_number: f64,
    /// Probe radius as a fraction of λ_min, after any retries.
    pub radius_fraction: f64,
    pub attempts: usize,
}

/// Certifies the pair g(X) = solve_for_y(X, fixed), f(Y) = Λ(fixed…, Y)
/// at X₀ = Λ(fixed…, Y₀), in scaled upper-triangle coordinates.
pub fn karcher_regularity_pipeline(
    fixed: &[SpdMatrix],
    y0: &SpdMatrix,
    cfg: &RegularityConfig,
) -> Result<RegularityRun> {
    let mut fraction = cfg.pair.radius_fraction;
    let mut attempts = 0;
    loop {
        attempts += 1;
        let pair_cfg = KarcherPairConfig { radius_fraction: fraction, ..cfg.pair };
        let (pair, x0) = karcher_pair(fixed, y0, &pair_cfg)?;
        let lambda = x0.min_eigenvalue().min(y0.min_eigenvalue());
        let lab = LabConfig { max_probe_radius: cfg.lab.max_probe_radius.min(fraction * lambda), ..cfg.lab.clone() };
        match converse_ift_certify(&pair, &x0.to_coords(), &lab) {
            Ok(certificate) => {
                let condition_number = certificate.jacobian.invertibility.condition;
                return Ok(RegularityRun {
                    certificate,
                    x0: x0.into_matrix(),
                    condition_number,
                    radius_fraction: fraction,
                    attempts,
                });
            }
            Err(Error::DomainViolation { .. } | Error::NotSpd { .. }) if attempts <= cfg.max_retries => {
                fraction /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn random_spd(seed: u64, d: usize) -> SpdMatrix {
        let mut r = rng::rng(seed);
        let b = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
        SpdMatrix::new(&b * b.transpose() + DMatrix::identity(d, d) * 0.5).unwrap()
    }

    #[test]
    fn scalar_case_matches_calculus() {
        // d = 1, fixed = {a}: g(x) = x²/a, f(y) = √(a y)
        let a: f64 = 2.0;
        let y0 = 3.0;
        let run = karcher_regularity_pipeline(
            &[SpdMatrix::from_diagonal(&[a]).unwrap()],
            &SpdMatrix::from_diagonal(&[y0]).unwrap(),
            &RegularityConfig::default(),
        )
        .unwrap();
        let c = &run.certificate;
        assert!(c.is_certified(), "{:?}", c.reason);
        let x0 = (a * y0).sqrt();
        assert!((run.x0[(0, 0)] - x0).abs() < 1e-12);
        let dg = c.jacobian.matrix[(0, 0)];
        let df = c.inverse_jacobian.matrix[(0, 0)];
        assert!((dg - 2.0 * x0 / a).abs() < 1e-7, "{dg}");
        assert!((df - 0.5 * (a / y0).sqrt()).abs() < 1e-7, "{df}");
        assert!((dg * df - 1.0).abs() < 1e-7);
    }

    #[test]
    fn identity_operands_give_third_of_identity() {
        let i3 = SpdMatrix::identity(3);
        let run = karcher_regularity_pipeline(&[i3.clone(), i3.clone()], &i3, &RegularityConfig::default()).unwrap();
        let c = &run.certificate;
        assert!(c.is_certified(), "{:?}", c.reason);
        let expected = DMatrix::identity(6, 6) / 3.0;
        assert!((&c.inverse_jacobian.matrix - expected).amax() < 1e-6);
        assert!((run.condition_number - 1.0).abs() < 1e-6);
    }

    #[test]
    fn random_operands_certify() {
        let fixed = [random_spd(1, 3), random_spd(2, 3)];
        let run = karcher_regularity_pipeline(&fixed, &random_spd(3, 3), &RegularityConfig::default()).unwrap();
        assert!(run.certificate.is_certified(), "{:?}", run.certificate.reason);
        assert!(run.certificate.inverse_consistency.unwrap() <= 1e-4);
    }
}
