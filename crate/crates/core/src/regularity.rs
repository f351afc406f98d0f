//! Finite-difference Fréchet derivatives, differentiability residual
//! curves, invertibility diagnostics and sampled local Lipschitz constants.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::{EvaluableMap, Norm};
use crate::par::Exec;
use crate::rng;
use crate::serde_util;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdScheme {
    Forward,
    #[default]
    Central,
}

/// Relative step ε^{1/3}, the truncation/roundoff balance for central
/// differences.
pub fn default_fd_step() -> f64 {
    f64::EPSILON.cbrt()
}

/// Relative singular-value threshold used when none is given.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SingularThreshold {
    /// Fraction of σ_max.
    Relative(f64),
    Absolute(f64),
}

impl Default for SingularThreshold {
    fn default() -> Self {
        SingularThreshold::Relative(DEFAULT_RELATIVE_THRESHOLD)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvertibilityReport {
    pub square: bool,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    #[serde(with = "serde_util::finite")]
    pub condition: f64,
    pub threshold: f64,
    pub invertible: bool,
    pub reason: Option<String>,
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// SVD-based invertibility verdict: square and σ_min above the threshold.
pub fn invertibility_report(j: &DMatrix<f64>, threshold: SingularThreshold) -> InvertibilityReport {
    let sv = singular_values(j);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    let threshold = match threshold {
        SingularThreshold::Relative(r) => r * sigma_max,
        SingularThreshold::Absolute(a) => a,
    };
    let square = j.is_square() && !j.is_empty();
    let condition = if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY };
    let (invertible, reason) = if !square {
        (false, Some(format!("not-square ({}x{})", j.nrows(), j.ncols())))
    } else if j.iter().any(|x| !x.is_finite()) {
        (false, Some("non-finite-entries".to_string()))
    } else if sigma_min > threshold {
        (true, None)
    } else {
        (false, Some(format!("sigma-min {sigma_min:e} <= threshold {threshold:e}")))
    };
    InvertibilityReport {
        square,
        singular_values: sv,
        sigma_min,
        sigma_max,
        condition,
        threshold,
        invertible,
        reason,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualPoint {
    pub radius: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobianReport {
    #[serde(with = "serde_util::dvec")]
    pub base: DVector<f64>,
    #[serde(with = "serde_util::dmat")]
    pub matrix: DMatrix<f64>,
    /// Relative step; the absolute step in coordinate i is step·max(1, |x_i|).
    pub step: f64,
    pub scheme: FdScheme,
    /// ‖J(h) − J(2h)‖_F: how much the estimate moves when the step doubles.
    pub step_sensitivity: f64,
    /// Invertibility at threshold max(1e−8·σ_max, step_sensitivity): singular
    /// values within the step-to-step variation are indistinguishable from 0.
    pub invertibility: InvertibilityReport,
    pub residual_curve: Vec<ResidualPoint>,
}

impl JacobianReport {
    pub fn attach_residual(&mut self, curve: Vec<ResidualPoint>) {
        self.residual_curve = curve;
    }

    /// CSV with columns `radius, residual`.
    pub fn write_residual_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["radius", "residual"])?;
        for p in &self.residual_curve {
            wtr.write_record([format!("{:e}", p.radius), format!("{:e}", p.residual)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn fd_matrix(
    g: &EvaluableMap,
    x: &DVector<f64>,
    gx: &DVector<f64>,
    step: f64,
    scheme: FdScheme,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let cols = Exec::default().map_range(n, |i| {
        let nominal = step * x[i].abs().max(1.0);
        // Exactly representable step: x_i + h − x_i == h.
        let h = (x[i] + nominal) - x[i];
        let mut xp = x.clone();
        xp[i] += h;
        let fp = g.evaluate(&xp)?;
        match scheme {
            FdScheme::Forward => Ok::<_, crate::error::Error>((fp - gx) / h),
            FdScheme::Central => {
                let mut xm = x.clone();
                xm[i] -= h;
                let fm = g.evaluate(&xm)?;
                Ok((fp - fm) / (2.0 * h))
            }
        }
    });
    let mut j = DMatrix::zeros(g.codomain_dim(), n);
    for (i, c) in cols.into_iter().enumerate() {
        j.set_column(i, &c?);
    }
    Ok(j)
}

/// Finite-difference derivative of `g` at `x`.
pub fn fd_jacobian(g: &EvaluableMap, x: &DVector<f64>, step: f64, scheme: FdScheme) -> Result<JacobianReport> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let gx = g.evaluate(x)?;
    let matrix = fd_matrix(g, x, &gx, step, scheme)?;
    let doubled = fd_matrix(g, x, &gx, 2.0 * step, scheme)?;
    let step_sensitivity = (&matrix - doubled).norm();
    let sigma_max = singular_values(&matrix).first().copied().unwrap_or(0.0);
    let threshold = (DEFAULT_RELATIVE_THRESHOLD * sigma_max).max(step_sensitivity);
    let invertibility = invertibility_report(&matrix, SingularThreshold::Absolute(threshold));
    Ok(JacobianReport {
        base: x.clone(),
        matrix,
        step,
        scheme,
        step_sensitivity,
        invertibility,
        residual_curve: Vec::new(),
    })
}

/// Probe directions for the remainder sup: ±e_i plus `samples` seeded
/// random unit vectors.
fn sphere_directions(n: usize, samples: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut dirs = Vec::with_capacity(2 * n + samples);
    for i in 0..n {
        let e = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
        dirs.push(e.clone());
        dirs.push(-e);
    }
    let mut r = rng::rng_for(seed, "frechet-sphere");
    dirs.extend((0..samples).map(|_| rng::unit_vector(&mut r, n)));
    dirs
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::invalid("radius list is empty"));
    }
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("radii must be positive"));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("radii must be strictly decreasing"));
    }
    Ok(())
}

/// For each radius r, sup over sampled unit u of
/// ‖g(x + r u) − g(x) − r J u‖ / r.
pub fn frechet_residual(
    g: &EvaluableMap,
    x: &DVector<f64>,
    j: &DMatrix<f64>,
    radii: &[f64],
    sphere_samples: usize,
    seed: u64,
) -> Result<Vec<ResidualPoint>> {
    check_radii(radii)?;
    if j.ncols() != x.len() || j.nrows() != g.codomain_dim() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: j.ncols() });
    }
    let gx = g.evaluate(x)?;
    let dirs = sphere_directions(x.len(), sphere_samples, seed);
    let mut curve = Vec::with_capacity(radii.len());
    for &r in radii {
        let vals = Exec::default().try_map(&dirs, |u| {
            let gu = g.evaluate(&(x + u * r))?;
            Ok::<_, Error>((gu - &gx - j * u * r).norm() / r)
        })?;
        let residual = vals.into_iter().fold(0.0, f64::max);
        curve.push(ResidualPoint { radius: r, residual });
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LipschitzVerdict {
    Lipschitz,
    Blowup,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LipschitzPoint {
    pub radius: f64,
    pub estimate: f64,
    /// Non-degenerate pairs used.
    pub pairs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzEstimate {
    #[serde(with = "serde_util::dvec")]
    pub center: DVector<f64>,
    pub profile: Vec<LipschitzPoint>,
    pub verdict: LipschitzVerdict,
}

impl LipschitzEstimate {
    /// Largest estimate over the profile.
    pub fn constant(&self) -> f64 {
        self.profile.iter().map(|p| p.estimate).fold(0.0, f64::max)
    }

    /// M(smallest radius) / M(largest radius).
    pub fn growth(&self) -> f64 {
        match (self.profile.first(), self.profile.last()) {
            (Some(a), Some(b)) if a.estimate > 0.0 => b.estimate / a.estimate,
            _ => f64::NAN,
        }
    }

    /// CSV with columns `radius, estimate, pairs`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["radius", "estimate", "pairs"])?;
        for p in &self.profile {
            wtr.write_record([format!("{:e}", p.radius), format!("{:e}", p.estimate), p.pairs.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Stable profiles may not rise above this multiple of the running minimum.
pub const LIPSCHITZ_NOISE_FACTOR: f64 = 1.5;
/// Growth across the profile that counts as blowup.
pub const BLOWUP_FACTOR: f64 = 10.0;

fn classify(profile: &[LipschitzPoint]) -> LipschitzVerdict {
    let m: Vec<f64> = profile.iter().map(|p| p.estimate).collect();
    if m.iter().any(|x| !x.is_finite()) {
        return LipschitzVerdict::Blowup;
    }
    let mut running_min = m[0];
    let mut stable = true;
    for &x in &m[1..] {
        if x > LIPSCHITZ_NOISE_FACTOR * running_min {
            stable = false;
        }
        running_min = running_min.min(x);
    }
    if stable {
        return LipschitzVerdict::Lipschitz;
    }
    let (first, last) = (m[0], m[m.len() - 1]);
    if last >= BLOWUP_FACTOR * first {
        LipschitzVerdict::Blowup
    } else {
        LipschitzVerdict::Inconclusive
    }
}

#[derive(Debug, Clone)]
pub struct LipschitzOptions {
    /// Strictly decreasing ball radii.
    pub radii: Vec<f64>,
    pub pairs_per_radius: usize,
    pub seed: u64,
    pub norm: Norm,
    pub exec: Exec,
}

impl LipschitzOptions {
    pub fn new(radii: Vec<f64>) -> Self {
        LipschitzOptions { radii, pairs_per_radius: 200, seed: 0, norm: Norm::Euclidean, exec: Exec::default() }
    }
}

/// Pair separations below this are skipped.
pub const DEGENERATE_PAIR: f64 = 1e-14;

/// Pair pattern in the unit ball, shared by every radius: even indices are
/// independent uniform pairs, odd indices are short pairs with separation
/// 10^{-k}, k cycling through 1..=4.
fn unit_pairs(n: usize, count: usize, seed: u64) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut r = rng::rng_for(seed, "lipschitz-pairs");
    let origin = DVector::zeros(n);
    (0..count)
        .map(|p| {
            if p % 2 == 0 {
                (rng::point_in_ball(&mut r, &origin, 1.0), rng::point_in_ball(&mut r, &origin, 1.0))
            } else {
                let sep = 10f64.powi(-(1 + ((p / 2) % 4) as i32));
                let a = rng::point_in_ball(&mut r, &origin, 1.0 - sep);
                let b = &a + rng::unit_vector(&mut r, n) * sep;
                (a, b)
            }
        })
        .collect()
}

/// M(r) = max over sampled pairs in ball(center, r) of
/// ‖f(y₁) − f(y₂)‖ / ‖y₁ − y₂‖, for each radius. The same unit-ball pair
/// pattern (common random numbers) is scaled to every radius.
pub fn lipschitz_estimate(
    f: &EvaluableMap,
    center: &DVector<f64>,
    opts: &LipschitzOptions,
) -> Result<LipschitzEstimate> {
    check_radii(&opts.radii)?;
    if opts.pairs_per_radius == 0 {
        return Err(Error::invalid("pairs per radius must be at least 1"));
    }
    f.evaluate(center)?;
    let pattern = unit_pairs(center.len(), opts.pairs_per_radius, opts.seed);
    let norm = opts.norm;
    let mut profile = Vec::with_capacity(opts.radii.len());
    for &r in &opts.radii {
        let ratios = opts.exec.try_map(&pattern, |(a, b)| {
            let y1 = center + a * r;
            let y2 = center + b * r;
            let sep = norm.of(&(&y1 - &y2));
            if sep < DEGENERATE_PAIR {
                return Ok::<_, Error>(None);
            }
            let diff = f.evaluate(&y1)? - f.evaluate(&y2)?;
            Ok(Some(norm.of(&diff) / sep))
        })?;
        let used: Vec<f64> = ratios.into_iter().flatten().collect();
        let estimate = used.iter().copied().fold(0.0, f64::max);
        profile.push(LipschitzPoint { radius: r, estimate, pairs: used.len() });
    }
    let verdict = classify(&profile);
    Ok(LipschitzEstimate { center: center.clone(), profile, verdict })
}
