//! Evaluable maps between open subsets of ℝⁿ and inverse pairs of them.

pub(crate) mod catalog;

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::karcher::spd;
use crate::par::Exec;
use crate::rng;
use crate::serde_util;

pub use catalog::{catalog_get, catalog_get_with, CatalogEntry, CatalogParams, Side, CATALOG};

/// A point, direction or value in ℝⁿ.
pub type VectorPoint = DVector<f64>;

/// Checks the point invariants: finite entries and dimension at least one.
pub fn check_point(p: &VectorPoint, what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid(format!("{what} has dimension 0")));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    #[default]
    Euclidean,
    Sup,
}

impl Norm {
    pub fn of(self, v: &DVector<f64>) -> f64 {
        match self {
            Norm::Euclidean => v.norm(),
            Norm::Sup => v.amax(),
        }
    }
}

/// An open subset of ℝⁿ with a strict membership test.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OpenDomain {
    Ball {
        #[serde(with = "serde_util::dvec")]
        center: DVector<f64>,
        radius: f64,
    },
    Box {
        #[serde(with = "serde_util::dvec")]
        lower: DVector<f64>,
        #[serde(with = "serde_util::dvec")]
        upper: DVector<f64>,
    },
    /// The cone of `size`×`size` SPD matrices in scaled upper-triangle
    /// coordinates. `anchor` and `anchor_radius` describe a ball inside the
    /// cone used for sampling.
    SpdCone {
        size: usize,
        #[serde(with = "serde_util::dvec")]
        anchor: DVector<f64>,
        anchor_radius: f64,
    },
    /// All of ℝⁿ; its sampling ball is the unit ball at the origin.
    Whole { dim: usize },
}

impl OpenDomain {
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        check_point(&center, "ball center")?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(OpenDomain::Ball { center, radius })
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::boxed(DVector::from_element(1, lower), DVector::from_element(1, upper))
    }

    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_point(&lower, "box lower bound")?;
        check_point(&upper, "box upper bound")?;
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), actual: upper.len() });
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l >= u) {
            return Err(Error::invalid("box requires lower < upper componentwise"));
        }
        Ok(OpenDomain::Box { lower, upper })
    }

    pub fn spd_cone(size: usize, anchor: DVector<f64>, anchor_radius: f64) -> Result<Self> {
        if anchor.len() != spd::coord_dim(size) {
            return Err(Error::DimensionMismatch {
                expected: spd::coord_dim(size),
                actual: anchor.len(),
            });
        }
        let lam = spd::min_eigenvalue_of_coords(&anchor, size);
        if !(anchor_radius > 0.0 && anchor_radius < lam) {
            return Err(Error::invalid(format!(
                "cone sampling radius {anchor_radius:e} must lie in (0, λ_min = {lam:e})"
            )));
        }
        Ok(OpenDomain::SpdCone { size, anchor, anchor_radius })
    }

    pub fn whole(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("domain dimension must be at least 1"));
        }
        Ok(OpenDomain::Whole { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            OpenDomain::Ball { center, .. } => center.len(),
            OpenDomain::Box { lower, .. } => lower.len(),
            OpenDomain::SpdCone { size, .. } => spd::coord_dim(*size),
            OpenDomain::Whole { dim } => *dim,
        }
    }

    /// Strict membership: boundary points are outside.
    pub fn contains(&self, p: &DVector<f64>) -> bool {
        if p.len() != self.dim() || p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self {
            OpenDomain::Ball { center, radius } => (p - center).norm() < *radius,
            OpenDomain::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(x, (l, u))| l < x && x < u),
            OpenDomain::SpdCone { size, .. } => spd::min_eigenvalue_of_coords(p, *size) > 0.0,
            OpenDomain::Whole { .. } => true,
        }
    }

    /// A lower bound on the Euclidean distance from `p` to the complement;
    /// zero when `p` is outside.
    pub fn boundary_distance(&self, p: &DVector<f64>) -> f64 {
        if !self.contains(p) {
            return 0.0;
        }
        match self {
            OpenDomain::Ball { center, radius } => radius - (p - center).norm(),
            OpenDomain::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .map(|(x, (l, u))| (x - l).min(u - x))
                .fold(f64::INFINITY, f64::min),
            // Coordinates are Frobenius-isometric, and a symmetric perturbation
            // of Frobenius norm below λ_min keeps the matrix positive definite.
            OpenDomain::SpdCone { size, .. } => spd::min_eigenvalue_of_coords(p, *size),
            OpenDomain::Whole { .. } => f64::INFINITY,
        }
    }

    /// The closed ball that sampling procedures draw from (center, radius).
    pub fn sampling_ball(&self) -> (DVector<f64>, f64) {
        match self {
            OpenDomain::Ball { center, radius } => (center.clone(), *radius),
            OpenDomain::Box { lower, upper } => {
                let mid = (lower + upper) * 0.5;
                let half = (upper - lower).min() * 0.5;
                (mid, half)
            }
            OpenDomain::SpdCone { anchor, anchor_radius, .. } => (anchor.clone(), *anchor_radius),
            OpenDomain::Whole { dim } => (DVector::zeros(*dim), 1.0),
        }
    }
}

type Evaluator = dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync;

/// A map defined on an open domain. Evaluation outside the domain is an
/// error, never an extrapolation.
#[derive(Clone)]
pub struct EvaluableMap {
    name: String,
    domain: OpenDomain,
    codomain_dim: usize,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for EvaluableMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvaluableMap")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("codomain_dim", &self.codomain_dim)
            .finish_non_exhaustive()
    }
}

impl EvaluableMap {
    /// Registers an infallible evaluator. The closure must be pure.
    pub fn new<F>(name: impl Into<String>, domain: OpenDomain, codomain_dim: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self::fallible(name, domain, codomain_dim, move |p| Ok(f(p)))
    }

    /// Registers an evaluator that may fail (for example an inner solver).
    pub fn fallible<F>(
        name: impl Into<String>,
        domain: OpenDomain,
        codomain_dim: usize,
        f: F,
    ) -> Self
    where
        F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync + 'static,
    {
        EvaluableMap { name: name.into(), domain, codomain_dim, eval: Arc::new(f) }
    }

    /// Scalar map t ↦ f(t) on an open interval.
    pub fn scalar<F>(name: impl Into<String>, lower: f64, upper: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let domain = OpenDomain::interval(lower, upper)?;
        Ok(Self::new(name, domain, 1, move |p| DVector::from_element(1, f(p[0]))))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &OpenDomain {
        &self.domain
    }

    pub fn domain_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    pub fn evaluate(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        if p.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch { expected: self.domain.dim(), actual: p.len() });
        }
        if !self.domain.contains(p) {
            return Err(Error::DomainViolation {
                map: self.name.clone(),
                point: p.iter().copied().collect(),
                step: None,
            });
        }
        let out = (self.eval)(p)?;
        if out.len() != self.codomain_dim {
            return Err(Error::DimensionMismatch { expected: self.codomain_dim, actual: out.len() });
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("value of `{}`", self.name)));
        }
        Ok(out)
    }

    /// `outer ∘ self`, defined on this map's domain. The outer map's domain
    /// is still enforced on every evaluation.
    pub fn then(&self, outer: &EvaluableMap) -> Result<EvaluableMap> {
        if outer.domain_dim() != self.codomain_dim {
            return Err(Error::DimensionMismatch {
                expected: outer.domain_dim(),
                actual: self.codomain_dim,
            });
        }
        let inner = self.clone();
        let outer_c = outer.clone();
        Ok(EvaluableMap::fallible(
            format!("{}∘{}", outer.name, self.name),
            self.domain.clone(),
            outer.codomain_dim,
            move |p| outer_c.evaluate(&inner.evaluate(p)?),
        ))
    }

    /// The map `c·f`.
    pub fn scaled(&self, c: f64) -> EvaluableMap {
        let inner = self.clone();
        EvaluableMap::fallible(
            format!("{c}·{}", self.name),
            self.domain.clone(),
            self.codomain_dim,
            move |p| Ok(inner.evaluate(p)? * c),
        )
    }
}

/// Maps g: U → V and f: V → U asserted to be inverse homeomorphisms.
#[derive(Debug, Clone)]
pub struct MapPair {
    g: EvaluableMap,
    f: EvaluableMap,
    declared_inverse: bool,
}

impl MapPair {
    pub fn new(g: EvaluableMap, f: EvaluableMap) -> Result<Self> {
        if g.domain_dim() != f.codomain_dim() {
            return Err(Error::DimensionMismatch {
                expected: g.domain_dim(),
                actual: f.codomain_dim(),
            });
        }
        if f.domain_dim() != g.codomain_dim() {
            return Err(Error::DimensionMismatch {
                expected: f.domain_dim(),
                actual: g.codomain_dim(),
            });
        }
        Ok(MapPair { g, f, declared_inverse: false })
    }

    pub fn g(&self) -> &EvaluableMap {
        &self.g
    }

    pub fn f(&self) -> &EvaluableMap {
        &self.f
    }

    pub fn side(&self, side: Side) -> &EvaluableMap {
        match side {
            Side::G => &self.g,
            Side::F => &self.f,
        }
    }

    /// Whether a passing [`check_inverse_pair`] report has been recorded.
    pub fn declared_inverse(&self) -> bool {
        self.declared_inverse
    }

    pub fn declare_inverse(mut self, report: &InverseCheckReport) -> Self {
        self.declared_inverse = report.passed;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InverseCheckOptions {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    pub norm: Norm,
    pub exec: Exec,
}

impl Default for InverseCheckOptions {
    fn default() -> Self {
        InverseCheckOptions {
            samples: 1000,
            tol: 1e-9,
            seed: 0,
            norm: Norm::Euclidean,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InverseCheckReport {
    pub samples: usize,
    /// max ‖f(g(x)) − x‖ over samples of U.
    pub max_fg_residual: f64,
    /// max ‖g(f(y)) − y‖ over samples of V.
    pub max_gf_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Fraction of the sampling ball radius used when drawing points, keeping
/// samples away from domain boundaries.
pub const SAMPLING_SHRINK: f64 = 0.9;

fn draw_samples(domain: &OpenDomain, count: usize, seed: u64, label: &str) -> Vec<DVector<f64>> {
    let (center, radius) = domain.sampling_ball();
    let mut r = rng::rng_for(seed, label);
    (0..count)
        .map(|_| rng::point_in_ball(&mut r, &center, SAMPLING_SHRINK * radius))
        .collect()
}

/// Samples both domains and measures how far f∘g and g∘f are from the
/// identity.
pub fn check_inverse_pair(pair: &MapPair, opts: &InverseCheckOptions) -> Result<InverseCheckReport> {
    if opts.samples == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let xs = draw_samples(pair.g.domain(), opts.samples, opts.seed, "inverse-check/U");
    let ys = draw_samples(pair.f.domain(), opts.samples, opts.seed, "inverse-check/V");
    let norm = opts.norm;

    let fg = opts.exec.try_map(&xs, |x| {
        let back = pair.f.evaluate(&pair.g.evaluate(x)?)?;
        Ok::<_, Error>(norm.of(&(back - x)))
    })?;
    let gf = opts.exec.try_map(&ys, |y| {
        let back = pair.g.evaluate(&pair.f.evaluate(y)?)?;
        Ok::<_, Error>(norm.of(&(back - y)))
    })?;
    let max_fg = fg.into_iter().fold(0.0, f64::max);
    let max_gf = gf.into_iter().fold(0.0, f64::max);
    Ok(InverseCheckReport {
        samples: opts.samples,
        max_fg_residual: max_fg,
        max_gf_residual: max_gf,
        tol: opts.tol,
        passed: max_fg <= opts.tol && max_gf <= opts.tol,
    })
}
