//! Difference-quotient sampling of derived sets, one-sided directional
//! derivatives and Gâteaux derivative assembly.
//!
//! For a map f, a base point y and a direction v, the quotients
//! `(f(y + t v) − f(y)) / t` are sampled along a geometric step schedule.
//! The set of their accumulation points as t ↘ 0 is approximated by
//! clustering the tail of the schedule: a single tight cluster means a
//! one-sided directional derivative exists, several clusters (or one wide
//! cluster) mean the derived set is multivalued, and norm blowup means no
//! bounded limit exists.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::func::EvaluableMap;
use crate::par::Exec;
use crate::serde_util;

/// Ratio of the fixed geometric lattice used by [`delta_derived_set`].
pub const DELTA_GRID_RATIO: f64 = 0.7;

/// Tail norms above `DIVERGENCE_FACTOR·(1 + ‖v‖)` that keep increasing over
/// the last [`DIVERGENCE_WINDOW`] steps are classified as divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
pub const DIVERGENCE_WINDOW: usize = 10;

/// Geometric steps t_k = t0·ratio^k, k = 0..count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSchedule {
    t0: f64,
    ratio: f64,
    count: usize,
}

impl Default for StepSchedule {
    /// t0 = 1e−2, ratio 0.7, 60 steps (down to roughly 7e−12).
    fn default() -> Self {
        StepSchedule { t0: 1e-2, ratio: 0.7, count: 60 }
    }
}

impl StepSchedule {
    pub fn new(t0: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::invalid(format!("schedule t0 must be positive, got {t0}")));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid(format!("schedule ratio must lie in (0, 1), got {ratio}")));
        }
        if count < 2 {
            return Err(Error::invalid("schedule needs at least 2 steps"));
        }
        Ok(StepSchedule { t0, ratio, count })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn steps(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.t0 * self.ratio.powi(k as i32)).collect()
    }

    pub fn smallest(&self) -> f64 {
        self.t0 * self.ratio.powi(self.count as i32 - 1)
    }

    /// Index of the first tail step (the tail is the last half).
    pub fn tail_start(&self) -> usize {
        self.count / 2
    }

    /// The same schedule with every step multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.t0 * factor, self.ratio, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Singleton,
    Multivalued,
    Divergent,
    Empty,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Singleton => "singleton",
            Verdict::Multivalued => "multivalued",
            Verdict::Divergent => "divergent",
            Verdict::Empty => "empty",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Quotient {
    pub t: f64,
    #[serde(with = "serde_util::dvec")]
    pub q: DVector<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    /// For a singleton derived set, the extrapolated limit; otherwise the
    /// center of the member bounding box.
    #[serde(with = "serde_util::dvec")]
    pub representative: DVector<f64>,
    pub members: usize,
    /// Largest distance from a member to the bounding-box center.
    pub spread: f64,
    #[serde(with = "serde_util::dvec")]
    pub lower: DVector<f64>,
    #[serde(with = "serde_util::dvec")]
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivedSetSample {
    #[serde(with = "serde_util::dvec")]
    pub base: DVector<f64>,
    #[serde(with = "serde_util::dvec")]
    pub direction: DVector<f64>,
    /// Ordered by decreasing t.
    pub quotients: Vec<Quotient>,
    /// Index where the clustered tail begins.
    pub tail_start: usize,
    pub cluster_tol: f64,
    pub clusters: Vec<Cluster>,
    pub verdict: Verdict,
}

impl DerivedSetSample {
    /// Componentwise bounding box of all clusters.
    pub fn hull(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        let first = self.clusters.first()?;
        let (mut lo, mut hi) = (first.lower.clone(), first.upper.clone());
        for c in &self.clusters[1..] {
            lo = lo.inf(&c.lower);
            hi = hi.sup(&c.upper);
        }
        Some((lo, hi))
    }

    pub fn representatives(&self) -> Vec<&DVector<f64>> {
        self.clusters.iter().map(|c| &c.representative).collect()
    }

    /// The one-sided directional derivative, when the derived set is a
    /// singleton.
    pub fn limit(&self) -> Option<&DVector<f64>> {
        match self.verdict {
            Verdict::Singleton => self.clusters.first().map(|c| &c.representative),
            _ => None,
        }
    }

    pub fn tail(&self) -> &[Quotient] {
        &self.quotients[self.tail_start..]
    }

    /// Raw snapshot of the quotients with t < `delta` (no clustering).
    pub fn restrict_below(&self, delta: f64) -> DerivedSetSample {
        let quotients: Vec<Quotient> =
            self.quotients.iter().filter(|q| q.t < delta).cloned().collect();
        raw_sample(self.base.clone(), self.direction.clone(), quotients)
    }

    /// CSV with columns `t, q0, q1, …`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let dim = self.quotients.first().map_or(0, |q| q.q.len());
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|i| format!("q{i}")));
        wtr.write_record(&header)?;
        for q in &self.quotients {
            let mut rec = vec![format!("{:e}", q.t)];
            rec.extend(q.q.iter().map(|x| format!("{x:e}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn raw_sample(base: DVector<f64>, direction: DVector<f64>, quotients: Vec<Quotient>) -> DerivedSetSample {
    let verdict = if quotients.is_empty() { Verdict::Empty } else { Verdict::Multivalued };
    DerivedSetSample {
        base,
        direction,
        quotients,
        tail_start: 0,
        cluster_tol: 0.0,
        clusters: Vec::new(),
        verdict,
    }
}

fn sample_quotients(
    f: &EvaluableMap,
    y: &DVector<f64>,
    v: &DVector<f64>,
    steps: &[f64],
) -> Result<Vec<Quotient>> {
    if v.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), actual: v.len() });
    }
    let fy = f.evaluate(y)?;
    Exec::default().try_map(steps, |&t| {
        let ft = f.evaluate(&(y + v * t)).map_err(|e| e.at_step(t))?;
        Ok(Quotient { t, q: (ft - &fy) / t })
    })
}

/// Lattice steps 0.7^j below `delta`, largest first.
fn delta_grid(delta: f64, count: usize) -> Vec<f64> {
    let mut j = (delta.ln() / DELTA_GRID_RATIO.ln()).floor().max(0.0) as i32;
    while DELTA_GRID_RATIO.powi(j) >= delta {
        j += 1;
    }
    (0..count).map(|k| DELTA_GRID_RATIO.powi(j + k as i32)).collect()
}

/// Raw δ-approximating derived set: quotients for the first `grid_count`
/// steps of the lattice {0.7^j} lying strictly below `delta`. Two calls
/// with different deltas therefore share steps, and the smaller delta's
/// quotients are a subset of the larger's whenever its grid ends no later.
pub fn delta_derived_set(
    f: &EvaluableMap,
    y: &DVector<f64>,
    v: &DVector<f64>,
    delta: f64,
    grid_count: usize,
) -> Result<DerivedSetSample> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    let steps = delta_grid(delta, grid_count);
    let quotients = sample_quotients(f, y, v, &steps)?;
    Ok(raw_sample(y.clone(), v.clone(), quotients))
}

/// Default clustering radius 1e−3·max(1, ‖v‖).
pub fn default_cluster_tol(v: &DVector<f64>) -> f64 {
    1e-3 * v.norm().max(1.0)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Single-linkage clusters of `points` at radius `tol`, ordered by first
/// member.
fn single_linkage(points: &[&DVector<f64>], tol: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut uf = UnionFind((0..n).collect());
    for i in 0..n {
        for j in (i + 1)..n {
            if (points[i] - points[j]).norm() <= tol {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, members)) => members.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    groups.into_iter().map(|(_, m)| m).collect()
}

fn summarize(points: &[&DVector<f64>], members: &[usize]) -> Cluster {
    let mut lower = points[members[0]].clone();
    let mut upper = lower.clone();
    for &m in &members[1..] {
        lower = lower.inf(points[m]);
        upper = upper.sup(points[m]);
    }
    let center = (&lower + &upper) * 0.5;
    let spread = members.iter().map(|&m| (points[m] - &center).norm()).fold(0.0, f64::max);
    Cluster { representative: center, members: members.len(), spread, lower, upper }
}

/// Richardson-extrapolated limit of the tail quotients. Each pair of
/// consecutive steps cancels the O(t) term; the pair whose extrapolant is
/// most stable against its neighbour is used.
fn extrapolated_limit(tail: &[Quotient], ratio: f64) -> DVector<f64> {
    let rich: Vec<DVector<f64>> = tail
        .windows(2)
        .map(|w| (&w[1].q - &w[0].q * ratio) / (1.0 - ratio))
        .collect();
    if rich.len() < 2 {
        return tail.last().expect("non-empty tail").q.clone();
    }
    let best = (0..rich.len() - 1)
        .min_by(|&a, &b| {
            let da = (&rich[a + 1] - &rich[a]).norm();
            let db = (&rich[b + 1] - &rich[b]).norm();
            da.total_cmp(&db)
        })
        .expect("at least one pair");
    rich[best].clone()
}

/// Estimates the derived set 𝒟f(y, v) from the tail of `schedule`.
pub fn derived_set_estimate(
    f: &EvaluableMap,
    y: &DVector<f64>,
    v: &DVector<f64>,
    schedule: &StepSchedule,
    cluster_tol: f64,
) -> Result<DerivedSetSample> {
    if v.norm() == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    if !(cluster_tol > 0.0) {
        return Err(Error::invalid("cluster tolerance must be positive"));
    }
    let quotients = sample_quotients(f, y, v, &schedule.steps())?;
    let tail_start = schedule.tail_start();
    let tail = &quotients[tail_start..];

    let norms: Vec<f64> = tail.iter().map(|q| q.q.norm()).collect();
    let window = &norms[norms.len().saturating_sub(DIVERGENCE_WINDOW)..];
    let tail_max = norms.iter().copied().fold(0.0, f64::max);
    let increasing = window.windows(2).all(|w| w[1] > w[0]);
    if tail_max > DIVERGENCE_FACTOR * (1.0 + v.norm()) && increasing {
        return Ok(DerivedSetSample {
            base: y.clone(),
            direction: v.clone(),
            quotients,
            tail_start,
            cluster_tol,
            clusters: Vec::new(),
            verdict: Verdict::Divergent,
        });
    }

    let points: Vec<&DVector<f64>> = tail.iter().map(|q| &q.q).collect();
    let mut clusters: Vec<Cluster> = single_linkage(&points, cluster_tol)
        .iter()
        .map(|m| summarize(&points, m))
        .collect();
    let verdict = if clusters.len() == 1 && clusters[0].spread <= cluster_tol {
        clusters[0].representative = extrapolated_limit(tail, schedule.ratio());
        Verdict::Singleton
    } else {
        Verdict::Multivalued
    };
    Ok(DerivedSetSample {
        base: y.clone(),
        direction: v.clone(),
        quotients,
        tail_start,
        cluster_tol,
        clusters,
        verdict,
    })
}

/// A one-sided directional derivative, or the verdict explaining why none
/// was found.
#[derive(Debug, Clone, PartialEq)]
pub enum Directional {
    Value(DVector<f64>),
    NotSingleton(Verdict),
}

impl Directional {
    pub fn value(&self) -> Option<&DVector<f64>> {
        match self {
            Directional::Value(v) => Some(v),
            Directional::NotSingleton(_) => None,
        }
    }

    pub fn verdict(&self) -> Verdict {
        match self {
            Directional::Value(_) => Verdict::Singleton,
            Directional::NotSingleton(v) => *v,
        }
    }
}

/// f′₊(y, v): the singleton derived set clustered at radius `tol`.
pub fn one_sided_directional(
    f: &EvaluableMap,
    y: &DVector<f64>,
    v: &DVector<f64>,
    schedule: &StepSchedule,
    tol: f64,
) -> Result<Directional> {
    let sample = derived_set_estimate(f, y, v, schedule, tol)?;
    Ok(match sample.limit() {
        Some(l) => Directional::Value(l.clone()),
        None => Directional::NotSingleton(sample.verdict),
    })
}

/// The bilateral directional derivative f′(y, v): both one-sided
/// derivatives along ±v exist and f′₊(y, −v) = −f′₊(y, v) within `tol`.
pub fn bilateral_directional(
    f: &EvaluableMap,
    y: &DVector<f64>,
    v: &DVector<f64>,
    schedule: &StepSchedule,
    tol: f64,
) -> Result<Option<DVector<f64>>> {
    let plus = one_sided_directional(f, y, v, schedule, tol)?;
    let minus = one_sided_directional(f, y, &(-v), schedule, tol)?;
    Ok(match (plus, minus) {
        (Directional::Value(p), Directional::Value(m)) if (&p + &m).norm() <= tol => Some(p),
        _ => None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionalValue {
    #[serde(with = "serde_util::dvec")]
    pub direction: DVector<f64>,
    pub verdict: Verdict,
    #[serde(with = "serde_util::opt_dvec")]
    pub value: Option<DVector<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GateauxCandidate {
    #[serde(with = "serde_util::dvec")]
    pub base: DVector<f64>,
    /// Columns are the one-sided derivatives along +e_i.
    #[serde(with = "serde_util::dmat")]
    pub matrix: DMatrix<f64>,
    /// Values along +e_1, −e_1, …, +e_n, −e_n, then the probe directions.
    pub directional: Vec<DirectionalValue>,
    /// max over probes v of ‖g′₊(x, v) − M v‖ (infinite if a probe has no
    /// one-sided derivative).
    #[serde(with = "serde_util::finite")]
    pub linearity_residual: f64,
    /// max over i of ‖g′₊(x, e_i) + g′₊(x, −e_i)‖.
    pub homogeneity_residual: f64,
}

/// Assembles the Gâteaux derivative candidate of `g` at `x` from one-sided
/// derivatives along ±e_i, and measures its linearity on `probes`.
pub fn gateaux_assemble(
    g: &EvaluableMap,
    x: &DVector<f64>,
    schedule: &StepSchedule,
    tol: f64,
    probes: &[DVector<f64>],
) -> Result<GateauxCandidate> {
    let n = x.len();
    let mut directions = Vec::with_capacity(2 * n + probes.len());
    for i in 0..n {
        let e = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
        directions.push(e.clone());
        directions.push(-e);
    }
    directions.extend(probes.iter().cloned());

    let results = Exec::default().try_map(&directions, |v| one_sided_directional(g, x, v, schedule, tol))?;
    for (k, r) in results.iter().take(2 * n).enumerate() {
        if let Directional::NotSingleton(verdict) = r {
            return Err(Error::NotDirectionallyDifferentiable { index: k / 2, verdict: *verdict });
        }
    }

    let m = g.codomain_dim();
    let mut matrix = DMatrix::zeros(m, n);
    let mut homogeneity: f64 = 0.0;
    for i in 0..n {
        let plus = results[2 * i].value().expect("checked above");
        let minus = results[2 * i + 1].value().expect("checked above");
        matrix.set_column(i, plus);
        homogeneity = homogeneity.max((plus + minus).norm());
    }
    let linearity = probes
        .iter()
        .zip(&results[2 * n..])
        .map(|(v, r)| r.value().map_or(f64::INFINITY, |d| (d - &matrix * v).norm()))
        .fold(0.0, f64::max);

    let directional = directions
        .into_iter()
        .zip(results)
        .map(|(direction, r)| DirectionalValue {
            direction,
            verdict: r.verdict(),
            value: r.value().cloned(),
        })
        .collect();
    Ok(GateauxCandidate {
        base: x.clone(),
        matrix,
        directional,
        linearity_residual: linearity,
        homogeneity_residual: homogeneity,
    })
}
