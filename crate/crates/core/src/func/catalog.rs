//! Built-in scenario maps, addressed by stable names.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{EvaluableMap, MapPair, OpenDomain};
use crate::error::{Error, Result};
use crate::karcher::{self, KarcherPairConfig, SpdMatrix};

/// Catalog names and one-line descriptions. `identity-<n>` accepts any n ≥ 1.
pub const CATALOG: &[(&str, &str)] = &[
    ("identity-<n>", "g = f = id on the open unit ball of R^n"),
    ("cube", "g(x) = x^3, f(y) = y^(1/3) on (-1, 1); inverse pair whose inverse is not Lipschitz at 0"),
    ("exp-log", "g = exp on (-1, 1), f = log on (1/e, e)"),
    ("affine", "g(x) = Ax + b, f(y) = A^-1 (y - b) on R^n; default A = diag(2, 3), b = 0"),
    ("shear", "g(x1, x2) = (x1 + x2^2, x2), f(y1, y2) = (y1 - y2^2, y2) on R^2"),
    ("tsinlog", "single map f(t) = t sin(log |t|), f(0) = 0, on (-1, 1)"),
    ("tsinlog-chain", "g(t) = (t, 0) on (-1, 1), f(y) = tsinlog(y1) on the unit disc; chain-rule pair, not inverse"),
    ("karcher-pair", "g(X) = Y solving the Karcher equation, f(Y) = Karcher mean of (A_1..A_{n-1}, Y)"),
];

/// Which side of a pair a scenario addresses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    G,
    F,
}

/// Optional parameters for parameterized catalog entries.
#[derive(Debug, Clone, Default)]
pub struct CatalogParams {
    /// Matrix A of the affine pair.
    pub matrix: Option<DMatrix<f64>>,
    /// Offset b of the affine pair.
    pub offset: Option<DVector<f64>>,
    /// Fixed operands A_1..A_{n-1} of the Karcher pair.
    pub fixed: Option<Vec<SpdMatrix>>,
    /// Variable operand around which the Karcher pair is built.
    pub y0: Option<SpdMatrix>,
}

#[derive(Debug, Clone)]
pub enum CatalogEntry {
    Pair(MapPair),
    Map(EvaluableMap),
}

impl CatalogEntry {
    pub fn into_pair(self) -> Result<MapPair> {
        match self {
            CatalogEntry::Pair(p) => Ok(p),
            CatalogEntry::Map(m) => Err(Error::NotAPair(m.name().to_string())),
        }
    }

    /// The addressed map: one side of a pair, or the single map itself.
    pub fn into_map(self, side: Side) -> EvaluableMap {
        match self {
            CatalogEntry::Pair(p) => p.side(side).clone(),
            CatalogEntry::Map(m) => m,
        }
    }
}

pub fn catalog_get(name: &str) -> Result<CatalogEntry> {
    catalog_get_with(name, &CatalogParams::default())
}

pub fn catalog_get_with(name: &str, params: &CatalogParams) -> Result<CatalogEntry> {
    if let Some(n) = name.strip_prefix("identity-") {
        let n: usize = n.parse().map_err(|_| Error::UnknownScenario(name.to_string()))?;
        return identity(n).map(CatalogEntry::Pair);
    }
    match name {
        "cube" => cube().map(CatalogEntry::Pair),
        "exp-log" => exp_log().map(CatalogEntry::Pair),
        "affine" => affine(params).map(CatalogEntry::Pair),
        "shear" => shear().map(CatalogEntry::Pair),
        "tsinlog" => tsinlog().map(CatalogEntry::Map),
        "tsinlog-chain" => tsinlog_chain().map(CatalogEntry::Pair),
        "karcher-pair" => karcher_pair(params).map(CatalogEntry::Pair),
        _ => Err(Error::UnknownScenario(name.to_string())),
    }
}

fn identity(n: usize) -> Result<MapPair> {
    if n == 0 {
        return Err(Error::UnknownScenario("identity-0".into()));
    }
    let ball = || OpenDomain::ball(DVector::zeros(n), 1.0);
    let g = EvaluableMap::new(format!("identity-{n}"), ball()?, n, |p| p.clone());
    let f = EvaluableMap::new(format!("identity-{n}"), ball()?, n, |p| p.clone());
    MapPair::new(g, f)
}

fn cube() -> Result<MapPair> {
    let g = EvaluableMap::scalar("cube", -1.0, 1.0, |t| t * t * t)?;
    let f = EvaluableMap::scalar("cube-root", -1.0, 1.0, f64::cbrt)?;
    MapPair::new(g, f)
}

fn exp_log() -> Result<MapPair> {
    let e = std::f64::consts::E;
    let g = EvaluableMap::scalar("exp", -1.0, 1.0, f64::exp)?;
    let f = EvaluableMap::scalar("log", 1.0 / e, e, f64::ln)?;
    MapPair::new(g, f)
}

fn affine(params: &CatalogParams) -> Result<MapPair> {
    let a = params
        .matrix
        .clone()
        .unwrap_or_else(|| DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])));
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::invalid("affine matrix must be square and non-empty"));
    }
    let n = a.nrows();
    let b = params.offset.clone().unwrap_or_else(|| DVector::zeros(n));
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: b.len() });
    }
    let a_inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::invalid("affine matrix must be invertible"))?;
    let (ag, bg) = (a, b.clone());
    let g = EvaluableMap::new("affine", OpenDomain::whole(n)?, n, move |x| &ag * x + &bg);
    let f = EvaluableMap::new("affine-inverse", OpenDomain::whole(n)?, n, move |y| &a_inv * (y - &b));
    MapPair::new(g, f)
}

fn shear() -> Result<MapPair> {
    let g = EvaluableMap::new("shear", OpenDomain::whole(2)?, 2, |x| {
        DVector::from_vec(vec![x[0] + x[1] * x[1], x[1]])
    });
    let f = EvaluableMap::new("shear-inverse", OpenDomain::whole(2)?, 2, |y| {
        DVector::from_vec(vec![y[0] - y[1] * y[1], y[1]])
    });
    MapPair::new(g, f)
}

/// t ↦ t·sin(log |t|), extended by 0 at the origin.
pub(crate) fn tsinlog_value(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.abs().ln().sin()
    }
}

fn tsinlog() -> Result<EvaluableMap> {
    EvaluableMap::scalar("tsinlog", -1.0, 1.0, tsinlog_value)
}

fn tsinlog_chain() -> Result<MapPair> {
    let g = EvaluableMap::new("embed", OpenDomain::interval(-1.0, 1.0)?, 2, |x| DVector::from_vec(vec![x[0], 0.0]));
    let f = EvaluableMap::new("tsinlog-first", OpenDomain::ball(DVector::zeros(2), 1.0)?, 1, |y| {
        DVector::from_element(1, tsinlog_value(y[0]))
    });
    MapPair::new(g, f)
}

fn karcher_pair(params: &CatalogParams) -> Result<MapPair> {
    let d = params
        .y0
        .as_ref()
        .map(SpdMatrix::size)
        .or_else(|| params.fixed.as_ref().and_then(|f| f.first().map(SpdMatrix::size)))
        .unwrap_or(2);
    let fixed = params
        .fixed
        .clone()
        .unwrap_or_else(|| vec![SpdMatrix::identity(d), SpdMatrix::identity(d)]);
    let y0 = params.y0.clone().unwrap_or_else(|| SpdMatrix::identity(d));
    karcher::karcher_pair(&fixed, &y0, &KarcherPairConfig::default()).map(|(pair, _)| pair)
}
