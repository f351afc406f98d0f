//! The Karcher (matrix geometric) mean on the SPD cone, the closed-form
//! solve of its defining equation for the last operand, and the inverse
//! pair (g, f) built from the two.
//!
//! The mean Λ(A₁,…,Aₙ) is the unique SPD solution X of
//!
//! ```text
//! Σᵢ log(X^{-1/2} Aᵢ X^{-1/2}) = 0.
//! ```
//!
//! Operators are real symmetric matrices.

pub mod io;
mod pipeline;
pub mod spd;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::func::{EvaluableMap, MapPair, OpenDomain};
use crate::par::Exec;
use crate::serde_util;

pub use pipeline::{karcher_regularity_pipeline, RegularityConfig, RegularityRun};
pub use spd::{sym_exp, SpdFunctions, SpdMatrix};

#[derive(Debug, Clone, Serialize)]
pub struct KarcherResidual {
    #[serde(with = "serde_util::dmat")]
    pub matrix: DMatrix<f64>,
    /// Frobenius norm of `matrix`.
    pub norm: f64,
}

fn check_same_size(x: &SpdMatrix, operands: &[SpdMatrix]) -> Result<()> {
    for a in operands {
        if a.size() != x.size() {
            return Err(Error::DimensionMismatch { expected: x.size(), actual: a.size() });
        }
    }
    Ok(())
}

/// Σᵢ log(X^{-1/2} Aᵢ X^{-1/2}) with X^{-1/2} precomputed.
fn residual_with(inv_sqrt: &DMatrix<f64>, operands: &[SpdMatrix]) -> Result<DMatrix<f64>> {
    let d = inv_sqrt.nrows();
    let mut sum = DMatrix::zeros(d, d);
    for a in operands {
        sum += a.congruence(inv_sqrt)?.log();
    }
    Ok(sum)
}

pub fn karcher_residual(x: &SpdMatrix, operands: &[SpdMatrix]) -> Result<KarcherResidual> {
    check_same_size(x, operands)?;
    let matrix = residual_with(x.inv_sqrt().as_matrix(), operands)?;
    let norm = matrix.norm();
    Ok(KarcherResidual { matrix, norm })
}

#[derive(Debug, Clone, Serialize)]
pub struct KarcherIterate {
    pub k: usize,
    #[serde(with = "serde_util::dmat")]
    pub x: DMatrix<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KarcherSolveTrace {
    pub iterates: Vec<KarcherIterate>,
    pub converged: bool,
    /// Number of fixed-point updates performed.
    pub iterations: usize,
    pub tol: f64,
}

impl KarcherSolveTrace {
    pub fn final_residual(&self) -> f64 {
        self.iterates.last().map_or(f64::INFINITY, |it| it.residual)
    }

    /// The final iterate, whether or not the solve converged.
    pub fn last_iterate(&self) -> SpdMatrix {
        let m = self.iterates.last().expect("trace always holds the initial iterate").x.clone();
        SpdMatrix::new(m).expect("iterates are SPD by construction")
    }

    /// The mean, or `NoConvergence` when the tolerance was not reached.
    pub fn mean(&self) -> Result<SpdMatrix> {
        if self.converged {
            Ok(self.last_iterate())
        } else {
            Err(Error::NoConvergence {
                iterations: self.iterations,
                residual: self.final_residual(),
            })
        }
    }
}

fn arithmetic_mean(operands: &[SpdMatrix]) -> Result<SpdMatrix> {
    let d = operands[0].size();
    let mut sum = DMatrix::zeros(d, d);
    for a in operands {
        sum += a.as_matrix();
    }
    SpdMatrix::new(sum / operands.len() as f64)
}

/// Fixed-point iteration
/// `X ← X^{1/2} exp((1/n) Σᵢ log(X^{-1/2} Aᵢ X^{-1/2})) X^{1/2}`
/// started at the arithmetic mean and stopped once the residual Frobenius
/// norm is at most `tol`. A non-converged run still returns its trace.
pub fn karcher_mean(operands: &[SpdMatrix], tol: f64, max_iter: usize) -> Result<KarcherSolveTrace> {
    let Some(first) = operands.first() else {
        return Err(Error::invalid("karcher mean needs at least one operand"));
    };
    check_same_size(first, operands)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let n = operands.len() as f64;
    let mut x = arithmetic_mean(operands)?;
    let mut iterates = Vec::new();
    let mut k = 0;
    loop {
        let fns = x.functions();
        let res = residual_with(&fns.inv_sqrt, operands)?;
        let norm = res.norm();
        iterates.push(KarcherIterate { k, x: x.as_matrix().clone(), residual: norm });
        if norm <= tol {
            return Ok(KarcherSolveTrace { iterates, converged: true, iterations: k, tol });
        }
        if k == max_iter || !norm.is_finite() {
            return Ok(KarcherSolveTrace { iterates, converged: false, iterations: k, tol });
        }
        let step = sym_exp(&(res / n))?;
        x = step.congruence(&fns.sqrt)?;
        k += 1;
    }
}

/// Solves a batch of independent mean problems.
pub fn karcher_mean_batch(
    problems: &[Vec<SpdMatrix>],
    tol: f64,
    max_iter: usize,
    exec: Exec,
) -> Vec<Result<KarcherSolveTrace>> {
    exec.map(problems, |ops| karcher_mean(ops, tol, max_iter))
}

/// A#B = A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}.
pub fn geometric_mean_two(a: &SpdMatrix, b: &SpdMatrix) -> Result<SpdMatrix> {
    if a.size() != b.size() {
        return Err(Error::DimensionMismatch { expected: a.size(), actual: b.size() });
    }
    let fa = a.functions();
    let inner = b.congruence(&fa.inv_sqrt)?.sqrt();
    inner.congruence(&fa.sqrt)
}

/// The operand Y making X the mean of (A₁,…,A_{n−1}, Y):
/// `Y = X^{1/2} exp(−Σ_{i<n} log(X^{-1/2} Aᵢ X^{-1/2})) X^{1/2}`.
pub fn solve_for_y(x: &SpdMatrix, fixed: &[SpdMatrix]) -> Result<SpdMatrix> {
    check_same_size(x, fixed)?;
    let fns = x.functions();
    let s = residual_with(&fns.inv_sqrt, fixed)?;
    sym_exp(&(-s))?.congruence(&fns.sqrt)
}

#[derive(Debug, Clone, Copy)]
pub struct KarcherPairConfig {
    /// Residual tolerance for the inner mean solves that evaluate f.
    pub mean_tol: f64,
    pub max_iter: usize,
    /// Sampling ball radius as a fraction of λ_min at each anchor.
    pub radius_fraction: f64,
}

impl Default for KarcherPairConfig {
    fn default() -> Self {
        KarcherPairConfig { mean_tol: 1e-13, max_iter: 500, radius_fraction: 0.1 }
    }
}

/// Builds g(X) = solve_for_y(X, fixed) and f(Y) = Λ(fixed…, Y) as a pair
/// on the SPD cone in scaled upper-triangle coordinates. Returns the pair
/// and X₀ = Λ(fixed…, Y₀).
pub fn karcher_pair(
    fixed: &[SpdMatrix],
    y0: &SpdMatrix,
    cfg: &KarcherPairConfig,
) -> Result<(MapPair, SpdMatrix)> {
    if fixed.is_empty() {
        return Err(Error::invalid("karcher pair needs at least one fixed operand (n ≥ 2)"));
    }
    check_same_size(y0, fixed)?;
    let d = y0.size();
    let mut all = fixed.to_vec();
    all.push(y0.clone());
    let x0 = karcher_mean(&all, cfg.mean_tol, cfg.max_iter)?.mean()?;

    let u = OpenDomain::spd_cone(d, x0.to_coords(), cfg.radius_fraction * x0.min_eigenvalue())?;
    let v = OpenDomain::spd_cone(d, y0.to_coords(), cfg.radius_fraction * y0.min_eigenvalue())?;

    let fixed_g = fixed.to_vec();
    let g = EvaluableMap::fallible("karcher-g", u, spd::coord_dim(d), move |p| {
        let x = SpdMatrix::from_coords(p, d)?;
        Ok(solve_for_y(&x, &fixed_g)?.to_coords())
    });
    let fixed_f = fixed.to_vec();
    let (tol, max_iter) = (cfg.mean_tol, cfg.max_iter);
    let f = EvaluableMap::fallible("karcher-f", v, spd::coord_dim(d), move |p| {
        let mut ops = fixed_f.clone();
        ops.push(SpdMatrix::from_coords(p, d)?);
        Ok(karcher_mean(&ops, tol, max_iter)?.mean()?.to_coords())
    });
    Ok((MapPair::new(g, f)?, x0))
}
