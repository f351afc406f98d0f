//! Numerical toolkit for inverse pairs of maps: derived sets of difference
//! quotients, finite-difference regularity diagnostics, Lipschitz profiles,
//! and certification that a Lipschitz inverse of a Fréchet-differentiable
//! map is itself differentiable with the inverse derivative. Includes the
//! Karcher mean on the SPD cone as an end-to-end application.

pub mod derived;
pub mod error;
pub mod func;
pub mod karcher;
pub mod par;
pub mod regularity;
pub mod rng;
mod serde_util;
pub mod theorem;

pub use error::{Error, Hypothesis, Result};
