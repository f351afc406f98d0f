//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) batch loops run on the rayon pool;
//! without it every [`Exec`] falls back to a plain sequential loop. Results
//! are always collected in input order, so reports never depend on
//! completion order.

use serde::{Deserialize, Serialize};

/// Execution strategy for batch loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Maps `op` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], op: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(op).collect()
            }
            _ => items.iter().map(op).collect(),
        }
    }

    /// Maps a fallible `op` over `items`; the first error in input order wins.
    pub fn try_map<T, R, E, F>(self, items: &[T], op: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync + Send,
    {
        self.map(items, op).into_iter().collect()
    }

    /// Maps over `0..n`.
    pub fn map_range<R, F>(self, n: usize, op: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(op).collect()
            }
            _ => (0..n).map(op).collect(),
        }
    }
}
