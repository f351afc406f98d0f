#![allow(dead_code)]

use lipdiff_core::func::{catalog_get, MapPair};
use lipdiff_core::karcher::SpdMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

pub fn pair(name: &str) -> MapPair {
    catalog_get(name).unwrap().into_pair().unwrap()
}

/// B Bᵀ + shift·I with B uniform in [−1, 1]; condition stays moderate.
pub fn random_spd<R: Rng>(r: &mut R, d: usize, shift: f64) -> SpdMatrix {
    let b = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
    SpdMatrix::new(&b * b.transpose() + DMatrix::identity(d, d) * shift).unwrap()
}

/// Random orthogonal matrix from the QR factor of a Gaussian-ish matrix.
pub fn random_orthogonal<R: Rng>(r: &mut R, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    m.qr().q()
}
