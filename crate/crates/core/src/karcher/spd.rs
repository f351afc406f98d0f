//! Symmetric positive-definite matrices and their spectral functions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Absolute-plus-relative symmetry tolerance for accepted inputs.
const SYMMETRY_TOL: f64 = 1e-12;

/// Dimension of the coordinate space of d×d symmetric matrices.
pub fn coord_dim(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Matrix size d from a coordinate dimension d(d+1)/2.
pub fn size_from_coord_dim(n: usize) -> Option<usize> {
    let d = ((((8 * n + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (coord_dim(d) == n).then_some(d)
}

/// Upper-triangle coordinates with off-diagonals scaled by √2, so the
/// Euclidean norm of the coordinates equals the Frobenius norm.
pub fn sym_to_coords(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(coord_dim(d));
    for i in 0..d {
        for j in i..d {
            if i == j {
                out.push(m[(i, i)]);
            } else {
                out.push(std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
    }
    DVector::from_vec(out)
}

/// Inverse of [`sym_to_coords`].
pub fn coords_to_sym(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), coord_dim(d));
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

/// Smallest eigenvalue of the symmetric matrix with coordinates `v`;
/// −∞ for malformed input.
pub fn min_eigenvalue_of_coords(v: &DVector<f64>, d: usize) -> f64 {
    if v.len() != coord_dim(d) || v.iter().any(|x| !x.is_finite()) {
        return f64::NEG_INFINITY;
    }
    SymmetricEigen::new(coords_to_sym(v, d)).eigenvalues.min()
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::invalid(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix entries".into()));
    }
    let a = asymmetry(m);
    if a > SYMMETRY_TOL * m.amax().max(1.0) {
        return Err(Error::AsymmetricInput(a));
    }
    Ok(())
}

/// Applies a scalar function to the spectrum of a symmetric matrix.
fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let q = &eig.eigenvectors;
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    symmetrize(&(q * DMatrix::from_diagonal(&d) * q.transpose()))
}

/// Matrix exponential of a symmetric matrix.
pub fn sym_exp(m: &DMatrix<f64>) -> Result<SpdMatrix> {
    check_symmetric(m)?;
    let e = spectral_map(&symmetrize(m), f64::exp);
    SpdMatrix::new(e)
}

/// An element of the open cone of real symmetric positive-definite matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

/// Square root, inverse square root and logarithm from one eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpdFunctions {
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    pub log: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry (to 1e−12) and positivity, and stores the
    /// symmetrized matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m)?;
        let m = symmetrize(&m);
        let lam = SymmetricEigen::new(m.clone()).eigenvalues.min();
        if !(lam > 0.0) {
            return Err(Error::NotSpd { min_eigenvalue: lam });
        }
        Ok(SpdMatrix(m))
    }

    pub fn from_row_slice(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, actual: entries.len() });
        }
        Self::new(DMatrix::from_row_slice(d, d, entries))
    }

    pub fn identity(d: usize) -> Self {
        SpdMatrix(DMatrix::identity(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_coords(v: &DVector<f64>, d: usize) -> Result<Self> {
        if v.len() != coord_dim(d) {
            return Err(Error::DimensionMismatch { expected: coord_dim(d), actual: v.len() });
        }
        Self::new(coords_to_sym(v, d))
    }

    pub fn to_coords(&self) -> DVector<f64> {
        sym_to_coords(&self.0)
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.0.clone()).eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }

    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        ev.max() / ev.min()
    }

    pub fn functions(&self) -> SpdFunctions {
        let eig = SymmetricEigen::new(self.0.clone());
        let q = &eig.eigenvectors;
        let qt = q.transpose();
        let with = |f: &dyn Fn(f64) -> f64| {
            let d = DVector::from_iterator(
                eig.eigenvalues.len(),
                eig.eigenvalues.iter().map(|&l| f(l)),
            );
            symmetrize(&(q * DMatrix::from_diagonal(&d) * &qt))
        };
        SpdFunctions {
            sqrt: with(&f64::sqrt),
            inv_sqrt: with(&|l| 1.0 / l.sqrt()),
            log: with(&f64::ln),
        }
    }

    pub fn sqrt(&self) -> SpdMatrix {
        SpdMatrix(spectral_map(&self.0, f64::sqrt))
    }

    pub fn inv_sqrt(&self) -> SpdMatrix {
        SpdMatrix(spectral_map(&self.0, |l| 1.0 / l.sqrt()))
    }

    /// Principal logarithm (a symmetric matrix).
    pub fn log(&self) -> DMatrix<f64> {
        spectral_map(&self.0, f64::ln)
    }

    pub fn inverse(&self) -> SpdMatrix {
        SpdMatrix(spectral_map(&self.0, |l| 1.0 / l))
    }

    /// The congruence `c · self · cᵀ` for symmetric `c`, symmetrized.
    pub(crate) fn congruence(&self, c: &DMatrix<f64>) -> Result<SpdMatrix> {
        let m = symmetrize(&(c * &self.0 * c));
        SpdMatrix::new(m)
    }

    pub fn frobenius_distance(&self, other: &SpdMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_functions() {
        let i = SpdMatrix::identity(3);
        let f = i.functions();
        assert!((f.sqrt - DMatrix::identity(3, 3)).amax() < 1e-15);
        assert!(f.log.amax() < 1e-15);
    }

    #[test]
    fn log_of_diagonal() {
        let e = std::f64::consts::E;
        let m = SpdMatrix::from_diagonal(&[e, e * e]).unwrap();
        let l = m.log();
        assert!((l[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((l[(1, 1)] - 2.0).abs() < 1e-14);
        assert!(l[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = SpdMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let s = m.sqrt();
        let sq = s.as_matrix() * s.as_matrix();
        assert!((sq - m.as_matrix()).amax() < 1e-12);
        let is = m.inv_sqrt();
        let prod = is.as_matrix() * m.as_matrix() * is.as_matrix();
        assert!((prod - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn exp_inverts_log() {
        let m = SpdMatrix::from_row_slice(3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]).unwrap();
        let back = sym_exp(&m.log()).unwrap();
        assert!(back.frobenius_distance(&m) < 1e-12);
    }

    #[test]
    fn rejects_non_spd_and_asymmetric() {
        assert!(matches!(
            SpdMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 1.0]),
            Err(Error::NotSpd { .. })
        ));
        assert!(matches!(
            SpdMatrix::from_row_slice(2, &[1.0, 0.1, 0.0, 1.0]),
            Err(Error::AsymmetricInput(_))
        ));
        assert!(sym_exp(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).is_err());
    }

    #[test]
    fn exp_accepts_indefinite_symmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, 1.0]);
        let e = sym_exp(&m).unwrap();
        assert!((e.as_matrix()[(0, 0)] - (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn coordinates_are_frobenius_isometric() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 5.0, 6.0, 3.0, 6.0, 9.0]);
        let c = sym_to_coords(&m);
        assert_eq!(c.len(), 6);
        assert!((c.norm() - m.norm()).abs() < 1e-12);
        assert!((coords_to_sym(&c, 3) - m).amax() < 1e-15);
        assert_eq!(size_from_coord_dim(6), Some(3));
        assert_eq!(size_from_coord_dim(5), None);
    }
}
