//! Small dense linear-algebra helpers shared by the other modules.
//!
//! Everything here works for real (`f64`) and complex (`Complex<f64>`)
//! scalars through nalgebra's `ComplexField`.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};

/// Scalar types the toolkit operates on: `f64` for sampled data and
/// `Complex<f64>` for similarity-transformed moments.
pub trait Scalar: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> Scalar for T {}

/// Condition-number cliff above which a matrix is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn powi(x: f64, n: u64) -> f64 {
    libm::pow(x, n as f64)
}

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// `(m + m*) / 2`.
pub fn hermitian_part<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.adjoint()) * T::from_real(0.5)
}

/// Smallest eigenvalue of the Hermitian part of `m`. The input is
/// symmetrized first so round-off asymmetry never leaks into the result.
pub fn min_eigenvalue_hermitian<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let h = hermitian_part(m);
    SymmetricEigen::new(h).eigenvalues.min()
}

/// All eigenvalues of the Hermitian part of `m`, ascending.
pub fn eigenvalues_hermitian<T: Scalar>(m: &DMatrix<T>) -> alloc::vec::Vec<f64> {
    let mut v: alloc::vec::Vec<f64> =
        SymmetricEigen::new(hermitian_part(m)).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Spectral (operator 2-) norm.
pub fn spectral_norm<T: Scalar>(m: &DMatrix<T>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `‖m‖·‖m⁻¹‖` via singular values; infinite for singular input.
pub fn condition_number<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let lo = sv.min();
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / lo
    }
}

/// Solves `a x = b`, refusing matrices past the singularity cliff.
pub fn solve_checked<T: Scalar>(a: &DMatrix<T>, b: &DVector<T>) -> crate::Result<DVector<T>> {
    let kappa = condition_number(a);
    if !kappa.is_finite() || kappa > SINGULAR_CONDITION {
        return Err(crate::LsaError::Singular(kappa));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(crate::LsaError::Singular(f64::INFINITY))
}

pub fn vector_norm<T: Scalar>(v: &DVector<T>) -> f64 {
    v.norm()
}

/// Promotes a real matrix to complex entries.
pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<nalgebra::Complex<f64>> {
    m.map(|x| nalgebra::Complex::new(x, 0.0))
}

pub fn to_complex_vec(v: &DVector<f64>) -> DVector<nalgebra::Complex<f64>> {
    v.map(|x| nalgebra::Complex::new(x, 0.0))
}

/// Eigenvalues of a general real matrix (complex Schur diagonal).
pub fn eigenvalues_general(m: &DMatrix<f64>) -> alloc::vec::Vec<nalgebra::Complex<f64>> {
    let t = nalgebra::linalg::Schur::new(to_complex(m)).unpack().1;
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Smallest real part over the spectrum.
pub fn min_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    eigenvalues_general(m)
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min)
}

/// True when every eigenvalue has strictly positive real part.
pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    min_real_eigenvalue(m) > 0.0
}
