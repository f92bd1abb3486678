//! Spectral gaps of the expected and stochastic iteration matrices, the
//! witness step-size, and admissibility checks for distribution classes.

use alloc::format;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, Scalar};
use crate::problems::{self, Moments, ProblemDistribution};
use crate::{LsaError, Result};

/// `ρ_d(α) = λ_min((A_P + A_P*) − α·A_P* A_P)`.
pub fn rho_d<T: Scalar>(moments: &Moments<T>, alpha: f64) -> f64 {
    let a = &moments.a_mean;
    let m = (a + a.adjoint()) - (a.adjoint() * a) * T::from_real(alpha);
    linalg::min_eigenvalue_hermitian(&m)
}

/// `ρ_s(α) = λ_min((A_P + A_P*) − α·C_P)`.
pub fn rho_s<T: Scalar>(moments: &Moments<T>, alpha: f64) -> f64 {
    let a = &moments.a_mean;
    let m = (a + a.adjoint()) - &moments.c * T::from_real(alpha);
    linalg::min_eigenvalue_hermitian(&m)
}

/// `λ_min(A_P* + A_P) / (‖A_P‖² + σ_A²)`.
///
/// Any step-size strictly below the returned value is certified; the
/// strict inequality is left to the caller.
pub fn witness_alpha<T: Scalar>(moments: &Moments<T>) -> Result<f64> {
    let a = &moments.a_mean;
    let lam = linalg::min_eigenvalue_hermitian(&(a + a.adjoint()));
    if !(lam > 0.0) {
        return Err(LsaError::NotPositiveDefinite(lam));
    }
    let n = linalg::spectral_norm(a);
    Ok(lam / (n * n + moments.sigma_a_sq))
}

/// The spectral quantities at one step-size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport {
    pub alpha: f64,
    pub rho_d: f64,
    pub rho_s: f64,
    pub alpha_witness: Option<f64>,
    pub contraction_factor_s: f64,
    pub contraction_factor_d: f64,
}

impl SpectralReport {
    pub fn new<T: Scalar>(moments: &Moments<T>, alpha: f64) -> Self {
        let rd = rho_d(moments, alpha);
        let rs = rho_s(moments, alpha);
        Self {
            alpha,
            rho_d: rd,
            rho_s: rs,
            alpha_witness: witness_alpha(moments).ok(),
            contraction_factor_s: 1.0 - alpha * rs,
            contraction_factor_d: 1.0 - alpha * rd,
        }
    }

    /// Both gaps strictly positive.
    pub fn is_contracting(&self) -> bool {
        self.rho_d > 0.0 && self.rho_s > 0.0
    }
}

/// Reports on `n` evenly spaced step-sizes in `[lo, hi]`.
pub fn scan_alpha<T: Scalar>(moments: &Moments<T>, lo: f64, hi: f64, n: usize) -> alloc::vec::Vec<SpectralReport> {
    if n == 0 {
        return alloc::vec::Vec::new();
    }
    if n == 1 {
        return alloc::vec![SpectralReport::new(moments, lo)];
    }
    (0..n)
        .map(|i| {
            let a = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            SpectralReport::new(moments, a)
        })
        .collect()
}

/// Class-level witness `2/B` for distributions supported on PSD matrices
/// of norm at most `B`.
pub fn check_weak_admissibility_psd_class(bound_b: f64) -> Result<f64> {
    if !(bound_b > 0.0) {
        return Err(LsaError::InvalidParameter(format!("B = {bound_b} must be positive")));
    }
    Ok(2.0 / bound_b)
}

/// Member of the bounded positive-definite class on which `alpha` fails:
/// the `±I` family with `ε = α/8`, for which `ρ_s(α) = 4ε − α = −α/2`.
pub fn inadmissibility_witness_pb(alpha: f64, dim: usize) -> Result<ProblemDistribution> {
    if !(alpha > 0.0 && alpha < 4.0) {
        return Err(LsaError::InvalidParameter(format!(
            "alpha = {alpha}: the ±I construction needs 0 < alpha < 4"
        )));
    }
    problems::make_plus_minus_identity(alpha / 8.0, dim)
}

/// Deterministic PSD instance `A = diag(λ, B)` with `b = 0`. As `λ → 0`,
/// `ρ_s` at any fixed step-size tends to zero, so no uniform positive
/// gap exists over the PSD class.
pub fn psd_boundary_instance(lambda: f64, bound_b: f64) -> Result<ProblemDistribution> {
    if !(lambda > 0.0 && lambda <= bound_b) {
        return Err(LsaError::InvalidParameter(format!("need 0 < lambda <= B, got {lambda}, {bound_b}")));
    }
    let a = DMatrix::from_diagonal(&DVector::from_row_slice(&[lambda, bound_b]));
    Ok(problems::make_finite_support(alloc::vec![((DVector::zeros(2), a), 1.0)])?
        .with_label(format!("psd_boundary(lambda={lambda})")))
}
