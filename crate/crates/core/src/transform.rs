//! Similarity transforms `Λ = U⁻¹ A_P U` turning a Hurwitz mean matrix into
//! one whose Hermitian part is positive definite, and the induced
//! transformed distribution `P_U` of `(U⁻¹b, U⁻¹AU)`.

use alloc::{format, vec::Vec};

use nalgebra::{linalg::Schur, Complex, ComplexField, DMatrix, DVector};

use crate::linalg::{self, to_complex, to_complex_vec};
use crate::problems::{Moments, ProblemDistribution, StreamRng};
use crate::{LsaError, Result};

pub type C64 = Complex<f64>;

/// Eigenvector matrices with condition number at or above this are treated
/// as numerically defective.
pub const DIAGONALIZABLE_CONDITION: f64 = 1e8;
pub const MAX_DELTA_HALVINGS: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformMethod {
    /// `A_P + A_Pᵀ` already PD, `U = I`.
    Identity,
    /// `U` is the (unit-column) eigenvector matrix.
    Eigenvectors,
    /// `U = Q·diag(δ, δ², …)` from the complex Schur form `A = Q T Q*`.
    ScaledSchur { delta: f64, halvings: u32 },
    /// `U = V·D` from a supplied Jordan decomposition, `D` built from powers
    /// of `Re λ` per block.
    Jordan,
}

#[derive(Debug, Clone)]
pub struct TransformResult {
    pub u: DMatrix<C64>,
    pub u_inv: DMatrix<C64>,
    /// `U⁻¹ A_P U`.
    pub lambda: DMatrix<C64>,
    /// `‖U‖·‖U⁻¹‖`.
    pub kappa_u: f64,
    /// `λ_min(Λ* + Λ)`; positive for every returned transform.
    pub lambda_min_sym: f64,
    pub method: TransformMethod,
    /// Moments of `P_U`, filled in by [`transform_problem`].
    pub transformed_moments: Option<Moments<C64>>,
}

impl TransformResult {
    fn build(u: DMatrix<C64>, u_inv: DMatrix<C64>, lambda: DMatrix<C64>, method: TransformMethod) -> Self {
        let kappa_u = linalg::spectral_norm(&u) * linalg::spectral_norm(&u_inv);
        let lambda_min_sym = linalg::min_eigenvalue_hermitian(&(&lambda + lambda.adjoint()));
        Self { u, u_inv, lambda, kappa_u, lambda_min_sym, method, transformed_moments: None }
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// `γ = U⁻¹ θ`.
    pub fn to_transformed(&self, theta: &DVector<f64>) -> DVector<C64> {
        &self.u_inv * to_complex_vec(theta)
    }

    /// `θ = U γ`, dropping the (round-off) imaginary part.
    pub fn from_transformed(&self, gamma: &DVector<C64>) -> DVector<f64> {
        (&self.u * gamma).map(|z| z.re)
    }
}

fn eigenvector_matrix(q: &DMatrix<C64>, t: &DMatrix<C64>) -> DMatrix<C64> {
    let d = t.nrows();
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;
    let mut y = DMatrix::<C64>::zeros(d, d);
    for k in 0..d {
        let lk = t[(k, k)];
        y[(k, k)] = Complex::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = Complex::new(0.0, 0.0);
            for l in (j + 1)..=k {
                s += t[(j, l)] * y[(l, k)];
            }
            let mut denom = t[(j, j)] - lk;
            if denom.modulus() < small {
                denom = Complex::new(small, 0.0);
            }
            y[(j, k)] = -s / denom;
        }
    }
    let mut v = q * y;
    for mut col in v.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= Complex::new(n, 0.0);
        }
    }
    v
}

/// Finds `U ∈ GL(d)` with `Λ = U⁻¹ A_P U` and `Λ* + Λ ≻ 0`.
///
/// Order of attempts: the identity when `A_P + A_Pᵀ ≻ 0`; the eigenvector
/// matrix when it is well conditioned; otherwise the complex Schur form
/// with geometric column scaling, halving `δ` until the Hermitian part is
/// positive definite.
pub fn hurwitz_to_pd(a_mean: &DMatrix<f64>) -> Result<TransformResult> {
    let d = a_mean.nrows();
    if d == 0 || a_mean.ncols() != d {
        return Err(LsaError::DimensionMismatch(format!("A_P is {:?}", a_mean.shape())));
    }
    if a_mean.iter().any(|x| !x.is_finite()) {
        return Err(LsaError::InvalidParameter("A_P has non-finite entries".into()));
    }
    let ac = to_complex(a_mean);
    let (q, t) = Schur::new(ac.clone()).unpack();
    let min_re = (0..d).map(|i| t[(i, i)].re).fold(f64::INFINITY, f64::min);
    if !(min_re > 0.0) {
        return Err(LsaError::NotHurwitz(min_re));
    }

    if linalg::min_eigenvalue_hermitian(&(a_mean + a_mean.transpose())) > 0.0 {
        let eye = DMatrix::<C64>::identity(d, d);
        return Ok(TransformResult::build(eye.clone(), eye, ac, TransformMethod::Identity));
    }

    let v = eigenvector_matrix(&q, &t);
    if linalg::condition_number(&v) < DIAGONALIZABLE_CONDITION {
        if let Some(v_inv) = v.clone().try_inverse() {
            let lambda = &v_inv * &ac * &v;
            let tr = TransformResult::build(v, v_inv, lambda, TransformMethod::Eigenvectors);
            if tr.lambda_min_sym > 0.0 {
                return Ok(tr);
            }
        }
    }

    let t_upper = t.upper_triangle();
    let mut delta = 1.0f64;
    for halvings in 0..=MAX_DELTA_HALVINGS {
        let scales: Vec<f64> = (1..=d).map(|i| linalg::powi(delta, i as u64)).collect();
        // Λ_ij = T_ij δ^{j−i}; computed from the ratio directly so tiny δ
        // never underflows the diagonal scaling itself.
        let lambda = DMatrix::from_fn(d, d, |i, j| {
            if j >= i {
                t_upper[(i, j)] * linalg::powi(delta, (j - i) as u64)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        let herm_min = linalg::min_eigenvalue_hermitian(&(&lambda + lambda.adjoint()));
        if herm_min > 0.0 {
            let dmat = DMatrix::from_diagonal(&DVector::from_iterator(
                d,
                scales.iter().map(|&s| Complex::new(s, 0.0)),
            ));
            let dinv = DMatrix::from_diagonal(&DVector::from_iterator(
                d,
                scales.iter().map(|&s| Complex::new(1.0 / s, 0.0)),
            ));
            let u = &q * dmat;
            let u_inv = dinv * q.adjoint();
            return Ok(TransformResult::build(
                u,
                u_inv,
                lambda,
                TransformMethod::ScaledSchur { delta, halvings },
            ));
        }
        delta *= 0.5;
    }
    Err(LsaError::TransformFailed(format!(
        "Hermitian part not positive definite after {MAX_DELTA_HALVINGS} halvings of delta"
    )))
}

/// Builds `J = ⊕ J(λ_i, m_i)` from Jordan blocks given as `(λ, size)`.
pub fn jordan_matrix(blocks: &[(C64, usize)]) -> DMatrix<C64> {
    let d: usize = blocks.iter().map(|b| b.1).sum();
    let mut j = DMatrix::<C64>::zeros(d, d);
    let mut off = 0;
    for &(lam, m) in blocks {
        for i in 0..m {
            j[(off + i, off + i)] = lam;
            if i + 1 < m {
                j[(off + i, off + i + 1)] = Complex::new(1.0, 0.0);
            }
        }
        off += m;
    }
    j
}

/// Transform from an exact Jordan decomposition `A = V J V⁻¹`.
///
/// Each block is rescaled by `D = diag(1, r, r², …)` with `r = Re λ`, so
/// the superdiagonal of `Λ = D⁻¹ J D` becomes `r` and `(Λ* + Λ)/2` is the
/// tridiagonal matrix with `r` on the diagonal and `r/2` beside it.
pub fn jordan_transform(v: &DMatrix<C64>, blocks: &[(C64, usize)]) -> Result<TransformResult> {
    let j = jordan_matrix(blocks);
    let d = j.nrows();
    if v.shape() != (d, d) {
        return Err(LsaError::DimensionMismatch(format!("V is {:?}, blocks give {d}", v.shape())));
    }
    let mut scales = Vec::with_capacity(d);
    for &(lam, m) in blocks {
        if !(lam.re > 0.0) {
            return Err(LsaError::NotHurwitz(lam.re));
        }
        for i in 0..m {
            scales.push(linalg::powi(lam.re, i as u64));
        }
    }
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or(LsaError::Singular(f64::INFINITY))?;
    let dmat = DMatrix::from_diagonal(&DVector::from_iterator(d, scales.iter().map(|&s| Complex::new(s, 0.0))));
    let dinv = DMatrix::from_diagonal(&DVector::from_iterator(d, scales.iter().map(|&s| Complex::new(1.0 / s, 0.0))));
    let lambda = &dinv * &j * &dmat;
    let tr = TransformResult::build(v * dmat, dinv * v_inv, lambda, TransformMethod::Jordan);
    if tr.lambda_min_sym > 0.0 {
        Ok(tr)
    } else {
        Err(LsaError::TransformFailed(format!("lambda_min(Λ*+Λ) = {:e}", tr.lambda_min_sym)))
    }
}

/// Eigenvalues of a complex matrix (diagonal of its Schur form).
pub fn eigenvalues_complex(m: &DMatrix<C64>) -> Vec<C64> {
    let t = Schur::new(m.clone()).unpack().1;
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Largest distance between two spectra under greedy nearest matching.
pub fn spectrum_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = alloc::vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let mut best = (f64::INFINITY, 0);
        for (k, y) in b.iter().enumerate() {
            if !used[k] {
                let dist = (x - y).modulus();
                if dist < best.0 {
                    best = (dist, k);
                }
            }
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst
}

/// The distribution of `(U⁻¹b_t, U⁻¹A_tU)` for `(b_t, A_t) ~ P`.
#[derive(Debug, Clone)]
pub struct TransformedDistribution {
    pub source: ProblemDistribution,
    pub u: DMatrix<C64>,
    pub u_inv: DMatrix<C64>,
    exact: Option<Moments<C64>>,
    /// `‖U⁻¹‖·σ₂²(P)`, the cross-term bound carried to `P_U`.
    pub cross_term_bound: Option<f64>,
}

impl TransformedDistribution {
    pub fn exact_moments(&self) -> Option<&Moments<C64>> {
        self.exact.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    /// Draws one transformed pair.
    pub fn sample_into(
        &self,
        rng: &mut StreamRng,
        b: &mut DVector<f64>,
        a: &mut DMatrix<f64>,
        b_out: &mut DVector<C64>,
        a_out: &mut DMatrix<C64>,
    ) {
        self.source.sample_into(rng, b, a);
        b_out.copy_from(&(&self.u_inv * to_complex_vec(b)));
        a_out.copy_from(&(&self.u_inv * to_complex(a) * &self.u));
    }

    /// Exact moments when available, otherwise empirical ones from the
    /// transformed sample stream.
    pub fn moments_or_estimate(&self, n_samples: usize, seed: u64) -> Result<Moments<C64>> {
        if let Some(m) = &self.exact {
            return Ok(m.clone());
        }
        if n_samples < 2 {
            return Err(LsaError::InvalidParameter(format!("n_samples = {n_samples} < 2")));
        }
        let d = self.dim();
        let n = n_samples as f64;
        let mut rng = crate::problems::stream_rng(seed, 0);
        let (mut b, mut a) = (DVector::zeros(d), DMatrix::zeros(d, d));
        let (mut bu, mut au) = (DVector::<C64>::zeros(d), DMatrix::<C64>::zeros(d, d));
        let mut sum_a = DMatrix::<C64>::zeros(d, d);
        let mut sum_b = DVector::<C64>::zeros(d);
        let mut sum_c = DMatrix::<C64>::zeros(d, d);
        for _ in 0..n_samples {
            self.sample_into(&mut rng, &mut b, &mut a, &mut bu, &mut au);
            sum_a += &au;
            sum_b += &bu;
            sum_c += au.adjoint() * &au;
        }
        let scale = Complex::new(1.0 / n, 0.0);
        let a_mean = sum_a * scale;
        let b_mean = sum_b * scale;
        let c = sum_c * scale;
        let mut rng = crate::problems::stream_rng(seed, 0);
        let (mut sa, mut sb) = (0.0, 0.0);
        for _ in 0..n_samples {
            self.sample_into(&mut rng, &mut b, &mut a, &mut bu, &mut au);
            let na = linalg::spectral_norm(&(&au - &a_mean));
            sa += na * na;
            sb += (&bu - &b_mean).norm_squared();
        }
        let corr = 1.0 / (n - 1.0);
        Ok(Moments::new(a_mean, b_mean, c, sa * corr, sb * corr))
    }
}

/// Maps `P` to `P_U`. Exact source moments are carried over in closed form:
/// `A_{P_U} = U⁻¹A_PU`, `C_{P_U} = U* E[Aᵀ W A] U` with `W = U⁻* U⁻¹`,
/// `σ²_{b,U} = ‖U⁻¹‖²σ_b²`, and `σ²_{A,U}` exact where the family allows,
/// else bounded by `κ(U)²σ_A²`.
pub fn transform_distribution(p: &ProblemDistribution, tr: &TransformResult) -> Result<TransformedDistribution> {
    if tr.dim() != p.dim() {
        return Err(LsaError::DimensionMismatch(format!(
            "transform is {}-dimensional, distribution {}",
            tr.dim(),
            p.dim()
        )));
    }
    let u = tr.u.clone();
    let u_inv = tr.u_inv.clone();
    let inv_norm = linalg::spectral_norm(&u_inv);
    let (exact, cross) = match p.exact_moments() {
        Some(src) => {
            let w = u_inv.adjoint() * &u_inv;
            let exact = p.weighted_second_moment(&w).map(|ew| {
                let a_u = &u_inv * to_complex(&src.a_mean) * &u;
                let b_u = &u_inv * to_complex_vec(&src.b_mean);
                let c_u = u.adjoint() * ew * &u;
                let c_u = (&c_u + c_u.adjoint()) * Complex::new(0.5, 0.0);
                let sigma_a_sq = p
                    .transformed_sigma_a_sq(&u, &u_inv)
                    .unwrap_or(tr.kappa_u * tr.kappa_u * src.sigma_a_sq);
                Moments::new(a_u, b_u, c_u, sigma_a_sq, inv_norm * inv_norm * src.sigma_b_sq)
            });
            (exact, src.sigma2_sq().map(|s| inv_norm * s))
        }
        None => (None, None),
    };
    Ok(TransformedDistribution { source: p.clone(), u, u_inv, exact, cross_term_bound: cross })
}

/// Transform for `P`'s mean matrix together with the moments of `P_U`
/// (exact when possible, else estimated from `n_samples` draws).
pub fn transform_problem(p: &ProblemDistribution, n_samples: usize, seed: u64) -> Result<TransformResult> {
    let a_mean = p.moments_or_estimate(n_samples, seed)?.a_mean;
    let mut tr = hurwitz_to_pd(&a_mean)?;
    let td = transform_distribution(p, &tr)?;
    tr.transformed_moments = Some(td.moments_or_estimate(n_samples, seed)?);
    Ok(tr)
}
