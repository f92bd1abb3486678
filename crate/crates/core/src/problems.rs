//! Data distributions `P = (P^V, P^M)` over pairs `(b_t, A_t)`, their
//! moments, and the built-in families used throughout the crate.

use alloc::{format, string::String, sync::Arc, vec::Vec};
use core::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, Scalar};
use crate::{LsaError, Result};

/// Random stream handed to samplers. One `(seed, stream)` pair identifies
/// a reproducible, independent sequence.
pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// First and second moments of a data distribution, plus the noise
/// bounds that enter the error analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T: Scalar> {
    /// `A_P = E[A_t]`.
    pub a_mean: DMatrix<T>,
    /// `b_P = E[b_t]`.
    pub b_mean: DVector<T>,
    /// `C_P = E[A_t* A_t]`.
    pub c: DMatrix<T>,
    /// Bound on `E‖A_t − A_P‖²` (spectral norm).
    pub sigma_a_sq: f64,
    /// Bound on `E‖b_t − b_P‖²`.
    pub sigma_b_sq: f64,
    /// `A_P⁻¹ b_P`, absent when `A_P` is past the singularity cliff.
    pub theta_star: Option<DVector<T>>,
}

impl<T: Scalar> Moments<T> {
    /// Assembles moments and solves for the fixed point.
    pub fn new(
        a_mean: DMatrix<T>,
        b_mean: DVector<T>,
        c: DMatrix<T>,
        sigma_a_sq: f64,
        sigma_b_sq: f64,
    ) -> Self {
        let theta_star = linalg::solve_checked(&a_mean, &b_mean).ok();
        Self { a_mean, b_mean, c, sigma_a_sq, sigma_b_sq, theta_star }
    }

    pub fn dim(&self) -> usize {
        self.b_mean.len()
    }

    pub fn theta_star_norm(&self) -> Option<f64> {
        self.theta_star.as_ref().map(linalg::vector_norm)
    }

    /// `σ₁² = σ_A²‖θ*‖² + σ_b²`.
    pub fn sigma1_sq(&self) -> Option<f64> {
        self.theta_star_norm()
            .map(|n| self.sigma_a_sq * n * n + self.sigma_b_sq)
    }

    /// `σ₂² = σ_A²‖θ*‖`.
    pub fn sigma2_sq(&self) -> Option<f64> {
        self.theta_star_norm().map(|n| self.sigma_a_sq * n)
    }

    /// `C_P − A_P* A_P`, which equals `E[M_t* M_t]`.
    pub fn noise_second_moment(&self) -> DMatrix<T> {
        &self.c - self.a_mean.adjoint() * &self.a_mean
    }
}

/// A support point of a finite distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub b: DVector<f64>,
    pub a: DMatrix<f64>,
    pub prob: f64,
    /// Direction of an optional additive Gaussian perturbation of `b`
    /// (used for reward noise in TD instances).
    pub b_noise: Option<DVector<f64>>,
}

impl Atom {
    pub fn new(b: DVector<f64>, a: DMatrix<f64>, prob: f64) -> Self {
        Self { b, a, prob, b_noise: None }
    }
}

/// A user-supplied sampler without closed-form moments.
pub trait DataSource: Send + Sync {
    fn dim(&self) -> usize;
    fn sample_into(&self, rng: &mut StreamRng, b: &mut DVector<f64>, a: &mut DMatrix<f64>);
}

#[derive(Clone)]
enum Family {
    Finite {
        atoms: Vec<Atom>,
        cumulative: Vec<f64>,
        b_noise_sd: f64,
    },
    Gaussian {
        a_mean: DMatrix<f64>,
        b_mean: DVector<f64>,
        entry_sd_a: f64,
        entry_sd_b: f64,
    },
    LowerBound {
        a: DMatrix<f64>,
        sigma_b: f64,
    },
    Custom(Arc<dyn DataSource>),
}

/// An i.i.d. data distribution over `R^d × R^{d×d}`.
///
/// Distributions are immutable; every sampler is derived from an explicit
/// `(seed, stream)` pair, so clones can be sampled concurrently.
#[derive(Clone)]
pub struct ProblemDistribution {
    dim: usize,
    family: Family,
    exact: Option<Moments<f64>>,
    label: String,
}

impl fmt::Debug for ProblemDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDistribution")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("exact_moments", &self.exact.is_some())
            .finish()
    }
}

impl ProblemDistribution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn exact_moments(&self) -> Option<&Moments<f64>> {
        self.exact.as_ref()
    }

    /// Support of a finite-support family.
    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.family {
            Family::Finite { atoms, .. } => Some(atoms),
            _ => None,
        }
    }

    /// Exact moments when known, otherwise an `n_samples` Monte Carlo
    /// estimate.
    pub fn moments_or_estimate(&self, n_samples: usize, seed: u64) -> Result<Moments<f64>> {
        match &self.exact {
            Some(m) => Ok(m.clone()),
            None => estimate_moments(self, n_samples, seed),
        }
    }

    pub fn sampler(&self, seed: u64, stream: u64) -> Sampler<'_> {
        Sampler {
            dist: self,
            rng: stream_rng(seed, stream),
            b: DVector::zeros(self.dim),
            a: DMatrix::zeros(self.dim, self.dim),
        }
    }

    /// Draws one pair into caller-owned buffers.
    pub fn sample_into(&self, rng: &mut StreamRng, b: &mut DVector<f64>, a: &mut DMatrix<f64>) {
        match &self.family {
            Family::Finite { atoms, cumulative, b_noise_sd } => {
                let u: f64 = rng.random();
                let idx = cumulative.partition_point(|&c| c <= u).min(atoms.len() - 1);
                let atom = &atoms[idx];
                a.copy_from(&atom.a);
                b.copy_from(&atom.b);
                if let Some(dir) = &atom.b_noise {
                    let z: f64 = rng.sample(StandardNormal);
                    b.axpy(z * b_noise_sd, dir, 1.0);
                }
            }
            Family::Gaussian { a_mean, b_mean, entry_sd_a, entry_sd_b } => {
                a.copy_from(a_mean);
                if *entry_sd_a > 0.0 {
                    for x in a.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *x += entry_sd_a * z;
                    }
                }
                b.copy_from(b_mean);
                if *entry_sd_b > 0.0 {
                    for x in b.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *x += entry_sd_b * z;
                    }
                }
            }
            Family::LowerBound { a: a_const, sigma_b } => {
                a.copy_from(a_const);
                b.fill(0.0);
                if *sigma_b > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    b[0] = sigma_b * z;
                }
            }
            Family::Custom(src) => src.sample_into(rng, b, a),
        }
    }

    /// Wraps a sampler that has no closed-form moments.
    pub fn from_source(label: impl Into<String>, source: Arc<dyn DataSource>) -> Self {
        Self { dim: source.dim(), family: Family::Custom(source), exact: None, label: label.into() }
    }

    /// `E[A_t* W A_t]` for a Hermitian weight `W`, in closed form. Used to
    /// map second moments through a similarity transform. `None` for
    /// sampler-only distributions.
    pub fn weighted_second_moment<T: Scalar>(&self, w: &DMatrix<T>) -> Option<DMatrix<T>> {
        let lift = |m: &DMatrix<f64>| m.map(|x| T::from_real(x));
        match &self.family {
            Family::Finite { atoms, .. } => {
                let mut acc = DMatrix::<T>::zeros(self.dim, self.dim);
                for atom in atoms {
                    let a = lift(&atom.a);
                    acc += (a.adjoint() * w * &a) * T::from_real(atom.prob);
                }
                Some(acc)
            }
            Family::Gaussian { a_mean, entry_sd_a, .. } => {
                // E[Mᵀ W M]_{ij} = Σ_kl E[M_ki W_kl M_lj] = δ_ij s² tr(W)
                let a = lift(a_mean);
                let mut out = a.adjoint() * w * &a;
                let tr = w.trace() * T::from_real(entry_sd_a * entry_sd_a);
                for i in 0..self.dim {
                    out[(i, i)] += tr;
                }
                Some(out)
            }
            Family::LowerBound { a, .. } => {
                let a = lift(a);
                Some(a.adjoint() * w * &a)
            }
            Family::Custom(_) => None,
        }
    }

    /// `E‖U⁻¹(A_t − A_P)U‖²` in closed form for finite-support and
    /// deterministic-matrix families; `None` where only a bound is known.
    pub fn transformed_sigma_a_sq<T: Scalar>(
        &self,
        u: &DMatrix<T>,
        u_inv: &DMatrix<T>,
    ) -> Option<f64> {
        let lift = |m: &DMatrix<f64>| m.map(|x| T::from_real(x));
        match &self.family {
            Family::Finite { atoms, .. } => {
                let mean = lift(&self.exact.as_ref()?.a_mean);
                let mut acc = 0.0;
                for atom in atoms {
                    let dev = u_inv * (lift(&atom.a) - &mean) * u;
                    let n = linalg::spectral_norm(&dev);
                    acc += atom.prob * n * n;
                }
                Some(acc)
            }
            Family::LowerBound { .. } => Some(0.0),
            Family::Gaussian { entry_sd_a, .. } if *entry_sd_a == 0.0 => Some(0.0),
            _ => None,
        }
    }
}

/// A seeded stream of samples from one distribution.
pub struct Sampler<'a> {
    dist: &'a ProblemDistribution,
    rng: StreamRng,
    b: DVector<f64>,
    a: DMatrix<f64>,
}

impl<'a> Sampler<'a> {
    /// Next `(b_t, A_t)`; the references are valid until the next draw.
    pub fn draw(&mut self) -> (&DVector<f64>, &DMatrix<f64>) {
        self.dist.sample_into(&mut self.rng, &mut self.b, &mut self.a);
        (&self.b, &self.a)
    }

    pub fn rng(&mut self) -> &mut StreamRng {
        &mut self.rng
    }
}

fn finite_moments(atoms: &[Atom], b_noise_sd: f64) -> Moments<f64> {
    let d = atoms[0].b.len();
    let mut a_mean = DMatrix::zeros(d, d);
    let mut b_mean = DVector::zeros(d);
    let mut c = DMatrix::zeros(d, d);
    for atom in atoms {
        a_mean += &atom.a * atom.prob;
        b_mean += &atom.b * atom.prob;
        c += (atom.a.transpose() * &atom.a) * atom.prob;
    }
    let mut sigma_a_sq = 0.0;
    let mut sigma_b_sq = 0.0;
    for atom in atoms {
        let n = linalg::spectral_norm(&(&atom.a - &a_mean));
        sigma_a_sq += atom.prob * n * n;
        sigma_b_sq += atom.prob * (&atom.b - &b_mean).norm_squared();
        if let Some(dir) = &atom.b_noise {
            sigma_b_sq += atom.prob * b_noise_sd * b_noise_sd * dir.norm_squared();
        }
    }
    Moments::new(a_mean, b_mean, c, sigma_a_sq, sigma_b_sq)
}

/// Finite-support distribution drawing `(b, A)` atoms i.i.d. with the given
/// probabilities. Moments are exact weighted sums.
pub fn make_finite_support(
    atoms: Vec<((DVector<f64>, DMatrix<f64>), f64)>,
) -> Result<ProblemDistribution> {
    let atoms = atoms.into_iter().map(|((b, a), p)| Atom::new(b, a, p)).collect();
    make_finite_support_noisy(atoms, 0.0)
}

/// Finite support with an additive `N(0, noise_sd²)` perturbation of `b`
/// along each atom's `b_noise` direction.
pub fn make_finite_support_noisy(atoms: Vec<Atom>, noise_sd: f64) -> Result<ProblemDistribution> {
    let first = atoms
        .first()
        .ok_or_else(|| LsaError::NotADistribution("no atoms".into()))?;
    let d = first.b.len();
    if d == 0 {
        return Err(LsaError::DimensionMismatch("zero-dimensional atom".into()));
    }
    if !(noise_sd >= 0.0) {
        return Err(LsaError::InvalidParameter(format!("noise sd {noise_sd} < 0")));
    }
    let mut total = 0.0;
    for (i, atom) in atoms.iter().enumerate() {
        if atom.b.len() != d || atom.a.shape() != (d, d) {
            return Err(LsaError::DimensionMismatch(format!(
                "atom {i}: b has length {}, A is {:?}, expected {d} and ({d}, {d})",
                atom.b.len(),
                atom.a.shape()
            )));
        }
        if let Some(dir) = &atom.b_noise {
            if dir.len() != d {
                return Err(LsaError::DimensionMismatch(format!("atom {i}: noise direction")));
            }
        }
        if !(atom.prob >= 0.0) || !atom.prob.is_finite() {
            return Err(LsaError::NotADistribution(format!("atom {i} has probability {}", atom.prob)));
        }
        total += atom.prob;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(LsaError::NotADistribution(format!("probabilities sum to {total}")));
    }
    let mut cumulative = Vec::with_capacity(atoms.len());
    let mut run = 0.0;
    for atom in &atoms {
        run += atom.prob;
        cumulative.push(run);
    }
    *cumulative.last_mut().unwrap() = 1.0;
    let exact = finite_moments(&atoms, noise_sd);
    Ok(ProblemDistribution {
        dim: d,
        family: Family::Finite { atoms, cumulative, b_noise_sd: noise_sd },
        exact: Some(exact),
        label: String::from("finite"),
    })
}

const CALIBRATION_SEED: u64 = 0x5eed_ca11_b7a7_e001;
const CALIBRATION_SAMPLES: usize = 20_000;

/// Monte Carlo estimate of `E‖G‖²` (spectral norm) for a `d×d` matrix of
/// i.i.d. standard normals, used to scale Gaussian matrix noise.
pub fn gaussian_spectral_calibration(d: usize) -> f64 {
    if d == 1 {
        return 1.0;
    }
    let mut rng = stream_rng(CALIBRATION_SEED, d as u64);
    let mut g = DMatrix::<f64>::zeros(d, d);
    let mut acc = 0.0;
    for _ in 0..CALIBRATION_SAMPLES {
        for x in g.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let n = linalg::spectral_norm(&g);
        acc += n * n;
    }
    acc / CALIBRATION_SAMPLES as f64
}

/// `A_t = A_P + M_t`, `b_t = b_P + N_t` with independent Gaussian entries,
/// scaled so `E‖M_t‖² ≈ σ_A²` and `E‖N_t‖² = σ_b²`.
pub fn make_gaussian_noise(
    a_mean: DMatrix<f64>,
    b_mean: DVector<f64>,
    sigma_a: f64,
    sigma_b: f64,
) -> Result<ProblemDistribution> {
    let d = a_mean.nrows();
    if a_mean.ncols() != d || b_mean.len() != d || d == 0 {
        return Err(LsaError::DimensionMismatch(format!(
            "A_P is {:?}, b_P has length {}",
            a_mean.shape(),
            b_mean.len()
        )));
    }
    if !(sigma_a >= 0.0) || !(sigma_b >= 0.0) {
        return Err(LsaError::InvalidParameter(format!(
            "noise scales must be nonnegative (sigma_A = {sigma_a}, sigma_b = {sigma_b})"
        )));
    }
    let entry_sd_a = if sigma_a > 0.0 {
        sigma_a / linalg::sqrt(gaussian_spectral_calibration(d))
    } else {
        0.0
    };
    let entry_sd_b = sigma_b / linalg::sqrt(d as f64);
    let mut c = a_mean.transpose() * &a_mean;
    for i in 0..d {
        c[(i, i)] += d as f64 * entry_sd_a * entry_sd_a;
    }
    let exact = Moments::new(a_mean.clone(), b_mean.clone(), c, sigma_a * sigma_a, sigma_b * sigma_b);
    Ok(ProblemDistribution {
        dim: d,
        family: Family::Gaussian { a_mean, b_mean, entry_sd_a, entry_sd_b },
        exact: Some(exact),
        label: String::from("gaussian"),
    })
}

/// The two-dimensional instance with constant `A = diag(λ_min, λ_max)` and
/// `b_t = (N_t, 0)`, `N_t ~ N(0, σ_b²)`; here `θ* = 0`.
pub fn make_lower_bound_instance(
    lambda_min: f64,
    lambda_max: f64,
    sigma_b: f64,
) -> Result<ProblemDistribution> {
    if !(0.0 < lambda_min && lambda_min < lambda_max) {
        return Err(LsaError::InvalidParameter(format!(
            "need 0 < lambda_min < lambda_max, got {lambda_min}, {lambda_max}"
        )));
    }
    if !(sigma_b >= 0.0) {
        return Err(LsaError::InvalidParameter(format!("sigma_b = {sigma_b} < 0")));
    }
    let a = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![lambda_min, lambda_max]));
    let c = &a * &a;
    let exact = Moments::new(a.clone(), DVector::zeros(2), c, 0.0, sigma_b * sigma_b);
    Ok(ProblemDistribution {
        dim: 2,
        family: Family::LowerBound { a, sigma_b },
        exact: Some(exact),
        label: String::from("lower_bound"),
    })
}

/// `A_t ∈ {I, −I}` with `P(A_t = I) = 1/2 + ε` and `b_t = 0`, so
/// `A_P = 2ε·I` and `C_P = I`.
pub fn make_plus_minus_identity(epsilon: f64, dim: usize) -> Result<ProblemDistribution> {
    if !(0.0 < epsilon && epsilon < 0.5) {
        return Err(LsaError::InvalidParameter(format!("epsilon = {epsilon} not in (0, 1/2)")));
    }
    if dim == 0 {
        return Err(LsaError::DimensionMismatch("dim = 0".into()));
    }
    let eye = DMatrix::<f64>::identity(dim, dim);
    let zero = DVector::<f64>::zeros(dim);
    Ok(make_finite_support(alloc::vec![
        ((zero.clone(), eye.clone()), 0.5 + epsilon),
        ((zero, -eye), 0.5 - epsilon),
    ])?
    .with_label(format!("plus_minus_identity(eps={epsilon})")))
}

/// Moment estimate together with the Monte Carlo standard errors of each
/// estimated entry.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub moments: Moments<f64>,
    pub se_a_mean: DMatrix<f64>,
    pub se_b_mean: DVector<f64>,
    pub se_c: DMatrix<f64>,
    pub se_sigma_a_sq: f64,
    pub se_sigma_b_sq: f64,
}

/// Empirical moments from `n_samples` draws (stream 0 of `seed`).
pub fn estimate_moments(p: &ProblemDistribution, n_samples: usize, seed: u64) -> Result<Moments<f64>> {
    estimate_moments_with_errors(p, n_samples, seed).map(|e| e.moments)
}

/// Two passes over the same seeded stream: the first fixes the means, the
/// second measures deviations from them. Variance-type quantities use the
/// `n/(n−1)` correction.
pub fn estimate_moments_with_errors(
    p: &ProblemDistribution,
    n_samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if n_samples < 2 {
        return Err(LsaError::InvalidParameter(format!("n_samples = {n_samples} < 2")));
    }
    let d = p.dim();
    let n = n_samples as f64;
    let mut sum_a = DMatrix::<f64>::zeros(d, d);
    let mut sq_a = DMatrix::<f64>::zeros(d, d);
    let mut sum_b = DVector::<f64>::zeros(d);
    let mut sq_b = DVector::<f64>::zeros(d);
    let mut sum_c = DMatrix::<f64>::zeros(d, d);
    let mut sq_c = DMatrix::<f64>::zeros(d, d);
    let mut ata = DMatrix::<f64>::zeros(d, d);
    {
        let mut s = p.sampler(seed, 0);
        for _ in 0..n_samples {
            let (b, a) = s.draw();
            sum_a += a;
            sq_a += a.component_mul(a);
            sum_b += b;
            sq_b += b.component_mul(b);
            a.tr_mul_to(a, &mut ata);
            sum_c += &ata;
            sq_c += ata.component_mul(&ata);
        }
    }
    let a_mean = &sum_a / n;
    let b_mean = &sum_b / n;
    let c = &sum_c / n;
    let se = |sum: f64, sq: f64| {
        let mean = sum / n;
        let var = ((sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
        linalg::sqrt(var / n)
    };
    let se_a_mean = DMatrix::from_fn(d, d, |i, j| se(sum_a[(i, j)], sq_a[(i, j)]));
    let se_b_mean = DVector::from_fn(d, |i, _| se(sum_b[i], sq_b[i]));
    let se_c = DMatrix::from_fn(d, d, |i, j| se(sum_c[(i, j)], sq_c[(i, j)]));

    let (mut sa, mut sa2, mut sb, mut sb2) = (0.0, 0.0, 0.0, 0.0);
    {
        let mut s = p.sampler(seed, 0);
        let mut dev = DMatrix::<f64>::zeros(d, d);
        for _ in 0..n_samples {
            let (b, a) = s.draw();
            dev.copy_from(a);
            dev -= &a_mean;
            let na = linalg::spectral_norm(&dev);
            let x = na * na;
            sa += x;
            sa2 += x * x;
            let y = (b - &b_mean).norm_squared();
            sb += y;
            sb2 += y * y;
        }
    }
    let corr = n / (n - 1.0);
    let moments = Moments::new(a_mean, b_mean, c, sa / n * corr, sb / n * corr);
    Ok(MomentEstimate {
        moments,
        se_a_mean,
        se_b_mean,
        se_c,
        se_sigma_a_sq: se(sa, sa2) * corr,
        se_sigma_b_sq: se(sb, sb2) * corr,
    })
}
