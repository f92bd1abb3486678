//! Finite-time MSE bounds for the averaged iterate: an upper bound with a
//! bias/variance split and a matching-order lower bound.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::linalg::{self, Scalar};
use crate::problems::Moments;
use crate::spectral;
use crate::transform::TransformResult;
use crate::{LsaError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub alpha: f64,
    pub kappa_u: f64,
    pub theta_0: DVector<f64>,
    pub theta_star: DVector<f64>,
    /// Gaps of the (possibly transformed) problem at `alpha`.
    pub rho_d: f64,
    pub rho_s: f64,
    /// `σ_A²‖θ*‖² + σ_b²` of the original problem.
    pub sigma1_sq: f64,
    /// `σ_A²‖θ*‖` of the original problem.
    pub sigma2_sq: f64,
}

impl BoundInputs {
    /// Inputs for a problem that is already positive definite (`U = I`).
    pub fn from_moments(m: &Moments<f64>, alpha: f64, theta_0: DVector<f64>) -> Result<Self> {
        Self::assemble(m, m, 1.0, alpha, theta_0)
    }

    /// Inputs using gaps of the transformed problem and `κ(U)` from `tr`,
    /// with noise levels taken from the original moments `m`.
    pub fn from_transform(
        m: &Moments<f64>,
        tr: &TransformResult,
        alpha: f64,
        theta_0: DVector<f64>,
    ) -> Result<Self> {
        let mu = tr
            .transformed_moments
            .as_ref()
            .ok_or_else(|| LsaError::TransformFailed("transformed moments unavailable".into()))?;
        Self::assemble(m, mu, tr.kappa_u, alpha, theta_0)
    }

    fn assemble<T: Scalar>(
        m: &Moments<f64>,
        gap_moments: &Moments<T>,
        kappa_u: f64,
        alpha: f64,
        theta_0: DVector<f64>,
    ) -> Result<Self> {
        let theta_star = m.theta_star.clone().ok_or(LsaError::Singular(f64::INFINITY))?;
        if theta_0.len() != theta_star.len() {
            return Err(LsaError::DimensionMismatch("theta_0".into()));
        }
        let n = theta_star.norm();
        let inputs = Self {
            alpha,
            kappa_u,
            theta_0,
            theta_star,
            rho_d: spectral::rho_d(gap_moments, alpha),
            rho_s: spectral::rho_s(gap_moments, alpha),
            sigma1_sq: m.sigma_a_sq * n * n + m.sigma_b_sq,
            sigma2_sq: m.sigma_a_sq * n,
        };
        inputs.check()?;
        Ok(inputs)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(LsaError::InvalidParameter("alpha must be positive".into()));
        }
        if !(self.rho_d > 0.0 && self.rho_s > 0.0) {
            return Err(LsaError::OutsideCertifiedRegime { rho_d: self.rho_d, rho_s: self.rho_s });
        }
        Ok(())
    }

    pub fn initial_error_sq(&self) -> f64 {
        (&self.theta_0 - &self.theta_star).norm_squared()
    }

    /// `v² = α²σ₁² + α σ₂² ‖θ_0 − θ*‖`.
    pub fn v_sq(&self) -> f64 {
        let e0 = linalg::sqrt(self.initial_error_sq());
        self.alpha * self.alpha * self.sigma1_sq + self.alpha * self.sigma2_sq * e0
    }

    /// `ν = (1 + 2/(αρ_d)) κ(U)² / (αρ_s)`.
    pub fn nu(&self) -> f64 {
        let a = self.alpha;
        (1.0 + 2.0 / (a * self.rho_d)) * self.kappa_u * self.kappa_u / (a * self.rho_s)
    }

    /// `ν` with the cross-term sum `Σ_k ‖I − αA‖^k` evaluated as the
    /// geometric series `q/(1 − q)`, `q = √(1 − αρ_d)`.
    pub fn nu_cross_sum(&self) -> f64 {
        let a = self.alpha;
        let q = linalg::sqrt((1.0 - a * self.rho_d).max(0.0));
        (1.0 + 2.0 * q / (1.0 - q)) * self.kappa_u * self.kappa_u / (a * self.rho_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBound {
    pub total: f64,
    pub bias: f64,
    pub variance: f64,
}

fn split(nu: f64, inputs: &BoundInputs, t: u64) -> UpperBound {
    let tp1 = t as f64 + 1.0;
    let bias = nu * inputs.initial_error_sq() / (tp1 * tp1);
    let variance = nu * inputs.v_sq() / tp1;
    UpperBound { total: bias + variance, bias, variance }
}

/// `ν {‖θ_0 − θ*‖²/(t+1)² + v²/(t+1)}`.
pub fn upper_bound(inputs: &BoundInputs, t: u64) -> Result<UpperBound> {
    inputs.check()?;
    Ok(split(inputs.nu(), inputs, t))
}

/// Same shape as [`upper_bound`] with [`BoundInputs::nu_cross_sum`] in
/// place of `ν`.
pub fn upper_bound_with_cross_sum(inputs: &BoundInputs, t: u64) -> Result<UpperBound> {
    inputs.check()?;
    Ok(split(inputs.nu_cross_sum(), inputs, t))
}

/// `β_t = 1 − (1 − αρ_s)^t`.
pub fn beta(alpha: f64, rho_s: f64, t: u64) -> f64 {
    1.0 - linalg::powi(1.0 - alpha * rho_s, t)
}

/// `Σ_{s=1}^t β_{t−s} = t − (1 − (1 − αρ_s)^t)/(αρ_s)`.
pub fn sum_beta(alpha: f64, rho_s: f64, t: u64) -> f64 {
    let x = alpha * rho_s;
    t as f64 - (1.0 - linalg::powi(1.0 - x, t)) / x
}

/// `(α²ρ_dρ_s)⁻¹ {β_t‖θ_0 − θ*‖² + v² Σ_{s=1}^t β_{t−s}} / (t+1)²`.
pub fn lower_bound(inputs: &BoundInputs, t: u64) -> Result<f64> {
    inputs.check()?;
    let (a, rs) = (inputs.alpha, inputs.rho_s);
    let tp1 = t as f64 + 1.0;
    let num = beta(a, rs, t) * inputs.initial_error_sq() + inputs.v_sq() * sum_beta(a, rs, t);
    Ok(num / (a * a * inputs.rho_d * rs * tp1 * tp1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub times: Vec<u64>,
    pub upper_total: Vec<f64>,
    pub upper_bias: Vec<f64>,
    pub upper_variance: Vec<f64>,
    pub lower_total: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn bound_curve(inputs: &BoundInputs, times: &[u64]) -> Result<BoundCurve> {
    inputs.check()?;
    let mut c = BoundCurve {
        times: times.to_vec(),
        upper_total: Vec::with_capacity(times.len()),
        upper_bias: Vec::with_capacity(times.len()),
        upper_variance: Vec::with_capacity(times.len()),
        lower_total: Vec::with_capacity(times.len()),
        beta: Vec::with_capacity(times.len()),
    };
    for &t in times {
        let u = upper_bound(inputs, t)?;
        c.upper_total.push(u.total);
        c.upper_bias.push(u.bias);
        c.upper_variance.push(u.variance);
        c.lower_total.push(lower_bound(inputs, t)?);
        c.beta.push(beta(inputs.alpha, inputs.rho_s, t));
    }
    Ok(c)
}
