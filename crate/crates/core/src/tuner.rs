//! Step-size tuning by instability detection: run the averaged iteration,
//! watch the growth of `‖θ̂‖` across epoch boundaries and halve `α` when
//! any ratio exceeds a threshold.

use alloc::{format, vec::Vec};

use nalgebra::{DMatrix, DVector};

use crate::engine::DIVERGENCE_THRESHOLD;
use crate::problems::{stream_rng, ProblemDistribution};
use crate::{LsaError, Result};

/// Halving stops with an error once `α` falls below this.
pub const MIN_ALPHA: f64 = 1e-12;

/// `true` iff some consecutive ratio `norms[i]/norms[i−1]` exceeds `c`.
///
/// A zero norm gives no growth evidence and yields `false`; a non-finite
/// norm is definite divergence and yields `true`.
pub fn is_unstable(norms: &[f64], c_threshold: f64) -> bool {
    if norms.iter().any(|n| !n.is_finite()) {
        return true;
    }
    if norms.iter().any(|&n| n == 0.0) {
        return false;
    }
    norms.windows(2).any(|w| w[1] / w[0] > c_threshold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunerConfig {
    pub alpha_max: f64,
    pub k: usize,
    pub epoch: usize,
    pub c_threshold: f64,
    pub horizon: usize,
    pub seed: u64,
    pub theta_0: DVector<f64>,
}

impl TunerConfig {
    /// `k = 2`, `T = 5`, `c = 1.025`, seed 0, zero start.
    pub fn new(alpha_max: f64, horizon: usize, dim: usize) -> Self {
        Self {
            alpha_max,
            k: 2,
            epoch: 5,
            c_threshold: 1.025,
            horizon,
            seed: 0,
            theta_0: DVector::zeros(dim),
        }
    }

    pub fn window(mut self, k: usize, epoch: usize) -> Self {
        self.k = k;
        self.epoch = epoch;
        self
    }

    pub fn threshold(mut self, c: f64) -> Self {
        self.c_threshold = c;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn theta_0(mut self, theta_0: DVector<f64>) -> Self {
        self.theta_0 = theta_0;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.alpha_max > 0.0) || !self.alpha_max.is_finite() {
            return Err(LsaError::InvalidParameter(format!("alpha_max = {}", self.alpha_max)));
        }
        if !(self.c_threshold > 1.0) {
            return Err(LsaError::InvalidParameter(format!("threshold {} must exceed 1", self.c_threshold)));
        }
        if self.k == 0 || self.epoch == 0 || self.k * self.epoch >= self.horizon {
            return Err(LsaError::InvalidParameter(format!(
                "need k, T > 0 and k·T < horizon (k = {}, T = {}, horizon = {})",
                self.k, self.epoch, self.horizon
            )));
        }
        if self.theta_0.len() != dim {
            return Err(LsaError::DimensionMismatch("theta_0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalvingEvent {
    pub t: u64,
    /// Step-size in force after the halving.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioCheck {
    pub t: u64,
    pub ratios: Vec<f64>,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunerTrace {
    pub alpha_max: f64,
    pub events: Vec<HalvingEvent>,
    pub final_alpha: f64,
    pub final_theta_hat: DVector<f64>,
    pub checks: Vec<RatioCheck>,
}

impl TunerTrace {
    pub fn n_halvings(&self) -> usize {
        self.events.len()
    }
}

fn ratios(norms: &[f64]) -> Vec<f64> {
    norms.windows(2).map(|w| w[1] / w[0]).collect()
}

/// Runs the tuner for `cfg.horizon` steps and reports the `α` in force at
/// the end.
///
/// On a halving the iterate `θ` is kept, while the running average and the
/// epoch window start afresh with the next iterate. If `θ` has crossed the
/// divergence threshold it is reset to `θ_0`, since no finite state remains
/// to continue from.
pub fn tune(p: &ProblemDistribution, cfg: &TunerConfig) -> Result<TunerTrace> {
    let d = p.dim();
    cfg.validate(d)?;
    let (k, period) = (cfg.k, cfg.epoch as u64);
    let mut rng = stream_rng(cfg.seed, 0);
    let mut b = DVector::<f64>::zeros(d);
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut resid = DVector::<f64>::zeros(d);
    let mut theta = cfg.theta_0.clone();
    let mut theta_hat = cfg.theta_0.clone();
    let mut alpha = cfg.alpha_max;
    // Number of iterates in the current average.
    let mut n_avg = 1u64;
    let mut window: Vec<f64> = Vec::with_capacity(k + 2);
    window.push(theta_hat.norm());
    let mut blown = false;
    let mut events = Vec::new();
    let mut checks = Vec::new();

    for t in 1..=cfg.horizon as u64 {
        if !blown {
            p.sample_into(&mut rng, &mut b, &mut a);
            resid.copy_from(&b);
            resid.gemv(-1.0, &a, &theta, 1.0);
            theta.axpy(alpha, &resid, 1.0);
            n_avg += 1;
            let w = 1.0 / n_avg as f64;
            theta_hat.zip_apply(&theta, |h, x| *h += (x - *h) * w);
            blown = theta.iter().any(|x| !(x.abs() <= DIVERGENCE_THRESHOLD));
        }
        if t % period != 0 {
            continue;
        }
        window.push(if blown { f64::INFINITY } else { theta_hat.norm() });
        if window.len() > k + 1 {
            window.remove(0);
        }
        if window.len() < k + 1 || t < k as u64 * period {
            continue;
        }
        let unstable = is_unstable(&window, cfg.c_threshold);
        checks.push(RatioCheck { t, ratios: ratios(&window), unstable });
        if unstable {
            alpha *= 0.5;
            if alpha < MIN_ALPHA {
                return Err(LsaError::NoStableStepSize(alpha));
            }
            events.push(HalvingEvent { t, alpha });
            if blown {
                theta.copy_from(&cfg.theta_0);
                blown = false;
            }
            theta_hat.copy_from(&theta);
            n_avg = 0;
            window.clear();
        }
    }

    Ok(TunerTrace {
        alpha_max: cfg.alpha_max,
        events,
        final_alpha: alpha,
        final_theta_hat: theta_hat,
        checks,
    })
}
