//! The constant step-size iteration `θ_t = θ_{t−1} + α(b_t − A_t θ_{t−1})`
//! with the running average `θ̂_t = (1/(t+1)) Σ_{i≤t} θ_i`, over seeded
//! replications.

use alloc::{format, vec::Vec};

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::problems::{stream_rng, ProblemDistribution};
use crate::{LsaError, Result};

/// Any `|θ_t(i)|` above this flags the replication as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e150;
pub const DEFAULT_RECORD_STRIDE: usize = 25;
/// Samples used to estimate `θ*` for sampler-only distributions.
pub const THETA_STAR_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub horizon: usize,
    pub theta_0: DVector<f64>,
    pub record_stride: usize,
    pub n_replications: usize,
    pub seed: u64,
}

impl RunConfig {
    /// Zero start, stride 25, one replication, seed 0.
    pub fn new(alpha: f64, horizon: usize, dim: usize) -> Self {
        Self {
            alpha,
            horizon,
            theta_0: DVector::zeros(dim),
            record_stride: DEFAULT_RECORD_STRIDE.min(horizon.max(1)),
            n_replications: 1,
            seed: 0,
        }
    }

    pub fn theta_0(mut self, theta_0: DVector<f64>) -> Self {
        self.theta_0 = theta_0;
        self
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn replications(mut self, n: usize) -> Self {
        self.n_replications = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(LsaError::InvalidParameter(format!("alpha = {} must be positive", self.alpha)));
        }
        if self.horizon == 0 {
            return Err(LsaError::InvalidParameter("horizon must be positive".into()));
        }
        if self.record_stride == 0 || self.record_stride > self.horizon {
            return Err(LsaError::InvalidParameter(format!(
                "record stride {} must lie in 1..={}",
                self.record_stride, self.horizon
            )));
        }
        if self.n_replications == 0 {
            return Err(LsaError::InvalidParameter("need at least one replication".into()));
        }
        if self.theta_0.len() != dim {
            return Err(LsaError::DimensionMismatch(format!(
                "theta_0 has length {}, problem dimension is {dim}",
                self.theta_0.len()
            )));
        }
        Ok(())
    }

    /// Recorded time indices: `stride, 2·stride, …, ≤ horizon`.
    pub fn record_times(&self) -> Vec<u64> {
        (1..=self.horizon / self.record_stride)
            .map(|k| (k * self.record_stride) as u64)
            .collect()
    }
}

/// One replication, recorded at stride points.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub times: Vec<u64>,
    pub theta: Vec<DVector<f64>>,
    pub theta_hat: Vec<DVector<f64>>,
    /// `‖θ̂_t − θ*‖²` at each recorded time, when `θ*` is known.
    pub sq_errors: Option<Vec<f64>>,
    /// First step whose iterate crossed the divergence threshold.
    pub diverged_at: Option<u64>,
}

/// Runs the iteration from `theta_0`, calling `record(t, θ_t, θ̂_t)` every
/// `stride` steps. Returns the divergence time, if any; iteration stops
/// there.
fn iterate<F>(
    p: &ProblemDistribution,
    alpha: f64,
    horizon: usize,
    stride: usize,
    theta_0: &DVector<f64>,
    seed: u64,
    stream: u64,
    mut record: F,
) -> Option<u64>
where
    F: FnMut(u64, &DVector<f64>, &DVector<f64>),
{
    let d = p.dim();
    let mut rng = stream_rng(seed, stream);
    let mut b = DVector::<f64>::zeros(d);
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut theta = theta_0.clone();
    let mut theta_hat = theta_0.clone();
    let mut resid = DVector::<f64>::zeros(d);
    for t in 1..=horizon {
        p.sample_into(&mut rng, &mut b, &mut a);
        resid.copy_from(&b);
        resid.gemv(-1.0, &a, &theta, 1.0);
        theta.axpy(alpha, &resid, 1.0);
        let w = 1.0 / (t as f64 + 1.0);
        theta_hat.zip_apply(&theta, |h, x| *h += (x - *h) * w);
        if theta.iter().any(|x| !(x.abs() <= DIVERGENCE_THRESHOLD)) {
            return Some(t as u64);
        }
        if t % stride == 0 {
            record(t as u64, &theta, &theta_hat);
        }
    }
    None
}

fn resolve_theta_star(p: &ProblemDistribution, seed: u64) -> Result<DVector<f64>> {
    p.moments_or_estimate(THETA_STAR_SAMPLES, seed)?
        .theta_star
        .ok_or_else(|| LsaError::Singular(f64::INFINITY))
}

/// A single replication with full snapshots. `replication` selects the
/// random stream under `cfg.seed`.
pub fn run_single(p: &ProblemDistribution, cfg: &RunConfig, replication: u64) -> Result<RunResult> {
    cfg.validate(p.dim())?;
    let theta_star = p.exact_moments().and_then(|m| m.theta_star.clone());
    let mut times = Vec::new();
    let mut thetas = Vec::new();
    let mut hats = Vec::new();
    let mut errs = Vec::new();
    let diverged_at = iterate(
        p,
        cfg.alpha,
        cfg.horizon,
        cfg.record_stride,
        &cfg.theta_0,
        cfg.seed,
        replication,
        |t, th, hat| {
            times.push(t);
            thetas.push(th.clone());
            hats.push(hat.clone());
            if let Some(ts) = &theta_star {
                errs.push((hat - ts).norm_squared());
            }
        },
    );
    Ok(RunResult {
        times,
        theta: thetas,
        theta_hat: hats,
        sq_errors: theta_star.map(|_| errs),
        diverged_at,
    })
}

/// Squared errors of one replication at every recorded time; entries after
/// divergence are `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationErrors {
    pub sq_errors: Vec<f64>,
    pub diverged_at: Option<u64>,
}

/// The replication kernel behind [`run_mse`], exposed so callers can farm
/// replications out to threads.
pub fn replicate_errors(
    p: &ProblemDistribution,
    cfg: &RunConfig,
    theta_star: &DVector<f64>,
    replication: u64,
) -> ReplicationErrors {
    let n_rec = cfg.horizon / cfg.record_stride;
    let mut sq = Vec::with_capacity(n_rec);
    let diverged_at = iterate(
        p,
        cfg.alpha,
        cfg.horizon,
        cfg.record_stride,
        &cfg.theta_0,
        cfg.seed,
        replication,
        |_, _, hat| sq.push((hat - theta_star).norm_squared()),
    );
    sq.resize(n_rec, f64::INFINITY);
    ReplicationErrors { sq_errors: sq, diverged_at }
}

/// Monte Carlo MSE of the averaged iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct MseCurve {
    pub times: Vec<u64>,
    /// Mean of `‖θ̂_t − θ*‖²` over replications not yet diverged at `t`.
    pub mse: Vec<f64>,
    /// Standard error of that mean.
    pub stderr: Vec<f64>,
    /// Replications diverged at or before `t`.
    pub n_diverged: Vec<usize>,
    pub n_replications: usize,
    /// Divergence times, one per diverged replication, in replication order.
    pub divergence_times: Vec<u64>,
}

impl MseCurve {
    /// Combines replications in index order, so the result does not depend
    /// on which thread produced which replication.
    pub fn from_replications(times: Vec<u64>, reps: &[ReplicationErrors]) -> Self {
        let n_t = times.len();
        let mut mse = Vec::with_capacity(n_t);
        let mut stderr = Vec::with_capacity(n_t);
        let mut n_diverged = Vec::with_capacity(n_t);
        for k in 0..n_t {
            let (mut n, mut sum, mut div) = (0usize, 0.0f64, 0usize);
            for r in reps {
                let x = r.sq_errors[k];
                if x.is_finite() {
                    n += 1;
                    sum += x;
                } else {
                    div += 1;
                }
            }
            let mean = if n > 0 { sum / n as f64 } else { f64::INFINITY };
            let se = if n > 1 {
                let mut ss = 0.0;
                for r in reps {
                    let x = r.sq_errors[k];
                    if x.is_finite() {
                        ss += (x - mean) * (x - mean);
                    }
                }
                linalg::sqrt(ss / (n as f64 - 1.0) / n as f64)
            } else if n == 1 {
                0.0
            } else {
                f64::INFINITY
            };
            mse.push(mean);
            stderr.push(se);
            n_diverged.push(div);
        }
        Self {
            times,
            mse,
            stderr,
            n_diverged,
            n_replications: reps.len(),
            divergence_times: reps.iter().filter_map(|r| r.diverged_at).collect(),
        }
    }

    pub fn total_diverged(&self) -> usize {
        self.divergence_times.len()
    }

    /// Value at an exact recorded time.
    pub fn at(&self, t: u64) -> Option<(f64, f64)> {
        let k = self.times.binary_search(&t).ok()?;
        Some((self.mse[k], self.stderr[k]))
    }

    /// Least-squares slope of `ln mse` against `ln t` over recorded times in
    /// `[t_lo, t_hi]`.
    pub fn log_log_slope(&self, t_lo: u64, t_hi: u64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.mse)
            .filter(|(t, m)| **t >= t_lo && **t <= t_hi && m.is_finite() && **m > 0.0)
            .map(|(t, m)| (linalg::ln(*t as f64), linalg::ln(*m)))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(sxy / sxx)
    }
}

/// Sequential MSE estimate over `cfg.n_replications` replications, using
/// the exact `θ*` when available and an estimate otherwise.
pub fn run_mse(p: &ProblemDistribution, cfg: &RunConfig) -> Result<MseCurve> {
    let theta_star = resolve_theta_star(p, cfg.seed)?;
    run_mse_with_target(p, cfg, &theta_star)
}

pub fn run_mse_with_target(p: &ProblemDistribution, cfg: &RunConfig, theta_star: &DVector<f64>) -> Result<MseCurve> {
    cfg.validate(p.dim())?;
    if theta_star.len() != p.dim() {
        return Err(LsaError::DimensionMismatch("theta_star".into()));
    }
    let reps: Vec<ReplicationErrors> = (0..cfg.n_replications as u64)
        .map(|r| replicate_errors(p, cfg, theta_star, r))
        .collect();
    Ok(MseCurve::from_replications(cfg.record_times(), &reps))
}

/// `θ*` for `p`: exact when known, else estimated under `seed`.
pub fn target_of(p: &ProblemDistribution, seed: u64) -> Result<DVector<f64>> {
    resolve_theta_star(p, seed)
}
