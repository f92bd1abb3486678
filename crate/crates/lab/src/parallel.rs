//! Replications on a rayon pool. Results are merged in replication order,
//! so output does not depend on the thread count.

use lsa_core::engine::{self, MseCurve, ReplicationErrors, RunConfig};
use lsa_core::problems::ProblemDistribution;
use nalgebra::DVector;
use rayon::prelude::*;

use crate::LabError;

pub const THREADS_ENV: &str = "LSA_LAB_THREADS";

/// Thread cap from `LSA_LAB_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

pub fn pool() -> Result<rayon::ThreadPool, LabError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| LabError::Spec(format!("thread pool: {e}")))
}

pub fn run_mse(p: &ProblemDistribution, cfg: &RunConfig, theta_star: &DVector<f64>) -> Result<MseCurve, LabError> {
    cfg.validate(p.dim())?;
    let reps: Vec<ReplicationErrors> = pool()?.install(|| {
        (0..cfg.n_replications as u64)
            .into_par_iter()
            .map(|r| engine::replicate_errors(p, cfg, theta_star, r))
            .collect()
    });
    Ok(MseCurve::from_replications(cfg.record_times(), &reps))
}

/// Parallel map over `items` on the capped pool, in input order.
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>, LabError> {
    Ok(pool()?.install(|| items.par_iter().map(f).collect()))
}
