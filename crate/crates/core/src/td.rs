//! Policy evaluation with linear features as an LSA.
//!
//! Transitions `(s, s')` are sampled i.i.d. from a replay distribution:
//! `s` from a state distribution, `s'` from a (possibly behavior)
//! transition row, reweighted by `μ = P(s, s')/P_b(s, s')`.
//! TD(0) uses `A_t = μ φ_s(φ_s − γφ_{s'})ᵀ`, `b_t = μ φ_s r(s, s')`.
//! GTD and GTD2 are stacked into one LSA over `z = (y, θ)` with the
//! two step-sizes tied by the ratio `η`.

use alloc::{format, string::String, vec::Vec};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg;
use crate::problems::{make_finite_support_noisy, stream_rng, Atom, Moments, ProblemDistribution};
use crate::transform::C64;
use crate::{LsaError, Result};

const STOCHASTIC_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Rewards {
    /// `r(s, s') = r(s)`.
    State(DVector<f64>),
    /// `r(s, s')` per transition.
    Transition(DMatrix<f64>),
}

impl Rewards {
    pub fn get(&self, s: usize, s_next: usize) -> f64 {
        match self {
            Rewards::State(r) => r[s],
            Rewards::Transition(r) => r[(s, s_next)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMdp {
    /// Row `s` is `φ(s)ᵀ`.
    pub features: DMatrix<f64>,
    /// Target-policy transition matrix.
    pub transition: DMatrix<f64>,
    pub rewards: Rewards,
    pub gamma: f64,
    /// Distribution of the sampled state `s`.
    pub sampling: DVector<f64>,
    /// Transition rows the data was collected under, when they differ from
    /// the target.
    pub behavior: Option<DMatrix<f64>>,
    /// Standard deviation of additive Gaussian reward noise.
    pub reward_noise_sd: f64,
}

fn check_stochastic(name: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(LsaError::DimensionMismatch(format!("{name} is {:?}, expected ({n}, {n})", m.shape())));
    }
    for (i, row) in m.row_iter().enumerate() {
        if row.iter().any(|&p| !(p >= 0.0)) {
            return Err(LsaError::NotADistribution(format!("{name} row {i} has a negative entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(LsaError::NotADistribution(format!("{name} row {i} sums to {s}")));
        }
    }
    Ok(())
}

impl SyntheticMdp {
    /// On-policy MDP: no behavior transitions, no reward noise.
    pub fn new(
        features: DMatrix<f64>,
        transition: DMatrix<f64>,
        rewards: Rewards,
        gamma: f64,
        sampling: DVector<f64>,
    ) -> Result<Self> {
        let mdp = Self { features, transition, rewards, gamma, sampling, behavior: None, reward_noise_sd: 0.0 };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn with_behavior(mut self, behavior: DMatrix<f64>) -> Result<Self> {
        self.behavior = Some(behavior);
        self.validate()?;
        Ok(self)
    }

    pub fn with_reward_noise(mut self, sd: f64) -> Result<Self> {
        self.reward_noise_sd = sd;
        self.validate()?;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        if n == 0 || self.n_features() == 0 {
            return Err(LsaError::DimensionMismatch("empty feature matrix".into()));
        }
        // γ = 0 is admitted as the regression limit.
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(LsaError::InvalidParameter(format!("gamma = {} not in [0, 1)", self.gamma)));
        }
        check_stochastic("transition", &self.transition, n)?;
        if let Some(b) = &self.behavior {
            check_stochastic("behavior", b, n)?;
            for s in 0..n {
                for t in 0..n {
                    if self.transition[(s, t)] > 0.0 && b[(s, t)] == 0.0 {
                        return Err(LsaError::NotADistribution(format!(
                            "behavior never takes ({s}, {t}) but the target does"
                        )));
                    }
                }
            }
        }
        if self.sampling.len() != n {
            return Err(LsaError::DimensionMismatch("sampling distribution length".into()));
        }
        let total: f64 = self.sampling.iter().sum();
        if self.sampling.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(LsaError::NotADistribution(format!("sampling distribution sums to {total}")));
        }
        match &self.rewards {
            Rewards::State(r) if r.len() != n => return Err(LsaError::DimensionMismatch("reward vector".into())),
            Rewards::Transition(r) if r.shape() != (n, n) => {
                return Err(LsaError::DimensionMismatch("reward matrix".into()))
            }
            _ => {}
        }
        if !(self.reward_noise_sd >= 0.0) {
            return Err(LsaError::InvalidParameter("reward noise sd < 0".into()));
        }
        Ok(())
    }

    pub fn features_full_rank(&self) -> bool {
        if self.n_features() > self.n_states() {
            return false;
        }
        let sv = self.features.clone().svd(false, false).singular_values;
        let max = sv.max();
        max > 0.0 && sv.min() > RANK_TOL * max
    }

    /// Expected one-step reward under the target policy.
    pub fn expected_rewards(&self) -> DVector<f64> {
        let n = self.n_states();
        DVector::from_fn(n, |s, _| (0..n).map(|t| self.transition[(s, t)] * self.rewards.get(s, t)).sum())
    }

    /// Exact value function `v = (I − γP)⁻¹ r̄`.
    pub fn value_function(&self) -> Result<DVector<f64>> {
        let n = self.n_states();
        let m = DMatrix::<f64>::identity(n, n) - &self.transition * self.gamma;
        linalg::solve_checked(&m, &self.expected_rewards())
    }

    pub fn phi(&self, s: usize) -> DVector<f64> {
        self.features.row(s).transpose()
    }

    /// `(s, s', probability, μ)` for every transition with positive
    /// sampling probability.
    fn transitions(&self) -> Vec<(usize, usize, f64, f64)> {
        let n = self.n_states();
        let data = self.behavior.as_ref().unwrap_or(&self.transition);
        let mut out = Vec::new();
        for s in 0..n {
            for t in 0..n {
                let p = self.sampling[s] * data[(s, t)];
                if p > 0.0 {
                    let mu = if self.behavior.is_some() { self.transition[(s, t)] / data[(s, t)] } else { 1.0 };
                    out.push((s, t, p, mu));
                }
            }
        }
        out
    }
}

/// Stationary distribution of a row-stochastic matrix, from
/// `πᵀ(P − I) = 0`, `Σπ = 1`.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let mut m = p.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let mut pi = linalg::solve_checked(&m, &rhs)?;
    pi.iter_mut().for_each(|x| *x = x.max(0.0));
    let total = pi.sum();
    Ok(pi / total)
}

/// A random on-policy MDP: transition rows and rewards uniform on `[0, 1)`
/// (rows normalized), Gaussian features, replay from the stationary
/// distribution.
pub fn random_mdp(n_states: usize, n_features: usize, gamma: f64, seed: u64) -> Result<SyntheticMdp> {
    if n_states == 0 || n_features == 0 {
        return Err(LsaError::DimensionMismatch("need at least one state and one feature".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut p = DMatrix::<f64>::from_fn(n_states, n_states, |_, _| rng.random::<f64>() + 1e-3);
    for mut row in p.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    let features = DMatrix::<f64>::from_fn(n_states, n_features, |_, _| rng.sample(StandardNormal));
    let rewards = DVector::<f64>::from_fn(n_states, |_, _| rng.random::<f64>());
    let sampling = stationary_distribution(&p)?;
    SyntheticMdp::new(features, p, Rewards::State(rewards), gamma, sampling)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdAlgorithm {
    Td0,
    Gtd,
    Gtd2,
}

impl TdAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            TdAlgorithm::Td0 => "td0",
            TdAlgorithm::Gtd => "gtd",
            TdAlgorithm::Gtd2 => "gtd2",
        }
    }
}

#[derive(Clone)]
pub struct TdInstance {
    pub algorithm: TdAlgorithm,
    pub problem: ProblemDistribution,
    pub moments: Moments<f64>,
    /// Eigenvalues of the mean matrix `A_P`.
    pub spectrum: Vec<C64>,
    pub hurwitz: bool,
    pub features_full_rank: bool,
}

impl TdInstance {
    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn theta_star(&self) -> Option<&DVector<f64>> {
        self.moments.theta_star.as_ref()
    }

    /// The value-weight block of `θ*` (all of it for TD(0), the trailing
    /// `d` entries of the stacked solution otherwise).
    pub fn value_weights(&self) -> Option<DVector<f64>> {
        let z = self.theta_star()?;
        let d = match self.algorithm {
            TdAlgorithm::Td0 => z.len(),
            _ => z.len() / 2,
        };
        Some(z.rows(z.len() - d, d).into_owned())
    }

    /// Description of any flagged condition.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !self.hurwitz {
            w.push(format!("mean matrix is not Hurwitz, spectrum {:?}", self.spectrum));
        }
        if !self.features_full_rank {
            w.push(String::from("feature matrix is not full column rank"));
        }
        w
    }
}

fn finish(algorithm: TdAlgorithm, mdp: &SyntheticMdp, atoms: Vec<Atom>) -> Result<TdInstance> {
    let problem = make_finite_support_noisy(atoms, mdp.reward_noise_sd)?.with_label(algorithm.name());
    let moments = problem.exact_moments().cloned().expect("finite support has exact moments");
    let spectrum = linalg::eigenvalues_general(&moments.a_mean);
    let hurwitz = spectrum.iter().all(|z| z.re > 0.0);
    Ok(TdInstance { algorithm, problem, moments, spectrum, hurwitz, features_full_rank: mdp.features_full_rank() })
}

pub fn td0_instance(mdp: &SyntheticMdp) -> Result<TdInstance> {
    mdp.validate()?;
    let g = mdp.gamma;
    let atoms = mdp
        .transitions()
        .into_iter()
        .map(|(s, t, p, mu)| {
            let phi = mdp.phi(s);
            let diff = &phi - mdp.phi(t) * g;
            let a = &phi * diff.transpose() * mu;
            let b = &phi * (mu * mdp.rewards.get(s, t));
            Atom { b, a, prob: p, b_noise: Some(&phi * mu) }
        })
        .collect();
    finish(TdAlgorithm::Td0, mdp, atoms)
}

/// Stacked GTD (`Q_t = I`) or GTD2 (`Q_t = φφᵀ`) over `z = (y, θ)`:
/// `b̃ = (ημb, 0)`, `Ã = [[ηQ, ημΔ], [−μΔᵀ, 0]]`.
pub fn gtd_instance(mdp: &SyntheticMdp, eta: f64, algorithm: TdAlgorithm) -> Result<TdInstance> {
    mdp.validate()?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(LsaError::InvalidParameter(format!("eta = {eta} must be positive")));
    }
    if algorithm == TdAlgorithm::Td0 {
        return Err(LsaError::InvalidParameter("gtd_instance needs Gtd or Gtd2".into()));
    }
    let d = mdp.n_features();
    let g = mdp.gamma;
    let atoms = mdp
        .transitions()
        .into_iter()
        .map(|(s, t, p, mu)| {
            let phi = mdp.phi(s);
            let delta = &phi * (&phi - mdp.phi(t) * g).transpose();
            let q = match algorithm {
                TdAlgorithm::Gtd2 => &phi * phi.transpose(),
                _ => DMatrix::<f64>::identity(d, d),
            };
            let mut a = DMatrix::<f64>::zeros(2 * d, 2 * d);
            a.view_mut((0, 0), (d, d)).copy_from(&(q * eta));
            a.view_mut((0, d), (d, d)).copy_from(&(&delta * (eta * mu)));
            a.view_mut((d, 0), (d, d)).copy_from(&(delta.transpose() * -mu));
            let mut b = DVector::<f64>::zeros(2 * d);
            b.rows_mut(0, d).copy_from(&(&phi * (eta * mu * mdp.rewards.get(s, t))));
            let mut noise = DVector::<f64>::zeros(2 * d);
            noise.rows_mut(0, d).copy_from(&(&phi * (eta * mu)));
            Atom { b, a, prob: p, b_noise: Some(noise) }
        })
        .collect();
    finish(algorithm, mdp, atoms)
}
