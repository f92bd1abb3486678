//! JSON problem specifications.
//!
//! Every spec is an object with a `"type"` tag, family fields, an
//! optional `"seed"` (default 0) and an optional `"theta_0"`. Matrices are
//! row-major nested arrays.
//!
//! ```json
//! {"type": "finite", "atoms": [{"b": [1.0], "a": [[1.0]], "prob": 1.0}]}
//! {"type": "gaussian", "a_mean": [[1, -10], [10, 1]], "b_mean": [-9, 11], "sigma_a": 2.0, "sigma_b": 0.0}
//! {"type": "lower_bound", "lambda_min": 1.0, "lambda_max": 2.0, "sigma_b": 1.0}
//! {"type": "td_mdp", "features": [[1, 0], [0, 1]], "transition": [[0.3, 0.7], [0.7, 0.3]],
//!  "rewards": [1.0, -2.0], "gamma": 0.9, "algo": "td0"}
//! {"type": "td_mdp", "random": {"n_states": 5, "n_features": 3}, "gamma": 0.9, "seed": 0}
//! ```
//!
//! For `td_mdp`, `sampling` defaults to the stationary distribution of
//! `transition`, `rewards` may be per state or an `n×n` matrix, `behavior`
//! optionally gives the data-collecting transition matrix, and `algo`
//! selects `td0` (default), `gtd` or `gtd2` with ratio `eta` (default 1).

use std::path::Path;

use lsa_core::problems::{
    make_finite_support_noisy, make_gaussian_noise, make_lower_bound_instance, Atom, ProblemDistribution,
};
use lsa_core::td::{self, Rewards, SyntheticMdp, TdAlgorithm, TdInstance};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::LabError;

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(flatten)]
    pub family: FamilySpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FamilySpec {
    Finite {
        atoms: Vec<AtomSpec>,
        #[serde(default)]
        noise_sd: f64,
    },
    Gaussian {
        a_mean: Matrix,
        b_mean: Vec<f64>,
        sigma_a: f64,
        #[serde(default)]
        sigma_b: f64,
    },
    LowerBound {
        lambda_min: f64,
        lambda_max: f64,
        sigma_b: f64,
    },
    TdMdp(MdpSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub b: Vec<f64>,
    pub a: Matrix,
    pub prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_noise: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardSpec {
    State(Vec<f64>),
    Transition(Matrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMdpSpec {
    pub n_states: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MdpSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomMdpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<RewardSpec>,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<Matrix>,
    #[serde(default)]
    pub reward_noise_sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algo: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

pub fn matrix(rows: &Matrix, what: &str) -> Result<DMatrix<f64>, LabError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(LabError::Spec(format!("{what}: expected a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_row_iterator(n, m, rows.iter().flatten().copied()))
}

pub fn to_rows(m: &DMatrix<f64>) -> Matrix {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn parse_algorithm(name: &str) -> Result<TdAlgorithm, LabError> {
    match name {
        "td0" => Ok(TdAlgorithm::Td0),
        "gtd" => Ok(TdAlgorithm::Gtd),
        "gtd2" => Ok(TdAlgorithm::Gtd2),
        other => Err(LabError::Spec(format!("unknown TD algorithm {other:?} (td0, gtd, gtd2)"))),
    }
}

fn need<'a>(x: &'a Option<Matrix>, what: &str) -> Result<&'a Matrix, LabError> {
    x.as_ref().ok_or_else(|| LabError::Spec(format!("td_mdp needs \"{what}\" or \"random\"")))
}

impl MdpSpec {
    pub fn build(&self, seed: u64) -> Result<SyntheticMdp, LabError> {
        let mut mdp = match &self.random {
            Some(r) => td::random_mdp(r.n_states, r.n_features, self.gamma, seed)?,
            None => {
                let features = matrix(need(&self.features, "features")?, "features")?;
                let transition = matrix(need(&self.transition, "transition")?, "transition")?;
                let rewards = match self.rewards.as_ref() {
                    Some(RewardSpec::State(r)) => Rewards::State(DVector::from_vec(r.clone())),
                    Some(RewardSpec::Transition(r)) => Rewards::Transition(matrix(r, "rewards")?),
                    None => return Err(LabError::Spec("td_mdp needs \"rewards\"".into())),
                };
                let sampling = match &self.sampling {
                    Some(s) => DVector::from_vec(s.clone()),
                    None => td::stationary_distribution(&transition)?,
                };
                SyntheticMdp::new(features, transition, rewards, self.gamma, sampling)?
            }
        };
        if let Some(b) = &self.behavior {
            mdp = mdp.with_behavior(matrix(b, "behavior")?)?;
        }
        if self.reward_noise_sd > 0.0 {
            mdp = mdp.with_reward_noise(self.reward_noise_sd)?;
        }
        Ok(mdp)
    }

    pub fn instance(&self, seed: u64, algo: Option<TdAlgorithm>, eta: Option<f64>) -> Result<TdInstance, LabError> {
        let mdp = self.build(seed)?;
        let algo = match algo {
            Some(a) => a,
            None => parse_algorithm(self.algo.as_deref().unwrap_or("td0"))?,
        };
        let eta = eta.or(self.eta).unwrap_or(1.0);
        Ok(match algo {
            TdAlgorithm::Td0 => td::td0_instance(&mdp)?,
            other => td::gtd_instance(&mdp, eta, other)?,
        })
    }
}

/// A spec resolved into a distribution.
#[derive(Clone)]
pub struct Problem {
    pub dist: ProblemDistribution,
    pub seed: u64,
    pub theta_0: DVector<f64>,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, LabError> {
        serde_json::from_str(text).map_err(|e| LabError::Spec(format!("problem spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<Problem, LabError> {
        let dist = match &self.family {
            FamilySpec::Finite { atoms, noise_sd } => {
                let atoms = atoms
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        Ok(Atom {
                            b: DVector::from_vec(a.b.clone()),
                            a: matrix(&a.a, &format!("atom {i}"))?,
                            prob: a.prob,
                            b_noise: a.b_noise.clone().map(DVector::from_vec),
                        })
                    })
                    .collect::<Result<Vec<_>, LabError>>()?;
                make_finite_support_noisy(atoms, *noise_sd)?
            }
            FamilySpec::Gaussian { a_mean, b_mean, sigma_a, sigma_b } => {
                make_gaussian_noise(matrix(a_mean, "a_mean")?, DVector::from_vec(b_mean.clone()), *sigma_a, *sigma_b)?
            }
            FamilySpec::LowerBound { lambda_min, lambda_max, sigma_b } => {
                make_lower_bound_instance(*lambda_min, *lambda_max, *sigma_b)?
            }
            FamilySpec::TdMdp(m) => m.instance(self.seed, None, None)?.problem,
        };
        let theta_0 = match &self.theta_0 {
            Some(v) if v.len() != dist.dim() => {
                return Err(LabError::Spec(format!("theta_0 has length {}, problem is {}-dimensional", v.len(), dist.dim())))
            }
            Some(v) => DVector::from_vec(v.clone()),
            None => DVector::zeros(dist.dim()),
        };
        Ok(Problem { dist, seed: self.seed, theta_0 })
    }
}

/// The finite-support spec equivalent to a TD instance, so its output can
/// feed the other subcommands.
pub fn finite_spec_of(inst: &TdInstance, noise_sd: f64, seed: u64) -> ProblemSpec {
    let atoms = inst
        .problem
        .atoms()
        .expect("TD instances have finite support")
        .iter()
        .map(|a| AtomSpec {
            b: a.b.iter().copied().collect(),
            a: to_rows(&a.a),
            prob: a.prob,
            b_noise: if noise_sd > 0.0 { a.b_noise.as_ref().map(|v| v.iter().copied().collect()) } else { None },
        })
        .collect();
    ProblemSpec { family: FamilySpec::Finite { atoms, noise_sd }, seed, theta_0: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_family() {
        let specs = [
            r#"{"type": "finite", "atoms": [{"b": [1.0], "a": [[1.0]], "prob": 1.0}]}"#,
            r#"{"type": "gaussian", "a_mean": [[1, -10], [10, 1]], "b_mean": [-9, 11], "sigma_a": 2.0, "seed": 4}"#,
            r#"{"type": "lower_bound", "lambda_min": 1.0, "lambda_max": 2.0, "sigma_b": 1.0, "theta_0": [1, 1]}"#,
            r#"{"type": "td_mdp", "features": [[1, 0], [0, 1]], "transition": [[0.3, 0.7], [0.7, 0.3]],
                "rewards": [1.0, -2.0], "gamma": 0.9}"#,
            r#"{"type": "td_mdp", "random": {"n_states": 5, "n_features": 3}, "gamma": 0.9, "algo": "gtd2", "eta": 0.5}"#,
        ];
        let dims = [1, 2, 2, 2, 6];
        for (s, d) in specs.iter().zip(dims) {
            let p = ProblemSpec::from_json(s).unwrap().resolve().unwrap();
            assert_eq!(p.dist.dim(), d, "{s}");
            assert!(p.dist.exact_moments().is_some());
        }
    }

    #[test]
    fn rejects_malformed_specs() {
        for s in [
            r#"{"type": "nope"}"#,
            r#"{"type": "gaussian", "a_mean": [[1, 2], [3]], "b_mean": [0, 0], "sigma_a": 1}"#,
            r#"{"type": "lower_bound", "lambda_min": 1.0, "lambda_max": 2.0, "sigma_b": 1.0, "theta_0": [1]}"#,
            r#"{"type": "td_mdp", "gamma": 0.9}"#,
            r#"{"type": "finite", "atoms": [{"b": [1.0], "a": [[1.0]], "prob": 0.5}]}"#,
        ] {
            assert!(ProblemSpec::from_json(s).and_then(|p| p.resolve()).is_err(), "{s}");
        }
    }

    #[test]
    fn td_roundtrip_through_finite_spec() {
        let spec = MdpSpec { random: Some(RandomMdpSpec { n_states: 4, n_features: 2 }), gamma: 0.8, ..Default::default() };
        let inst = spec.instance(3, None, None).unwrap();
        let text = serde_json::to_string(&finite_spec_of(&inst, 0.0, 3)).unwrap();
        let back = ProblemSpec::from_json(&text).unwrap().resolve().unwrap();
        let (a, b) = (inst.problem.exact_moments().unwrap(), back.dist.exact_moments().unwrap());
        assert!((&a.a_mean - &b.a_mean).norm() < 1e-14);
        assert!((&a.c - &b.c).norm() < 1e-14);
    }
}
