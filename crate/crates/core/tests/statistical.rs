use lsa_core::engine::{self, RunConfig};
use lsa_core::linalg;
use lsa_core::problems::{
    estimate_moments_with_errors, make_finite_support, make_gaussian_noise, make_lower_bound_instance,
    make_plus_minus_identity, stream_rng,
};
use lsa_core::spectral;
use lsa_core::ProblemDistribution;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

const Z: f64 = 5.0;

fn rotation(sigma_a: f64) -> ProblemDistribution {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, -3.0, 3.0, 1.0]);
    let b = &a * DVector::from_row_slice(&[1.0, -1.0]);
    make_gaussian_noise(a, b, sigma_a, 0.5).unwrap()
}

fn families() -> Vec<(ProblemDistribution, f64)> {
    let skew = make_finite_support(vec![
        ((DVector::from_row_slice(&[1.0, 0.0]), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 0.5])), 0.3),
        ((DVector::from_row_slice(&[0.0, -1.0]), DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.5])), 0.7),
    ])
    .unwrap();
    vec![
        (rotation(1.5), 0.02),
        (make_lower_bound_instance(1.0, 2.0, 1.0).unwrap(), 0.0),
        (make_plus_minus_identity(0.1, 2).unwrap(), 0.0),
        (skew, 0.0),
    ]
}

fn within(est: f64, exact: f64, se: f64, rel: f64) -> bool {
    (est - exact).abs() <= Z * se + rel * exact.abs() + 1e-12
}

#[test]
fn estimated_moments_match_exact() {
    for (p, rel_sigma_a) in families() {
        let exact = p.exact_moments().unwrap().clone();
        for seed in [1, 2, 3] {
            let e = estimate_moments_with_errors(&p, 1_000_000, seed).unwrap();
            let m = &e.moments;
            for (i, x) in m.a_mean.iter().enumerate() {
                assert!(within(*x, exact.a_mean[i], e.se_a_mean[i], 0.0), "{} A_P[{i}]", p.label());
            }
            for (i, x) in m.b_mean.iter().enumerate() {
                assert!(within(*x, exact.b_mean[i], e.se_b_mean[i], 0.0), "{} b_P[{i}]", p.label());
            }
            for (i, x) in m.c.iter().enumerate() {
                assert!(within(*x, exact.c[i], e.se_c[i], 0.0), "{} C_P[{i}]", p.label());
            }
            assert!(within(m.sigma_b_sq, exact.sigma_b_sq, e.se_sigma_b_sq, 0.0), "{} sigma_b", p.label());
            assert!(
                within(m.sigma_a_sq, exact.sigma_a_sq, e.se_sigma_a_sq, rel_sigma_a),
                "{} sigma_a: {} vs {}",
                p.label(),
                m.sigma_a_sq,
                exact.sigma_a_sq
            );
        }
    }
}

#[test]
fn matrix_noise_has_zero_batch_mean() {
    let n = 100_000;
    for (p, _) in families() {
        let m = p.exact_moments().unwrap().clone();
        let mut s = p.sampler(11, 0);
        let mut sum = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..n {
            sum += s.draw().1 - &m.a_mean;
        }
        let norm = linalg::spectral_norm(&(sum / n as f64));
        let limit = Z * m.sigma_a_sq.sqrt() / (n as f64).sqrt();
        assert!(norm <= limit.max(1e-12), "{}: {norm} > {limit}", p.label());
    }
}

#[test]
fn one_step_contraction_in_expectation() {
    let n = 10_000;
    for (p, _) in families() {
        let m = p.exact_moments().unwrap().clone();
        let Ok(w) = spectral::witness_alpha(&m) else { continue };
        let alpha = 0.5 * w;
        let rho = spectral::rho_s(&m, alpha);
        let mut s = p.sampler(12, 0);
        let mut rng = stream_rng(12, 1);
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = DVector::<f64>::from_fn(2, |_, _| rng.sample(StandardNormal)).normalize();
            let a = s.draw().1;
            let y = (&x - (a * &x) * alpha).norm_squared();
            sum += y;
            sq += y * y;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        assert!(mean <= 1.0 - alpha * rho + Z * se, "{}: {mean} > {}", p.label(), 1.0 - alpha * rho);
    }
}

#[test]
fn last_iterate_error_within_contraction_envelope() {
    let reps = 1000;
    let p = rotation(1.5);
    let m = p.exact_moments().unwrap().clone();
    let theta_star = m.theta_star.clone().unwrap();
    let alpha = 0.5 * spectral::witness_alpha(&m).unwrap();
    let rho = spectral::rho_s(&m, alpha);
    let (s1, s2) = (m.sigma1_sq().unwrap(), m.sigma2_sq().unwrap());
    let e0 = theta_star.norm_squared();
    let cfg = RunConfig::new(alpha, 400, 2).stride(20).seed(13);
    let runs: Vec<_> = (0..reps).map(|r| engine::run_single(&p, &cfg, r).unwrap()).collect();
    for (k, &t) in runs[0].times.iter().enumerate() {
        let errs: Vec<f64> = runs.iter().map(|r| (&r.theta[k] - &theta_star).norm_squared()).collect();
        let mean = errs.iter().sum::<f64>() / reps as f64;
        let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        let envelope = (1.0 - alpha * rho).powi(t as i32) * e0 + alpha * s1 / rho + s2 * e0.sqrt() / rho;
        assert!(mean <= envelope + Z * se, "t = {t}: {mean} > {envelope}");
    }
}

#[test]
fn standard_errors_shrink_with_replications() {
    let p = make_lower_bound_instance(1.0, 2.0, 1.0).unwrap();
    let cfg = RunConfig::new(0.1, 2000, 2).stride(500).seed(14);
    let small = engine::run_mse(&p, &cfg.clone().replications(100)).unwrap();
    let large = engine::run_mse(&p, &cfg.replications(400)).unwrap();
    for (a, b) in small.stderr.iter().zip(&large.stderr) {
        assert!(b < a, "{b} !< {a}");
    }
}
