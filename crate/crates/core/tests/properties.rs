use lsa_core::bounds::{self, BoundInputs};
use lsa_core::engine::{self, RunConfig};
use lsa_core::linalg;
use lsa_core::problems::{make_finite_support, make_gaussian_noise, make_lower_bound_instance};
use lsa_core::spectral;
use lsa_core::transform::{self, eigenvalues_complex, spectrum_distance};
use lsa_core::tuner::{self, TunerConfig};
use lsa_core::ProblemDistribution;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix(d: usize, lo: f64, hi: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(lo..hi, d * d).prop_map(move |v| DMatrix::from_vec(d, d, v))
}

fn vector(d: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0..2.0f64, d).prop_map(DVector::from_vec)
}

fn finite(d: usize) -> impl Strategy<Value = ProblemDistribution> {
    prop::collection::vec((vector(d), matrix(d, -2.0, 2.0), 0.1..1.0f64), 1..5).prop_map(|raw| {
        let total: f64 = raw.iter().map(|x| x.2).sum();
        let n = raw.len();
        let mut acc = 0.0;
        let atoms = raw
            .into_iter()
            .enumerate()
            .map(|(i, (b, a, w))| {
                let p = if i + 1 == n { 1.0 - acc } else { w / total };
                acc += p;
                ((b, a), p)
            })
            .collect();
        make_finite_support(atoms).unwrap()
    })
}

/// Positive definite `A + Aᵀ`: a skew part plus a symmetric positive definite one.
fn pd_mean(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (matrix(d, -3.0, 3.0), matrix(d, -1.0, 1.0)).prop_map(move |(k, g)| {
        let skew = (&k - k.transpose()) * 0.5;
        skew + &g * g.transpose() + DMatrix::identity(d, d) * 0.2
    })
}

fn hurwitz(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (prop::collection::vec(0.1..2.0f64, d), matrix(d, -1.0, 1.0), matrix(d, -1.0, 1.0))
        .prop_filter_map("ill-conditioned similarity", move |(re, upper, s)| {
            let t = DMatrix::from_fn(d, d, |i, j| if i == j { re[i] } else if j > i { 3.0 * upper[(i, j)] } else { 0.0 });
            let s = s + DMatrix::identity(d, d) * 1.5;
            let inv = s.clone().try_inverse()?;
            (linalg::condition_number(&s) < 1e3).then(|| &s * t * inv)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rho_d_dominates_rho_s(p in finite(3), alpha in 0.0..2.0f64) {
        let m = p.exact_moments().unwrap();
        prop_assert!(spectral::rho_d(m, alpha) >= spectral::rho_s(m, alpha) - 1e-10);
    }

    #[test]
    fn second_moment_dominates_mean_square(p in finite(3)) {
        let m = p.exact_moments().unwrap();
        prop_assert!(linalg::min_eigenvalue_hermitian(&m.noise_second_moment()) >= -1e-10);
    }

    #[test]
    fn rho_s_decreasing_in_alpha(p in finite(2)) {
        let m = p.exact_moments().unwrap();
        prop_assume!(linalg::min_eigenvalue_hermitian(&m.c) > 1e-6);
        let scan = spectral::scan_alpha(m, 0.01, 1.0, 30);
        prop_assert!(scan.windows(2).all(|w| w[1].rho_s < w[0].rho_s));
    }

    #[test]
    fn witness_certifies_gaussian_family(a in pd_mean(3), b in vector(3), sa in 0.0..3.0f64) {
        let p = make_gaussian_noise(a, b, sa, 1.0).unwrap();
        let m = p.exact_moments().unwrap();
        let w = spectral::witness_alpha(m).unwrap();
        prop_assert!(spectral::rho_s(m, 0.99 * w) > 0.0);
    }

    #[test]
    fn average_is_batch_mean(alpha in 0.01..0.5f64, seed in 0u64..1000, t0 in vector(2)) {
        let p = make_lower_bound_instance(1.0, 2.0, 1.0).unwrap();
        let cfg = RunConfig::new(alpha, 200, 2).theta_0(t0.clone()).stride(1).seed(seed);
        let run = engine::run_single(&p, &cfg, 0).unwrap();
        let mut sum = t0;
        for (k, th) in run.theta.iter().enumerate() {
            sum += th;
            let batch = &sum / (k as f64 + 2.0);
            let err = (&batch - &run.theta_hat[k]).norm();
            prop_assert!(err <= 1e-10 * batch.norm().max(1e-300));
        }
    }

    #[test]
    fn runs_are_reproducible(seed in 0u64..1000, rep in 0u64..8) {
        let p = make_lower_bound_instance(0.5, 3.0, 2.0).unwrap();
        let cfg = RunConfig::new(0.2, 300, 2).stride(7).seed(seed);
        prop_assert_eq!(engine::run_single(&p, &cfg, rep).unwrap(), engine::run_single(&p, &cfg, rep).unwrap());
    }

    #[test]
    fn beta_in_unit_interval(x in 1e-3..0.9f64, t in 1u64..20) {
        // Past machine epsilon the increment rounds away.
        prop_assume!((1.0 - x).powi(t as i32 + 1) > 1e-12);
        let (b0, b1) = (bounds::beta(1.0, x, t), bounds::beta(1.0, x, t + 1));
        prop_assert!(0.0 < b0 && b0 < 1.0);
        prop_assert!(b1 > b0);
    }

    #[test]
    fn bounds_are_ordered(lmin in 0.2..2.0f64, gap in 0.1..3.0f64, sb in 0.0..3.0f64, frac in 0.05..0.9f64, t0 in vector(2), t in 1u64..100_000) {
        let p = make_lower_bound_instance(lmin, lmin + gap, sb).unwrap();
        let m = p.exact_moments().unwrap();
        let alpha = frac * spectral::witness_alpha(m).unwrap();
        let inputs = BoundInputs::from_moments(m, alpha, t0).unwrap();
        let up = bounds::upper_bound(&inputs, t).unwrap();
        let lo = bounds::lower_bound(&inputs, t).unwrap();
        prop_assert!(up.bias >= 0.0 && up.variance >= 0.0 && lo >= 0.0);
        prop_assert!((up.total - up.bias - up.variance).abs() <= 1e-12 * up.total.max(1e-300));
        prop_assert!(lo <= up.total * (1.0 + 1e-12));
    }

    #[test]
    fn instability_is_any_ratio_above_threshold(norms in prop::collection::vec(1e-3..10.0f64, 2..6), c in 1.001..2.0f64) {
        let expected = norms.windows(2).any(|w| w[1] / w[0] > c);
        prop_assert_eq!(tuner::is_unstable(&norms, c), expected);
        let mut grown = norms.clone();
        *grown.last_mut().unwrap() = f64::INFINITY;
        prop_assert!(tuner::is_unstable(&grown, c));
    }

    #[test]
    fn halvings_are_exact_and_on_boundaries(alpha_max in 0.3..3.0f64, seed in 0u64..100) {
        let p = make_lower_bound_instance(1.0, 2.0, 1.0).unwrap();
        let cfg = TunerConfig::new(alpha_max, 2000, 2).seed(seed);
        let trace = tuner::tune(&p, &cfg).unwrap();
        let mut alpha = alpha_max;
        for e in &trace.events {
            alpha /= 2.0;
            prop_assert_eq!(e.alpha, alpha);
            prop_assert!(e.t % cfg.epoch as u64 == 0 && e.t >= (cfg.k * cfg.epoch) as u64);
        }
        prop_assert_eq!(trace.final_alpha, alpha_max / 2f64.powi(trace.n_halvings() as i32));
        let last = trace.events.last().map_or(0, |e| e.t);
        prop_assert!(trace.checks.iter().filter(|c| c.t > last).all(|c| !c.unstable));
    }

    #[test]
    fn transform_preserves_spectrum(a in hurwitz(3), x in vector(3)) {
        let tr = transform::hurwitz_to_pd(&a).unwrap();
        prop_assert!(tr.lambda_min_sym > 0.0);
        let d = spectrum_distance(&eigenvalues_complex(&tr.lambda), &linalg::eigenvalues_general(&a));
        // Eigenvalues of A itself are only determined to about κ(U)·ε·‖A‖.
        let eig_tol = (100.0 * tr.kappa_u * f64::EPSILON * linalg::spectral_norm(&a)).max(1e-8);
        prop_assert!(d <= eig_tol, "distance {d:e}, tolerance {eig_tol:e}");
        let back = tr.from_transformed(&tr.to_transformed(&x));
        // Round-off in U(U⁻¹x) grows like κ(U)·ε.
        let tol = 1e-10 * (tr.kappa_u / 1e3).max(1.0);
        prop_assert!((back - &x).norm() <= tol * x.norm().max(1.0));
    }
}
