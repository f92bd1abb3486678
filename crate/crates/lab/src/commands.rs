//! Subcommand implementations, independent of argument parsing.

use std::path::Path;

use lsa_core::bounds::{self, BoundCurve, BoundInputs};
use lsa_core::engine::{self, MseCurve, RunConfig};
use lsa_core::linalg;
use lsa_core::problems::{make_gaussian_noise, Moments};
use lsa_core::spectral::{self, SpectralReport};
use lsa_core::transform::{self, TransformMethod, TransformResult};
use lsa_core::tuner::{self, TunerConfig, TunerTrace};
use lsa_core::td::{TdAlgorithm, TdInstance};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::output::{num, write_text, CsvTable};
use crate::parallel;
use crate::spec::{finite_spec_of, MdpSpec, Problem, ProblemSpec};
use crate::svg::{self, Panel, Series};
use crate::LabError;

/// Samples used when a family has no closed-form moments.
pub const MOMENT_SAMPLES: usize = 100_000;
/// Fraction of the witness step-size used when `--alpha` is omitted.
pub const WITNESS_SAFETY: f64 = 0.99;

/// Parses `a0:a1:n` into `n` evenly spaced values, endpoints included.
pub fn parse_alpha_grid(s: &str) -> Result<(f64, f64, usize), LabError> {
    let bad = || LabError::Spec(format!("alpha grid {s:?}: expected a0:a1:n with 0 < a0 ≤ a1, n ≥ 1"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a0, a1, n] = parts[..] else { return Err(bad()) };
    let (a0, a1, n): (f64, f64, usize) =
        (a0.parse().map_err(|_| bad())?, a1.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?);
    if !(a0 > 0.0 && a1 >= a0 && n >= 1) {
        return Err(bad());
    }
    Ok((a0, a1, n))
}

/// Parses either a comma list `10,100,1000` or `lo:hi:n`, the latter giving
/// `n` log-spaced integers (duplicates dropped).
pub fn parse_t_grid(s: &str) -> Result<Vec<u64>, LabError> {
    let bad = || LabError::Spec(format!("t grid {s:?}: expected t1,t2,... or lo:hi:n"));
    let mut ts: Vec<u64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts[..] else { return Err(bad()) };
        let (lo, hi, n): (u64, u64, usize) =
            (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?);
        if lo == 0 || hi < lo || n == 0 {
            return Err(bad());
        }
        if n == 1 {
            vec![lo]
        } else {
            let (l, h) = ((lo as f64).ln(), (hi as f64).ln());
            (0..n).map(|k| (l + (h - l) * k as f64 / (n - 1) as f64).exp().round() as u64).collect()
        }
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    ts.sort_unstable();
    ts.dedup();
    if ts.is_empty() {
        return Err(bad());
    }
    Ok(ts)
}

pub fn moments(p: &Problem) -> Result<Moments<f64>, LabError> {
    Ok(p.dist.moments_or_estimate(MOMENT_SAMPLES, p.seed)?)
}

fn is_pd(m: &Moments<f64>) -> bool {
    linalg::min_eigenvalue_hermitian(&linalg::hermitian_part(&m.a_mean)) > 0.0
}

/// Identity when `A_P` is already positive definite, else the transform
/// with exact or estimated `P_U` moments.
pub fn transform_of(p: &Problem) -> Result<TransformResult, LabError> {
    Ok(transform::transform_problem(&p.dist, MOMENT_SAMPLES, p.seed)?)
}

/// Witness step-size of `P_U`.
pub fn witness(p: &Problem) -> Result<f64, LabError> {
    let m = moments(p)?;
    if is_pd(&m) {
        return Ok(spectral::witness_alpha(&m)?);
    }
    let tr = transform_of(p)?;
    let tm = tr.transformed_moments.as_ref().expect("transform_problem fills moments");
    Ok(spectral::witness_alpha(tm)?)
}

pub fn default_alpha(p: &Problem, alpha: Option<f64>) -> Result<f64, LabError> {
    match alpha {
        Some(a) => Ok(a),
        None => Ok(WITNESS_SAFETY * witness(p)?),
    }
}

pub fn rho_scan(p: &Problem, grid: (f64, f64, usize)) -> Result<Vec<SpectralReport>, LabError> {
    let m = moments(p)?;
    Ok(spectral::scan_alpha(&m, grid.0, grid.1, grid.2))
}

pub fn rho_table(reports: &[SpectralReport], provenance: String) -> CsvTable {
    let mut t = CsvTable::new(provenance, &["alpha", "rho_d", "rho_s", "contraction_s", "contraction_d"]);
    for r in reports {
        t.push([num(r.alpha), num(r.rho_d), num(r.rho_s), num(r.contraction_factor_s), num(r.contraction_factor_d)]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformReport {
    pub method: String,
    pub kappa_u: f64,
    pub lambda_min_sym: f64,
    pub witness_alpha: Option<f64>,
    pub witness_error: Option<String>,
}

pub fn transform_report(p: &Problem) -> Result<TransformReport, LabError> {
    let tr = transform_of(p)?;
    let method = match tr.method {
        TransformMethod::Identity => "identity".to_string(),
        TransformMethod::Eigenvectors => "eigenvectors".to_string(),
        TransformMethod::ScaledSchur { delta, halvings } => format!("scaled_schur(delta={delta}, halvings={halvings})"),
        TransformMethod::Jordan => "jordan".to_string(),
    };
    let w = spectral::witness_alpha(tr.transformed_moments.as_ref().expect("filled"));
    Ok(TransformReport {
        method,
        kappa_u: tr.kappa_u,
        lambda_min_sym: tr.lambda_min_sym,
        witness_alpha: w.as_ref().ok().copied(),
        witness_error: w.err().map(|e| e.to_string()),
    })
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub alpha: Option<f64>,
    pub horizon: usize,
    pub reps: usize,
    pub seed: u64,
    pub stride: usize,
}

pub fn simulate(p: &Problem, o: &SimulateOptions) -> Result<(f64, MseCurve), LabError> {
    let alpha = default_alpha(p, o.alpha)?;
    let cfg = RunConfig::new(alpha, o.horizon, p.dist.dim())
        .theta_0(p.theta_0.clone())
        .stride(o.stride.min(o.horizon))
        .replications(o.reps)
        .seed(o.seed);
    let target = engine::target_of(&p.dist, p.seed)?;
    Ok((alpha, parallel::run_mse(&p.dist, &cfg, &target)?))
}

pub fn mse_table(curve: &MseCurve, provenance: String) -> CsvTable {
    let mut t = CsvTable::new(provenance, &["t", "mse", "stderr", "n_diverged"]);
    for k in 0..curve.times.len() {
        t.push([curve.times[k].to_string(), num(curve.mse[k]), num(curve.stderr[k]), curve.n_diverged[k].to_string()]);
    }
    t
}

pub fn bound_inputs(p: &Problem, alpha: f64) -> Result<BoundInputs, LabError> {
    let m = moments(p)?;
    if is_pd(&m) {
        Ok(BoundInputs::from_moments(&m, alpha, p.theta_0.clone())?)
    } else {
        let tr = transform_of(p)?;
        Ok(BoundInputs::from_transform(&m, &tr, alpha, p.theta_0.clone())?)
    }
}

pub fn bound(p: &Problem, alpha: Option<f64>, grid: &[u64]) -> Result<(f64, BoundCurve), LabError> {
    let alpha = default_alpha(p, alpha)?;
    let inputs = bound_inputs(p, alpha)?;
    Ok((alpha, bounds::bound_curve(&inputs, grid)?))
}

pub fn bound_table(c: &BoundCurve, provenance: String) -> CsvTable {
    let mut t = CsvTable::new(provenance, &["t", "lower", "upper", "upper_bias", "upper_variance"]);
    for k in 0..c.times.len() {
        t.push([
            c.times[k].to_string(),
            num(c.lower_total[k]),
            num(c.upper_total[k]),
            num(c.upper_bias[k]),
            num(c.upper_variance[k]),
        ]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceJson {
    pub alpha_max: f64,
    pub final_alpha: f64,
    pub n_halvings: usize,
    pub events: Vec<EventJson>,
    pub final_theta_hat: Vec<f64>,
    pub checks: Vec<CheckJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventJson {
    pub t: u64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckJson {
    pub t: u64,
    pub ratios: Vec<f64>,
    pub unstable: bool,
}

impl From<&TunerTrace> for TraceJson {
    fn from(tr: &TunerTrace) -> Self {
        Self {
            alpha_max: tr.alpha_max,
            final_alpha: tr.final_alpha,
            n_halvings: tr.n_halvings(),
            events: tr.events.iter().map(|e| EventJson { t: e.t, alpha: e.alpha }).collect(),
            final_theta_hat: tr.final_theta_hat.iter().copied().collect(),
            // JSON has no infinity; unbounded ratios are reported as f64::MAX.
            checks: tr
                .checks
                .iter()
                .map(|c| CheckJson {
                    t: c.t,
                    ratios: c.ratios.iter().map(|r| if r.is_finite() { *r } else { f64::MAX }).collect(),
                    unstable: c.unstable,
                })
                .collect(),
        }
    }
}

pub fn tune(p: &Problem, cfg: &TunerConfig) -> Result<TunerTrace, LabError> {
    Ok(tuner::tune(&p.dist, cfg)?)
}

pub fn events_table(tr: &TunerTrace, provenance: String) -> CsvTable {
    let mut t = CsvTable::new(provenance, &["event_index", "t", "alpha"]);
    for (i, e) in tr.events.iter().enumerate() {
        t.push([(i + 1).to_string(), e.t.to_string(), num(e.alpha)]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct TdReport {
    pub algorithm: String,
    pub dim: usize,
    pub theta_star: Option<Vec<f64>>,
    pub value_weights: Option<Vec<f64>>,
    pub hurwitz: bool,
    pub spectrum: Vec<(f64, f64)>,
    pub witness_alpha: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn td_instance(
    mdp: &MdpSpec,
    seed: u64,
    algo: TdAlgorithm,
    eta: f64,
) -> Result<(TdReport, ProblemSpec, TdInstance), LabError> {
    let inst = mdp.instance(seed, Some(algo), Some(eta))?;
    let spec = finite_spec_of(&inst, mdp.reward_noise_sd, seed);
    let problem = Problem { dist: inst.problem.clone(), seed, theta_0: DVector::zeros(inst.dim()) };
    let report = TdReport {
        algorithm: algo.name().into(),
        dim: inst.dim(),
        theta_star: inst.theta_star().map(|v| v.iter().copied().collect()),
        value_weights: inst.value_weights().map(|v| v.iter().copied().collect()),
        hurwitz: inst.hurwitz,
        spectrum: inst.spectrum.iter().map(|z| (z.re, z.im)).collect(),
        witness_alpha: if inst.hurwitz { witness(&problem).ok() } else { None },
        warnings: inst.warnings(),
    };
    Ok((report, spec, inst))
}

/// The experiment family `A_P = [[1, −10], [10, 1]]`, `θ* = (1, 1)`,
/// `σ_b = 0`.
pub fn fig1_mean() -> (DMatrix<f64>, DVector<f64>) {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, -10.0, 10.0, 1.0]);
    let b = &a * DVector::from_element(2, 1.0);
    (a, b)
}

pub const FIG1_SIGMAS: [f64; 5] = [0.0, 2.0, 5.0, 10.0, 20.0];

/// `λ_min(A_P + A_Pᵀ)/(‖A_P‖² + σ_A²)` for the experiment family.
pub fn fig1_hand_alpha(sigma_a: f64) -> f64 {
    2.0 / (101.0 + sigma_a * sigma_a)
}

#[derive(Debug, Clone)]
pub struct Fig1Options {
    pub n_seeds: usize,
    pub horizon: usize,
    pub reps: usize,
    pub seed: u64,
    pub alpha_max: f64,
    pub k: usize,
    pub epoch: usize,
    pub c: f64,
    pub stride: usize,
}

impl Default for Fig1Options {
    fn default() -> Self {
        Self { n_seeds: 10, horizon: 50_000, reps: 100, seed: 0, alpha_max: 1.0, k: 2, epoch: 5, c: 1.025, stride: 25 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Row {
    pub sigma_a: f64,
    pub tuned_alphas: Vec<Option<f64>>,
    pub tuned_alpha_median: f64,
    pub tuned_alpha_iqr: f64,
    pub hand_alpha: f64,
    pub n_aborted: usize,
    pub n_diverged: usize,
    pub aborts: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Summary {
    pub rows: Vec<Fig1Row>,
    pub times: Vec<u64>,
    /// One MSE curve per row, empty when every tuning run aborted.
    pub mse: Vec<Vec<f64>>,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fig1(o: &Fig1Options) -> Result<Fig1Summary, LabError> {
    let (a, b) = fig1_mean();
    let theta_star = DVector::from_element(2, 1.0);
    let mut rows = Vec::new();
    let mut mse = Vec::new();
    let mut times = Vec::new();
    for &sigma in &FIG1_SIGMAS {
        let dist = make_gaussian_noise(a.clone(), b.clone(), sigma, 0.0)?;
        let seeds: Vec<u64> = (0..o.n_seeds as u64).map(|i| o.seed.wrapping_add(i)).collect();
        let traces = parallel::map(&seeds, |&s| {
            let cfg = TunerConfig::new(o.alpha_max, o.horizon, 2).window(o.k, o.epoch).threshold(o.c).seed(s);
            tuner::tune(&dist, &cfg)
        })?;
        let tuned: Vec<Option<f64>> = traces.iter().map(|t| t.as_ref().ok().map(|t| t.final_alpha)).collect();
        let aborts: Vec<String> = traces.iter().filter_map(|t| t.as_ref().err().map(|e| e.to_string())).collect();
        let mut ok: Vec<f64> = tuned.iter().flatten().copied().collect();
        ok.sort_by(f64::total_cmp);
        let median = quantile(&ok, 0.5);
        let iqr = quantile(&ok, 0.75) - quantile(&ok, 0.25);
        let (curve, n_div) = if median.is_finite() {
            let cfg = RunConfig::new(median, o.horizon, 2).stride(o.stride).replications(o.reps).seed(o.seed);
            let c = parallel::run_mse(&dist, &cfg, &theta_star)?;
            times = c.times.clone();
            let n = c.total_diverged();
            (c.mse, n)
        } else {
            (Vec::new(), 0)
        };
        mse.push(curve);
        rows.push(Fig1Row {
            sigma_a: sigma,
            tuned_alphas: tuned,
            tuned_alpha_median: median,
            tuned_alpha_iqr: iqr,
            hand_alpha: fig1_hand_alpha(sigma),
            n_aborted: aborts.len(),
            n_diverged: n_div,
            aborts,
        });
    }
    Ok(Fig1Summary { rows, times, mse })
}

pub fn fig1_left_table(s: &Fig1Summary, provenance: String) -> CsvTable {
    let mut t = CsvTable::new(
        provenance,
        &["sigma_A", "tuned_alpha_median", "tuned_alpha_iqr", "hand_alpha", "n_aborted", "n_diverged"],
    );
    for r in &s.rows {
        t.push([
            num(r.sigma_a),
            num(r.tuned_alpha_median),
            num(r.tuned_alpha_iqr),
            num(r.hand_alpha),
            r.n_aborted.to_string(),
            r.n_diverged.to_string(),
        ]);
    }
    t
}

pub fn fig1_right_table(s: &Fig1Summary, provenance: String) -> CsvTable {
    let cols: Vec<String> = s.rows.iter().map(|r| format!("mse_sigma_{}", r.sigma_a)).collect();
    let mut header = vec!["t"];
    header.extend(cols.iter().map(String::as_str));
    let mut t = CsvTable::new(provenance, &header);
    for (k, tt) in s.times.iter().enumerate() {
        let mut row = vec![tt.to_string()];
        row.extend(s.mse.iter().map(|c| c.get(k).map_or_else(|| "nan".to_string(), |&v| num(v))));
        t.push(row);
    }
    t
}

pub fn fig1_svg(s: &Fig1Summary) -> String {
    let left = Panel {
        title: "Tuned vs hand-computed step-size".into(),
        x_label: "sigma_A".into(),
        y_label: "alpha".into(),
        log_x: false,
        log_y: true,
        series: vec![
            Series {
                label: "tuned (median)".into(),
                points: s.rows.iter().map(|r| (r.sigma_a, r.tuned_alpha_median)).collect(),
                markers: true,
            },
            Series {
                label: "hand computed".into(),
                points: s.rows.iter().map(|r| (r.sigma_a, r.hand_alpha)).collect(),
                markers: true,
            },
        ],
    };
    let right = Panel {
        title: "MSE at the tuned step-size".into(),
        x_label: "t".into(),
        y_label: "MSE".into(),
        log_x: true,
        log_y: true,
        series: s
            .rows
            .iter()
            .zip(&s.mse)
            .map(|(r, c)| Series {
                label: format!("sigma_A = {}", r.sigma_a),
                points: s.times.iter().zip(c).map(|(&t, &m)| (t as f64, m)).collect(),
                markers: false,
            })
            .collect(),
    };
    svg::render(&[left, right])
}

/// Writes `fig1_left.csv`, `fig1_right.csv`, `fig1.svg` and
/// `fig1_summary.json` into `dir`.
pub fn write_fig1(dir: &Path, s: &Fig1Summary, provenance: String) -> Result<(), LabError> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    fig1_left_table(s, provenance.clone()).write(&dir.join("fig1_left.csv"))?;
    fig1_right_table(s, provenance).write(&dir.join("fig1_right.csv"))?;
    write_text(&dir.join("fig1.svg"), &fig1_svg(s))?;
    let json = serde_json::to_string_pretty(&SummaryJson::from(s)).map_err(|e| LabError::Io(e.to_string()))?;
    write_text(&dir.join("fig1_summary.json"), &json)
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    rows: &'a [Fig1Row],
}

impl<'a> From<&'a Fig1Summary> for SummaryJson<'a> {
    fn from(s: &'a Fig1Summary) -> Self {
        Self { rows: &s.rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_alpha_grid("0.1:0.5:5").unwrap(), (0.1, 0.5, 5));
        assert!(parse_alpha_grid("0.5:0.1:5").is_err());
        assert!(parse_alpha_grid("0.1:0.5").is_err());
        assert_eq!(parse_t_grid("10,100,1000").unwrap(), vec![10, 100, 1000]);
        assert_eq!(parse_t_grid("1:1000:4").unwrap(), vec![1, 10, 100, 1000]);
        assert_eq!(parse_t_grid("1:3:10").unwrap(), vec![1, 2, 3]);
        assert!(parse_t_grid("0:10:3").is_err());
        assert!(parse_t_grid("a,b").is_err());
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn hand_alpha_at_zero_noise() {
        assert!((fig1_hand_alpha(0.0) - 2.0 / 101.0).abs() < 1e-15);
        let (a, b) = fig1_mean();
        let m = make_gaussian_noise(a, b, 0.0, 0.0).unwrap();
        let w = spectral::witness_alpha(m.exact_moments().unwrap()).unwrap();
        assert!((w - fig1_hand_alpha(0.0)).abs() < 1e-12);
    }
}
