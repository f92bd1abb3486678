//! Argument parsing and dispatch for the `lsa-lab` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use lsa_core::tuner::TunerConfig;

use crate::commands::{self, Fig1Options, SimulateOptions};
use crate::output::{provenance, write_text};
use crate::spec::{parse_algorithm, FamilySpec, Problem, ProblemSpec};
use crate::LabError;

#[derive(Debug, Parser)]
#[command(name = "lsa-lab", version, about = "Constant step-size LSA with iterate averaging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral gaps rho_d, rho_s over a step-size grid.
    Rho {
        #[arg(long)]
        problem: PathBuf,
        /// `a0:a1:n`, endpoints included.
        #[arg(long)]
        alpha_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Similarity transform to a positive definite problem, reported as JSON.
    Transform {
        #[arg(long)]
        problem: PathBuf,
    },
    /// Monte Carlo MSE of the averaged iterate.
    Simulate {
        #[arg(long)]
        problem: PathBuf,
        /// Defaults to 0.99 times the witness step-size.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 25)]
        stride: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upper and lower MSE bounds on a time grid.
    Bound {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        /// `t1,t2,...` or `lo:hi:n` (log-spaced).
        #[arg(long, default_value = "1:100000:51")]
        t_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Step-size tuning by instability detection.
    Tune {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        alpha_max: f64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long = "T", default_value_t = 5)]
        epoch: usize,
        #[arg(long, default_value_t = 1.025)]
        c: f64,
        #[arg(long, default_value_t = 50_000)]
        horizon: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV of halving events.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Full trace as JSON; printed to stdout when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// TD(0)/GTD/GTD2 instance of an MDP spec.
    Td {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, default_value = "td0")]
        algo: String,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Writes the instance as a finite problem spec for the other subcommands.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tuning experiment on the rotating 2-d family: tuned vs hand step-size and MSE curves.
    #[command(name = "repro-fig1")]
    ReproFig1 {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        n_seeds: usize,
        #[arg(long, default_value_t = 50_000)]
        horizon: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<Problem, LabError> {
    let mut spec = ProblemSpec::load(path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.resolve()
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, LabError> {
    serde_json::to_string_pretty(v).map_err(|e| LabError::Io(e.to_string()))
}

fn emit(out: &Option<PathBuf>, table: crate::output::CsvTable) -> Result<(), LabError> {
    match out {
        Some(p) => table.write(p),
        None => table.write_to(std::io::stdout().lock()),
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn run(cli: Cli) -> Result<(), LabError> {
    match cli.command {
        Command::Rho { problem, alpha_grid, out } => {
            let p = load(&problem, None)?;
            let grid = commands::parse_alpha_grid(&alpha_grid)?;
            let prov = provenance("rho", &[("problem", file_name(&problem)), ("alpha-grid", alpha_grid)]);
            emit(&out, commands::rho_table(&commands::rho_scan(&p, grid)?, prov))
        }
        Command::Transform { problem } => {
            let p = load(&problem, None)?;
            println!("{}", json(&commands::transform_report(&p)?)?);
            Ok(())
        }
        Command::Simulate { problem, alpha, horizon, reps, seed, stride, out } => {
            let p = load(&problem, None)?;
            let seed = seed.unwrap_or(p.seed);
            let o = SimulateOptions { alpha, horizon, reps, seed, stride };
            let (alpha, curve) = commands::simulate(&p, &o)?;
            let prov = provenance(
                "simulate",
                &[
                    ("problem", file_name(&problem)),
                    ("alpha", alpha.to_string()),
                    ("horizon", horizon.to_string()),
                    ("reps", reps.to_string()),
                    ("seed", seed.to_string()),
                    ("stride", stride.to_string()),
                ],
            );
            emit(&out, commands::mse_table(&curve, prov))?;
            if curve.total_diverged() == curve.n_replications {
                return Err(LabError::Diverged(curve.n_replications));
            }
            Ok(())
        }
        Command::Bound { problem, alpha, t_grid, out } => {
            let p = load(&problem, None)?;
            let grid = commands::parse_t_grid(&t_grid)?;
            let (alpha, curve) = commands::bound(&p, alpha, &grid)?;
            let prov = provenance(
                "bound",
                &[("problem", file_name(&problem)), ("alpha", alpha.to_string()), ("t-grid", t_grid)],
            );
            emit(&out, commands::bound_table(&curve, prov))
        }
        Command::Tune { problem, alpha_max, k, epoch, c, horizon, seed, out, trace } => {
            let p = load(&problem, None)?;
            let seed = seed.unwrap_or(p.seed);
            let cfg = TunerConfig::new(alpha_max, horizon, p.dist.dim())
                .window(k, epoch)
                .threshold(c)
                .seed(seed)
                .theta_0(p.theta_0.clone());
            let tr = commands::tune(&p, &cfg)?;
            let text = json(&commands::TraceJson::from(&tr))?;
            match &trace {
                Some(path) => write_text(path, &text)?,
                None => println!("{text}"),
            }
            if let Some(path) = &out {
                let prov = provenance(
                    "tune",
                    &[
                        ("problem", file_name(&problem)),
                        ("alpha-max", alpha_max.to_string()),
                        ("k", k.to_string()),
                        ("T", epoch.to_string()),
                        ("c", c.to_string()),
                        ("horizon", horizon.to_string()),
                        ("seed", seed.to_string()),
                    ],
                );
                commands::events_table(&tr, prov).write(path)?;
            }
            Ok(())
        }
        Command::Td { mdp, algo, eta, seed, out } => {
            let spec = ProblemSpec::load(&mdp)?;
            let FamilySpec::TdMdp(m) = &spec.family else {
                return Err(LabError::Spec(format!("{}: expected \"type\": \"td_mdp\"", mdp.display())));
            };
            let seed = seed.unwrap_or(spec.seed);
            let (report, finite, _) = commands::td_instance(m, seed, parse_algorithm(&algo)?, eta)?;
            println!("{}", json(&report)?);
            if let Some(path) = &out {
                write_text(path, &json(&finite)?)?;
            }
            Ok(())
        }
        Command::ReproFig1 { out_dir, n_seeds, horizon, reps, seed } => {
            let o = Fig1Options { n_seeds, horizon, reps, seed, ..Default::default() };
            let s = commands::fig1(&o)?;
            let prov = provenance(
                "repro-fig1",
                &[
                    ("n-seeds", n_seeds.to_string()),
                    ("horizon", horizon.to_string()),
                    ("reps", reps.to_string()),
                    ("seed", seed.to_string()),
                ],
            );
            commands::write_fig1(&out_dir, &s, prov)?;
            let mut err = std::io::stderr().lock();
            for r in &s.rows {
                let _ = writeln!(
                    err,
                    "sigma_A = {:>4}: tuned {:.5} (iqr {:.5}), hand {:.5}, aborted {}, diverged {}",
                    r.sigma_a, r.tuned_alpha_median, r.tuned_alpha_iqr, r.hand_alpha, r.n_aborted, r.n_diverged
                );
            }
            Ok(())
        }
    }
}
