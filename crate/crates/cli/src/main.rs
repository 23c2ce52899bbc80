//! Command-line harness for phase retrieval experiments.
//!
//! Environment overrides: `PHASERET_THREADS` sizes the worker pool,
//! `PHASERET_OUT_DIR` is prepended to relative output paths.

mod plot;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use phaseret::analytics::{
    empirical_process_deviation, kappa_infimum_flat, rho_complexity_flat, stability_bound_shape,
    stability_constant,
};
use phaseret::certificate::{build_certificate, Beta0Mode, CertificateConfig};
use phaseret::ensemble::{sample_matrix, Ensemble, SampleSet};
use phaseret::experiment::{
    cells_to_csv, noise_with_budget, parse_result_file, recompute_cells, run_experiment,
    ExperimentSpec, ProgramKind,
};
use phaseret::phaselift::{solve_noiseless, solve_noisy, SolverConfig};
use phaseret::records::{read_sampleset, write_sampleset, Record};
use phaseret::rng::derive_seed;
use phaseret::signal::{generate, SignalSpec};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "phaseret",
    about = "Phase retrieval toolkit: sample measurements, solve the lifted programs, \
             build dual certificates, and sweep recovery experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a measurement set and write it to a binary file.
    Generate {
        /// Ensemble descriptor: gaussian | rademacher | erasure:P |
        /// discrete:v1,v2,..@p1,p2,..
        #[arg(long)]
        ensemble: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: u64,
        /// Signal descriptor: flat:MU | sparse_flat:MU:K | peaky:IDX |
        /// explicit:v1,v2,..
        #[arg(long, default_value = "flat:0.3")]
        x0: String,
        /// Seed for the signal draw (default derives from --seed).
        #[arg(long)]
        x0_seed: Option<u64>,
        /// l1 noise budget per measurement, ||w||_1 / m.
        #[arg(long, default_value_t = 0.0)]
        noise_l1_over_m: f64,
        #[arg(long)]
        noise_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one of the lifted convex programs on a stored sample set.
    Solve {
        #[arg(long)]
        input: PathBuf,
        /// noiseless (trace minimization) or noisy (l1 misfit).
        #[arg(long, default_value = "noisy")]
        program: String,
        #[arg(long, default_value_t = 5000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1.0)]
        penalty: f64,
        /// Tolerances scale as tol_per_m * m.
        #[arg(long, default_value_t = 1e-7)]
        tol_per_m: f64,
        #[arg(long)]
        verbose: bool,
        /// Also append the solution record to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the dual certificate for a stored sample set and a signal.
    Certify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = 1)]
        x0_seed: u64,
        #[arg(long, default_value_t = 0.01)]
        delta_ct: f64,
        #[arg(long, default_value_t = 0.5)]
        eps_t: f64,
        #[arg(long, default_value_t = 1.0)]
        eps_tperp: f64,
        /// auto | exact | gaussian | mc:SAMPLES
        #[arg(long, default_value = "auto")]
        beta0_mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the kappa infimum over flat difference/sum pairs.
    Kappa {
        #[arg(long)]
        ensemble: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.34")]
        mu_list: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 4000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Measure the empirical stability constant of a signal class.
    Stability {
        #[arg(long)]
        ensemble: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value = "flat:0.3")]
        signal: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Pairs used for the empirical-process deviation estimate.
        #[arg(long, default_value_t = 20)]
        delta_pairs: usize,
    },
    /// Run a sweep described by a key=value config file.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify a result file and export CSV (and optionally an SVG plot).
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

fn out_path(p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match std::env::var_os("PHASERET_OUT_DIR") {
        Some(dir) => PathBuf::from(dir).join(p),
        None => p.to_path_buf(),
    }
}

fn parse_beta0_mode(s: &str, ensemble: &Ensemble, n: usize) -> Result<Beta0Mode> {
    match s {
        "auto" => Ok(CertificateConfig::default_for(ensemble, n).beta0_mode),
        "exact" => Ok(Beta0Mode::ExactEnumeration),
        "gaussian" => Ok(Beta0Mode::GaussianClosedForm),
        other => {
            if let Some(samples) = other.strip_prefix("mc:") {
                let samples = samples
                    .parse()
                    .with_context(|| format!("bad sample count in {other:?}"))?;
                Ok(Beta0Mode::MonteCarlo { samples })
            } else {
                bail!("unknown beta0 mode {other:?} (auto | exact | gaussian | mc:SAMPLES)")
            }
        }
    }
}

fn main() -> Result<()> {
    if let Ok(threads) = std::env::var("PHASERET_THREADS") {
        let threads: usize = threads
            .parse()
            .context("PHASERET_THREADS must be an integer")?;
        phaseret::par::configure_threads(threads);
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Generate {
            ensemble,
            n,
            m,
            seed,
            x0,
            x0_seed,
            noise_l1_over_m,
            noise_seed,
            out,
        } => {
            let ensemble = Ensemble::parse_descriptor(&ensemble)?;
            let spec = SignalSpec::parse_descriptor(&x0, n)?;
            let x0_seed = x0_seed.unwrap_or_else(|| derive_seed(seed, &[100]));
            let noise_seed = noise_seed.unwrap_or_else(|| derive_seed(seed, &[101]));
            let signal = generate(&spec, x0_seed)?;
            let w = noise_with_budget(m, noise_l1_over_m, noise_seed);
            let sample = SampleSet::generate(&ensemble, m, n, seed, &signal, &w)?;
            let path = out_path(&out);
            let file = fs::File::create(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            write_sampleset(std::io::BufWriter::new(file), &sample)?;
            println!(
                "{}",
                Record::new("sampleset")
                    .push("file", &path.display().to_string())
                    .push("ensemble", &sample.ensemble.descriptor())
                    .push("prng", phaseret::rng::PRNG_NAME)
                    .push("seed", seed)
                    .push("m", m)
                    .push("n", n)
                    .push("x0", &spec.descriptor())
                    .push("x0_seed", x0_seed)
                    .push("noise_l1_over_m", noise_l1_over_m)
                    .push("noise_seed", noise_seed)
                    .to_line()
            );
        }
        Command::Solve {
            input,
            program,
            max_iters,
            penalty,
            tol_per_m,
            verbose,
            out,
        } => {
            let program = ProgramKind::parse(&program)?;
            let file = fs::File::open(&input)
                .with_context(|| format!("opening {}", input.display()))?;
            let sample = read_sampleset(std::io::BufReader::new(file))?;
            let cfg = SolverConfig {
                max_iters,
                primal_tol: tol_per_m * sample.m() as f64,
                dual_tol: tol_per_m * sample.m() as f64,
                penalty,
                verbose,
            };
            let solution = match program {
                ProgramKind::Noiseless => solve_noiseless(&sample, &cfg)?,
                ProgramKind::Noisy => solve_noisy(&sample, &cfg)?,
            };
            let x_hat = solution
                .x_hat
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let record = Record::new("solution")
                .push("program", program.name())
                .push("m", sample.m())
                .push("n", sample.n())
                .push("objective", solution.objective)
                .push("iters", solution.iters)
                .push("converged", solution.converged)
                .push("primal_residual", solution.primal_residual)
                .push("dual_residual", solution.dual_residual)
                .push("x_hat", &x_hat);
            println!("{}", record.to_line());
            if let Some(out) = out {
                let path = out_path(&out);
                let mut file = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&path)
                    .with_context(|| format!("opening {}", path.display()))?;
                writeln!(file, "{}", record.to_line())?;
            }
        }
        Command::Certify {
            input,
            x0,
            x0_seed,
            delta_ct,
            eps_t,
            eps_tperp,
            beta0_mode,
            seed,
            out,
        } => {
            let file = fs::File::open(&input)
                .with_context(|| format!("opening {}", input.display()))?;
            let sample = read_sampleset(std::io::BufReader::new(file))?;
            let spec = SignalSpec::parse_descriptor(&x0, sample.n())?;
            let signal = generate(&spec, x0_seed)?;
            let cfg = CertificateConfig {
                delta_ct,
                beta0_mode: parse_beta0_mode(&beta0_mode, &sample.ensemble, sample.n())?,
                eps_t,
                eps_tperp,
                seed,
            };
            let report = build_certificate(&sample, &signal, &cfg)?;
            let record = report.to_record(&sample);
            println!("{}", record.to_line());
            if let Some(out) = out {
                let path = out_path(&out);
                let mut file = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&path)
                    .with_context(|| format!("opening {}", path.display()))?;
                writeln!(file, "{}", record.to_line())?;
            }
        }
        Command::Kappa {
            ensemble,
            n,
            mu_list,
            pairs,
            samples,
            seed,
        } => {
            let ensemble = Ensemble::parse_descriptor(&ensemble)?;
            for mu in mu_list {
                let inf = kappa_infimum_flat(&ensemble, mu, n, pairs, samples, seed)?;
                println!(
                    "{}",
                    Record::new("kappa_infimum")
                        .push("ensemble", &ensemble.descriptor())
                        .push("n", n)
                        .push("mu", mu)
                        .push("effective_mu", inf.effective_mu)
                        .push("min_kappa", inf.min_kappa)
                        .push("std_error", inf.min_std_error)
                        .push("pairs", inf.pairs_used)
                        .push("bound_shape", stability_bound_shape(mu))
                        .to_line()
                );
            }
        }
        Command::Stability {
            ensemble,
            n,
            m,
            signal,
            trials,
            seed,
            delta_pairs,
        } => {
            let ensemble = Ensemble::parse_descriptor(&ensemble)?;
            let spec = SignalSpec::parse_descriptor(&signal, n)?;
            let report = stability_constant(&ensemble, &spec, m, n, trials, seed)?;
            println!(
                "{}",
                Record::new("stability")
                    .push("ensemble", &ensemble.descriptor())
                    .push("signal", &spec.descriptor())
                    .push("n", n)
                    .push("m", m)
                    .push("trials", report.trials)
                    .push("min_ratio", report.min_ratio)
                    .push("mu", report.mu)
                    .push("bound_shape", report.bound_prediction)
                    .push("rho_flat", rho_complexity_flat(n, m))
                    .to_line()
            );
            let a = sample_matrix(&ensemble, m, n, derive_seed(seed, &[0]))?;
            let deviation =
                empirical_process_deviation(&a, &ensemble, report.mu.min(0.9), delta_pairs, 50_000, seed)?;
            println!(
                "{}",
                Record::new("stability_delta")
                    .push("max_abs_gamma_minus_kappa", deviation)
                    .push("pairs", delta_pairs)
                    .push("interpretation", "empirical_lower_bound_on_supremum")
                    .to_line()
            );
        }
        Command::Sweep { spec, out } => {
            let text = fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let spec = ExperimentSpec::parse_config(&text)?;
            let path = out_path(&out);
            let file = fs::File::create(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            let mut writer = std::io::BufWriter::new(file);
            let cells = run_experiment(&spec, &mut writer)?;
            writer.flush()?;
            println!(
                "{}",
                Record::new("sweep_done")
                    .push("file", &path.display().to_string())
                    .push("cells", cells.len())
                    .push("fingerprint", &spec.fingerprint())
                    .to_line()
            );
        }
        Command::Report { input, csv, plot } => {
            let text = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let parsed = parse_result_file(&text)?;
            let rows = recompute_cells(&parsed)?;
            let csv_path = out_path(&csv);
            fs::write(&csv_path, cells_to_csv(&rows))
                .with_context(|| format!("writing {}", csv_path.display()))?;
            println!(
                "{}",
                Record::new("report")
                    .push("csv", &csv_path.display().to_string())
                    .push("cells", rows.len())
                    .to_line()
            );
            if let Some(plot_path) = plot {
                let path = out_path(&plot_path);
                fs::write(&path, plot::success_rate_svg(&rows))
                    .with_context(|| format!("writing {}", path.display()))?;
                println!(
                    "{}",
                    Record::new("report")
                        .push("plot", &path.display().to_string())
                        .to_line()
                );
            }
        }
    }
    Ok(())
}
