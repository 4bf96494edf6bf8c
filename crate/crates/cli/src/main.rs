use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sparse_pilot::estimators::Estimator;
use sparse_pilot::ofdm_link::{
    experiment_ber_ser, experiment_mse_crb, experiment_recovery, write_ber_ser_csv, write_mse_csv,
    write_recovery_csv, Constellation, PatternSource,
};
use sparse_pilot::pilot_alloc::{
    catalog_difference_set, coherence, equidistant_allocate, greedy_allocate, random_allocate,
    verify_difference_set, PilotPattern,
};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

mod settings;

use settings::{LinkOverrides, MseOverrides, RecoveryOverrides};

/// Environment variable holding the worker count of the trial pool.
const THREADS_ENV: &str = "SPARSE_PILOT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "sparse-pilot", version, about = "Pilot placement and sparse OFDM channel estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a pilot pattern and write it as JSON.
    Allocate {
        #[arg(long)]
        n: usize,
        #[arg(long = "np")]
        n_p: usize,
        #[arg(long, value_enum, default_value_t = Method::Greedy)]
        method: Method,
        /// Seed for `--method random`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Coherence of a pattern file against the lower bound.
    Coherence {
        pattern: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check whether a pattern file is a cyclic difference set.
    VerifyDs {
        pattern: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Link simulation: BER, SER and MSE per estimator and SNR.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "np")]
        n_p: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated SNR grid in dB.
        #[arg(long = "snr", value_delimiter = ',')]
        snr_grid_db: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<Estimator>>,
        #[arg(long)]
        source: Option<PatternSource>,
        /// Pilot pattern JSON; implies `--source file`.
        #[arg(long)]
        pattern_file: Option<PathBuf>,
        #[arg(long)]
        shift_per_frame: Option<bool>,
        #[arg(long)]
        constellation: Option<Constellation>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Channel MSE against the Cramér-Rao bound.
    Mse {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "np")]
        n_p: Option<usize>,
        /// Comma-separated pattern sources, one block of rows each.
        #[arg(long = "source", value_delimiter = ',')]
        sources: Option<Vec<PatternSource>>,
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<Estimator>>,
        #[arg(long)]
        taps: Option<usize>,
        #[arg(long = "snr", value_delimiter = ',')]
        snr_grid_db: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        pattern_file: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Noiseless OMP recovery rate, greedy against random pilots.
    Recovery {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "np")]
        n_p: Option<usize>,
        /// Tap counts: `3`, `1:8` or `1,2,4`.
        #[arg(long = "taps", value_parser = settings::parse_taps)]
        tap_grid: Option<settings::TapGrid>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Greedy,
    DifferenceSet,
    Random,
    Equidistant,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Csv,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn allocate(n: usize, n_p: usize, method: Method, seed: u64) -> sparse_pilot::Result<PilotPattern> {
    match method {
        Method::Greedy => greedy_allocate(n, n_p),
        Method::DifferenceSet => {
            catalog_difference_set(n, n_p).ok_or(sparse_pilot::Error::NoDifferenceSet { n, n_p })
        }
        Method::Random => random_allocate(n, n_p, seed),
        Method::Equidistant => equidistant_allocate(n, n_p),
    }
}

fn write_coherence(pattern: &PilotPattern, format: Format, out: &mut dyn Write) -> io::Result<()> {
    let r = coherence(pattern);
    match format {
        Format::Text => {
            writeln!(out, "n = {}", pattern.n())?;
            writeln!(out, "n_p = {}", pattern.len())?;
            writeln!(out, "mu = {:.6}", r.mu)?;
            writeln!(out, "mu_tilde = {:.6}", r.mu_tilde)?;
            writeln!(out, "bound_mu_tilde_sq = {:.6}", r.bound_mu_tilde_sq)?;
            writeln!(out, "bound_gap = {:.6e}", r.bound_gap())?;
            writeln!(out, "achieves_bound = {}", r.achieves_bound)?;
            writeln!(out, "argmax_r = {}", r.argmax_r)
        }
        Format::Csv => {
            writeln!(out, "n,n_p,mu,mu_tilde,bound_mu_tilde_sq,bound_gap,achieves_bound,argmax_r")?;
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6e},{},{}",
                pattern.n(),
                pattern.len(),
                r.mu,
                r.mu_tilde,
                r.bound_mu_tilde_sq,
                r.bound_gap(),
                r.achieves_bound,
                r.argmax_r
            )
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Allocate { n, n_p, method, seed, output } => {
            let pattern = allocate(n, n_p, method, seed)?;
            let mut out = sink(output.as_deref())?;
            serde_json::to_writer(&mut out, &pattern)?;
            writeln!(out)?;
            out.flush()?;
        }
        Command::Coherence { pattern, format, output } => {
            let p = settings::read_pattern(&pattern)?;
            let mut out = sink(output.as_deref())?;
            write_coherence(&p, format, &mut out)?;
            out.flush()?;
        }
        Command::VerifyDs { pattern, output } => {
            let p = settings::read_pattern(&pattern)?;
            let check = verify_difference_set(&p);
            let mut out = sink(output.as_deref())?;
            writeln!(out, "is_difference_set = {}", check.is_difference_set)?;
            match check.lambda {
                Some(l) => writeln!(out, "lambda = {l}")?,
                None => writeln!(out, "lambda = none")?,
            }
            out.flush()?;
        }
        Command::Simulate {
            config,
            n,
            n_p,
            frames,
            seed,
            snr_grid_db,
            estimators,
            source,
            pattern_file,
            shift_per_frame,
            constellation,
            output,
        } => {
            let overrides = LinkOverrides {
                n,
                n_p,
                frames,
                seed,
                snr_grid_db,
                estimators,
                source,
                pattern_file,
                shift_per_frame,
                constellation,
            };
            let cfg = settings::link_config(config.as_deref(), &overrides)?;
            let rows = experiment_ber_ser(&cfg)?;
            let mut out = sink(output.as_deref())?;
            write_ber_ser_csv(&rows, &mut out)?;
            out.flush()?;
        }
        Command::Mse {
            config,
            n,
            n_p,
            sources,
            estimators,
            taps,
            snr_grid_db,
            trials,
            seed,
            pattern_file,
            output,
        } => {
            let overrides =
                MseOverrides { n, n_p, sources, estimators, taps, snr_grid_db, trials, seed, pattern_file };
            let mut rows = Vec::new();
            for exp in settings::mse_experiments(config.as_deref(), &overrides)? {
                rows.extend(experiment_mse_crb(&exp)?);
            }
            let mut out = sink(output.as_deref())?;
            write_mse_csv(&rows, &mut out)?;
            out.flush()?;
        }
        Command::Recovery { config, n, n_p, tap_grid, trials, seed, output } => {
            let overrides = RecoveryOverrides { n, n_p, tap_grid: tap_grid.map(|t| t.0), trials, seed };
            let exp = settings::recovery_experiment(config.as_deref(), &overrides)?;
            let rows = experiment_recovery(&exp)?;
            let mut out = sink(output.as_deref())?;
            write_recovery_csv(&rows, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().with_context(|| format!("{THREADS_ENV}={value} is not a count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<sparse_pilot::Error>() {
        Some(e) if e.is_infeasible() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match err.downcast_ref::<sparse_pilot::Error>() {
                Some(sparse_pilot::Error::ConfigInvalid(problems)) => {
                    eprintln!("error: invalid configuration");
                    for p in problems {
                        eprintln!("  - {p}");
                    }
                }
                _ => eprintln!("error: {err:#}"),
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
