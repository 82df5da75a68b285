use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sgtvar::runner::{self, RunConfig};
use sgtvar::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

/// Bayesian structural VARs with skewed generalized t shocks.
#[derive(Parser)]
#[command(name = "sgtvar", version)]
struct Cli {
    /// Size of the worker thread pool (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampler / simulation seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior and write draws, summary and labels.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Exit with status 3 when max R̂ exceeds 1.1.
        #[arg(long)]
        strict: bool,
    },
    /// Impulse-response bands from a draws file.
    Irf {
        #[command(flatten)]
        common: Common,
        /// Draws file; defaults to draws.csv in the output directory.
        #[arg(long)]
        draws: Option<PathBuf>,
    },
    /// Simulate data from the `[simulate]` section.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// R̂ table for an existing draws file.
    Diagnose {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 3 when max R̂ exceeds 1.1.
        #[arg(long)]
        strict: bool,
    },
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), Error> {
    let mut config = RunConfig::from_file(&common.config)?;
    if let Some(seed) = common.seed {
        config.sampler.seed = seed;
        if let Some(truth) = config.simulate.as_mut() {
            truth.seed = Some(seed);
        }
    }
    let out = common.out.clone().unwrap_or_else(|| config.output_dir());
    Ok((config, out))
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Estimate { common, strict } => {
            let (config, out) = load(&common)?;
            let result = runner::cmd_estimate(&config, &out)?;
            let s = &result.summary;
            println!("{} draws from {} chains written to {}", s.n_draws, s.n_chains, out.display());
            match s.max_rhat {
                Some(r) => println!("max R̂ = {r:.4}"),
                None => println!("max R̂ undefined"),
            }
            for (i, p) in s.prob_finite_variance.iter().enumerate() {
                println!("shock {}: P(alpha > 2) = {p:.3}", i + 1);
            }
            if let Some(w) = &s.warning {
                eprintln!("warning: {w}");
            }
            if let runner::LabelReport::Error { message, .. } = &result.labels {
                eprintln!("warning: {message}");
            }
            Ok(if strict && !s.converged { EXIT_NOT_CONVERGED } else { 0 })
        }
        Command::Irf { common, draws } => {
            let (config, out) = load(&common)?;
            let draws = draws.unwrap_or_else(|| out.join(runner::DRAWS_FILE));
            let bands = runner::cmd_irf(&config, &draws, &out)?;
            println!(
                "bands for {} variables, horizon {} written to {}",
                bands.n,
                bands.horizon,
                out.join(runner::BANDS_FILE).display()
            );
            Ok(0)
        }
        Command::Simulate { common } => {
            let (config, out) = load(&common)?;
            let (data, _) = runner::cmd_simulate(&config, &out)?;
            println!(
                "{} observations of {} variables written to {}",
                data.n_obs(),
                data.n_vars(),
                out.join(runner::SIM_DATA_FILE).display()
            );
            Ok(0)
        }
        Command::Diagnose { draws, out, strict } => {
            let out = out.unwrap_or_else(|| draws.parent().map(PathBuf::from).unwrap_or_default());
            let table = runner::cmd_diagnose(&draws, &out)?;
            let width = table.iter().map(|e| e.parameter.len()).max().unwrap_or(9).max(9);
            println!("{:<width$}  rhat", "parameter");
            for e in &table {
                match e.rhat.value() {
                    Some(v) => println!("{:<width$}  {v:.4}", e.parameter),
                    None => println!("{:<width$}  degenerate", e.parameter),
                }
            }
            let values: Vec<_> = table.iter().map(|e| e.rhat).collect();
            let converged = sgtvar::demc::max_rhat(&values).is_some_and(|r| r <= runner::RHAT_THRESHOLD);
            Ok(if strict && !converged { EXIT_NOT_CONVERGED } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_FAILURE })
        }
    }
}
