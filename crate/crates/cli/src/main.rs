//! Command-line front end: train, verify, search and landscape.
//!
//! Exit codes: 0 success, 2 configuration error, 3 training divergence,
//! 4 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smoothie_core::harness::{self, RunConfig, SearchSpec};
use smoothie_core::verify::default_suite;
use smoothie_core::{seeded_rng, BumpsBandit, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "smoothie", version, about = "Gaussian-smoothed actor-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train every configured seed and write per-seed logs plus summary.csv.
    Train(RunArgs),
    /// Run the numerical oracle suite.
    Verify {
        /// Seed for the randomly drawn check points.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for verify.csv; the report is always printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random hyperparameter search over the standard table.
    Search {
        #[command(flatten)]
        run: RunArgs,
        /// Number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Run trials on all cores. Results match the sequential order.
        #[arg(long)]
        parallel: bool,
    },
    /// Write the bandit reward and its Gaussian smoothing as CSV.
    Landscape {
        /// Smoothing standard deviation.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 121)]
        points: usize,
        /// Directory for landscape.csv; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// `key = value` run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Divergence(_) => EXIT_DIVERGED,
            Error::Oracle(_) => EXIT_VERIFY,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

fn load(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = harness::load_config(&args.config).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: format!("{}: {e}", args.config.display()),
    })?;
    if let Some(seeds) = &args.seed {
        if seeds.is_empty() {
            return Err(Failure { code: EXIT_CONFIG, message: "--seed needs at least one value".into() });
        }
        cfg.seeds = seeds.clone();
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn train(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load(args)?;
    let outcome = harness::run(&cfg)?;
    println!("{}", harness::SUMMARY_HEADER);
    for row in &outcome.rows {
        println!("{}", row.csv_line());
    }
    if let Some((seed, e)) = outcome.failures.first() {
        return Err(Failure {
            code: EXIT_DIVERGED,
            message: format!("{} of {} seeds failed; seed {seed}: {e}", outcome.failures.len(), cfg.seeds.len()),
        });
    }
    println!("wrote {}", cfg.out_dir.display());
    Ok(())
}

fn verify(seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let reports = default_suite(seed)?;
    let mut csv = String::from("name,max_abs,max_rel,tol,pass\n");
    for r in &reports {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    print!("{csv}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(Error::from)?;
        fs::write(dir.join("verify.csv"), &csv).map_err(Error::from)?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_VERIFY, message: format!("failed checks: {}", failed.join(", ")) })
    }
}

fn search(run: &RunArgs, trials: Option<usize>, parallel: bool) -> Result<(), Failure> {
    let cfg = load(run)?;
    let mut spec = SearchSpec { parallel, ..SearchSpec::default() };
    if let Some(n) = trials {
        spec.trials = n;
    }
    let mut rng = seeded_rng(cfg.seeds[0]);
    let results = harness::random_search(&spec, &cfg, &mut rng)?;
    let diverged = results.iter().filter(|r| r.error.is_some()).count();
    if let Some(best) = results.first() {
        println!("best trial {} score {:?}", best.trial, best.score);
    }
    println!("{} trials, {diverged} diverged; wrote {}", results.len(), cfg.out_dir.join("search.csv").display());
    Ok(())
}

fn landscape(sigma: f64, lo: f64, hi: f64, points: usize, out: Option<&Path>) -> Result<(), Failure> {
    let csv = harness::landscape_csv(&BumpsBandit::default(), sigma, lo, hi, points)?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(Error::from)?;
            fs::write(dir.join("landscape.csv"), csv).map_err(Error::from)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => train(args),
        Command::Verify { seed, out } => verify(*seed, out.as_deref()),
        Command::Search { run, trials, parallel } => search(run, *trials, *parallel),
        Command::Landscape { sigma, lo, hi, points, out } => landscape(*sigma, *lo, *hi, *points, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
