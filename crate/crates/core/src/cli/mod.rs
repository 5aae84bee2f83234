//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical failure. Errors are
//! written to standard error as one line of JSON. All outputs are written only after the
//! whole computation has succeeded.

pub mod config;
pub mod io;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::families::SurvivalDataset;
use config::AnalysisConfig;

pub use io::{ingest_csv, read_survival_csv, write_survival_csv};

#[derive(Debug, Parser)]
#[command(name = "survbma", version, about = "Bayesian model-averaged parametric survival analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Analysis configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Survival data CSV with header `time,event,group`; repeat for map-prior.
    #[arg(long)]
    pub data: Vec<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Log progress to standard error.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit each configured model separately, with maximum-likelihood comparators.
    Fit(CommonArgs),
    /// Model-averaged estimation of the treatment effect and survival curves.
    Estimate(CommonArgs),
    /// Model-averaged test for a treatment effect.
    Test(CommonArgs),
    /// Sequential monitoring of the inclusion Bayes factor.
    Sequential(CommonArgs),
    /// Bayes factor design analysis and threshold calibration.
    Bfda(CommonArgs),
    /// Meta-analytic predictive priors from historical datasets.
    MapPrior(CommonArgs),
    /// Simulate one trial dataset.
    Simulate(CommonArgs),
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let line = serde_json::json!({
                "error": "usage",
                "message": e.kind().to_string(),
                "usage": e.render().to_string(),
            });
            eprintln!("{line}");
            return 2;
        }
    };
    let (name, args) = match &cli.command {
        Command::Fit(a) => ("fit", a),
        Command::Estimate(a) => ("estimate", a),
        Command::Test(a) => ("test", a),
        Command::Sequential(a) => ("sequential", a),
        Command::Bfda(a) => ("bfda", a),
        Command::MapPrior(a) => ("map-prior", a),
        Command::Simulate(a) => ("simulate", a),
    };
    init_logging(args.verbose);
    let result = with_threads(args.threads, || dispatch(name, args));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

fn init_logging(verbose: bool) {
    let level = if verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn dispatch(name: &str, args: &CommonArgs) -> Result<()> {
    let cfg = AnalysisConfig::load(&args.config)?;
    let outputs = match name {
        "fit" => report::fit(&cfg, &single_dataset(args)?, args.seed)?,
        "estimate" => report::estimate(&cfg, &single_dataset(args)?, args.seed)?,
        "test" => report::test(&cfg, &single_dataset(args)?, args.seed)?,
        "sequential" => report::sequential(&cfg, &single_dataset(args)?, args.seed)?,
        "bfda" => report::bfda(&cfg, args.seed)?,
        "map-prior" => report::map_prior(&cfg, &datasets(args)?, args.seed)?,
        "simulate" => report::simulate(&cfg, args.seed)?,
        _ => unreachable!("subcommands are enumerated by the parser"),
    };
    emit(outputs, args.out.as_deref())
}

fn single_dataset(args: &CommonArgs) -> Result<SurvivalDataset> {
    match args.data.as_slice() {
        [p] => ingest_csv(p),
        [] => Err(Error::Config("this subcommand needs --data".into())),
        _ => Err(Error::Config("this subcommand takes exactly one --data file".into())),
    }
}

fn datasets(args: &CommonArgs) -> Result<Vec<SurvivalDataset>> {
    if args.data.is_empty() {
        return Err(Error::Config("map-prior needs at least one --data file".into()));
    }
    args.data.iter().map(|p| ingest_csv(p)).collect()
}

/// Main report plus side files, written only once everything is computed.
pub struct Outputs {
    pub main: Vec<u8>,
    pub side: Vec<(PathBuf, Vec<u8>)>,
}

fn emit(outputs: Outputs, out: Option<&Path>) -> Result<()> {
    for (path, bytes) in &outputs.side {
        io::write_atomic(path, bytes)?;
    }
    match out {
        Some(p) => io::write_atomic(p, &outputs.main),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&outputs.main)?;
            Ok(())
        }
    }
}
