use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use msras::config::ExperimentConfig;
use msras::runner::{self, RunOptions};
use msras::Failure;

#[derive(Parser)]
#[command(name = "msras", about = "Two-level spectral Schwarz experiments for convection-diffusion problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every point of the configured sweep and write reports.
    Run {
        config: PathBuf,
        /// Maximum number of worker threads.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory, overriding `out` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the system matrix, inner-product matrix and right-hand side in Matrix Market format.
        #[arg(long)]
        dump_system: bool,
    },
    /// Compute the local spectra only.
    Spectra {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the version.
    Version,
}

fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> Result<T, Failure> + Send) -> Result<T, Failure>
where
    T: Send,
{
    match workers {
        Some(0) => Err(Failure::Validation("--workers must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Validation(e.to_string()))?
            .install(f),
        None => f(),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Version => {
            println!("msras {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
        Command::Run { config, workers, out, dump_system } => {
            let cfg = ExperimentConfig::load(&config)?;
            let opts = RunOptions { out, dump_system };
            let bundle = with_workers(workers, || runner::run(&cfg, &opts))?;
            for r in &bundle.records {
                println!(
                    "run {}: #IT={} converged={} coarse={} ({:.4}%)",
                    r.point.index, r.iterations, r.converged, r.coarse_dim, r.coarse_percent
                );
            }
            bundle.status()
        }
        Command::Spectra { config, workers, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let opts = RunOptions { out, dump_system: false };
            with_workers(workers, || runner::spectra(&cfg, &opts)).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
