use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levysel::cli::{self, CliError, Options, THREADS_ENV};

#[derive(Parser)]
#[command(name = "levysel", version, about = "Shrinkage model selection under Levy noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to $LEVYSEL_THREADS, then all cores.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Overrides every replicate count.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one observed path and its jump record.
    Simulate(Common),
    /// Fit the shrinkage estimator to a path CSV.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Path CSV with columns t,y.
        #[arg(long)]
        path: PathBuf,
    },
    /// Run the Monte Carlo risk study.
    Experiment(Common),
    /// Run the property checks.
    Check(Common),
}

fn options(c: &Common) -> Result<Options, CliError> {
    if let Some(t) = c.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot set up thread pool: {e}")))?;
    }
    Ok(Options {
        config: c.config.clone(),
        out: c.out.clone(),
        seed: c.seed,
        replicates: c.replicates,
        quiet: c.quiet,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => cli::cmd_simulate(&options(&c)?).map(drop),
        Command::Estimate { common, path } => cli::cmd_estimate(&options(&common)?, &path).map(drop),
        Command::Experiment(c) => cli::cmd_experiment(&options(&c)?).map(drop),
        Command::Check(c) => cli::cmd_check(&options(&c)?).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("levysel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
