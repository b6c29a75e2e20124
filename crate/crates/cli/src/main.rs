//! `vcbart`: simulate data, fit sparse varying-coefficient tree ensembles
//! and summarize the posterior.

mod config;
mod experiment;
mod fit;
mod simulate;
mod summarize;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "vcbart", version, about = "Sparse varying-coefficient BART")]
struct Cli {
    /// Worker threads for chains and replications [default: all cores]
    #[arg(long, global = true, env = "VCBART_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic train/test data with the true coefficient functions
    Simulate(simulate::SimulateArgs),
    /// Run the Gibbs sampler and write a run directory
    Fit(fit::FitArgs),
    /// Posterior curves, intervals, screening and accuracy of a run
    Summarize(summarize::SummarizeArgs),
    /// Replicated simulate, fit and summarize with aggregated metrics
    Experiment(experiment::ExperimentArgs),
}

fn dispatch(cli: Cli) -> vcbart::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| vcbart::Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate(a) => {
            let path = a.config.clone();
            simulate::run(config::apply_config(a, path.as_deref())?)
        }
        Command::Fit(a) => {
            let path = a.config.clone();
            fit::run(config::apply_config(a, path.as_deref())?)
        }
        Command::Summarize(a) => {
            let path = a.config.clone();
            summarize::run(config::apply_config(a, path.as_deref())?)
        }
        Command::Experiment(a) => {
            let path = a.config.clone();
            experiment::run(config::apply_config(a, path.as_deref())?)
        }
    }
}

fn main() {
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(config::exit_code(&e));
    }
}
